#ifndef SHRINKM_SHRINKM_HPP
#define SHRINKM_SHRINKM_HPP

#include "shrinkm/csv.hpp"
#include "shrinkm/elliptical.hpp"
#include "shrinkm/errors.hpp"
#include "shrinkm/mestimator.hpp"
#include "shrinkm/scatter.hpp"
#include "shrinkm/shrinkage.hpp"
#include "shrinkm/simharness.hpp"
#include "shrinkm/specialfn.hpp"
#include "shrinkm/version.hpp"
#include "shrinkm/weights.hpp"

#endif  // SHRINKM_SHRINKM_HPP
