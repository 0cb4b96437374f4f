#ifndef SHRINKM_VERSION_HPP
#define SHRINKM_VERSION_HPP

namespace shrinkm {
inline constexpr const char* kVersion = "0.1.0";
}

#endif  // SHRINKM_VERSION_HPP
