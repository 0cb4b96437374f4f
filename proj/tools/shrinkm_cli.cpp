// shrinkm: shrinkage M-estimation of scatter from the command line.
//
//   shrinkm estimate --input data.csv --method huber
//   shrinkm simulate --family t --nu 5 --trials 2000 --out fig2.csv
//   shrinkm --config study.toml simulate
//   shrinkm oracle   --p 5 --weight gaussian --n 50 --trials 20000
//   shrinkm selftest

#include <cstdint>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "shrinkm/shrinkm.hpp"

namespace {

using json = nlohmann::json;
using namespace shrinkm;

constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;
constexpr int kExitData = 3;

const std::map<std::string, HuberTail> kTailNames{{"lower", HuberTail::Lower}, {"upper", HuberTail::Upper}};
const std::map<std::string, Family> kFamilyNames{{"mvn", Family::MVN}, {"t", Family::TDist}};

std::string tail_name(HuberTail t) { return t == HuberTail::Lower ? "lower" : "upper"; }

json matrix_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

template <class T>
json optional_json(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

// ---- estimate -------------------------------------------------------------

struct EstimateArgs {
  std::string input;
  bool skip_header = false;
  std::string method = "huber";
  double huber_q = 0.7;
  HuberTail huber_tail = HuberTail::Upper;
  double nu = 0.0;
  std::string output;
  bool no_matrix = false;
};

int run_estimate(const EstimateArgs& a) {
  const Method method = parse_method(a.method);
  std::ifstream in(a.input);
  if (!in) throw std::runtime_error("cannot open input file '" + a.input + "'");
  DataSample data(csv::read_matrix(in, a.skip_header));
  data.require_n_greater_than_p("estimate");

  EstimateOptions opts;
  opts.huber_q = a.huber_q;
  opts.huber_tail = a.huber_tail;
  if (a.nu > 0.0) opts.t_dof = a.nu;
  const ShrinkageEstimate est = estimate(data, method, opts);

  json out;
  out["method"] = std::string(method_name(est.method));
  out["n"] = data.n();
  out["p"] = data.p();
  out["beta"] = est.beta;
  const auto& d = est.diagnostics;
  out["diagnostics"] = {{"gamma_hat", d.gamma_hat},
                        {"psi1_hat", optional_json(d.psi1_hat)},
                        {"kappa_hat", optional_json(d.kappa_hat)},
                        {"nu_hat", optional_json(d.nu_hat)},
                        {"iterations", d.solve_report.iterations},
                        {"final_relative_change", d.solve_report.final_relative_change},
                        {"converged", d.solve_report.converged}};
  if (method == Method::Huber) out["huber"] = {{"q", a.huber_q}, {"tail", tail_name(a.huber_tail)}};
  if (!a.no_matrix) out["matrix"] = matrix_json(est.matrix.matrix());

  if (a.output.empty()) {
    std::cout << out.dump(2) << '\n';
  } else {
    std::ofstream f(a.output);
    if (!f) throw std::runtime_error("cannot write '" + a.output + "'");
    f << out.dump(2) << '\n';
    std::cout << "beta: " << est.beta << '\n';
  }
  return 0;
}

// ---- simulate -------------------------------------------------------------

struct SimulateArgs {
  ExperimentConfig cfg;
  std::vector<std::string> estimators{"gauss", "lw", "huber", "tmle"};
  std::string out = "results.csv";
  std::string manifest;
};

int run_simulate(SimulateArgs a) {
  a.cfg.estimators.clear();
  for (const auto& e : a.estimators) a.cfg.estimators.push_back(parse_method(e));
  a.cfg.validate();
  const ExperimentResult result = run_experiment(a.cfg);

  std::ofstream csv_out(a.out);
  if (!csv_out) throw std::runtime_error("cannot write '" + a.out + "'");
  write_result_csv(csv_out, result);

  const std::string manifest_path = a.manifest.empty() ? a.out + ".manifest.json" : a.manifest;
  json sigma;
  for (const auto& [m, s] : result.sigma) sigma[std::string(method_name(m))] = s;
  json manifest = {
      {"library", "shrinkm"},
      {"version", kVersion},
      {"config",
       {{"p", a.cfg.p},
        {"rho", a.cfg.rho},
        {"eta", a.cfg.eta},
        {"family", a.cfg.family == Family::MVN ? "mvn" : "t"},
        {"nu", a.cfg.family == Family::TDist ? json(a.cfg.nu) : json(nullptr)},
        {"n_grid", a.cfg.n_grid},
        {"trials", a.cfg.trials},
        {"estimators", a.estimators},
        {"huber_q", a.cfg.huber_q},
        {"huber_tail", tail_name(a.cfg.huber_tail)},
        {"tol", a.cfg.solver.tol},
        {"max_iter", a.cfg.solver.max_iter}}},
      {"seed", a.cfg.root_seed},
      {"sigma", sigma},
      {"conventions",
       {{"t_parametrization", "covariance (scatter = (nu-2)/nu * covariance)"},
        {"nmse_target", "sigma * covariance per estimator"},
        {"tmle_target_nu", "population nu (gaussian limit for mvn)"}}},
      {"results_csv", a.out}};
  std::ofstream m(manifest_path);
  if (!m) throw std::runtime_error("cannot write '" + manifest_path + "'");
  m << manifest.dump(2) << '\n';

  write_result_csv(std::cout, result);
  return 0;
}

// ---- oracle ---------------------------------------------------------------

struct OracleArgs {
  int p = 5;
  double rho = 0.6;
  double eta = 1.0;
  Family family = Family::MVN;
  double nu = 5.0;
  std::string weight = "gaussian";
  double huber_q = 0.7;
  HuberTail huber_tail = HuberTail::Upper;
  int n = 50;
  int trials = 20000;
  double step = 0.02;
  std::uint64_t seed = 1;
  std::string out;
};

WeightSpec make_weight(const std::string& name, int p, double huber_q, HuberTail tail, double nu) {
  if (name == "gaussian") return WeightSpec::gaussian(p);
  if (name == "huber") return WeightSpec::huber(p, huber_q, tail);
  if (name == "t") return WeightSpec::t_mle(p, nu);
  throw std::invalid_argument("unknown weight '" + name + "' (expected one of: gaussian, huber, t)");
}

int run_oracle(const OracleArgs& a) {
  ScatterMatrix cov = ar1_scatter(a.p, a.rho, a.eta);
  const EllipticalModel model = a.family == Family::MVN ? EllipticalModel::mvn(cov) : EllipticalModel::t(a.nu, cov);
  const WeightSpec w = make_weight(a.weight, a.p, a.huber_q, a.huber_tail, a.nu);
  const OracleBetaResult r = oracle_beta_grid(model, w, a.n, a.trials, beta_grid(a.step), a.seed);
  const double closed = beta_app(r.oracle.gamma, r.oracle.psi1, a.n, a.p);

  std::cout << std::setprecision(8) << "weight: " << w.name() << "\nmodel: " << model.name() << "\nsigma: "
            << r.oracle.sigma << "\ngamma: " << r.oracle.gamma << "\npsi1: " << r.oracle.psi1
            << "\nbeta_grid_min: " << r.beta_star << "\nbeta_app: " << closed << '\n';
  if (!a.out.empty()) {
    std::ofstream f(a.out);
    if (!f) throw std::runtime_error("cannot write '" + a.out + "'");
    f << "beta,mse,mse_se\n" << std::setprecision(10);
    for (std::size_t k = 0; k < r.grid.size(); ++k) f << r.grid[k] << ',' << r.mse[k] << ',' << r.mse_se[k] << '\n';
  }
  return 0;
}

// ---- selftest -------------------------------------------------------------

int run_selftest(int trials, std::uint64_t seed) {
  const int p = 5;
  const int n = 50;
  const double step = 0.02;
  const EllipticalModel model = EllipticalModel::mvn(ar1_scatter(p, 0.6, 1.0));
  bool ok = true;
  auto report = [&](const std::string& name, bool pass, const std::string& detail) {
    std::cout << (pass ? "PASS " : "FAIL ") << name << "  " << detail << '\n';
    ok = ok && pass;
  };

  for (const WeightSpec& w : {WeightSpec::gaussian(p), WeightSpec::huber(p, 0.7, HuberTail::Upper)}) {
    for (const auto& c : c_moment_checks(model, w, n, trials, seed)) {
      std::ostringstream s;
      s << std::setprecision(6) << "mc=" << c.mc_mean << " se=" << c.mc_se << " theory=" << c.theory << " z=" << c.z();
      report(w.name() + " " + c.name, c.within(3.0), s.str());
    }
    const OracleBetaResult r = oracle_beta_grid(model, w, n, trials, beta_grid(step), seed + 1);
    const double closed = beta_app(r.oracle.gamma, r.oracle.psi1, n, p);
    std::ostringstream s;
    s << std::setprecision(6) << "grid=" << r.beta_star << " closed=" << closed;
    report(w.name() + " oracle beta", std::abs(r.beta_star - closed) <= step + 1e-12, s.str());
  }
  return ok ? 0 : kExitFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Shrinkage M-estimators of scatter with automatic MMSE shrinkage"};
  app.require_subcommand(1);
  app.set_version_flag("--version", shrinkm::kVersion);
  app.set_config("--config", "", "TOML/INI file; options go in a section named after the subcommand");
  app.allow_config_extras(CLI::config_extras_mode::error);

  EstimateArgs ea;
  auto* est = app.add_subcommand("estimate", "Estimate a shrinkage scatter matrix from a CSV data file");
  est->add_option("input,--input", ea.input, "CSV file, one observation per row")->required();
  est->add_flag("--skip-header", ea.skip_header, "Ignore the first line of the CSV");
  est->add_option("--method", ea.method, "gauss | lw | huber | tmle")->capture_default_str();
  est->add_option("--huber-q", ea.huber_q, "Huber tuning probability")->capture_default_str();
  est->add_option("--huber-tail", ea.huber_tail, "Quantile tail q refers to (lower | upper)")
      ->transform(CLI::CheckedTransformer(kTailNames, CLI::ignore_case));
  est->add_option("--nu", ea.nu, "Fixed t dof for tmle (default: estimated)");
  est->add_option("--output", ea.output, "Write the JSON result here instead of stdout");
  est->add_flag("--no-matrix", ea.no_matrix, "Omit the estimated matrix from the output");

  SimulateArgs sa;
  auto* sim = app.add_subcommand("simulate", "Monte-Carlo NMSE / beta study on AR(1) elliptical data");
  sim->add_option("--p", sa.cfg.p, "Dimension")->capture_default_str();
  sim->add_option("--rho", sa.cfg.rho, "AR(1) correlation")->capture_default_str();
  sim->add_option("--eta", sa.cfg.eta, "Scale tr(cov)/p")->capture_default_str();
  sim->add_option("--family", sa.cfg.family, "mvn | t")->transform(CLI::CheckedTransformer(kFamilyNames, CLI::ignore_case));
  sim->add_option("--nu", sa.cfg.nu, "t degrees of freedom")->capture_default_str();
  sim->add_option("--n-grid", sa.cfg.n_grid, "Comma-separated sample sizes")->delimiter(',');
  sim->add_option("--trials", sa.cfg.trials, "Monte-Carlo trials per n")->capture_default_str();
  sim->add_option("--estimators", sa.estimators, "Comma-separated: gauss,lw,huber,tmle")->delimiter(',');
  sim->add_option("--huber-q", sa.cfg.huber_q, "Huber tuning probability")->capture_default_str();
  sim->add_option("--huber-tail", sa.cfg.huber_tail, "lower | upper")
      ->transform(CLI::CheckedTransformer(kTailNames, CLI::ignore_case));
  sim->add_option("--seed", sa.cfg.root_seed, "Root seed")->capture_default_str();
  sim->add_option("--threads", sa.cfg.threads, "Worker threads (0 = hardware)");
  sim->add_option("--out", sa.out, "Results CSV path")->capture_default_str();
  sim->add_option("--manifest", sa.manifest, "Manifest path (default: <out>.manifest.json)");

  OracleArgs oa;
  auto* orc = app.add_subcommand("oracle", "Brute-force optimal beta of the 1-step proxy on a grid");
  orc->add_option("--p", oa.p)->capture_default_str();
  orc->add_option("--rho", oa.rho)->capture_default_str();
  orc->add_option("--eta", oa.eta)->capture_default_str();
  orc->add_option("--family", oa.family, "mvn | t")->transform(CLI::CheckedTransformer(kFamilyNames, CLI::ignore_case));
  orc->add_option("--nu", oa.nu, "t dof (model and t weight)")->capture_default_str();
  orc->add_option("--weight", oa.weight, "gaussian | huber | t")->capture_default_str();
  orc->add_option("--huber-q", oa.huber_q)->capture_default_str();
  orc->add_option("--huber-tail", oa.huber_tail)->transform(CLI::CheckedTransformer(kTailNames, CLI::ignore_case));
  orc->add_option("--n", oa.n)->capture_default_str();
  orc->add_option("--trials", oa.trials)->capture_default_str();
  orc->add_option("--step", oa.step, "Grid step on [0, 1]")->capture_default_str();
  orc->add_option("--seed", oa.seed)->capture_default_str();
  orc->add_option("--out", oa.out, "Write the MSE curve as CSV");

  int st_trials = 20000;
  std::uint64_t st_seed = 7;
  auto* st = app.add_subcommand("selftest", "Monte-Carlo checks of the moment identities and optimal beta");
  st->add_option("--trials", st_trials)->capture_default_str();
  st->add_option("--seed", st_seed)->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*est) return run_estimate(ea);
    if (*sim) return run_simulate(sa);
    if (*orc) return run_oracle(oa);
    if (*st) return run_selftest(st_trials, st_seed);
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  } catch (const DomainError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitFailure;
}
