// curstat: nonparametric inference for current status data.
//
// Subcommands: ci (confidence bands from a time/status CSV), bandwidth
// (pointwise bandwidth constants), simulate (coverage and regression
// experiments with known truth), regress (simple score estimator with a
// bootstrap interval).

#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "curstat/curstat.hpp"

namespace {

using namespace curstat;

constexpr int kExitOk = 0;
constexpr int kExitInput = 2;
constexpr int kExitEstimator = 3;

std::uint64_t resolve_seed(const std::optional<std::uint64_t>& flag) {
  if (flag) return *flag;
  if (const char* env = std::getenv("CURSTAT_SEED")) {
    try {
      return std::stoull(env);
    } catch (const std::exception&) {
      throw InvalidDatum("CURSTAT_SEED is not an integer");
    }
  }
  return 1;
}

std::vector<double> parse_grid(const std::string& spec) {
  // "lo:step:hi" or a comma-separated list
  std::vector<double> points;
  if (spec.find(':') != std::string::npos) {
    double lo, step, hi;
    char c1, c2;
    std::istringstream ss(spec);
    if (!(ss >> lo >> c1 >> step >> c2 >> hi) || c1 != ':' || c2 != ':' || step <= 0.0)
      throw InvalidDatum("bad grid spec '" + spec + "' (want lo:step:hi)");
    for (double t = lo; t <= hi + 1e-12 * step; t += step) points.push_back(t);
  } else {
    std::istringstream ss(spec);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      if (!tok.empty()) points.push_back(std::stod(tok));
    }
  }
  if (points.empty()) throw InvalidDatum("empty grid");
  for (std::size_t i = 1; i < points.size(); ++i) {
    if (points[i] <= points[i - 1]) throw InvalidDatum("grid must be strictly increasing");
  }
  return points;
}

std::vector<double> parse_list(const std::string& spec) {
  std::vector<double> out;
  std::istringstream ss(spec);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (!tok.empty()) out.push_back(std::stod(tok));
  }
  return out;
}

void write_output(const std::string& path, const std::string& content) {
  if (path.empty() || path == "-") {
    std::cout << content;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidDatum("cannot open output file '" + path + "'");
  out << content;
}

CurrentStatusSample load_sample(const std::string& path, std::optional<double> support_lo,
                                std::optional<double> support_hi) {
  std::ifstream in(path);
  if (!in) throw InvalidDatum("cannot open input file '" + path + "'");
  auto sample = ingest_grouped(read_current_status_csv(in));
  if (support_lo && support_hi) {
    sample.support_hint = Interval{*support_lo, *support_hi};
  } else {
    sample.support_hint = Interval{0.0, sample.times.back()};
  }
  return sample;
}

// shared bandwidth/method flags for ci-like commands
struct CiFlags {
  std::string input, output;
  std::string method = "studentized";
  std::string bias = "none";
  std::string grid;
  double alpha = 0.05;
  int B = 1000;
  std::optional<double> h;
  bool auto_bandwidth = false;
  std::string c_grid;
  int m = 0;
  int B_sub = 1000;
  double exponent = 0.2;
  double factor = 1.0;
  double c0 = 0.0;
  bool no_boundary = false;
  std::optional<double> support_lo, support_hi;
  std::optional<std::uint64_t> seed;
  int workers = 0;
};

void add_bandwidth_flags(CLI::App* cmd, CiFlags& f) {
  cmd->add_option("--bandwidth", f.h, "fixed SMLE bandwidth h");
  cmd->add_flag("--auto-bandwidth", f.auto_bandwidth,
                "select c per grid point by subsample MSE; h = factor*c*n^-exponent");
  cmd->add_option("--c-grid", f.c_grid, "comma-separated c grid for selection");
  cmd->add_option("--m", f.m, "subsample size (default: n^0.6 rule with common-n pairings)");
  cmd->add_option("--b-sub", f.B_sub, "subsample replicates for selection")
      ->capture_default_str();
  cmd->add_option("--exponent", f.exponent, "bandwidth exponent (0.2 or 0.25)")
      ->capture_default_str();
  cmd->add_option("--factor", f.factor, "bandwidth factor (e.g. 1/3 undersmoothing)")
      ->capture_default_str();
  cmd->add_option("--c0", f.c0, "pilot constant c0 (default: support length)");
  cmd->add_flag("--no-boundary", f.no_boundary, "disable boundary correction");
  cmd->add_option("--support-lo", f.support_lo, "support lower end (default 0)");
  cmd->add_option("--support-hi", f.support_hi, "support upper end (default max time)");
  cmd->add_option("--seed", f.seed, "RNG seed (fallback: CURSTAT_SEED, then 1)");
  cmd->add_option("--workers", f.workers, "worker threads (0 = hardware)");
}

BandwidthRule make_rule(const CiFlags& f) {
  if (f.auto_bandwidth) {
    BandwidthRule rule = BandwidthRule::autoselect();
    if (!f.c_grid.empty()) rule.c_grid = parse_list(f.c_grid);
    rule.m = f.m;
    rule.B_sub = f.B_sub;
    rule.exponent = f.exponent;
    rule.factor = f.factor;
    rule.c0 = f.c0;
    return rule;
  }
  if (!f.h) throw InvalidDatum("either --bandwidth or --auto-bandwidth is required");
  return BandwidthRule::fixed_h(*f.h);
}

CiMethod parse_method(const std::string& name) {
  if (name == "studentized") return CiMethod::studentized;
  if (name == "wald1") return CiMethod::wald1;
  if (name == "wald2") return CiMethod::wald2;
  if (name == "wald3") return CiMethod::wald3;
  if (name == "senxu") return CiMethod::senxu;
  if (name == "smooth_smle") return CiMethod::smooth_smle;
  throw InvalidDatum("unknown method '" + name + "'");
}

BiasRule parse_bias(const std::string& name, bool allow_true) {
  if (name == "none") return BiasRule::none;
  if (name == "direct") return BiasRule::direct;
  if (name == "subsample") return BiasRule::subsample;
  if (name == "true" && allow_true) return BiasRule::true_beta;
  throw InvalidDatum("unknown bias rule '" + name + "'");
}

std::vector<std::pair<std::string, std::string>> common_config(const CiFlags& f,
                                                               std::uint64_t seed) {
  std::vector<std::pair<std::string, std::string>> kv;
  kv.emplace_back("input", f.input);
  kv.emplace_back("method", f.method);
  kv.emplace_back("bias", f.bias);
  kv.emplace_back("alpha", format_number(f.alpha));
  kv.emplace_back("B", std::to_string(f.B));
  if (f.auto_bandwidth) {
    kv.emplace_back("bandwidth", "auto");
    kv.emplace_back("exponent", format_number(f.exponent));
    kv.emplace_back("factor", format_number(f.factor));
    kv.emplace_back("B_sub", std::to_string(f.B_sub));
    if (f.m > 0) kv.emplace_back("m", std::to_string(f.m));
    if (!f.c_grid.empty()) kv.emplace_back("c_grid", f.c_grid);
    if (f.c0 > 0.0) kv.emplace_back("c0", format_number(f.c0));
  } else if (f.h) {
    kv.emplace_back("bandwidth", format_number(*f.h));
  }
  kv.emplace_back("boundary", f.no_boundary ? "off" : "on");
  kv.emplace_back("seed", std::to_string(seed));
  return kv;
}

int cmd_ci(const CiFlags& f) {
  const std::uint64_t seed = resolve_seed(f.seed);
  auto sample = load_sample(f.input, f.support_lo, f.support_hi);

  CiRequest req;
  if (f.grid.empty()) {
    const Interval s = sample.support();
    for (int i = 1; i <= 50; ++i)
      req.grid.points.push_back(s.lo + s.length() * i / 51.0);
  } else {
    req.grid.points = parse_grid(f.grid);
  }
  req.alpha = f.alpha;
  req.B = f.B;
  req.bandwidth = make_rule(f);
  req.method = parse_method(f.method);
  req.boundary = !f.no_boundary;
  req.workers = f.workers;

  const RngSpec rng{seed};
  const BiasRule bias_rule = parse_bias(f.bias, false);

  ConfidenceBand band;
  switch (req.method) {
    case CiMethod::studentized: {
      const auto rb = detail::resolve_bandwidths(sample, req, rng.derived(1));
      CiRequest resolved = req;
      resolved.bandwidth = BandwidthRule::per_point(rb.h);
      if (bias_rule == BiasRule::none) {
        band = studentized_ci(sample, resolved, rng);
      } else {
        const auto bias = estimate_bias_vector(sample, req.grid.points, rb.c, req.bandwidth,
                                               bias_rule, rng.derived(3), req.boundary,
                                               req.workers);
        band = bias_corrected_ci(sample, resolved, rng, bias);
      }
      break;
    }
    case CiMethod::wald1:
    case CiMethod::wald2:
    case CiMethod::wald3: {
      const int k = req.method == CiMethod::wald1 ? 1 : req.method == CiMethod::wald2 ? 2 : 3;
      const auto rb = detail::resolve_bandwidths(sample, req, rng.derived(1));
      CiRequest resolved = req;
      resolved.bandwidth = BandwidthRule::per_point(rb.h);
      std::vector<double> bias;
      if (bias_rule != BiasRule::none)
        bias = estimate_bias_vector(sample, req.grid.points, rb.c, req.bandwidth, bias_rule,
                                    rng.derived(3), req.boundary, req.workers);
      band = wald_ci(sample, resolved, k, bias, rng);
      break;
    }
    case CiMethod::senxu:
      band = senxu_ci(sample, req, rng);
      break;
    case CiMethod::smooth_smle:
      band = smooth_smle_ci(sample, req, rng);
      break;
  }

  std::string out = config_header("ci", common_config(f, seed));
  out += "t,estimate,lower,upper,bandwidth,discarded\n";
  for (const auto& row : band.rows) {
    out += format_number(row.t) + "," + format_number(row.estimate) + "," +
           format_number(row.lower) + "," + format_number(row.upper) + "," +
           format_number(row.bandwidth) + "," + std::to_string(row.discarded) + "\n";
  }
  write_output(f.output, out);
  return kExitOk;
}

int cmd_bandwidth(const CiFlags& f) {
  const std::uint64_t seed = resolve_seed(f.seed);
  auto sample = load_sample(f.input, f.support_lo, f.support_hi);
  if (f.grid.empty()) throw InvalidDatum("--grid is required");
  const auto grid = parse_grid(f.grid);
  const auto c_grid =
      f.c_grid.empty() ? default_c_grid(sample.support()) : parse_list(f.c_grid);
  const int m = f.m > 0 ? f.m : default_subsample_size(sample.n);
  if (m >= sample.n) throw InvalidSubsample("subsample size m must be below n");
  const double c0 = f.c0 > 0.0 ? f.c0 : sample.support().length();
  const RngSpec rng{seed};

  std::string out = config_header("bandwidth", {{"input", f.input},
                                                {"m", std::to_string(m)},
                                                {"B_sub", std::to_string(f.B_sub)},
                                                {"c0", format_number(c0)},
                                                {"seed", std::to_string(seed)}});
  out += "t,c_opt,flag\n";
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const auto sel = select_bandwidth(sample, grid[i], c_grid, m, f.B_sub, c0,
                                      rng.derived(1).derived(i), false, !f.no_boundary,
                                      f.workers);
    out += format_number(grid[i]) + "," + format_number(sel.c_opt) + "," +
           (sel.flagged ? "1" : "0") + "\n";
  }
  write_output(f.output, out);
  return kExitOk;
}

struct SimulateFlags {
  CiFlags ci;
  std::string model = "uniform2";
  std::int64_t n = 1000;
  int N = 500;
  double search_lo = -1.0;
  double search_hi = 2.0;
  bool long_run = false;
};

int cmd_simulate(const SimulateFlags& f) {
  const std::uint64_t seed = resolve_seed(f.ci.seed);
  const TruthModel model = make_model(f.model);

  if (model.is_regression()) {
    RegressionExperimentConfig cfg;
    cfg.model = model.name;
    cfg.n = f.n;
    cfg.N = f.long_run ? 1000 : f.N;
    cfg.B = f.long_run ? 1000 : f.ci.B;
    cfg.search_lo = f.search_lo;
    cfg.search_hi = f.search_hi;
    cfg.alpha = f.ci.alpha;
    cfg.seed = seed;
    cfg.workers = f.ci.workers;
    auto rep = run_regression_experiment(cfg);
    write_output(f.ci.output, rep.to_csv());
    return kExitOk;
  }

  ExperimentConfig cfg;
  cfg.model = model.name;
  cfg.n = f.n;
  cfg.N = f.long_run ? 5000 : f.N;
  cfg.B = f.long_run ? 1000 : f.ci.B;
  cfg.grid.points = f.ci.grid.empty() ? parse_grid("0.1:0.1:1.9") : parse_grid(f.ci.grid);
  cfg.method = parse_method(f.ci.method);
  cfg.bandwidth = make_rule(f.ci);
  cfg.bias_rule = parse_bias(f.ci.bias, true);
  cfg.alpha = f.ci.alpha;
  cfg.seed = seed;
  cfg.workers = f.ci.workers;
  auto rep = run_coverage_experiment(cfg);
  write_output(f.ci.output, rep.to_csv());
  return kExitOk;
}

struct RegressFlags {
  std::string input, output;
  double search_lo = -2.0;
  double search_hi = 2.0;
  int grid_size = 401;
  int B = 1000;
  double alpha = 0.05;
  double eps = 0.001;
  std::optional<std::uint64_t> seed;
  int workers = 0;
};

int cmd_regress(const RegressFlags& f) {
  const std::uint64_t seed = resolve_seed(f.seed);
  std::ifstream in(f.input);
  if (!in) throw InvalidDatum("cannot open input file '" + f.input + "'");
  auto rows = read_regression_csv(in);
  auto sample = make_regression_sample(std::move(rows.times), std::move(rows.covariates),
                                       std::move(rows.statuses), f.eps);
  const RngSpec rng{seed};
  auto ci = bootstrap_sse_ci(sample, f.search_lo, f.search_hi, f.B, f.alpha, rng,
                             f.workers, f.grid_size);

  std::string out = config_header(
      "regress", {{"input", f.input},
                  {"search", format_number(f.search_lo) + ":" + format_number(f.search_hi)},
                  {"grid_size", std::to_string(f.grid_size)},
                  {"B", std::to_string(f.B)},
                  {"alpha", format_number(f.alpha)},
                  {"eps", format_number(f.eps)},
                  {"seed", std::to_string(seed)}});
  out += "beta_hat,lower,upper,no_crossing_count\n";
  out += format_number(ci.beta_hat) + "," + format_number(ci.lower) + "," +
         format_number(ci.upper) + "," + std::to_string(ci.no_crossing_count) + "\n";
  write_output(f.output, out);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"nonparametric inference for current status data"};
  app.require_subcommand(1);

  CiFlags ci_flags;
  auto* ci = app.add_subcommand("ci", "confidence band for the event-time distribution");
  ci->add_option("--input", ci_flags.input, "CSV with time,status[,count]")->required();
  ci->add_option("--output", ci_flags.output, "output CSV (default stdout)");
  ci->add_option("--method", ci_flags.method,
                 "studentized|wald1|wald2|wald3|senxu|smooth_smle")
      ->capture_default_str();
  ci->add_option("--bias", ci_flags.bias, "none|direct|subsample")->capture_default_str();
  ci->add_option("--grid", ci_flags.grid, "lo:step:hi or comma list (default: 50 points)");
  ci->add_option("--alpha", ci_flags.alpha, "two-sided level")->capture_default_str();
  ci->add_option("--B", ci_flags.B, "bootstrap replicates")->capture_default_str();
  add_bandwidth_flags(ci, ci_flags);

  CiFlags bw_flags;
  auto* bw = app.add_subcommand("bandwidth", "pointwise bandwidth constants c_opt");
  bw->add_option("--input", bw_flags.input, "CSV with time,status[,count]")->required();
  bw->add_option("--output", bw_flags.output, "output CSV (default stdout)");
  bw->add_option("--grid", bw_flags.grid, "lo:step:hi or comma list")->required();
  add_bandwidth_flags(bw, bw_flags);

  SimulateFlags sim_flags;
  auto* sim = app.add_subcommand("simulate", "coverage / regression experiment with known truth");
  sim->add_option("--model", sim_flags.model, "uniform2|exp_trunc2|reg_model1|reg_model2")
      ->capture_default_str();
  sim->add_option("--n", sim_flags.n, "sample size per run")->capture_default_str();
  sim->add_option("--N", sim_flags.N, "number of simulation runs")->capture_default_str();
  sim->add_option("--output", sim_flags.ci.output, "output CSV (default stdout)");
  sim->add_option("--method", sim_flags.ci.method, "CI method (distribution models)")
      ->capture_default_str();
  sim->add_option("--bias", sim_flags.ci.bias, "none|true|direct|subsample")
      ->capture_default_str();
  sim->add_option("--grid", sim_flags.ci.grid, "evaluation grid (default 0.1:0.1:1.9)");
  sim->add_option("--alpha", sim_flags.ci.alpha, "two-sided level")->capture_default_str();
  sim->add_option("--B", sim_flags.ci.B, "bootstrap replicates per run")
      ->capture_default_str();
  sim->add_option("--search-lo", sim_flags.search_lo, "regression search lower end")
      ->capture_default_str();
  sim->add_option("--search-hi", sim_flags.search_hi, "regression search upper end")
      ->capture_default_str();
  sim->add_flag("--long", sim_flags.long_run,
                "full-scale recipe: N=5000, B=1000 (N=1000 for regression models); "
                "hours of runtime, not for CI pipelines");
  add_bandwidth_flags(sim, sim_flags.ci);

  RegressFlags reg_flags;
  auto* reg = app.add_subcommand("regress", "simple score estimator with bootstrap CI");
  reg->add_option("--input", reg_flags.input, "CSV with time,covariate,status")->required();
  reg->add_option("--output", reg_flags.output, "output CSV (default stdout)");
  reg->add_option("--search-lo", reg_flags.search_lo, "search interval lower end")
      ->capture_default_str();
  reg->add_option("--search-hi", reg_flags.search_hi, "search interval upper end")
      ->capture_default_str();
  reg->add_option("--grid-size", reg_flags.grid_size, "score grid points")
      ->capture_default_str();
  reg->add_option("--B", reg_flags.B, "bootstrap replicates")->capture_default_str();
  reg->add_option("--alpha", reg_flags.alpha, "two-sided level")->capture_default_str();
  reg->add_option("--eps", reg_flags.eps, "score truncation parameter")->capture_default_str();
  reg->add_option("--seed", reg_flags.seed, "RNG seed (fallback: CURSTAT_SEED, then 1)");
  reg->add_option("--workers", reg_flags.workers, "worker threads (0 = hardware)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    return kExitInput;
  }

  try {
    if (ci->parsed()) return cmd_ci(ci_flags);
    if (bw->parsed()) return cmd_bandwidth(bw_flags);
    if (sim->parsed()) return cmd_simulate(sim_flags);
    if (reg->parsed()) return cmd_regress(reg_flags);
  } catch (const DegenerateWindow& e) {
    std::cerr << "estimator failure: " << e.what() << "\n";
    return kExitEstimator;
  } catch (const UnstableFit& e) {
    std::cerr << "estimator failure: " << e.what() << "\n";
    return kExitEstimator;
  } catch (const SingularDesign& e) {
    std::cerr << "estimator failure: " << e.what() << "\n";
    return kExitEstimator;
  } catch (const DegenerateDiagram& e) {
    std::cerr << "estimator failure: " << e.what() << "\n";
    return kExitEstimator;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  }
  return kExitOk;
}
