#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "curstat/bootstrap.hpp"
#include "curstat/csv.hpp"
#include "curstat/errors.hpp"
#include "curstat/mle.hpp"
#include "curstat/parallel.hpp"
#include "curstat/regression.hpp"
#include "curstat/rng.hpp"
#include "curstat/smle.hpp"
#include "curstat/types.hpp"

namespace curstat {

enum class ModelName { uniform2, exp_trunc2, reg_model1, reg_model2 };

inline ModelName parse_model(const std::string& name) {
  if (name == "uniform2") return ModelName::uniform2;
  if (name == "exp_trunc2") return ModelName::exp_trunc2;
  if (name == "reg_model1") return ModelName::reg_model1;
  if (name == "reg_model2") return ModelName::reg_model2;
  throw InvalidDatum("unknown model '" + name + "'");
}

namespace detail {

// Inverse of the model-1 error CDF 3v^2 - 2v^3 via a cached grid bracket
// plus bisection refinement.
class SmoothstepInverse {
 public:
  SmoothstepInverse() {
    table_.resize(kKnots + 1);
    for (int i = 0; i <= kKnots; ++i) {
      const double v = static_cast<double>(i) / kKnots;
      table_[static_cast<std::size_t>(i)] = cdf(v);
    }
  }

  double operator()(double u) const {
    auto it = std::upper_bound(table_.begin(), table_.end(), u);
    std::size_t hi_idx = std::clamp<std::size_t>(
        static_cast<std::size_t>(it - table_.begin()), 1, kKnots);
    double lo = static_cast<double>(hi_idx - 1) / kKnots;
    double hi = static_cast<double>(hi_idx) / kKnots;
    while (hi - lo > 1e-10) {
      const double mid = 0.5 * (lo + hi);
      (cdf(mid) <= u ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
  }

 private:
  static double cdf(double v) { return v * v * (3.0 - 2.0 * v); }
  static constexpr int kKnots = 4096;
  std::vector<double> table_;
};

}  // namespace detail

// Ground-truth simulation model: samplers plus closed-form F0, f0, f0', g.
// For the regression models the distribution quantities refer to the error
// term.
struct TruthModel {
  ModelName name = ModelName::uniform2;

  bool is_regression() const {
    return name == ModelName::reg_model1 || name == ModelName::reg_model2;
  }

  Interval support() const {
    switch (name) {
      case ModelName::uniform2:
      case ModelName::exp_trunc2: return {0.0, 2.0};
      case ModelName::reg_model1: return {3.0 / 8.0, 5.0 / 8.0};
      case ModelName::reg_model2: return {-6.0, 6.0};
    }
    return {0.0, 0.0};
  }

  double beta0() const { return name == ModelName::reg_model2 ? 1.0 : 0.5; }

  double F0(double t) const {
    switch (name) {
      case ModelName::uniform2: return std::clamp(t / 2.0, 0.0, 1.0);
      case ModelName::exp_trunc2:
        if (t <= 0.0) return 0.0;
        if (t >= 2.0) return 1.0;
        return (1.0 - std::exp(-t)) / (1.0 - std::exp(-2.0));
      case ModelName::reg_model1: {
        const double v = std::clamp((t - 3.0 / 8.0) * 4.0, 0.0, 1.0);
        return v * v * (3.0 - 2.0 * v);
      }
      case ModelName::reg_model2: return normal_cdf(t);
    }
    return 0.0;
  }

  double f0(double t) const {
    switch (name) {
      case ModelName::uniform2: return t >= 0.0 && t <= 2.0 ? 0.5 : 0.0;
      case ModelName::exp_trunc2:
        return t >= 0.0 && t <= 2.0 ? std::exp(-t) / (1.0 - std::exp(-2.0)) : 0.0;
      case ModelName::reg_model1: {
        const double e = t;
        if (e < 3.0 / 8.0 || e > 5.0 / 8.0) return 0.0;
        return 384.0 * (e - 3.0 / 8.0) * (5.0 / 8.0 - e);
      }
      case ModelName::reg_model2:
        return std::exp(-0.5 * t * t) / std::sqrt(2.0 * M_PI);
    }
    return 0.0;
  }

  double f0_prime(double t) const {
    switch (name) {
      case ModelName::uniform2: return 0.0;
      case ModelName::exp_trunc2:
        return t >= 0.0 && t <= 2.0 ? -std::exp(-t) / (1.0 - std::exp(-2.0)) : 0.0;
      case ModelName::reg_model1:
        if (t < 3.0 / 8.0 || t > 5.0 / 8.0) return 0.0;
        return 384.0 * (1.0 - 2.0 * t);
      case ModelName::reg_model2: return -t * f0(t);
    }
    return 0.0;
  }

  // density of the observation time (current status models)
  double g(double t) const { return t >= 0.0 && t <= 2.0 ? 0.5 : 0.0; }

  PointwiseTruth truth_at(double t) const { return {F0(t), f0(t), f0_prime(t), g(t)}; }

  CurrentStatusSample sample_current_status(std::int64_t n, RngStream& stream) const {
    if (is_regression()) throw InvalidDatum("model is a regression model");
    std::vector<std::pair<double, int>> pairs;
    pairs.reserve(static_cast<std::size_t>(n));
    const double scale = 1.0 - std::exp(-2.0);
    for (std::int64_t i = 0; i < n; ++i) {
      const double t = 2.0 * stream.uniform();
      double x;
      if (name == ModelName::uniform2) {
        x = 2.0 * stream.uniform();
      } else {
        x = -std::log(1.0 - scale * stream.uniform());
      }
      pairs.emplace_back(t, x <= t ? 1 : 0);
    }
    auto sample = ingest_sample(std::move(pairs));
    sample.support_hint = support();
    return sample;
  }

  RegressionSample sample_regression(std::int64_t n, RngStream& stream) const {
    if (!is_regression()) throw InvalidDatum("model is not a regression model");
    static const detail::SmoothstepInverse inv_error_cdf;
    std::vector<double> times(static_cast<std::size_t>(n));
    std::vector<double> xs(static_cast<std::size_t>(n));
    std::vector<int> deltas(static_cast<std::size_t>(n));
    for (std::int64_t i = 0; i < n; ++i) {
      double t, x, e;
      if (name == ModelName::reg_model1) {
        t = 2.0 * stream.uniform();
        x = 2.0 * stream.uniform();
        e = 3.0 / 8.0 + 0.25 * inv_error_cdf(stream.uniform());
      } else {
        t = stream.normal();
        x = stream.normal();
        e = stream.normal();
      }
      const double y = beta0() * x + e;
      times[static_cast<std::size_t>(i)] = t;
      xs[static_cast<std::size_t>(i)] = x;
      deltas[static_cast<std::size_t>(i)] = y <= t ? 1 : 0;
    }
    return make_regression_sample(std::move(times), std::move(xs), std::move(deltas));
  }
};

inline TruthModel make_model(ModelName name) { return TruthModel{name}; }
inline TruthModel make_model(const std::string& name) { return TruthModel{parse_model(name)}; }

struct ExperimentConfig {
  ModelName model = ModelName::uniform2;
  std::int64_t n = 1000;
  int N = 500;
  int B = 500;
  Grid grid;
  CiMethod method = CiMethod::studentized;
  BandwidthRule bandwidth = BandwidthRule::fixed_h(0.5);
  BiasRule bias_rule = BiasRule::none;
  double alpha = 0.05;
  std::uint64_t seed = 1;
  int workers = 0;  // 0: hardware
  double max_failure_rate = 0.05;
};

struct ExperimentReport {
  std::vector<double> grid;
  std::vector<double> noncoverage;
  std::vector<double> avg_length;
  std::int64_t n = 0;
  int N = 0;
  int B = 0;
  std::string method;
  std::string bandwidth_desc;
  std::string bias_desc;
  double alpha = 0.05;
  std::uint64_t seed = 0;
  int failed_runs = 0;
  double wall_seconds = 0.0;

  std::string to_csv() const {
    std::string out = config_header(
        "simulate", {{"method", method},
                     {"bandwidth", bandwidth_desc},
                     {"bias", bias_desc},
                     {"alpha", format_number(alpha)},
                     {"seed", std::to_string(seed)},
                     {"failed_runs", std::to_string(failed_runs)}});
    out += "t,noncoverage,avg_length,n,N,B,method\n";
    for (std::size_t i = 0; i < grid.size(); ++i) {
      out += format_number(grid[i]) + "," + format_number(noncoverage[i]) + "," +
             format_number(avg_length[i]) + "," + std::to_string(n) + "," +
             std::to_string(N) + "," + std::to_string(B) + "," + method + "\n";
    }
    return out;
  }
};

inline std::string describe_bandwidth(const BandwidthRule& rule) {
  switch (rule.kind) {
    case BandwidthRule::Kind::fixed: return "fixed(" + format_number(rule.h) + ")";
    case BandwidthRule::Kind::autoselect:
      return "auto(exponent=" + format_number(rule.exponent) +
             ",factor=" + format_number(rule.factor) + ")";
    case BandwidthRule::Kind::per_point: return "per_point";
  }
  return "?";
}

namespace detail {

struct RunOutcome {
  std::vector<char> covered;
  std::vector<double> length;
  bool failed = false;
};

}  // namespace detail

// Coverage/length experiment: N independent samples, one confidence band
// each, aggregated per grid point. Deterministic given (seed, workers).
inline ExperimentReport run_coverage_experiment(const ExperimentConfig& cfg) {
  if (cfg.N < 1 || cfg.B < 2 || cfg.n < 1) throw InvalidDatum("experiment: bad counts");
  if (cfg.grid.points.empty()) throw InvalidDatum("experiment: empty grid");
  const TruthModel model = make_model(cfg.model);
  if (model.is_regression())
    throw InvalidDatum("run_coverage_experiment: needs a current status model");
  const auto t0 = std::chrono::steady_clock::now();
  const std::size_t npts = cfg.grid.points.size();
  const RngSpec root{cfg.seed};

  std::vector<detail::RunOutcome> outcomes(static_cast<std::size_t>(cfg.N));
  parallel_for(cfg.N, cfg.workers, [&](std::int64_t r) {
    auto& out = outcomes[static_cast<std::size_t>(r)];
    const RngSpec run_rng = root.derived(static_cast<std::uint64_t>(r));
    RngStream sampler = run_rng.stream(0);
    const auto sample = model.sample_current_status(cfg.n, sampler);

    CiRequest req;
    req.grid = cfg.grid;
    req.alpha = cfg.alpha;
    req.B = cfg.B;
    req.bandwidth = cfg.bandwidth;
    req.method = cfg.method;
    req.workers = 1;  // parallelism lives at the run level
    const RngSpec band_rng = run_rng.derived(1);
    try {
      // resolve bandwidths once so bias rules can reuse them
      const auto rb = detail::resolve_bandwidths(sample, req, band_rng.derived(1));
      CiRequest resolved = req;
      resolved.bandwidth = BandwidthRule::per_point(rb.h);

      std::vector<double> bias(npts, 0.0);
      if (cfg.bias_rule == BiasRule::true_beta) {
        for (std::size_t i = 0; i < npts; ++i) {
          // actual bias of the SMLE at bandwidth h: h^2 f0'(t) (int u^2 K)/2
          bias[i] = 0.5 * rb.h[i] * rb.h[i] * model.f0_prime(cfg.grid.points[i]) *
                    triweight::kMoment2;
        }
      } else if (cfg.bias_rule == BiasRule::subsample || cfg.bias_rule == BiasRule::direct) {
        bias = estimate_bias_vector(sample, cfg.grid.points, rb.c, cfg.bandwidth,
                                    cfg.bias_rule, band_rng, req.boundary, 1);
      }

      ConfidenceBand band;
      switch (cfg.method) {
        case CiMethod::studentized:
          band = cfg.bias_rule == BiasRule::none
                     ? studentized_ci(sample, resolved, band_rng)
                     : bias_corrected_ci(sample, resolved, band_rng, bias);
          break;
        case CiMethod::wald1:
        case CiMethod::wald2:
        case CiMethod::wald3: {
          const int k = cfg.method == CiMethod::wald1 ? 1
                        : cfg.method == CiMethod::wald2 ? 2 : 3;
          band = wald_ci(sample, resolved, k, bias, band_rng);
          break;
        }
        case CiMethod::senxu:
          band = senxu_ci(sample, req, band_rng);  // needs the fixed rule itself
          break;
        case CiMethod::smooth_smle:
          band = smooth_smle_ci(sample, req, band_rng);
          break;
      }
      out.covered.resize(npts);
      out.length.resize(npts);
      for (std::size_t i = 0; i < npts; ++i) {
        const double truth = model.F0(cfg.grid.points[i]);
        out.covered[i] =
            band.rows[i].lower <= truth && truth <= band.rows[i].upper ? 1 : 0;
        out.length[i] = band.rows[i].upper - band.rows[i].lower;
      }
    } catch (const DegenerateWindow&) {
      out.failed = true;
    } catch (const UnstableFit&) {
      out.failed = true;
    } catch (const SingularDesign&) {
      out.failed = true;
    }
  });

  ExperimentReport rep;
  rep.grid = cfg.grid.points;
  rep.noncoverage.assign(npts, 0.0);
  rep.avg_length.assign(npts, 0.0);
  rep.n = cfg.n;
  rep.N = cfg.N;
  rep.B = cfg.B;
  rep.method = to_string(cfg.method);
  rep.bandwidth_desc = describe_bandwidth(cfg.bandwidth);
  rep.bias_desc = to_string(cfg.bias_rule);
  rep.alpha = cfg.alpha;
  rep.seed = cfg.seed;
  int ok_runs = 0;
  for (const auto& out : outcomes) {
    if (out.failed) {
      ++rep.failed_runs;
      continue;
    }
    ++ok_runs;
    for (std::size_t i = 0; i < npts; ++i) {
      rep.noncoverage[i] += out.covered[i] ? 0.0 : 1.0;
      rep.avg_length[i] += out.length[i];
    }
  }
  if (rep.failed_runs > cfg.max_failure_rate * cfg.N)
    throw UnstableFit("coverage experiment: " + std::to_string(rep.failed_runs) + " of " +
                      std::to_string(cfg.N) + " runs failed");
  for (std::size_t i = 0; i < npts; ++i) {
    rep.noncoverage[i] /= ok_runs;
    rep.avg_length[i] /= ok_runs;
  }
  rep.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rep;
}

struct RegressionExperimentConfig {
  ModelName model = ModelName::reg_model1;
  std::int64_t n = 100;
  int N = 200;
  int B = 500;
  double search_lo = -1.0;
  double search_hi = 2.0;
  double alpha = 0.05;
  std::uint64_t seed = 1;
  int workers = 0;
  double max_failure_rate = 0.05;
};

struct RegressionReport {
  double beta_mean = 0.0;
  double n_var = 0.0;
  double n_mse = 0.0;
  double bootstrap_cp = 0.0;
  double bootstrap_al = 0.0;
  int no_crossing_total = 0;
  int failed_runs = 0;
  std::int64_t n = 0;
  int N = 0;
  int B = 0;
  std::uint64_t seed = 0;
  double wall_seconds = 0.0;

  std::string to_csv() const {
    std::string out = config_header("simulate", {{"kind", "regression"},
                                                 {"seed", std::to_string(seed)}});
    out += "stat,value\n";
    out += "n," + std::to_string(n) + "\n";
    out += "N," + std::to_string(N) + "\n";
    out += "B," + std::to_string(B) + "\n";
    out += "beta_mean," + format_number(beta_mean) + "\n";
    out += "n_var," + format_number(n_var) + "\n";
    out += "n_mse," + format_number(n_mse) + "\n";
    out += "bootstrap_cp," + format_number(bootstrap_cp) + "\n";
    out += "bootstrap_al," + format_number(bootstrap_al) + "\n";
    out += "no_crossing_total," + std::to_string(no_crossing_total) + "\n";
    out += "failed_runs," + std::to_string(failed_runs) + "\n";
    return out;
  }
};

inline RegressionReport run_regression_experiment(const RegressionExperimentConfig& cfg) {
  if (cfg.N < 1 || cfg.B < 2 || cfg.n < 2) throw InvalidDatum("experiment: bad counts");
  const TruthModel model = make_model(cfg.model);
  if (!model.is_regression())
    throw InvalidDatum("run_regression_experiment: needs a regression model");
  const auto t0 = std::chrono::steady_clock::now();
  const RngSpec root{cfg.seed};
  const double beta0 = model.beta0();

  struct RunResult {
    double beta = 0.0;
    double lower = 0.0, upper = 0.0;
    int no_crossing = 0;
    bool failed = false;
  };
  std::vector<RunResult> results(static_cast<std::size_t>(cfg.N));
  parallel_for(cfg.N, cfg.workers, [&](std::int64_t r) {
    auto& res = results[static_cast<std::size_t>(r)];
    const RngSpec run_rng = root.derived(static_cast<std::uint64_t>(r));
    RngStream sampler = run_rng.stream(0);
    const auto sample = model.sample_regression(cfg.n, sampler);
    try {
      const auto ci = bootstrap_sse_ci(sample, cfg.search_lo, cfg.search_hi, cfg.B, cfg.alpha,
                                       run_rng.derived(1), 1);
      res.beta = ci.beta_hat;
      res.lower = ci.lower;
      res.upper = ci.upper;
      res.no_crossing = ci.no_crossing_count;
    } catch (const UnstableFit&) {
      res.failed = true;
    } catch (const SingularDesign&) {
      res.failed = true;
    }
  });

  RegressionReport rep;
  rep.n = cfg.n;
  rep.N = cfg.N;
  rep.B = cfg.B;
  rep.seed = cfg.seed;
  std::vector<double> betas;
  for (const auto& res : results) {
    if (res.failed) {
      ++rep.failed_runs;
      continue;
    }
    betas.push_back(res.beta);
    rep.bootstrap_cp += res.lower <= beta0 && beta0 <= res.upper ? 1.0 : 0.0;
    rep.bootstrap_al += res.upper - res.lower;
    rep.no_crossing_total += res.no_crossing;
  }
  if (rep.failed_runs > cfg.max_failure_rate * cfg.N)
    throw UnstableFit("regression experiment: " + std::to_string(rep.failed_runs) + " of " +
                      std::to_string(cfg.N) + " runs failed");
  const double ok = static_cast<double>(betas.size());
  rep.bootstrap_cp /= ok;
  rep.bootstrap_al /= ok;
  for (double b : betas) rep.beta_mean += b;
  rep.beta_mean /= ok;
  double var = 0.0, mse = 0.0;
  for (double b : betas) {
    var += (b - rep.beta_mean) * (b - rep.beta_mean);
    mse += (b - beta0) * (b - beta0);
  }
  rep.n_var = static_cast<double>(cfg.n) * var / (ok > 1 ? ok - 1 : 1);
  rep.n_mse = static_cast<double>(cfg.n) * mse / ok;
  rep.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rep;
}

}  // namespace curstat
