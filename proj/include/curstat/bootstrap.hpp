#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "curstat/csv.hpp"
#include "curstat/errors.hpp"
#include "curstat/kernel.hpp"
#include "curstat/mathutil.hpp"
#include "curstat/mle.hpp"
#include "curstat/parallel.hpp"
#include "curstat/rng.hpp"
#include "curstat/smle.hpp"
#include "curstat/types.hpp"

namespace curstat {

enum class CiMethod { studentized, wald1, wald2, wald3, senxu, smooth_smle };

inline std::string to_string(CiMethod m) {
  switch (m) {
    case CiMethod::studentized: return "studentized";
    case CiMethod::wald1: return "wald1";
    case CiMethod::wald2: return "wald2";
    case CiMethod::wald3: return "wald3";
    case CiMethod::senxu: return "senxu";
    case CiMethod::smooth_smle: return "smooth_smle";
  }
  return "?";
}

// Default subsample sizes: the pairings used in the validation
// experiments for common n, with a growth rule in between.
inline int default_subsample_size(std::int64_t n) {
  if (n == 1000) return 50;
  if (n == 5000) return 100;
  if (n == 10000) return 250;
  int m = std::max<int>(50, static_cast<int>(std::lround(std::pow(static_cast<double>(n), 0.6))));
  if (m >= n) m = static_cast<int>(n / 2);
  return std::max(m, 1);
}

// Bandwidth policy: either a fixed h, or data-driven h = factor * c_opt *
// n^{-exponent} with c_opt selected per grid point by the subsample MSE
// criterion (always evaluated on the m^{-1/5} scale).
struct BandwidthRule {
  enum class Kind { fixed, autoselect, per_point };
  Kind kind = Kind::fixed;
  double h = 0.0;
  std::vector<double> c_grid;   // empty: default grid from the support length
  int m = 0;                    // 0: default_subsample_size(n)
  int B_sub = 500;
  double exponent = 0.2;        // 1/5 (default) or 1/4 for undersmoothing
  double factor = 1.0;          // e.g. 1/3 for the second undersmoothing rule
  double c0 = 0.0;              // 0: support length
  bool with_replacement = false;
  std::vector<double> hs;       // per_point: one pre-resolved h per grid point

  static BandwidthRule fixed_h(double h) {
    BandwidthRule r;
    r.kind = Kind::fixed;
    r.h = h;
    return r;
  }
  static BandwidthRule autoselect() {
    BandwidthRule r;
    r.kind = Kind::autoselect;
    return r;
  }
  static BandwidthRule per_point(std::vector<double> hs) {
    BandwidthRule r;
    r.kind = Kind::per_point;
    r.hs = std::move(hs);
    return r;
  }
};

inline std::vector<double> default_c_grid(Interval support) {
  std::vector<double> cs;
  const double unit = support.length() / 2.0;
  for (int i = 1; i <= 16; ++i) cs.push_back(0.25 * i * unit);
  return cs;
}

struct CiRequest {
  Grid grid;
  double alpha = 0.05;
  int B = 500;
  BandwidthRule bandwidth;
  CiMethod method = CiMethod::studentized;
  bool boundary = true;
  int workers = 1;
};

struct BandRow {
  double t = 0.0;
  double estimate = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  double bandwidth = 0.0;
  int discarded = 0;
  bool degenerate = false;  // zero-width interval (not serialized)
};

struct ConfidenceBand {
  std::vector<BandRow> rows;
  std::uint64_t seed = 0;
  int B = 0;
  std::string method;
};

struct BandwidthSelection {
  double c_opt = 0.0;
  bool flagged = false;  // MSE flat in c (tie resolved to the smallest c)
};

namespace detail {

// 1-based k-th order statistic with k = ceil(q * m), clamped into range.
inline double order_statistic(std::vector<double>& values, double q) {
  const int m = static_cast<int>(values.size());
  const int k = std::clamp(static_cast<int>(std::ceil(q * m)), 1, m);
  std::nth_element(values.begin(), values.begin() + (k - 1), values.end());
  return values[static_cast<std::size_t>(k - 1)];
}

inline void validate_request(const CurrentStatusSample& sample, const CiRequest& req) {
  if (req.grid.points.empty()) throw InvalidDatum("confidence band: empty grid");
  if (!(req.alpha > 0.0 && req.alpha < 1.0))
    throw InvalidDatum("confidence band: alpha must be in (0,1)");
  if (req.B < 2) throw InvalidDatum("confidence band: need B >= 2 replicates");
  if (sample.support_hint) {
    for (double t : req.grid.points) {
      if (t < sample.support_hint->lo || t > sample.support_hint->hi)
        throw InvalidDatum("confidence band: grid point " + format_number(t) +
                           " outside the support hint");
    }
  }
}

// m-out-of-n subsample (without replacement by default); the result keeps
// the parent's support hint.
inline CurrentStatusSample draw_subsample(const CurrentStatusSample& sample, int m,
                                          RngStream& stream, bool with_replacement) {
  const std::int64_t n = sample.n;
  std::vector<int> c1(sample.groups(), 0), c0(sample.groups(), 0);
  if (with_replacement) {
    for (int i = 0; i < m; ++i) {
      const auto [g, delta] = sample.locate(
          static_cast<std::int64_t>(stream.uniform_below(static_cast<std::uint64_t>(n))));
      ++(delta ? c1 : c0)[g];
    }
  } else {
    std::vector<std::int64_t> idx(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), 0);
    for (int i = 0; i < m; ++i) {
      const std::int64_t j =
          i + static_cast<std::int64_t>(stream.uniform_below(static_cast<std::uint64_t>(n - i)));
      std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
      const auto [g, delta] = sample.locate(idx[static_cast<std::size_t>(i)]);
      ++(delta ? c1 : c0)[g];
    }
  }
  CurrentStatusSample sub;
  sub.n = m;
  sub.support_hint = sample.support_hint;
  for (std::size_t g = 0; g < sample.groups(); ++g) {
    const int total = c0[g] + c1[g];
    if (total == 0) continue;
    sub.times.push_back(sample.times[g]);
    sub.statuses.push_back(c1[g]);
    sub.multiplicities.push_back(total);
  }
  sub.rebuild_offsets();
  return sub;
}

// Subsample pilot machinery shared by bandwidth selection and the two
// subsampling-based estimates: B_sub subsample fits, each evaluated at every
// c in the grid with h = c m^{-scale}, against the full-sample pilot at
// h0 = c0 n^{-scale}. `deriv` switches the evaluated functional from the
// SMLE to the density-derivative estimate.
struct SubsampleEvaluations {
  std::vector<std::vector<double>> values;  // [b][c]
  double pilot = 0.0;
};

inline SubsampleEvaluations run_subsample_evaluations(
    const CurrentStatusSample& sample, double t, const std::vector<double>& c_grid, int m,
    int B_sub, double c0, double scale_exponent, bool deriv, bool boundary,
    const RngSpec& rng, bool with_replacement, int workers) {
  if (m >= sample.n) throw InvalidSubsample("subsampling requires m < n");
  if (m < 1) throw InvalidSubsample("subsampling requires m >= 1");
  if (c_grid.empty()) throw InvalidDatum("subsampling: empty c grid");
  if (B_sub < 1) throw InvalidDatum("subsampling: need B_sub >= 1");
  const Interval support = sample.support();
  const auto F_n = fit_mle(sample);
  SubsampleEvaluations out;
  const double h0 = c0 * std::pow(static_cast<double>(sample.n), -scale_exponent);
  out.pilot = deriv ? smooth_density_derivative(F_n, t, h0, support, boundary)
                    : smle(F_n, t, h0, support, boundary);
  out.values.assign(static_cast<std::size_t>(B_sub), std::vector<double>(c_grid.size(), 0.0));
  const double m_scale = std::pow(static_cast<double>(m), -scale_exponent);
  parallel_for(B_sub, workers, [&](std::int64_t b) {
    RngStream stream = rng.stream(static_cast<std::uint64_t>(b));
    auto sub = draw_subsample(sample, m, stream, with_replacement);
    const auto F_sub = fit_mle(sub);
    for (std::size_t ci = 0; ci < c_grid.size(); ++ci) {
      const double h = c_grid[ci] * m_scale;
      out.values[static_cast<std::size_t>(b)][ci] =
          deriv ? smooth_density_derivative(F_sub, t, h, support, boundary)
                : smle(F_sub, t, h, support, boundary);
    }
  });
  return out;
}

}  // namespace detail

// Pointwise bandwidth constant by the subsample MSE criterion:
//   MSE(c) = B^-1 sum_b { F~^b_{m, c m^{-1/5}}(t) - F~_{n, c0 n^{-1/5}}(t) }^2,
// minimized over the c grid, ties to the smallest c.
inline BandwidthSelection select_bandwidth(const CurrentStatusSample& sample, double t,
                                           const std::vector<double>& c_grid, int m, int B_sub,
                                           double c0, const RngSpec& rng,
                                           bool with_replacement = false, bool boundary = true,
                                           int workers = 1) {
  const auto runs = detail::run_subsample_evaluations(sample, t, c_grid, m, B_sub, c0, 0.2,
                                                      false, boundary, rng, with_replacement,
                                                      workers);
  std::vector<double> mse(c_grid.size(), 0.0);
  for (const auto& row : runs.values) {
    for (std::size_t ci = 0; ci < c_grid.size(); ++ci) {
      const double d = row[ci] - runs.pilot;
      mse[ci] += d * d;
    }
  }
  BandwidthSelection sel;
  std::size_t best = 0;
  for (std::size_t ci = 1; ci < mse.size(); ++ci) {
    if (mse[ci] < mse[best]) best = ci;
  }
  sel.c_opt = c_grid[best];
  sel.flagged = *std::max_element(mse.begin(), mse.end()) ==
                *std::min_element(mse.begin(), mse.end());
  return sel;
}

// Subsampling estimate of the actual bias beta(t) n^{-2/5}:
//   { B^-1 sum_b F~^b_{m, c_opt m^{-1/5}}(t) - F~_{n, c0 n^{-1/5}}(t) } (m/n)^{2/5}.
inline double bias_subsample_estimate(const CurrentStatusSample& sample, double t, double c_opt,
                                      int m, int B_sub, double c0, const RngSpec& rng,
                                      bool with_replacement = false, bool boundary = true,
                                      int workers = 1) {
  const auto runs = detail::run_subsample_evaluations(sample, t, {c_opt}, m, B_sub, c0, 0.2,
                                                      false, boundary, rng, with_replacement,
                                                      workers);
  double mean = 0.0;
  for (const auto& row : runs.values) mean += row[0];
  mean /= static_cast<double>(runs.values.size());
  return (mean - runs.pilot) *
         std::pow(static_cast<double>(m) / static_cast<double>(sample.n), 0.4);
}

// Direct estimate of the actual bias: f0'(t) in the bias formula replaced by
// the kernel derivative estimate at h_bar = c_bar_opt n^{-1/9}, c_bar_opt
// selected by the same subsample MSE machinery applied to the derivative
// estimator.
inline double bias_direct_estimate(const CurrentStatusSample& sample, double t, double c_used,
                                   const std::vector<double>& c_grid, int m, int B_sub,
                                   double c0_bar, const RngSpec& rng,
                                   bool with_replacement = false, bool boundary = true,
                                   int workers = 1) {
  const auto runs = detail::run_subsample_evaluations(sample, t, c_grid, m, B_sub, c0_bar,
                                                      1.0 / 9.0, true, boundary, rng,
                                                      with_replacement, workers);
  std::vector<double> mse(c_grid.size(), 0.0);
  for (const auto& row : runs.values) {
    for (std::size_t ci = 0; ci < c_grid.size(); ++ci) {
      const double d = row[ci] - runs.pilot;
      mse[ci] += d * d;
    }
  }
  std::size_t best = 0;
  for (std::size_t ci = 1; ci < mse.size(); ++ci) {
    if (mse[ci] < mse[best]) best = ci;
  }
  const double n = static_cast<double>(sample.n);
  const double h_bar = c_grid[best] * std::pow(n, -1.0 / 9.0);
  const auto F_n = fit_mle(sample);
  const double fprime = smooth_density_derivative(F_n, t, h_bar, sample.support(), boundary);
  return 0.5 * c_used * c_used * fprime * triweight::kMoment2 * std::pow(n, -0.4);
}

enum class BiasRule { none, true_beta, direct, subsample };

inline std::string to_string(BiasRule r) {
  switch (r) {
    case BiasRule::none: return "none";
    case BiasRule::true_beta: return "true_beta";
    case BiasRule::direct: return "direct";
    case BiasRule::subsample: return "subsample";
  }
  return "?";
}

// Per-gridpoint actual-scale bias vector for the data-driven rules. c_used
// carries the bandwidth constants actually used for the band.
inline std::vector<double> estimate_bias_vector(const CurrentStatusSample& sample,
                                                const std::vector<double>& grid,
                                                const std::vector<double>& c_used,
                                                const BandwidthRule& rule, BiasRule kind,
                                                const RngSpec& rng, bool boundary = true,
                                                int workers = 1) {
  std::vector<double> bias(grid.size(), 0.0);
  if (kind == BiasRule::none) return bias;
  if (kind == BiasRule::true_beta)
    throw InvalidDatum("estimate_bias_vector: true-bias needs model truth");
  const auto c_grid = rule.c_grid.empty() ? default_c_grid(sample.support()) : rule.c_grid;
  const int m = rule.m > 0 ? rule.m : default_subsample_size(sample.n);
  const double c0 = rule.c0 > 0.0 ? rule.c0 : sample.support().length();
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (kind == BiasRule::subsample) {
      bias[i] = bias_subsample_estimate(sample, grid[i], c_used[i], m, rule.B_sub, c0,
                                        rng.derived(100 + i), rule.with_replacement, boundary,
                                        workers);
    } else {
      bias[i] = bias_direct_estimate(sample, grid[i], c_used[i], c_grid, m, rule.B_sub, c0,
                                     rng.derived(200 + i), rule.with_replacement, boundary,
                                     workers);
    }
  }
  return bias;
}

enum class UndersmoothRule { quarter_exponent, one_third_fifth };

inline double undersmoothed_bandwidth(double c_opt, std::int64_t n, UndersmoothRule rule) {
  if (!(c_opt > 0.0)) throw InvalidBandwidth("undersmoothed_bandwidth: c must be positive");
  const double nn = static_cast<double>(n);
  return rule == UndersmoothRule::quarter_exponent ? c_opt * std::pow(nn, -0.25)
                                                   : (c_opt / 3.0) * std::pow(nn, -0.2);
}

namespace detail {

struct ResolvedBandwidths {
  std::vector<double> h;  // per grid point
  std::vector<double> c;  // effective constant h * n^{1/5}
};

inline ResolvedBandwidths resolve_bandwidths(const CurrentStatusSample& sample,
                                             const CiRequest& req, const RngSpec& rng) {
  const double n = static_cast<double>(sample.n);
  ResolvedBandwidths rb;
  rb.h.reserve(req.grid.points.size());
  const BandwidthRule& rule = req.bandwidth;
  if (rule.kind == BandwidthRule::Kind::per_point &&
      rule.hs.size() != req.grid.points.size())
    throw InvalidBandwidth("per-point bandwidths must match the grid");
  for (std::size_t i = 0; i < req.grid.points.size(); ++i) {
    double h;
    if (rule.kind == BandwidthRule::Kind::per_point) {
      if (!(rule.hs[i] > 0.0)) throw InvalidBandwidth("bandwidth must be positive");
      h = rule.hs[i];
    } else if (rule.kind == BandwidthRule::Kind::fixed) {
      if (!(rule.h > 0.0)) throw InvalidBandwidth("bandwidth must be positive");
      h = rule.h;
    } else {
      const auto c_grid = rule.c_grid.empty() ? default_c_grid(sample.support()) : rule.c_grid;
      const int m = rule.m > 0 ? rule.m : default_subsample_size(sample.n);
      const double c0 = rule.c0 > 0.0 ? rule.c0 : sample.support().length();
      const auto sel = select_bandwidth(sample, req.grid.points[i], c_grid, m, rule.B_sub, c0,
                                        rng.derived(i), rule.with_replacement, req.boundary,
                                        req.workers);
      h = rule.factor * sel.c_opt * std::pow(n, -rule.exponent);
    }
    rb.h.push_back(h);
    rb.c.push_back(h * std::pow(n, 0.2));
  }
  return rb;
}

inline void shift_and_clip(BandRow& row, double bias) {
  row.lower = std::clamp(row.lower - bias, 0.0, 1.0);
  row.upper = std::clamp(row.upper - bias, 0.0, 1.0);
}

// Studentized nonparametric bootstrap band (optionally bias-corrected).
inline ConfidenceBand studentized_core(const CurrentStatusSample& sample, const CiRequest& req,
                                       const RngSpec& rng, const std::vector<double>* bias) {
  validate_request(sample, req);
  const auto& ts = req.grid.points;
  const Interval support = sample.support();
  const auto rb = resolve_bandwidths(sample, req, rng.derived(1));

  const auto F_n = fit_mle(sample);
  std::vector<double> estimate(ts.size()), s_orig(ts.size());
  for (std::size_t i = 0; i < ts.size(); ++i) {
    estimate[i] = smle(F_n, ts[i], rb.h[i], support, req.boundary);
    s_orig[i] = s_nh_variance(sample, F_n, ts[i], rb.h[i]);
  }

  const RngSpec rep_rng = rng.derived(2);
  std::vector<std::vector<double>> pivots(static_cast<std::size_t>(req.B),
                                          std::vector<double>(ts.size()));
  parallel_for(req.B, req.workers, [&](std::int64_t b) {
    const auto w = draw_multinomial_weights(sample.n, rep_rng, static_cast<std::uint64_t>(b));
    const auto gw = group_weights(sample, w);
    const auto fitted = weighted_mle_values(gw);
    std::vector<double> times, values;
    for (std::size_t g = 0; g < sample.groups(); ++g) {
      if (gw.w0[g] + gw.w1[g] > 0.0) {
        times.push_back(sample.times[g]);
        values.push_back(fitted[g]);
      }
    }
    const auto F_b = step_from_fitted(times, values);
    auto& row = pivots[static_cast<std::size_t>(b)];
    for (std::size_t i = 0; i < ts.size(); ++i) {
      const double s_star = s_nh_from_groups(sample, gw, fitted, ts[i], rb.h[i]);
      if (s_star < 1e-12) {
        row[i] = std::numeric_limits<double>::quiet_NaN();  // discarded
      } else {
        const double v = smle(F_b, ts[i], rb.h[i], support, req.boundary);
        row[i] = (v - estimate[i]) / std::sqrt(s_star);
      }
    }
  });

  ConfidenceBand band;
  band.seed = rng.master_seed;
  band.B = req.B;
  band.method = bias ? "bias_corrected" : "studentized";
  for (std::size_t i = 0; i < ts.size(); ++i) {
    std::vector<double> kept;
    kept.reserve(static_cast<std::size_t>(req.B));
    for (int b = 0; b < req.B; ++b) {
      const double v = pivots[static_cast<std::size_t>(b)][i];
      if (!std::isnan(v)) kept.push_back(v);
    }
    if (kept.empty())
      throw DegenerateWindow("all replicates degenerate at t = " + format_number(ts[i]));
    BandRow row;
    row.t = ts[i];
    row.estimate = estimate[i];
    row.bandwidth = rb.h[i];
    row.discarded = req.B - static_cast<int>(kept.size());
    const double s = std::sqrt(s_orig[i]);
    std::vector<double> tmp = kept;
    const double q_hi = order_statistic(tmp, 1.0 - req.alpha / 2.0);
    const double q_lo = order_statistic(tmp, req.alpha / 2.0);
    row.lower = estimate[i] - q_hi * s;
    row.upper = estimate[i] - q_lo * s;
    row.degenerate = q_hi == q_lo;
    shift_and_clip(row, bias ? (*bias)[i] : 0.0);
    band.rows.push_back(row);
  }
  return band;
}

}  // namespace detail

inline ConfidenceBand studentized_ci(const CurrentStatusSample& sample, const CiRequest& req,
                                     const RngSpec& rng) {
  return detail::studentized_core(sample, req, rng, nullptr);
}

// Both endpoints shifted down by the supplied actual-scale bias.
inline ConfidenceBand bias_corrected_ci(const CurrentStatusSample& sample, const CiRequest& req,
                                        const RngSpec& rng, const std::vector<double>& bias) {
  if (bias.size() != req.grid.points.size())
    throw InvalidDatum("bias_corrected_ci: bias vector must match the grid");
  return detail::studentized_core(sample, req, rng, &bias);
}

// Wald bands from the normal quantiles and one of three variance estimates.
inline ConfidenceBand wald_ci(const CurrentStatusSample& sample, const CiRequest& req,
                              int variance_estimator, const std::vector<double>& bias,
                              const RngSpec& rng) {
  detail::validate_request(sample, req);
  if (variance_estimator < 1 || variance_estimator > 3)
    throw InvalidDatum("wald_ci: variance estimator must be 1, 2 or 3");
  if (!bias.empty() && bias.size() != req.grid.points.size())
    throw InvalidDatum("wald_ci: bias vector must match the grid");
  const auto& ts = req.grid.points;
  const Interval support = sample.support();
  const double n = static_cast<double>(sample.n);
  const auto rb = detail::resolve_bandwidths(sample, req, rng.derived(1));
  const auto F_n = fit_mle(sample);
  const double z = normal_quantile(1.0 - req.alpha / 2.0);

  std::vector<double> estimate(ts.size());
  for (std::size_t i = 0; i < ts.size(); ++i)
    estimate[i] = smle(F_n, ts[i], rb.h[i], support, req.boundary);

  // bootstrap SMLE spread for estimator 3
  std::vector<double> sigma3(ts.size(), 0.0);
  if (variance_estimator == 3) {
    const RngSpec rep_rng = rng.derived(2);
    std::vector<std::vector<double>> devs(static_cast<std::size_t>(req.B),
                                          std::vector<double>(ts.size()));
    parallel_for(req.B, req.workers, [&](std::int64_t b) {
      const auto w = draw_multinomial_weights(sample.n, rep_rng, static_cast<std::uint64_t>(b));
      const auto F_b = fit_bootstrap_mle(sample, w);
      for (std::size_t i = 0; i < ts.size(); ++i) {
        const double d = smle(F_b, ts[i], rb.h[i], support, req.boundary) - estimate[i];
        devs[static_cast<std::size_t>(b)][i] = d * d;
      }
    });
    for (std::size_t i = 0; i < ts.size(); ++i) {
      double acc = 0.0;
      for (int b = 0; b < req.B; ++b) acc += devs[static_cast<std::size_t>(b)][i];
      sigma3[i] = std::sqrt(acc / req.B);
    }
  }

  ConfidenceBand band;
  band.seed = rng.master_seed;
  band.B = variance_estimator == 3 ? req.B : 0;
  band.method = "wald" + std::to_string(variance_estimator);
  for (std::size_t i = 0; i < ts.size(); ++i) {
    double s;
    if (variance_estimator == 1) {
      const double g_hat = smooth_density_of_g(sample, ts[i], rb.h[i], support, req.boundary);
      if (g_hat < 1e-8)
        throw SingularDesign("wald_ci: kernel density estimate vanishes at t = " +
                             format_number(ts[i]));
      const double f = eval_step(F_n, ts[i]);
      const double var = f * (1.0 - f) / (rb.c[i] * g_hat) * triweight::kL2Norm;
      s = std::pow(n, -0.4) * std::sqrt(std::max(var, 0.0));
    } else if (variance_estimator == 2) {
      const double g_t = smooth_density_of_g(sample, ts[i], rb.h[i], support, req.boundary);
      if (g_t < 1e-8)
        throw SingularDesign("wald_ci: kernel density estimate vanishes at t = " +
                             format_number(ts[i]));
      // sample variance of the toy estimator with F_n and g_nh plugged in
      double acc = 0.0;
      const double inv_h = 1.0 / rb.h[i];
      for (std::size_t g = 0; g < sample.groups(); ++g) {
        const double kh = triweight::density((ts[i] - sample.times[g]) * inv_h) * inv_h;
        if (kh == 0.0) continue;
        const double fi = eval_step(F_n, sample.times[g]);
        const double gi =
            smooth_density_of_g(sample, sample.times[g], rb.h[i], support, req.boundary);
        const double denom = std::max(gi, 1e-8);
        const double resid2 = sample.statuses[g] * (1.0 - fi) * (1.0 - fi) +
                              (sample.multiplicities[g] - sample.statuses[g]) * fi * fi;
        acc += kh * kh * resid2 / (denom * denom);
      }
      s = std::sqrt(acc) / n;
    } else {
      s = sigma3[i];
    }
    BandRow row;
    row.t = ts[i];
    row.estimate = estimate[i];
    row.bandwidth = rb.h[i];
    row.lower = estimate[i] - z * s;
    row.upper = estimate[i] + z * s;
    row.degenerate = s == 0.0;
    detail::shift_and_clip(row, bias.empty() ? 0.0 : bias[i]);
    band.rows.push_back(row);
  }
  return band;
}

namespace detail {

// Smooth (Sen-Xu style) resampling: T_i fixed, Delta*_i ~ Bernoulli of the
// SMLE at T_i. Returns per-group positive counts.
inline std::vector<int> draw_smooth_statuses(const CurrentStatusSample& sample,
                                             const std::vector<double>& probs,
                                             RngStream& stream) {
  std::vector<int> s1(sample.groups(), 0);
  for (std::size_t g = 0; g < sample.groups(); ++g) {
    for (int j = 0; j < sample.multiplicities[g]; ++j) {
      if (stream.bernoulli(probs[g])) ++s1[g];
    }
  }
  return s1;
}

inline double require_fixed_bandwidth(const CiRequest& req) {
  if (req.bandwidth.kind != BandwidthRule::Kind::fixed || !(req.bandwidth.h > 0.0))
    throw InvalidBandwidth("smooth-resampling methods need a fixed centering bandwidth");
  return req.bandwidth.h;
}

}  // namespace detail

// Sen-Xu smooth bootstrap band around the MLE: Delta* resampled from the
// SMLE, quantiles of F^*_n(t) - F~_nh(t) inverted around F_n(t).
inline ConfidenceBand senxu_ci(const CurrentStatusSample& sample, const CiRequest& req,
                               const RngSpec& rng) {
  detail::validate_request(sample, req);
  const double h = detail::require_fixed_bandwidth(req);
  const auto& ts = req.grid.points;
  const Interval support = sample.support();
  const auto F_n = fit_mle(sample);

  std::vector<double> probs(sample.groups());
  for (std::size_t g = 0; g < sample.groups(); ++g)
    probs[g] = smle(F_n, sample.times[g], h, support, req.boundary);
  std::vector<double> center(ts.size());
  for (std::size_t i = 0; i < ts.size(); ++i)
    center[i] = smle(F_n, ts[i], h, support, req.boundary);

  const RngSpec rep_rng = rng.derived(2);
  std::vector<std::vector<double>> zvals(static_cast<std::size_t>(req.B),
                                         std::vector<double>(ts.size()));
  parallel_for(req.B, req.workers, [&](std::int64_t b) {
    RngStream stream = rep_rng.stream(static_cast<std::uint64_t>(b));
    const auto s1 = detail::draw_smooth_statuses(sample, probs, stream);
    detail::GroupWeights gw;
    gw.w0.resize(sample.groups());
    gw.w1.resize(sample.groups());
    for (std::size_t g = 0; g < sample.groups(); ++g) {
      gw.w1[g] = s1[g];
      gw.w0[g] = sample.multiplicities[g] - s1[g];
    }
    const auto fitted = detail::weighted_mle_values(gw);
    const auto F_b = step_from_fitted(sample.times, fitted);
    for (std::size_t i = 0; i < ts.size(); ++i)
      zvals[static_cast<std::size_t>(b)][i] = eval_step(F_b, ts[i]) - center[i];
  });

  ConfidenceBand band;
  band.seed = rng.master_seed;
  band.B = req.B;
  band.method = "senxu";
  for (std::size_t i = 0; i < ts.size(); ++i) {
    std::vector<double> zs(static_cast<std::size_t>(req.B));
    for (int b = 0; b < req.B; ++b) zs[static_cast<std::size_t>(b)] = zvals[static_cast<std::size_t>(b)][i];
    const double f = eval_step(F_n, ts[i]);
    BandRow row;
    row.t = ts[i];
    row.estimate = f;
    row.bandwidth = h;
    std::vector<double> tmp = zs;
    const double q_hi = detail::order_statistic(tmp, 1.0 - req.alpha / 2.0);
    const double q_lo = detail::order_statistic(tmp, req.alpha / 2.0);
    row.lower = std::clamp(f - q_hi, 0.0, 1.0);
    row.upper = std::clamp(f - q_lo, 0.0, 1.0);
    row.degenerate = q_hi == q_lo;
    band.rows.push_back(row);
  }
  return band;
}

// Smooth-bootstrap SMLE band: Bernoulli resampling as in senxu_ci, but the
// Studentized pivot is centered at the convolution SMLE.
inline ConfidenceBand smooth_smle_ci(const CurrentStatusSample& sample, const CiRequest& req,
                                     const RngSpec& rng) {
  detail::validate_request(sample, req);
  const double h = detail::require_fixed_bandwidth(req);
  const auto& ts = req.grid.points;
  const Interval support = sample.support();
  const auto F_n = fit_mle(sample);

  std::vector<double> probs(sample.groups());
  for (std::size_t g = 0; g < sample.groups(); ++g)
    probs[g] = smle(F_n, sample.times[g], h, support, req.boundary);
  std::vector<double> estimate(ts.size()), conv(ts.size()), s_orig(ts.size());
  for (std::size_t i = 0; i < ts.size(); ++i) {
    estimate[i] = smle(F_n, ts[i], h, support, req.boundary);
    conv[i] = convolution_smle(F_n, ts[i], h, support);
    s_orig[i] = s_nh_variance(sample, F_n, ts[i], h);
  }

  const RngSpec rep_rng = rng.derived(2);
  std::vector<std::vector<double>> pivots(static_cast<std::size_t>(req.B),
                                          std::vector<double>(ts.size()));
  parallel_for(req.B, req.workers, [&](std::int64_t b) {
    RngStream stream = rep_rng.stream(static_cast<std::uint64_t>(b));
    const auto s1 = detail::draw_smooth_statuses(sample, probs, stream);
    detail::GroupWeights gw;
    gw.w0.resize(sample.groups());
    gw.w1.resize(sample.groups());
    for (std::size_t g = 0; g < sample.groups(); ++g) {
      gw.w1[g] = s1[g];
      gw.w0[g] = sample.multiplicities[g] - s1[g];
    }
    const auto fitted = detail::weighted_mle_values(gw);
    const auto F_b = step_from_fitted(sample.times, fitted);
    auto& row = pivots[static_cast<std::size_t>(b)];
    for (std::size_t i = 0; i < ts.size(); ++i) {
      const double s_star = detail::s_nh_from_groups(sample, gw, fitted, ts[i], h);
      if (s_star < 1e-12) {
        row[i] = std::numeric_limits<double>::quiet_NaN();
      } else {
        const double v = smle(F_b, ts[i], h, support, req.boundary);
        row[i] = (v - conv[i]) / std::sqrt(s_star);
      }
    }
  });

  ConfidenceBand band;
  band.seed = rng.master_seed;
  band.B = req.B;
  band.method = "smooth_smle";
  for (std::size_t i = 0; i < ts.size(); ++i) {
    std::vector<double> kept;
    for (int b = 0; b < req.B; ++b) {
      const double v = pivots[static_cast<std::size_t>(b)][i];
      if (!std::isnan(v)) kept.push_back(v);
    }
    if (kept.empty())
      throw DegenerateWindow("all replicates degenerate at t = " + format_number(ts[i]));
    BandRow row;
    row.t = ts[i];
    row.estimate = estimate[i];
    row.bandwidth = h;
    row.discarded = req.B - static_cast<int>(kept.size());
    const double s = std::sqrt(s_orig[i]);
    std::vector<double> tmp = kept;
    const double q_hi = detail::order_statistic(tmp, 1.0 - req.alpha / 2.0);
    const double q_lo = detail::order_statistic(tmp, req.alpha / 2.0);
    row.lower = std::clamp(estimate[i] - q_hi * s, 0.0, 1.0);
    row.upper = std::clamp(estimate[i] - q_lo * s, 0.0, 1.0);
    row.degenerate = q_hi == q_lo;
    band.rows.push_back(row);
  }
  return band;
}

}  // namespace curstat
