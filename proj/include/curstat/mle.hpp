#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <vector>

#include "curstat/errors.hpp"
#include "curstat/isotonic.hpp"
#include "curstat/mathutil.hpp"
#include "curstat/types.hpp"

namespace curstat {

namespace detail {

// Per-group weight totals split by indicator, in canonical expanded order.
struct GroupWeights {
  std::vector<double> w0;  // summed weights of delta = 0 members
  std::vector<double> w1;  // summed weights of delta = 1 members
};

inline GroupWeights group_weights(const CurrentStatusSample& sample,
                                  const BootstrapWeights& weights) {
  if (weights.n != sample.n)
    throw InvalidDatum("bootstrap weights length must equal sample size");
  const std::size_t k = sample.groups();
  GroupWeights gw;
  gw.w0.assign(k, 0.0);
  gw.w1.assign(k, 0.0);
  for (std::size_t i = 0; i < k; ++i) {
    const std::int64_t off = sample.group_offset(i);
    const int zeros = sample.multiplicities[i] - sample.statuses[i];
    double a = 0.0, b = 0.0;
    for (int j = 0; j < zeros; ++j) a += weights.counts[static_cast<std::size_t>(off + j)];
    for (int j = zeros; j < sample.multiplicities[i]; ++j)
      b += weights.counts[static_cast<std::size_t>(off + j)];
    gw.w0[i] = a;
    gw.w1[i] = b;
  }
  return gw;
}

inline GroupWeights unit_group_weights(const CurrentStatusSample& sample) {
  const std::size_t k = sample.groups();
  GroupWeights gw;
  gw.w0.resize(k);
  gw.w1.resize(k);
  for (std::size_t i = 0; i < k; ++i) {
    gw.w0[i] = sample.multiplicities[i] - sample.statuses[i];
    gw.w1[i] = sample.statuses[i];
  }
  return gw;
}

// Weighted MLE values at the group times: isotonic fit of w1/(w0+w1) with
// weights w0+w1; zero-weight groups inherit their pooled block's value.
inline std::vector<double> weighted_mle_values(const GroupWeights& gw) {
  const std::size_t k = gw.w0.size();
  std::vector<double> responses(k), weights(k);
  for (std::size_t i = 0; i < k; ++i) {
    const double w = gw.w0[i] + gw.w1[i];
    weights[i] = w;
    responses[i] = w > 0.0 ? gw.w1[i] / w : 0.0;
  }
  auto fit = detail::pava(responses, weights);
  for (double& v : fit) v = std::clamp(v, 0.0, 1.0);
  return fit;
}

}  // namespace detail

// Maximum likelihood estimator of the event-time distribution: slopes of the
// greatest convex minorant of the cusum diagram with points
// (sum_{j<=i} m_j, sum_{j<=i} s_j).
inline StepDistribution fit_mle(const CurrentStatusSample& sample) {
  if (sample.groups() == 0) throw EmptySample("fit_mle: empty sample");
  const auto fitted = detail::weighted_mle_values(detail::unit_group_weights(sample));
  return step_from_fitted(sample.times, fitted);
}

// Bootstrap MLE from the weighted cusum diagram with multinomial weights.
// Jumps can sit only at observation times that received positive weight, so
// the result coincides with refitting the explicitly expanded resample.
// With unit weights this reduces exactly to fit_mle.
inline StepDistribution fit_bootstrap_mle(const CurrentStatusSample& sample,
                                          const BootstrapWeights& weights) {
  if (sample.groups() == 0) throw EmptySample("fit_bootstrap_mle: empty sample");
  const auto gw = detail::group_weights(sample, weights);
  const auto fitted = detail::weighted_mle_values(gw);
  std::vector<double> times, values;
  times.reserve(sample.groups());
  values.reserve(sample.groups());
  for (std::size_t i = 0; i < sample.groups(); ++i) {
    if (gw.w0[i] + gw.w1[i] > 0.0) {
      times.push_back(sample.times[i]);
      values.push_back(fitted[i]);
    }
  }
  return step_from_fitted(times, values);
}

inline double log_likelihood(const CurrentStatusSample& sample, const StepDistribution& F) {
  double ll = 0.0;
  for (std::size_t i = 0; i < sample.groups(); ++i) {
    const double f = eval_step(F, sample.times[i]);
    const int s1 = sample.statuses[i];
    const int s0 = sample.multiplicities[i] - sample.statuses[i];
    if (s1 > 0) {
      if (f <= 0.0) return -std::numeric_limits<double>::infinity();
      ll += s1 * std::log(f);
    }
    if (s0 > 0) {
      if (f >= 1.0) return -std::numeric_limits<double>::infinity();
      ll += s0 * std::log1p(-f);
    }
  }
  return ll / static_cast<double>(sample.n);
}

// V_n, G_n (possibly bootstrap-weighted) and the argmin process U_n.
struct SwitchProcesses {
  std::vector<double> times;   // group times, increasing
  std::vector<double> cum_v;   // V_n(times[i])
  std::vector<double> cum_g;   // G_n(times[i])

  double eval_v(double t) const { return eval_cum(cum_v, t); }
  double eval_g(double t) const { return eval_cum(cum_g, t); }

  // U_n(a): smallest minimizer of V_n(t-) - a G_n(t-) over the candidates
  // {0} + observation times, plus +infinity for the case where the diagram
  // only attains its minimum past the last observation (then F_n never
  // reaches a). Left limits are what make the switch relation
  // F_n(t) >= a <=> U_n(a) <= t exact with the right-continuous F_n.
  double argmin(double a) const {
    double best_t = 0.0;
    double best = 0.0;  // value at the candidates 0 and T_(1)
    for (std::size_t i = 0; i + 1 < times.size(); ++i) {
      const double value = cum_v[i] - a * cum_g[i];
      if (value < best) {
        best = value;
        best_t = times[i + 1];
      }
    }
    if (!times.empty() && cum_v.back() - a * cum_g.back() < best)
      return std::numeric_limits<double>::infinity();
    return best_t;
  }

 private:
  double eval_cum(const std::vector<double>& cum, double t) const {
    auto it = std::upper_bound(times.begin(), times.end(), t);
    if (it == times.begin()) return 0.0;
    return cum[static_cast<std::size_t>(it - times.begin()) - 1];
  }
};

// Jump times are restricted to groups with positive weight: the bootstrap
// processes live on the resample's support, matching fit_bootstrap_mle.
inline SwitchProcesses switch_processes(const CurrentStatusSample& sample,
                                        const BootstrapWeights* weights = nullptr) {
  const auto gw = weights ? detail::group_weights(sample, *weights)
                          : detail::unit_group_weights(sample);
  SwitchProcesses sp;
  double v = 0.0, g = 0.0;
  const double inv_n = 1.0 / static_cast<double>(sample.n);
  for (std::size_t i = 0; i < sample.groups(); ++i) {
    const double w = gw.w0[i] + gw.w1[i];
    if (w <= 0.0) continue;
    v += gw.w1[i] * inv_n;
    g += w * inv_n;
    sp.times.push_back(sample.times[i]);
    sp.cum_v.push_back(v);
    sp.cum_g.push_back(g);
  }
  return sp;
}

// L_p distance (p in {1,2}) between a step function and a smooth distribution
// function over [lo, hi], by exact piecewise splitting at the step's knots
// and adaptive quadrature between them. For p = 1 each panel is additionally
// split at the (unique, by monotonicity of F0) sign change of F0 - c.
inline double l2_distance(const StepDistribution& F, const std::function<double(double)>& F0,
                          double lo, double hi, int p = 2) {
  if (!(lo < hi)) throw InvalidDatum("l2_distance: need lo < hi");
  if (p != 1 && p != 2) throw InvalidDatum("l2_distance: p must be 1 or 2");
  std::vector<double> cuts;
  cuts.push_back(lo);
  for (double k : F.knots) {
    if (k > lo && k < hi) cuts.push_back(k);
  }
  cuts.push_back(hi);
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    const double a = cuts[i];
    const double b = cuts[i + 1];
    const double c = eval_step(F, a);
    // Treat each panel as half-open: F may jump exactly at b, so the
    // integrand there uses the left limit. Harmless for smooth F0.
    const double b_star = b - 1e-12 * (b - a);
    auto f0 = [&](double t) { return F0(std::min(t, b_star)); };
    if (p == 2) {
      total += integrate([&](double t) { const double d = c - f0(t); return d * d; }, a, b);
      continue;
    }
    const double da = f0(a) - c;
    const double db = f0(b) - c;
    if (da * db >= 0.0) {
      total += std::fabs(integrate([&](double t) { return f0(t) - c; }, a, b));
    } else {
      double xl = a, xr = b;
      while (xr - xl > 1e-13 * (hi - lo)) {
        const double mid = 0.5 * (xl + xr);
        ((f0(mid) - c) * da >= 0.0 ? xl : xr) = mid;
      }
      const double split = 0.5 * (xl + xr);
      total += std::fabs(integrate([&](double t) { return f0(t) - c; }, a, split));
      total += std::fabs(integrate([&](double t) { return f0(t) - c; }, split, b));
    }
  }
  return p == 2 ? std::sqrt(total) : total;
}

}  // namespace curstat
