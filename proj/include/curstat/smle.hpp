#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "curstat/errors.hpp"
#include "curstat/kernel.hpp"
#include "curstat/mle.hpp"
#include "curstat/types.hpp"

namespace curstat {

// Smoothed maximum likelihood estimator F~_nh(t) = int IK((t-x)/h) dF_n(x).
inline double smle(const StepDistribution& F_n, double t, double h, Interval support,
                   bool boundary) {
  return smooth_cdf(F_n, t, h, support, boundary);
}

namespace detail {

// 8-point Gauss-Legendre rule; exact for polynomials up to degree 15, which
// covers the degree-13 triweight x integrated-triweight product.
constexpr double kGl8Nodes[8] = {-0.9602898564975363, -0.7966664774136267,
                                 -0.5255324099163290, -0.1834346424956498,
                                 0.1834346424956498,  0.5255324099163290,
                                 0.7966664774136267,  0.9602898564975363};
constexpr double kGl8Weights[8] = {0.1012285362903763, 0.2223810344533745,
                                   0.3137066458778873, 0.3626837833783620,
                                   0.3626837833783620, 0.3137066458778873,
                                   0.2223810344533745, 0.1012285362903763};

// kappa(d) = int_{-1}^{1} IK(d - w) K(w) dw, the contribution of one unit
// jump at distance d bandwidths from the evaluation point. Piecewise
// polynomial; panels split where IK(d - w) leaves [-1, 1].
inline double kernel_convolution_factor(double d) {
  if (d >= 2.0) return 1.0;
  if (d <= -2.0) return 0.0;
  double cuts[4] = {-1.0, 1.0, 0.0, 0.0};
  int ncuts = 2;
  if (d - 1.0 > -1.0 && d - 1.0 < 1.0) cuts[ncuts++] = d - 1.0;
  if (d + 1.0 > -1.0 && d + 1.0 < 1.0) cuts[ncuts++] = d + 1.0;
  std::sort(cuts, cuts + ncuts);
  double acc = 0.0;
  for (int s = 0; s + 1 < ncuts; ++s) {
    const double a = cuts[s];
    const double b = cuts[s + 1];
    const double mid = 0.5 * (a + b);
    const double half = 0.5 * (b - a);
    double panel = 0.0;
    for (int q = 0; q < 8; ++q) {
      const double w = mid + half * kGl8Nodes[q];
      panel += kGl8Weights[q] * triweight::integrated(d - w) * triweight::density(w);
    }
    acc += half * panel;
  }
  return acc;
}

}  // namespace detail

// Convolution SMLE int IK_h(t-u) dF~_nh(u), evaluated through the explicit
// double-kernel form sum_j p_j int IK_h(t-u) K_h(u-x_j) du.
inline double convolution_smle(const StepDistribution& F_n, double t, double h,
                               Interval /*support*/) {
  if (!(h > 0.0)) throw InvalidBandwidth("convolution_smle: bandwidth must be positive");
  const auto j = detail::jumps_of(F_n);
  double acc = j.base;
  for (std::size_t i = 0; i < j.x.size(); ++i) {
    acc += j.p[i] * detail::kernel_convolution_factor((t - j.x[i]) / h);
  }
  return std::clamp(acc, 0.0, 1.0);
}

namespace detail {

// S_nh(t) = n^-2 sum_i (M_i) K_h(t-T_i)^2 (Delta_i - F(T_i))^2, computed on
// the tie-grouped representation with per-group weight splits.
inline double s_nh_from_groups(const CurrentStatusSample& sample, const GroupWeights& gw,
                               const std::vector<double>& fitted, double t, double h) {
  const double inv_h = 1.0 / h;
  double acc = 0.0;
  // Restrict to groups within the kernel window.
  const auto lo = std::lower_bound(sample.times.begin(), sample.times.end(), t - h);
  const auto hi = std::upper_bound(sample.times.begin(), sample.times.end(), t + h);
  for (auto it = lo; it != hi; ++it) {
    const std::size_t i = static_cast<std::size_t>(it - sample.times.begin());
    const double kh = triweight::density((t - sample.times[i]) * inv_h) * inv_h;
    if (kh == 0.0) continue;
    const double f = fitted[i];
    acc += kh * kh * (gw.w1[i] * (1.0 - f) * (1.0 - f) + gw.w0[i] * f * f);
  }
  const double n = static_cast<double>(sample.n);
  return acc / (n * n);
}

}  // namespace detail

// Variance building block of the Studentized pivot. Without weights this is
// S_nh(t); with multinomial weights it is the bootstrap version S*_nh(t).
inline double s_nh_variance(const CurrentStatusSample& sample, const StepDistribution& F,
                            double t, double h, const BootstrapWeights* weights = nullptr) {
  if (!(h > 0.0)) throw InvalidBandwidth("s_nh_variance: bandwidth must be positive");
  const auto gw = weights ? detail::group_weights(sample, *weights)
                          : detail::unit_group_weights(sample);
  std::vector<double> fitted(sample.groups());
  for (std::size_t i = 0; i < sample.groups(); ++i) fitted[i] = eval_step(F, sample.times[i]);
  return detail::s_nh_from_groups(sample, gw, fitted, t, h);
}

// Pointwise model truth needed by the closed-form asymptotic moments.
struct PointwiseTruth {
  double F0;
  double f0;
  double f0_prime;
  double g;
};

struct AsymptoticMoments {
  double bias_factor;  // beta(t); actual bias is beta(t) n^{-2/5}
  double variance;     // sigma^2(t)
  double c;            // bandwidth constant, h = c n^{-1/5}
};

// beta(t) = c^2 f0'(t)/2 * int u^2 K, sigma^2(t) = F0(1-F0)/(c g) * int K^2.
inline AsymptoticMoments asymptotic_moments(const PointwiseTruth& truth, double c) {
  if (!(c > 0.0)) throw InvalidBandwidth("asymptotic_moments: c must be positive");
  if (truth.g <= 0.0) throw SingularDesign("asymptotic_moments: g(t) must be positive");
  AsymptoticMoments m;
  m.c = c;
  m.bias_factor = 0.5 * c * c * truth.f0_prime * triweight::kMoment2;
  m.variance = truth.F0 * (1.0 - truth.F0) / (c * truth.g) * triweight::kL2Norm;
  return m;
}

}  // namespace curstat
