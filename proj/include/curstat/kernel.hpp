#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "curstat/errors.hpp"
#include "curstat/types.hpp"

namespace curstat {

// Triweight kernel K(u) = (35/32)(1-u^2)^3 on [-1,1], with exact polynomial
// antiderivative and derivative.
namespace triweight {

inline double density(double u) {
  if (u <= -1.0 || u >= 1.0) return 0.0;
  const double s = 1.0 - u * u;
  return (35.0 / 32.0) * s * s * s;
}

inline double integrated(double u) {
  if (u <= -1.0) return 0.0;
  if (u >= 1.0) return 1.0;
  const double u2 = u * u;
  const double u3 = u2 * u;
  const double u5 = u3 * u2;
  const double u7 = u5 * u2;
  return 0.5 + (35.0 / 32.0) * (u - u3 + 0.6 * u5 - u7 / 7.0);
}

inline double derivative(double u) {
  if (u <= -1.0 || u >= 1.0) return 0.0;
  const double s = 1.0 - u * u;
  return -(105.0 / 16.0) * u * s * s;
}

// int u^2 K(u) du and int K(u)^2 du, exact rationals.
constexpr double kMoment2 = 1.0 / 9.0;
constexpr double kL2Norm = 350.0 / 429.0;

}  // namespace triweight

struct KernelConstants {
  double moment2;
  double l2norm;
};

inline KernelConstants kernel_constants() {
  return {triweight::kMoment2, triweight::kL2Norm};
}

namespace detail {

struct JumpSet {
  std::vector<double> x;  // jump locations
  std::vector<double> p;  // jump sizes, all > 0
  double base = 0.0;      // mass below the first jump
};

inline JumpSet jumps_of(const StepDistribution& F) {
  JumpSet j;
  j.base = F.left_limit;
  double prev = F.left_limit;
  for (std::size_t i = 0; i < F.knots.size(); ++i) {
    const double dp = F.values[i] - prev;
    if (dp > 0.0) {
      j.x.push_back(F.knots[i]);
      j.p.push_back(dp);
    }
    prev = F.values[i];
  }
  return j;
}

inline double plain_smooth_cdf(const JumpSet& j, double t, double h) {
  double acc = j.base;
  for (std::size_t i = 0; i < j.x.size(); ++i) {
    const double u = (t - j.x[i]) / h;
    if (u >= 1.0) {
      acc += j.p[i];
    } else if (u > -1.0) {
      acc += j.p[i] * triweight::integrated(u);
    }
  }
  return acc;
}

}  // namespace detail

// Kernel-smoothed distribution function int IK((t-x)/h) dF(x). With the
// boundary flag on, Schuster reflection is applied inside a bandwidth of
// either support endpoint, which forces F~(lo) = 0 and F~(hi) = 1:
//   left:  sum_j p_j [ IK_h(t-x_j) - IK_h(2 lo - t - x_j) ]
//   right: 1 - sum_j p_j [ IK_h(x_j-t) - IK_h(x_j - 2 hi + t) ]
// The result is clipped to [0,1].
inline double smooth_cdf(const StepDistribution& F, double t, double h, Interval support,
                         bool boundary) {
  if (!(h > 0.0)) throw InvalidBandwidth("smooth_cdf: bandwidth must be positive");
  const auto j = detail::jumps_of(F);
  double value;
  const bool near_left = t < support.lo + h;
  const bool near_right = t > support.hi - h;
  if (boundary && (near_left || near_right)) {
    // If both zones apply (h > half the support) use the nearer endpoint.
    const bool use_left = near_left && (!near_right || t - support.lo <= support.hi - t);
    if (use_left) {
      // arguments written relative to lo so the two terms cancel exactly at
      // t = lo (value 0 with no rounding residue)
      const double dt = t - support.lo;
      double acc = j.base;
      for (std::size_t i = 0; i < j.x.size(); ++i) {
        const double dx = j.x[i] - support.lo;
        acc += j.p[i] * (triweight::integrated((dt - dx) / h) -
                         triweight::integrated((-dt - dx) / h));
      }
      value = acc;
    } else {
      const double dt = support.hi - t;
      double acc = 0.0;
      for (std::size_t i = 0; i < j.x.size(); ++i) {
        const double dx = support.hi - j.x[i];
        acc += j.p[i] * (triweight::integrated((dt - dx) / h) -
                         triweight::integrated((-dt - dx) / h));
      }
      value = 1.0 - acc;
    }
  } else {
    value = detail::plain_smooth_cdf(j, t, h);
  }
  return std::clamp(value, 0.0, 1.0);
}

// Grid evaluation with a final isotonization pass: the pointwise formula is
// monotone within each boundary zone but the zone seams can leave a
// non-monotone step when the step function carries mass below 1.
inline std::vector<double> smooth_cdf_grid(const StepDistribution& F,
                                           const std::vector<double>& ts, double h,
                                           Interval support, bool boundary) {
  std::vector<double> out(ts.size());
  for (std::size_t i = 0; i < ts.size(); ++i) out[i] = smooth_cdf(F, ts[i], h, support, boundary);
  for (std::size_t i = 1; i < out.size(); ++i) out[i] = std::max(out[i], out[i - 1]);
  return out;
}

// Classical kernel density estimate of the observation density g, with
// reflection at both support endpoints when the boundary flag is on.
inline double smooth_density_of_g(const CurrentStatusSample& sample, double t, double h,
                                  Interval support, bool boundary) {
  if (!(h > 0.0)) throw InvalidBandwidth("smooth_density_of_g: bandwidth must be positive");
  double acc = 0.0;
  for (std::size_t i = 0; i < sample.groups(); ++i) {
    const double m = sample.multiplicities[i];
    acc += m * triweight::density((t - sample.times[i]) / h);
    if (boundary) {
      acc += m * triweight::density((t - (2.0 * support.lo - sample.times[i])) / h);
      acc += m * triweight::density((t - (2.0 * support.hi - sample.times[i])) / h);
    }
  }
  return acc / (static_cast<double>(sample.n) * h);
}

// Kernel estimate of f0' from the jumps of the MLE:
//   f~'(t) = h^-2 sum_j p_j K'((t-x_j)/h),
// with the jump measure itself reflected at the support endpoints when the
// boundary flag is on.
inline double smooth_density_derivative(const StepDistribution& F, double t, double hbar,
                                        Interval support, bool boundary) {
  if (!(hbar > 0.0))
    throw InvalidBandwidth("smooth_density_derivative: bandwidth must be positive");
  const auto j = detail::jumps_of(F);
  double acc = 0.0;
  for (std::size_t i = 0; i < j.x.size(); ++i) {
    acc += j.p[i] * triweight::derivative((t - j.x[i]) / hbar);
    if (boundary) {
      acc += j.p[i] * triweight::derivative((t - (2.0 * support.lo - j.x[i])) / hbar);
      acc += j.p[i] * triweight::derivative((t - (2.0 * support.hi - j.x[i])) / hbar);
    }
  }
  return acc / (hbar * hbar);
}

}  // namespace curstat
