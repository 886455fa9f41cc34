#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "curstat/errors.hpp"
#include "curstat/isotonic.hpp"
#include "curstat/kernel.hpp"
#include "curstat/mathutil.hpp"
#include "curstat/parallel.hpp"
#include "curstat/rng.hpp"
#include "curstat/types.hpp"

namespace curstat {

// Current status regression data: triples (T_i, X_i, Delta_i) with a scalar
// covariate, plus the score truncation parameter.
struct RegressionSample {
  std::vector<double> times;
  std::vector<double> covariates;
  std::vector<int> statuses;
  std::int64_t n = 0;
  double eps = 0.001;
};

inline RegressionSample make_regression_sample(std::vector<double> times,
                                               std::vector<double> covariates,
                                               std::vector<int> statuses, double eps = 0.001) {
  if (times.empty()) throw EmptySample("regression sample: no observations");
  if (times.size() != covariates.size() || times.size() != statuses.size())
    throw InvalidDatum("regression sample: column length mismatch");
  if (!(eps > 0.0 && eps < 0.5))
    throw InvalidDatum("regression sample: eps must be in (0, 1/2)");
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (!std::isfinite(times[i]) || !std::isfinite(covariates[i]))
      throw InvalidDatum("regression sample: non-finite datum");
    if (statuses[i] != 0 && statuses[i] != 1)
      throw InvalidDatum("regression sample: status must be 0 or 1");
  }
  RegressionSample s;
  s.n = static_cast<std::int64_t>(times.size());
  s.times = std::move(times);
  s.covariates = std::move(covariates);
  s.statuses = std::move(statuses);
  s.eps = eps;
  return s;
}

struct ScoreValue {
  double value = 0.0;
  bool empty_truncation = false;
};

struct ScoreFit {
  double beta_hat = 0.0;
  double score_at_beta = 0.0;
  double bracket_lo = 0.0;
  double bracket_hi = 0.0;
  bool no_crossing = false;
  StepDistribution profile;  // F_{n, beta_hat} over residuals
};

namespace detail {

// Profile-score evaluator. Records with zero weight are dropped up front;
// the residual sort permutation persists between evaluations, so along a
// beta sweep an insertion sort from the previous order is near-linear. All
// work happens in member buffers (no per-evaluation allocation).
class ScoreEvaluator {
 public:
  ScoreEvaluator(const RegressionSample& sample, const BootstrapWeights* weights)
      : sample_(sample) {
    if (weights && weights->n != sample.n)
      throw InvalidDatum("score: weights length must equal sample size");
    const std::size_t n = static_cast<std::size_t>(sample.n);
    for (std::size_t i = 0; i < n; ++i) {
      const double w = weights ? static_cast<double>(weights->counts[i]) : 1.0;
      if (w > 0.0) {
        rec_.push_back(i);
        w_.push_back(w);
        wx_.push_back(w * sample.covariates[i]);
      }
    }
    if (rec_.empty()) throw DegenerateDiagram("score: all bootstrap weights are zero");
    const std::size_t m = rec_.size();
    perm_.resize(m);
    std::iota(perm_.begin(), perm_.end(), std::size_t{0});
    u_.resize(m);
    gu_.reserve(m);
    gx_.reserve(m);
    gxd_.reserve(m);
    block_w_.reserve(m);
    block_s_.reserve(m);
    block_len_.reserve(m);
    fitted_.reserve(m);
    first_eval_ = true;
  }

  ScoreValue score(double beta) {
    fit(beta);
    double total = 0.0;
    bool any = false;
    for (std::size_t g = 0; g < gu_.size(); ++g) {
      const double f = fitted_[g];
      if (f < sample_.eps || f > 1.0 - sample_.eps) continue;
      any = true;
      total += gxd_[g] - f * gx_[g];
    }
    return {any ? total : 0.0, !any};
  }

  StepDistribution profile(double beta) {
    fit(beta);
    StepDistribution F;
    double current = 0.0;
    for (std::size_t g = 0; g < gu_.size(); ++g) {
      if (fitted_[g] > current) {
        F.knots.push_back(gu_[g]);
        F.values.push_back(fitted_[g]);
        current = fitted_[g];
      }
    }
    return F;
  }

 private:
  void fit(double beta) {
    const std::size_t m = rec_.size();
    for (std::size_t i = 0; i < m; ++i) {
      const std::size_t r = rec_[i];
      u_[i] = sample_.times[r] - beta * sample_.covariates[r];
    }
    // Far jumps (bisection hops after a sweep) are cheaper with a full sort;
    // nearby evaluations keep the adaptive insertion sort.
    if (first_eval_ || std::fabs(beta - last_beta_) > 0.1) {
      std::sort(perm_.begin(), perm_.end(),
                [&](std::size_t a, std::size_t b) { return u_[a] < u_[b]; });
      first_eval_ = false;
    } else {
      for (std::size_t i = 1; i < m; ++i) {
        const std::size_t key = perm_[i];
        const double ku = u_[key];
        std::size_t j = i;
        while (j > 0 && u_[perm_[j - 1]] > ku) {
          perm_[j] = perm_[j - 1];
          --j;
        }
        perm_[j] = key;
      }
    }
    last_beta_ = beta;

    // one pass: group exact residual ties, feed the PAVA block stack
    gu_.clear();
    gx_.clear();
    gxd_.clear();
    block_w_.clear();
    block_s_.clear();
    block_len_.clear();
    std::size_t i = 0;
    while (i < m) {
      const double u0 = u_[perm_[i]];
      double w = 0.0, w1 = 0.0, x = 0.0, xd = 0.0;
      for (; i < m && u_[perm_[i]] == u0; ++i) {
        const std::size_t k = perm_[i];
        const std::size_t r = rec_[k];
        w += w_[k];
        x += wx_[k];
        if (sample_.statuses[r] == 1) {
          w1 += w_[k];
          xd += wx_[k];
        }
      }
      gu_.push_back(u0);
      gx_.push_back(x);
      gxd_.push_back(xd);
      block_w_.push_back(w);
      block_s_.push_back(w1);
      block_len_.push_back(1);
      while (block_w_.size() >= 2) {
        const std::size_t t = block_w_.size() - 1;
        if (block_s_[t - 1] * block_w_[t] < block_s_[t] * block_w_[t - 1]) break;
        block_w_[t - 1] += block_w_[t];
        block_s_[t - 1] += block_s_[t];
        block_len_[t - 1] += block_len_[t];
        block_w_.pop_back();
        block_s_.pop_back();
        block_len_.pop_back();
      }
    }
    fitted_.assign(gu_.size(), 0.0);
    std::size_t g = 0;
    for (std::size_t b = 0; b < block_w_.size(); ++b) {
      const double mean = std::clamp(block_s_[b] / block_w_[b], 0.0, 1.0);
      for (std::size_t c = 0; c < block_len_[b]; ++c) fitted_[g++] = mean;
    }
  }

  const RegressionSample& sample_;
  std::vector<std::size_t> rec_;  // records with positive weight
  std::vector<double> w_, wx_;
  std::vector<std::size_t> perm_;
  std::vector<double> u_;
  bool first_eval_;
  double last_beta_ = 0.0;

  std::vector<double> gu_, gx_, gxd_, fitted_;
  std::vector<double> block_w_, block_s_;
  std::vector<std::size_t> block_len_;
};

}  // namespace detail

// MLE of the error distribution for fixed beta, over residuals T - beta X.
inline StepDistribution profile_mle(const RegressionSample& sample, double beta,
                                    const BootstrapWeights* weights = nullptr) {
  detail::ScoreEvaluator ev(sample, weights);
  return ev.profile(beta);
}

// Truncated score: sum over records with F_{n,beta}(u_i) in [eps, 1-eps] of
// (M_i) X_i (Delta_i - F_{n,beta}(u_i)).
inline ScoreValue score(const RegressionSample& sample, double beta,
                        const BootstrapWeights* weights = nullptr) {
  detail::ScoreEvaluator ev(sample, weights);
  return ev.score(beta);
}

// Simple score estimator: zero-crossing of the score over a beta grid.
// Candidates are (a) adjacent sign-change cells, refined by bisection, and
// (b) maximal runs of exact zeros (the score is piecewise constant in beta,
// so a perfectly fitting stretch shows up as a zero plateau); a plateau's
// edges are refined into its flanking cells and the candidate sits at the
// plateau midpoint. The crossing with the smallest |score| at its midpoint
// wins, ties to the smallest beta.
inline ScoreFit sse_estimate(const RegressionSample& sample, double beta_lo, double beta_hi,
                             int grid_size, const BootstrapWeights* weights = nullptr) {
  if (!(beta_lo < beta_hi)) throw InvalidDatum("sse_estimate: need beta_lo < beta_hi");
  if (grid_size < 2) throw InvalidDatum("sse_estimate: need at least 2 grid points");
  detail::ScoreEvaluator ev(sample, weights);
  std::vector<double> betas(static_cast<std::size_t>(grid_size));
  std::vector<double> scores(static_cast<std::size_t>(grid_size));
  for (int i = 0; i < grid_size; ++i) {
    betas[static_cast<std::size_t>(i)] =
        beta_lo + (beta_hi - beta_lo) * i / (grid_size - 1);
    scores[static_cast<std::size_t>(i)] = ev.score(betas[static_cast<std::size_t>(i)]).value;
  }

  const double width_tol = 1e-6 * (beta_hi - beta_lo);
  ScoreFit best;
  bool have_candidate = false;
  auto offer = [&](double lo, double hi) {
    const double mid = 0.5 * (lo + hi);
    const double smid = ev.score(mid).value;
    if (!have_candidate || std::fabs(smid) < std::fabs(best.score_at_beta)) {
      best.beta_hat = mid;
      best.score_at_beta = smid;
      best.bracket_lo = lo;
      best.bracket_hi = hi;
      best.no_crossing = false;
      have_candidate = true;
    }
  };
  // boundary of the zero set inside (nonzero, zero) cell; returns the edge
  auto refine_zero_edge = [&](double nonzero_beta, double zero_beta) {
    double a = nonzero_beta, b = zero_beta;
    while (std::fabs(b - a) > width_tol) {
      const double mid = 0.5 * (a + b);
      (ev.score(mid).value == 0.0 ? b : a) = mid;
    }
    return b;
  };

  int i = 0;
  while (i < grid_size) {
    if (scores[static_cast<std::size_t>(i)] == 0.0) {
      int j = i;
      while (j + 1 < grid_size && scores[static_cast<std::size_t>(j + 1)] == 0.0) ++j;
      const double left_edge =
          i > 0 ? refine_zero_edge(betas[static_cast<std::size_t>(i - 1)],
                                   betas[static_cast<std::size_t>(i)])
                : betas[static_cast<std::size_t>(i)];
      const double right_edge =
          j + 1 < grid_size ? refine_zero_edge(betas[static_cast<std::size_t>(j + 1)],
                                               betas[static_cast<std::size_t>(j)])
                            : betas[static_cast<std::size_t>(j)];
      offer(left_edge, right_edge);
      i = j + 1;
      continue;
    }
    if (i + 1 < grid_size && scores[static_cast<std::size_t>(i + 1)] != 0.0 &&
        scores[static_cast<std::size_t>(i)] * scores[static_cast<std::size_t>(i + 1)] < 0.0) {
      double lo = betas[static_cast<std::size_t>(i)];
      double hi = betas[static_cast<std::size_t>(i + 1)];
      double slo = scores[static_cast<std::size_t>(i)];
      while (hi - lo > width_tol) {
        const double mid = 0.5 * (lo + hi);
        const double sm = ev.score(mid).value;
        if (sm == 0.0 || slo * sm < 0.0) {
          hi = mid;
        } else {
          lo = mid;
          slo = sm;
        }
      }
      offer(lo, hi);
    }
    ++i;
  }
  if (!have_candidate) {
    std::size_t arg = 0;
    for (std::size_t k = 1; k < scores.size(); ++k)
      if (std::fabs(scores[k]) < std::fabs(scores[arg])) arg = k;
    best.beta_hat = betas[arg];
    best.score_at_beta = scores[arg];
    best.bracket_lo = best.bracket_hi = betas[arg];
    best.no_crossing = true;
  }
  best.profile = ev.profile(best.beta_hat);
  return best;
}

// Default search procedure: a coarse 41-point scan of |score| over the user
// interval picks the pilot, then the fine grid runs on [pilot-2, pilot+2].
inline ScoreFit fit_sse(const RegressionSample& sample, double search_lo, double search_hi,
                        const BootstrapWeights* weights = nullptr, int fine_grid = 401) {
  detail::ScoreEvaluator ev(sample, weights);
  double pilot = search_lo;
  double best = std::numeric_limits<double>::infinity();
  for (int i = 0; i < 41; ++i) {
    const double b = search_lo + (search_hi - search_lo) * i / 40.0;
    const double s = std::fabs(ev.score(b).value);
    if (s < best) {
      best = s;
      pilot = b;
    }
  }
  return sse_estimate(sample, pilot - 2.0, pilot + 2.0, fine_grid, weights);
}

struct SseBootstrapCi {
  double beta_hat = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  int no_crossing_count = 0;
};

// Reflected (basic) bootstrap interval from B multinomial-weighted refits:
// [2 beta_hat - q_{1-a/2}, 2 beta_hat - q_{a/2}] with q the order statistics
// of the replicate estimates. Flagged (no-crossing) replicates are excluded
// and counted.
inline SseBootstrapCi bootstrap_sse_ci(const RegressionSample& sample, double search_lo,
                                       double search_hi, int B, double alpha,
                                       const RngSpec& rng, int workers = 1,
                                       int fine_grid = 401) {
  if (B < 2) throw InvalidDatum("bootstrap_sse_ci: need B >= 2");
  if (!(alpha > 0.0 && alpha < 1.0)) throw InvalidDatum("bootstrap_sse_ci: bad alpha");
  SseBootstrapCi out;
  out.beta_hat = fit_sse(sample, search_lo, search_hi, nullptr, fine_grid).beta_hat;

  const RngSpec rep_rng = rng.derived(2);
  std::vector<double> betas(static_cast<std::size_t>(B));
  std::vector<char> flagged(static_cast<std::size_t>(B), 0);
  parallel_for(B, workers, [&](std::int64_t b) {
    const auto w = draw_multinomial_weights(sample.n, rep_rng, static_cast<std::uint64_t>(b));
    const auto fit = fit_sse(sample, search_lo, search_hi, &w, fine_grid);
    betas[static_cast<std::size_t>(b)] = fit.beta_hat;
    flagged[static_cast<std::size_t>(b)] = fit.no_crossing ? 1 : 0;
  });
  std::vector<double> kept;
  kept.reserve(static_cast<std::size_t>(B));
  for (int b = 0; b < B; ++b) {
    if (flagged[static_cast<std::size_t>(b)]) {
      ++out.no_crossing_count;
    } else {
      kept.push_back(betas[static_cast<std::size_t>(b)]);
    }
  }
  if (out.no_crossing_count * 2 > B)
    throw UnstableFit("bootstrap_sse_ci: more than half the replicates had no crossing");
  std::sort(kept.begin(), kept.end());
  const int m = static_cast<int>(kept.size());
  const int k_lo = std::clamp(static_cast<int>(std::ceil(alpha / 2.0 * m)), 1, m);
  const int k_hi = std::clamp(static_cast<int>(std::ceil((1.0 - alpha / 2.0) * m)), 1, m);
  const double q_lo = kept[static_cast<std::size_t>(k_lo - 1)];
  const double q_hi = kept[static_cast<std::size_t>(k_hi - 1)];
  out.lower = 2.0 * out.beta_hat - q_hi;
  out.upper = 2.0 * out.beta_hat - q_lo;
  return out;
}

struct WaldVariance {
  double V = 0.0;
  double W = 0.0;
  double variance = 0.0;  // V^-1 W V^-1
  double lower = 0.0;
  double upper = 0.0;
};

// Plug-in sandwich variance: E(X | u) by Nadaraya-Watson and f0 by kernel
// smoothing of the profile MLE, both with rule-of-thumb n^{-1/5} bandwidths;
// expectations restricted to the score's truncation set.
inline WaldVariance wald_variance(const RegressionSample& sample, double beta_hat,
                                  double alpha = 0.05, double bandwidth_scale = 2.0) {
  const std::size_t n = static_cast<std::size_t>(sample.n);
  std::vector<double> u(n);
  for (std::size_t i = 0; i < n; ++i)
    u[i] = sample.times[i] - beta_hat * sample.covariates[i];
  double mean_u = 0.0;
  for (double v : u) mean_u += v;
  mean_u /= static_cast<double>(n);
  double var_u = 0.0;
  for (double v : u) var_u += (v - mean_u) * (v - mean_u);
  var_u /= static_cast<double>(n > 1 ? n - 1 : 1);
  const double sd_u = std::sqrt(std::max(var_u, 1e-12));
  // E(X|u) varies on the residual scale; f0 lives on the (possibly much
  // narrower) scale of the fitted error distribution, so each gets its own
  // rule-of-thumb bandwidth.
  const double h = bandwidth_scale * sd_u * std::pow(static_cast<double>(n), -0.2);

  const auto F = profile_mle(sample, beta_hat);
  const auto jumps = detail::jumps_of(F);
  double jump_mass = 0.0, jump_mean = 0.0, jump_m2 = 0.0;
  for (std::size_t j = 0; j < jumps.x.size(); ++j) {
    jump_mass += jumps.p[j];
    jump_mean += jumps.p[j] * jumps.x[j];
    jump_m2 += jumps.p[j] * jumps.x[j] * jumps.x[j];
  }
  double sd_f = sd_u;
  if (jump_mass > 0.0) {
    jump_mean /= jump_mass;
    const double var_f = jump_m2 / jump_mass - jump_mean * jump_mean;
    sd_f = std::sqrt(std::max(var_f, 1e-12));
  }
  const double h_f = bandwidth_scale * sd_f * std::pow(static_cast<double>(n), -0.2);

  // sorted residuals so the kernel sums only touch the window [u_i-h, u_i+h]
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return u[a] < u[b]; });
  std::vector<double> u_sorted(n), x_sorted(n);
  for (std::size_t i = 0; i < n; ++i) {
    u_sorted[i] = u[order[i]];
    x_sorted[i] = sample.covariates[order[i]];
  }

  WaldVariance out;
  for (std::size_t i = 0; i < n; ++i) {
    const double ui = u_sorted[i];
    const double Fi = eval_step(F, ui);
    if (Fi < sample.eps || Fi > 1.0 - sample.eps) continue;
    // Nadaraya-Watson estimate of E(X | u_i)
    double num = 0.0, den = 0.0;
    const auto lo = std::lower_bound(u_sorted.begin(), u_sorted.end(), ui - h);
    const auto hi = std::upper_bound(u_sorted.begin(), u_sorted.end(), ui + h);
    for (auto it = lo; it != hi; ++it) {
      const std::size_t j = static_cast<std::size_t>(it - u_sorted.begin());
      const double k = triweight::density((ui - u_sorted[j]) / h);
      num += k * x_sorted[j];
      den += k;
    }
    const double ex = den > 0.0 ? num / den : 0.0;
    const double dx = x_sorted[i] - ex;
    // kernel density of the error distribution from the profile MLE jumps
    const auto jlo = std::lower_bound(jumps.x.begin(), jumps.x.end(), ui - h_f);
    const auto jhi = std::upper_bound(jumps.x.begin(), jumps.x.end(), ui + h_f);
    double f0 = 0.0;
    for (auto it = jlo; it != jhi; ++it) {
      const std::size_t j = static_cast<std::size_t>(it - jumps.x.begin());
      f0 += jumps.p[j] * triweight::density((ui - jumps.x[j]) / h_f) / h_f;
    }
    out.V += f0 * dx * dx;
    out.W += Fi * (1.0 - Fi) * dx * dx;
  }
  out.V /= static_cast<double>(n);
  out.W /= static_cast<double>(n);
  if (out.V < 1e-8) throw SingularDesign("wald_variance: V estimate is singular");
  out.variance = out.W / (out.V * out.V);
  const double z = normal_quantile(1.0 - alpha / 2.0);
  const double half = z * std::sqrt(out.variance / static_cast<double>(n));
  out.lower = beta_hat - half;
  out.upper = beta_hat + half;
  return out;
}

}  // namespace curstat
