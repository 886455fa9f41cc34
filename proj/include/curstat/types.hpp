#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <tuple>
#include <utility>
#include <vector>

#include "curstat/errors.hpp"
#include "curstat/rng.hpp"

namespace curstat {

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  double length() const { return hi - lo; }
};

// Current status data after tie-grouping: strictly increasing observation
// times, per-time counts of positive indicators and total observations.
//
// The canonical expanded order used to index per-observation bootstrap
// weights is: groups in time order, and within a tie group all status-0
// observations before the status-1 ones.
struct CurrentStatusSample {
  std::vector<double> times;         // strictly increasing
  std::vector<int> statuses;         // # of delta = 1 at each time
  std::vector<int> multiplicities;   // total # of observations at each time
  std::int64_t n = 0;
  std::optional<Interval> support_hint;

  std::size_t groups() const { return times.size(); }

  // Expanded-order offset of the first observation in group i.
  std::int64_t group_offset(std::size_t i) const { return offsets_[i]; }

  Interval support() const {
    if (support_hint) return *support_hint;
    return Interval{0.0, times.empty() ? 0.0 : times.back()};
  }

  void rebuild_offsets() {
    offsets_.resize(times.size() + 1);
    std::int64_t acc = 0;
    for (std::size_t i = 0; i < times.size(); ++i) {
      offsets_[i] = acc;
      acc += multiplicities[i];
    }
    offsets_[times.size()] = acc;
  }

  // Group index of the expanded observation j, plus its indicator.
  std::pair<std::size_t, int> locate(std::int64_t j) const {
    auto it = std::upper_bound(offsets_.begin(), offsets_.end(), j);
    const std::size_t g = static_cast<std::size_t>(it - offsets_.begin()) - 1;
    const std::int64_t within = j - offsets_[g];
    const int delta = within >= multiplicities[g] - statuses[g] ? 1 : 0;
    return {g, delta};
  }

 private:
  std::vector<std::int64_t> offsets_;
};

// Piecewise-constant distribution function: value values[i] on
// [knots[i], knots[i+1]), left_limit below the first knot, last value above
// the last knot. Evaluation is right-continuous.
struct StepDistribution {
  std::vector<double> knots;   // strictly increasing
  std::vector<double> values;  // nondecreasing, in [0,1]
  double left_limit = 0.0;

  double total_mass() const { return values.empty() ? left_limit : values.back(); }
};

inline double eval_step(const StepDistribution& F, double t) {
  auto it = std::upper_bound(F.knots.begin(), F.knots.end(), t);
  if (it == F.knots.begin()) return F.left_limit;
  return F.values[static_cast<std::size_t>(it - F.knots.begin()) - 1];
}

// Compresses per-time fitted values into a StepDistribution with jumps only
// where the fitted value strictly increases.
inline StepDistribution step_from_fitted(const std::vector<double>& times,
                                         const std::vector<double>& fitted,
                                         double left_limit = 0.0) {
  StepDistribution F;
  F.left_limit = left_limit;
  double current = left_limit;
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (fitted[i] > current) {
      F.knots.push_back(times[i]);
      F.values.push_back(fitted[i]);
      current = fitted[i];
    }
  }
  return F;
}

// Multinomial resampling weights: counts per observation in canonical
// expanded order, summing to n.
struct BootstrapWeights {
  std::vector<std::int32_t> counts;
  std::int64_t n = 0;
};

struct Grid {
  std::vector<double> points;  // strictly increasing
};

inline CurrentStatusSample ingest_sample(std::vector<std::pair<double, int>> raw_pairs) {
  if (raw_pairs.empty()) throw EmptySample("ingest_sample: no observations");
  for (const auto& [t, d] : raw_pairs) {
    if (!std::isfinite(t)) throw InvalidDatum("ingest_sample: non-finite observation time");
    if (d != 0 && d != 1) throw InvalidDatum("ingest_sample: status must be 0 or 1");
  }
  std::sort(raw_pairs.begin(), raw_pairs.end());
  CurrentStatusSample s;
  s.n = static_cast<std::int64_t>(raw_pairs.size());
  for (const auto& [t, d] : raw_pairs) {
    if (!s.times.empty() && s.times.back() == t) {
      s.statuses.back() += d;
      s.multiplicities.back() += 1;
    } else {
      s.times.push_back(t);
      s.statuses.push_back(d);
      s.multiplicities.push_back(1);
    }
  }
  s.rebuild_offsets();
  return s;
}

// Pre-grouped ingestion: rows of (time, status, count); equal times merged.
inline CurrentStatusSample ingest_grouped(std::vector<std::tuple<double, int, int>> rows) {
  if (rows.empty()) throw EmptySample("ingest_grouped: no observations");
  for (const auto& [t, d, c] : rows) {
    if (!std::isfinite(t)) throw InvalidDatum("ingest_grouped: non-finite observation time");
    if (d != 0 && d != 1) throw InvalidDatum("ingest_grouped: status must be 0 or 1");
    if (c < 1) throw InvalidDatum("ingest_grouped: count must be >= 1");
  }
  std::sort(rows.begin(), rows.end());
  CurrentStatusSample s;
  s.n = 0;
  for (const auto& [t, d, c] : rows) {
    if (!s.times.empty() && s.times.back() == t) {
      s.statuses.back() += d * c;
      s.multiplicities.back() += c;
    } else {
      s.times.push_back(t);
      s.statuses.push_back(d * c);
      s.multiplicities.push_back(c);
    }
    s.n += c;
  }
  s.rebuild_offsets();
  return s;
}

// Multinomial(n; 1/n,...,1/n) weights as n tallied uniform index draws.
// Deterministic for fixed (rng.master_seed, replicate).
inline BootstrapWeights draw_multinomial_weights(std::int64_t n, const RngSpec& rng,
                                                 std::uint64_t replicate) {
  if (n < 1) throw EmptySample("draw_multinomial_weights: n must be >= 1");
  RngStream stream = rng.stream(replicate);
  BootstrapWeights w;
  w.n = n;
  w.counts.assign(static_cast<std::size_t>(n), 0);
  for (std::int64_t i = 0; i < n; ++i) {
    ++w.counts[static_cast<std::size_t>(stream.uniform_below(static_cast<std::uint64_t>(n)))];
  }
  return w;
}

}  // namespace curstat
