#pragma once

#include <cstddef>
#include <vector>

#include "curstat/errors.hpp"

namespace curstat {

// Cumulative sum diagram: points (x[i], y[i]) with x[0] = y[0] = 0, x
// nondecreasing. Repeated x values (zero-weight points) are allowed.
struct CusumDiagram {
  std::vector<double> x;
  std::vector<double> y;
};

namespace detail {

// Stack-based pool-adjacent-violators over positive-weight points only.
// Blocks with equal pooled means are merged. Zero-weight points receive the
// value of the block holding their nearest positive-weight neighbor to the
// left (to the right when no positive weight exists on the left).
inline std::vector<double> pava(const std::vector<double>& values,
                                const std::vector<double>& weights) {
  const std::size_t k = values.size();
  std::vector<std::size_t> active;  // indices with positive weight
  active.reserve(k);
  for (std::size_t i = 0; i < k; ++i) {
    if (weights[i] > 0.0) active.push_back(i);
  }
  if (active.empty()) throw DegenerateDiagram("isotonic fit: all weights are zero");

  struct Block {
    double weight;
    double weighted_sum;
    std::size_t count;  // # of active points pooled
  };
  std::vector<Block> blocks;
  blocks.reserve(active.size());
  for (std::size_t idx : active) {
    blocks.push_back({weights[idx], weights[idx] * values[idx], 1});
    while (blocks.size() >= 2) {
      const Block& prev = blocks[blocks.size() - 2];
      const Block& last = blocks.back();
      if (prev.weighted_sum * last.weight < last.weighted_sum * prev.weight) break;
      Block merged{prev.weight + last.weight, prev.weighted_sum + last.weighted_sum,
                   prev.count + last.count};
      blocks.pop_back();
      blocks.back() = merged;
    }
  }

  // Expand block means back onto the active points, then fill zero-weight
  // points from their left positive neighbor (right neighbor before the
  // first active point).
  std::vector<double> fit(k);
  std::size_t a = 0;
  for (const Block& blk : blocks) {
    const double mean = blk.weighted_sum / blk.weight;
    for (std::size_t c = 0; c < blk.count; ++c) fit[active[a++]] = mean;
  }
  const std::size_t first_active = active.front();
  for (std::size_t i = 0; i < first_active; ++i) fit[i] = fit[first_active];
  for (std::size_t i = first_active + 1; i < k; ++i) {
    if (weights[i] <= 0.0) fit[i] = fit[i - 1];
  }
  return fit;
}

}  // namespace detail

// Minimizes sum_i w_i (values_i - f_i)^2 over nondecreasing f.
inline std::vector<double> weighted_isotonic_fit(const std::vector<double>& values,
                                                 const std::vector<double>& weights) {
  if (values.size() != weights.size())
    throw InvalidDatum("weighted_isotonic_fit: values/weights length mismatch");
  if (values.empty()) throw DegenerateDiagram("weighted_isotonic_fit: empty input");
  for (double w : weights) {
    if (w < 0.0) throw InvalidDatum("weighted_isotonic_fit: negative weight");
  }
  return detail::pava(values, weights);
}

// Left derivative of the greatest convex minorant of the diagram, one slope
// per segment between consecutive points. Segments of zero width inherit the
// slope of their pooled block.
inline std::vector<double> gcm_slopes(const CusumDiagram& diagram) {
  const std::size_t npts = diagram.x.size();
  if (npts != diagram.y.size()) throw InvalidDatum("gcm_slopes: x/y length mismatch");
  if (npts < 2) throw DegenerateDiagram("gcm_slopes: need at least 2 diagram points");
  std::vector<double> responses(npts - 1);
  std::vector<double> weights(npts - 1);
  for (std::size_t i = 1; i < npts; ++i) {
    const double dx = diagram.x[i] - diagram.x[i - 1];
    if (dx < 0.0) throw InvalidDatum("gcm_slopes: abscissae must be nondecreasing");
    weights[i - 1] = dx;
    responses[i - 1] = dx > 0.0 ? (diagram.y[i] - diagram.y[i - 1]) / dx : 0.0;
  }
  return detail::pava(responses, weights);
}

}  // namespace curstat
