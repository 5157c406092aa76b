#pragma once

#include "ssp/common.hpp"

#include <numeric>

namespace ssp {

/// k cells with the largest scores, indices ascending.
struct RegionSelection {
  std::vector<std::size_t> indices;
  std::vector<double> scores;  // aligned with indices
};

/// score[j] = <ref, local[j]>. Rows are assumed unit-normalized, so this is
/// the cosine similarity.
inline std::vector<double> similarity_scores(const VectorD& ref, const RowMatrixD& local) {
  require_shape(ref.size() == local.cols(), "similarity_scores: dimension mismatch");
  std::vector<double> scores(static_cast<std::size_t>(local.rows()));
  const std::span<const double> r(ref.data(), static_cast<std::size_t>(ref.size()));
  for (Eigen::Index j = 0; j < local.rows(); ++j)
    scores[static_cast<std::size_t>(j)] = dot(r, std::span<const double>(local.row(j).data(), r.size()));
  return scores;
}

/// Top-k by score; equal scores prefer the smaller index.
inline RegionSelection top_k(std::span<const double> scores, std::size_t k) {
  require(k >= 1, "top_k: k must be >= 1");
  require(k <= scores.size(), "top_k: k exceeds the number of scores");
  for (double s : scores)
    if (!std::isfinite(s)) throw NumericError("top_k: non-finite score");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto better = [&](std::size_t a, std::size_t b) { return scores[a] > scores[b] || (scores[a] == scores[b] && a < b); };
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(), better);
  order.resize(k);
  std::sort(order.begin(), order.end());
  RegionSelection sel;
  sel.indices = order;
  for (auto i : order) sel.scores.push_back(scores[i]);
  return sel;
}

/// Similarity scores laid out row-major on the h x w grid. With `normalized`
/// the grid is min-max scaled to [0, 1]; a constant grid becomes all zeros.
inline RowMatrixD similarity_map(const VectorD& ref, const RowMatrixD& local, std::size_t h, std::size_t w,
                                 bool normalized) {
  require_shape(h >= 1 && w >= 1 && static_cast<Eigen::Index>(h * w) == local.rows(),
                "similarity_map: grid shape does not match the number of local rows");
  const auto scores = similarity_scores(ref, local);
  RowMatrixD grid(static_cast<Eigen::Index>(h), static_cast<Eigen::Index>(w));
  for (std::size_t i = 0; i < scores.size(); ++i)
    grid(static_cast<Eigen::Index>(i / w), static_cast<Eigen::Index>(i % w)) = scores[i];
  if (normalized) {
    const double lo = grid.minCoeff();
    const double hi = grid.maxCoeff();
    if (hi > lo)
      grid = (grid.array() - lo) / (hi - lo);
    else
      grid.setZero();
  }
  return grid;
}

}  // namespace ssp
