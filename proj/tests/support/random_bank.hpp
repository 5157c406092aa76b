#pragma once

// Unstructured random banks: every row an independent uniform direction.

#include <ssp/ssp.hpp>

#include <random>

namespace testing_support {

inline ssp::RowMatrixF random_unit_rows(std::size_t rows, std::size_t d, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  ssp::RowMatrixF m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(d));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    ssp::VectorD v(static_cast<Eigen::Index>(d));
    for (auto& x : v) x = normal(rng);
    v /= v.norm();
    m.row(r) = v.cast<float>().transpose();
  }
  return m;
}

inline ssp::FeatureBank random_bank(std::size_t n, std::size_t k, std::size_t d, std::size_t h, std::size_t w,
                                    std::size_t m, std::uint64_t seed, bool with_test_local = false) {
  std::mt19937_64 rng(seed);
  ssp::FeatureBank b;
  b.manifest.dim = d;
  b.manifest.grid_h = h;
  b.manifest.grid_w = w;
  b.manifest.num_classes = n;
  b.manifest.shots = k;
  b.manifest.num_test = m;
  b.manifest.has_test_local = with_test_local;
  b.manifest.meta = {{"generator", "random"}, {"seed", seed}};
  b.train_global = random_unit_rows(n * k, d, rng);
  b.train_local = random_unit_rows(n * k * h * w, d, rng);
  b.text = random_unit_rows(n, d, rng);
  b.test_global = random_unit_rows(m, d, rng);
  std::uniform_int_distribution<int> label(0, static_cast<int>(n) - 1);
  for (std::size_t i = 0; i < m; ++i) b.test_labels.push_back(label(rng));
  if (with_test_local) b.test_local = random_unit_rows(m * h * w, d, rng);
  return b;
}

inline std::size_t uniform(std::mt19937_64& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

}  // namespace testing_support
