#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace ssp {

using MatrixD = Eigen::MatrixXd;
using VectorD = Eigen::VectorXd;
using RowMatrixF = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowMatrixD = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Error hierarchy. The CLI maps these onto its exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

class ProvenanceError : public Error {
 public:
  ProvenanceError(std::uint64_t expected, std::uint64_t actual)
      : Error("provenance mismatch: model digest " + hex(expected) + " vs bank digest " + hex(actual)),
        expected_(expected),
        actual_(actual) {}

  std::uint64_t expected() const { return expected_; }
  std::uint64_t actual() const { return actual_; }

  static std::string hex(std::uint64_t v) {
    static constexpr char digits[] = "0123456789abcdef";
    std::string s(16, '0');
    for (int i = 15; i >= 0; --i, v >>= 4) s[static_cast<std::size_t>(i)] = digits[v & 0xf];
    return s;
  }

 private:
  std::uint64_t expected_;
  std::uint64_t actual_;
};

inline void require(bool cond, const std::string& what) {
  if (!cond) throw DomainError(what);
}

inline void require_shape(bool cond, const std::string& what) {
  if (!cond) throw ShapeError(what);
}

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Plain sequential dot product. Every similarity in the library goes
/// through this so that identical inputs give identical bits on every path.
inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double dot(const VectorD& a, const VectorD& b) {
  if (a.size() != b.size()) throw ShapeError("dot: dimension mismatch");
  return dot(std::span<const double>(a.data(), static_cast<std::size_t>(a.size())),
             std::span<const double>(b.data(), static_cast<std::size_t>(b.size())));
}

inline double norm(const VectorD& v) { return std::sqrt(dot(v, v)); }

/// v / ||v||; throws NumericError when the norm is below `min_norm`.
inline VectorD normalized(const VectorD& v, double min_norm = 1e-12) {
  const double n = norm(v);
  if (!(n >= min_norm)) throw NumericError("cannot normalize a (near) zero vector");
  return v / n;
}

inline VectorD to_double(std::span<const float> row) {
  VectorD v(static_cast<Eigen::Index>(row.size()));
  for (std::size_t i = 0; i < row.size(); ++i) v[static_cast<Eigen::Index>(i)] = row[i];
  return v;
}

inline VectorD row_as_double(const RowMatrixF& m, Eigen::Index r) {
  return to_double(std::span<const float>(m.row(r).data(), static_cast<std::size_t>(m.cols())));
}

/// Global thread cap used by the parallel loops below. 0 means hardware concurrency.
inline unsigned& thread_cap() {
  static unsigned cap = 0;
  return cap;
}

inline unsigned effective_threads() {
  unsigned t = thread_cap();
  if (t == 0) t = std::max(1u, std::thread::hardware_concurrency());
  return t;
}

/// Runs fn(i) for i in [0, n). Every index is visited exactly once and callers
/// write only to slot i, so results do not depend on the thread count.
template <class Fn>
void parallel_for(std::size_t n, Fn&& fn) {
  const std::size_t workers = std::min<std::size_t>(effective_threads(), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < n; i += workers) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace ssp
