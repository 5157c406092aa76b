#pragma once

#include "ssp/binary_io.hpp"
#include "ssp/common.hpp"

#include <Eigen/Eigenvalues>

namespace ssp {

/// Orthonormal basis B (d x r) of a principal subspace. The projector is
/// P = B B^T; it is never materialized by the library itself.
struct Subspace {
  MatrixD basis;  // d x r, orthonormal columns
  VectorD sigma;  // r retained singular values, descending
  std::size_t source_rows = 0;
  std::size_t requested_rank = 0;

  std::size_t dim() const { return static_cast<std::size_t>(basis.rows()); }
  std::size_t rank() const { return static_cast<std::size_t>(basis.cols()); }
  bool clamped() const { return rank() < requested_rank; }

  /// Dense d x d projector, for tests and diagnostics.
  MatrixD projector() const { return basis * basis.transpose(); }

  static Subspace identity(std::size_t d) {
    const auto n = static_cast<Eigen::Index>(d);
    return {MatrixD::Identity(n, n), VectorD::Ones(n), d, d};
  }
};

namespace detail {

// Modified Gram-Schmidt, two passes. Keeps the column order so the leading
// (largest-sigma) directions are the least perturbed.
inline void reorthonormalize(MatrixD& b) {
  for (Eigen::Index j = 0; j < b.cols(); ++j) {
    for (int pass = 0; pass < 2; ++pass) {
      for (Eigen::Index k = 0; k < j; ++k) b.col(j) -= b.col(k).dot(b.col(j)) * b.col(k);
    }
    const double n = b.col(j).norm();
    if (!(n > 0.0)) throw NumericError("principal_subspace: lost a basis direction during orthonormalization");
    b.col(j) /= n;
  }
}

// Deterministic sign: the entry with the largest magnitude is made positive.
inline void canonical_signs(MatrixD& b) {
  for (Eigen::Index j = 0; j < b.cols(); ++j) {
    Eigen::Index arg = 0;
    b.col(j).cwiseAbs().maxCoeff(&arg);
    if (b(arg, j) < 0.0) b.col(j) = -b.col(j);
  }
}

}  // namespace detail

/// Top right-singular subspace of the rows of X.
///
/// The retained rank is min(r_requested, numerical rank), with the numerical
/// rank counting singular values above rank_rel_tol * sigma_1. Works on the
/// smaller of the two Gram matrices (X X^T when m < d, X^T X otherwise).
/// Within equal-sigma blocks the basis is whatever the eigensolver returns;
/// only B B^T is meaningful.
inline Subspace principal_subspace(const RowMatrixD& x, std::size_t r_requested, double rank_rel_tol = 1e-6) {
  const Eigen::Index m = x.rows();
  const Eigen::Index d = x.cols();
  require(m >= 1, "principal_subspace: need at least one row");
  require(d >= 2, "principal_subspace: dimension must be >= 2");
  require(r_requested >= 1, "principal_subspace: requested rank must be >= 1");
  require(rank_rel_tol >= 0.0 && rank_rel_tol < 1.0, "principal_subspace: rank_rel_tol must be in [0, 1)");
  if (!x.allFinite()) throw NumericError("principal_subspace: non-finite input");
  if (x.cwiseAbs().maxCoeff() == 0.0) throw NumericError("principal_subspace: input matrix is all zero");

  const bool wide = m < d;
  const MatrixD gram = wide ? MatrixD(x * x.transpose()) : MatrixD(x.transpose() * x);
  Eigen::SelfAdjointEigenSolver<MatrixD> eig(gram);
  if (eig.info() != Eigen::Success) throw NumericError("principal_subspace: eigensolver failed");

  // Eigen returns ascending eigenvalues.
  const Eigen::Index n = gram.rows();
  VectorD sigma(n);
  for (Eigen::Index i = 0; i < n; ++i) sigma[i] = std::sqrt(std::max(0.0, eig.eigenvalues()[n - 1 - i]));
  if (!(sigma[0] > 0.0)) throw NumericError("principal_subspace: input matrix is all zero");

  Eigen::Index numerical_rank = 0;
  while (numerical_rank < n && sigma[numerical_rank] > rank_rel_tol * sigma[0]) ++numerical_rank;
  const auto r = std::min<Eigen::Index>(static_cast<Eigen::Index>(r_requested), numerical_rank);

  MatrixD basis(d, r);
  for (Eigen::Index i = 0; i < r; ++i) {
    const auto vec = eig.eigenvectors().col(n - 1 - i);
    if (wide)
      basis.col(i) = x.transpose() * vec / sigma[i];
    else
      basis.col(i) = vec;
  }
  detail::reorthonormalize(basis);
  detail::canonical_signs(basis);
  return {std::move(basis), sigma.head(r), static_cast<std::size_t>(m), r_requested};
}

/// B (B^T f).
inline VectorD project(const Subspace& s, const VectorD& f) {
  require_shape(static_cast<std::size_t>(f.size()) == s.dim(), "project: dimension mismatch");
  return s.basis * (s.basis.transpose() * f);
}

/// ||(I - B B^T) f||^2 = ||f||^2 - ||B^T f||^2, clamped at zero.
inline double residual_sq_norm(const Subspace& s, const VectorD& f) {
  require_shape(static_cast<std::size_t>(f.size()) == s.dim(), "residual_sq_norm: dimension mismatch");
  const VectorD coeffs = s.basis.transpose() * f;
  return std::max(0.0, dot(f, f) - dot(coeffs, coeffs));
}

// Binary record: "SSPB", u32 version, u32 d, u32 r, u32 source_rows,
// r x f32 sigma, d*r x f32 basis (column-major).

inline void write_subspace(binio::Writer& w, const Subspace& s) {
  w.bytes("SSPB");
  w.u32(1);
  w.u32(static_cast<std::uint32_t>(s.dim()));
  w.u32(static_cast<std::uint32_t>(s.rank()));
  w.u32(static_cast<std::uint32_t>(s.source_rows));
  for (Eigen::Index i = 0; i < s.sigma.size(); ++i) w.f32(static_cast<float>(s.sigma[i]));
  for (Eigen::Index c = 0; c < s.basis.cols(); ++c)
    for (Eigen::Index r = 0; r < s.basis.rows(); ++r) w.f32(static_cast<float>(s.basis(r, c)));
}

/// Reads one record. The basis is re-orthonormalized after widening from f32.
inline Subspace read_subspace(binio::Reader& in) {
  if (in.bytes(4) != "SSPB") throw IoError("bad subspace record magic");
  if (const auto v = in.u32(); v != 1) throw IoError("unsupported subspace record version " + std::to_string(v));
  const auto d = static_cast<Eigen::Index>(in.u32());
  const auto r = static_cast<Eigen::Index>(in.u32());
  const auto rows = in.u32();
  if (d < 2 || r < 1 || r > d) throw IoError("invalid subspace record dimensions");
  Subspace s;
  s.source_rows = rows;
  s.requested_rank = static_cast<std::size_t>(r);
  s.sigma.resize(r);
  for (Eigen::Index i = 0; i < r; ++i) s.sigma[i] = in.f32();
  s.basis.resize(d, r);
  for (Eigen::Index c = 0; c < r; ++c)
    for (Eigen::Index k = 0; k < d; ++k) s.basis(k, c) = in.f32();
  if (!s.basis.allFinite() || !s.sigma.allFinite()) throw IoError("non-finite subspace record");
  detail::reorthonormalize(s.basis);
  return s;
}

}  // namespace ssp
