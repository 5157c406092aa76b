#pragma once

// von Mises-Fisher directional statistics on S^{d-1}:
//   density  f(x; mu, kappa) = C_d(kappa) exp(kappa mu^T x)
//   C_d(kappa) = kappa^{d/2-1} / ((2 pi)^{d/2} I_{d/2-1}(kappa))
//
// Everything is evaluated in log space so that d ~ 1000 and kappa ~ 1e4 stay
// finite. log I_nu uses an integral representation for small orders and the
// Debye uniform asymptotic expansion for large ones; the ratio A_d(kappa) uses
// the Gauss continued fraction.

#include "ssp/common.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <limits>
#include <numbers>
#include <random>

namespace ssp {

struct VmfParams {
  VectorD mu;
  double kappa = 0.0;

  Eigen::Index dim() const { return mu.size(); }

  void validate() const {
    require(mu.size() >= 2, "vMF: dimension must be >= 2");
    require(std::abs(norm(mu) - 1.0) <= 1e-6, "vMF: mean direction must be a unit vector");
    require(std::isfinite(kappa) && kappa >= 0.0, "vMF: kappa must be finite and >= 0");
  }
};

namespace detail {

// Debye expansion of log I_nu(nu z), four correction terms.
inline double log_bessel_i_debye(double nu, double x) {
  const double z = x / nu;
  const double s = std::sqrt(1.0 + z * z);
  const double t = 1.0 / s;
  const double eta = s + std::log(z / (1.0 + s));
  const double t2 = t * t;
  const double u1 = t * (3.0 - 5.0 * t2) / 24.0;
  const double u2 = t2 * (81.0 - 462.0 * t2 + 385.0 * t2 * t2) / 1152.0;
  const double u3 = t * t2 * (30375.0 + t2 * (-369603.0 + t2 * (765765.0 - 425425.0 * t2))) / 414720.0;
  const double u4 =
      t2 * t2 *
      (4465125.0 + t2 * (-94121676.0 + t2 * (349922430.0 + t2 * (-446185740.0 + 185910725.0 * t2)))) /
      39813120.0;
  const double series = 1.0 + u1 / nu + u2 / (nu * nu) + u3 / (nu * nu * nu) + u4 / (nu * nu * nu * nu);
  return nu * eta - 0.5 * std::log(2.0 * std::numbers::pi * nu) - 0.25 * std::log1p(z * z) + std::log(series);
}

// I_nu(x) = (x/2)^nu / (sqrt(pi) Gamma(nu + 1/2)) * int_0^pi exp(x cos t) sin^{2 nu} t dt,
// integrated with the peak factored out.
inline double log_bessel_i_integral(double nu, double x) {
  using boost::math::quadrature::gauss_kronrod;
  const double pi = std::numbers::pi;
  const double c_star = x / (nu + std::sqrt(nu * nu + x * x));
  const double t_star = std::acos(std::min(1.0, c_star));
  auto g = [nu, x](double t) {
    const double st = std::sin(t);
    if (nu == 0.0) return x * std::cos(t);
    if (st <= 0.0) return -std::numeric_limits<double>::infinity();
    return x * std::cos(t) + 2.0 * nu * std::log(st);
  };
  const double g_star = g(t_star);
  const double st = std::sin(t_star);
  const double curvature = x * std::cos(t_star) + (st > 0.0 ? 2.0 * nu / (st * st) : 0.0);
  const double width = curvature > 0.0 ? 1.0 / std::sqrt(curvature) : 1.0;

  std::vector<double> cuts{0.0, pi};
  for (double k : {-40.0, -10.0, -3.0, 0.0, 3.0, 10.0, 40.0}) {
    const double c = t_star + k * width;
    if (c > 0.0 && c < pi) cuts.push_back(c);
  }
  std::sort(cuts.begin(), cuts.end());
  auto f = [&](double t) {
    const double v = g(t) - g_star;
    return v < -745.0 ? 0.0 : std::exp(v);
  };
  double integral = 0.0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    if (cuts[i + 1] - cuts[i] <= 0.0) continue;
    integral += gauss_kronrod<double, 31>::integrate(f, cuts[i], cuts[i + 1], 12, 1e-13);
  }
  return nu * std::log(x / 2.0) - 0.5 * std::log(pi) - std::lgamma(nu + 0.5) + g_star + std::log(integral);
}

}  // namespace detail

/// log I_nu(x) for nu >= 0, x > 0.
inline double log_bessel_i(double nu, double x) {
  require(nu >= 0.0 && x > 0.0 && std::isfinite(x), "log_bessel_i: need nu >= 0 and finite x > 0");
  constexpr double kDebyeOrder = 50.0;
  return nu >= kDebyeOrder ? detail::log_bessel_i_debye(nu, x) : detail::log_bessel_i_integral(nu, x);
}

/// A_d(kappa) = I_{d/2}(kappa) / I_{d/2-1}(kappa), the mean resultant length of a vMF.
inline double bessel_ratio_A(std::size_t d, double kappa) {
  require(d >= 2, "bessel_ratio_A: d must be >= 2");
  require(kappa >= 0.0 && std::isfinite(kappa), "bessel_ratio_A: kappa must be finite and >= 0");
  if (kappa == 0.0) return 0.0;
  const double nu = 0.5 * static_cast<double>(d) - 1.0;
  // I_{nu+1}/I_nu = 1 / (b_1 + 1 / (b_2 + ...)), b_k = 2 (nu + k) / kappa. Modified Lentz.
  constexpr double tiny = 1e-300;
  auto b = [&](double k) { return 2.0 * (nu + k) / kappa; };
  double f = b(1.0);
  double c = f;
  double dd = 0.0;
  const auto max_iter = static_cast<long>(20.0 * (kappa + nu)) + 1000;
  for (long k = 2; k < max_iter; ++k) {
    const double bk = b(static_cast<double>(k));
    dd = bk + dd;
    if (std::abs(dd) < tiny) dd = tiny;
    c = bk + 1.0 / c;
    if (std::abs(c) < tiny) c = tiny;
    dd = 1.0 / dd;
    const double delta = c * dd;
    f *= delta;
    if (std::abs(delta - 1.0) < 1e-16) break;
  }
  return 1.0 / f;
}

/// log C_d(kappa). kappa = 0 gives the uniform density, -log |S^{d-1}|.
inline double log_norm_const(std::size_t d, double kappa) {
  require(d >= 2, "log_norm_const: d must be >= 2");
  require(kappa >= 0.0 && std::isfinite(kappa), "log_norm_const: kappa must be finite and >= 0");
  const double half_d = 0.5 * static_cast<double>(d);
  if (kappa == 0.0) return -(std::log(2.0) + half_d * std::log(std::numbers::pi) - std::lgamma(half_d));
  const double nu = half_d - 1.0;
  return nu * std::log(kappa) - half_d * std::log(2.0 * std::numbers::pi) - log_bessel_i(nu, kappa);
}

/// KL(p || q) between two vMF densities of the same dimension, clamped at 0.
inline double kl_vmf(const VmfParams& p, const VmfParams& q) {
  require_shape(p.dim() == q.dim(), "kl_vmf: dimension mismatch");
  const auto d = static_cast<std::size_t>(p.dim());
  const double kl = log_norm_const(d, p.kappa) - log_norm_const(d, q.kappa) +
                    (p.kappa - q.kappa * dot(p.mu, q.mu)) * bessel_ratio_A(d, p.kappa);
  return std::max(0.0, kl);
}

/// Mean direction and Banerjee concentration estimate from unit-norm rows.
inline VmfParams fit_vmf(const RowMatrixD& samples) {
  const auto n = samples.rows();
  const auto d = samples.cols();
  require(n >= 2, "fit_vmf: need at least 2 samples");
  require(d >= 2, "fit_vmf: dimension must be >= 2");
  require(samples.allFinite(), "fit_vmf: non-finite sample");
  VectorD mean = VectorD::Zero(d);
  for (Eigen::Index i = 0; i < n; ++i) mean += samples.row(i).transpose();
  mean /= static_cast<double>(n);
  const double rbar = norm(mean);
  if (!(rbar > 1e-9)) throw NumericError("fit_vmf: mean resultant length ~0, direction undefined");
  if (rbar >= 1.0 - 1e-12) throw NumericError("fit_vmf: mean resultant length ~1, kappa diverges");
  const double dd = static_cast<double>(d);
  return {mean / rbar, rbar * (dd - rbar * rbar) / (1.0 - rbar * rbar)};
}

/// Uniform direction on S^{d-1}.
template <class Rng>
VectorD sample_uniform_sphere(Eigen::Index d, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  VectorD v(d);
  double n2 = 0.0;
  do {
    for (Eigen::Index i = 0; i < d; ++i) v[i] = normal(rng);
    n2 = dot(v, v);
  } while (n2 < 1e-24);
  return v / std::sqrt(n2);
}

/// One vMF draw by Wood's rejection scheme.
template <class Rng>
VectorD sample_vmf_one(const VmfParams& p, Rng& rng) {
  const Eigen::Index d = p.dim();
  if (p.kappa == 0.0) return sample_uniform_sphere(d, rng);

  const double dm1 = static_cast<double>(d - 1);
  const double kappa = p.kappa;
  const double b = dm1 / (2.0 * kappa + std::sqrt(4.0 * kappa * kappa + dm1 * dm1));
  const double x0 = (1.0 - b) / (1.0 + b);
  const double c = kappa * x0 + dm1 * std::log(1.0 - x0 * x0);

  std::gamma_distribution<double> gamma(0.5 * dm1, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  double w = 0.0;
  double one_minus_w = 0.0;
  for (;;) {
    const double g1 = gamma(rng);
    const double g2 = gamma(rng);
    const double z = g1 / (g1 + g2);
    const double denom = 1.0 - (1.0 - b) * z;
    w = (1.0 - (1.0 + b) * z) / denom;
    one_minus_w = 2.0 * b * z / denom;
    const double u = unif(rng);
    if (u > 0.0 && kappa * w + dm1 * std::log(1.0 - x0 * w) - c >= std::log(u)) break;
  }

  // Tangent part: uniform on the unit sphere of mu's complement, built in the
  // frame where mu = e1 and then reflected onto mu.
  VectorD x(d);
  x[0] = w;
  const VectorD v = sample_uniform_sphere(d - 1, rng);
  const double s = std::sqrt(std::max(0.0, one_minus_w * (1.0 + w)));
  x.tail(d - 1) = s * v;

  VectorD u = -p.mu;
  u[0] += 1.0;
  const double un = norm(u);
  if (un > 1e-12) {
    u /= un;
    x -= 2.0 * dot(u, x) * u;
  }
  return normalized(x);
}

template <class Rng>
RowMatrixD sample_vmf(const VmfParams& p, std::size_t n, Rng& rng) {
  p.validate();
  RowMatrixD out(static_cast<Eigen::Index>(n), p.dim());
  for (std::size_t i = 0; i < n; ++i) out.row(static_cast<Eigen::Index>(i)) = sample_vmf_one(p, rng).transpose();
  return out;
}

/// n draws, deterministic for a given seed.
inline RowMatrixD sample_vmf(const VmfParams& p, std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return sample_vmf(p, n, rng);
}

}  // namespace ssp
