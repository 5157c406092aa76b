#pragma once

// log I_nu(x) from the ascending power series in 50-digit arithmetic.

#include <boost/multiprecision/cpp_bin_float.hpp>

namespace oracle {

inline double log_bessel_i_series(double nu, double x) {
  using big = boost::multiprecision::cpp_bin_float_50;
  const big half_x = big(x) / 2;
  const big q = half_x * half_x;
  // term_0 = (x/2)^nu / Gamma(nu + 1), term_{k+1} = term_k * q / ((k+1)(k+1+nu))
  big term = 1;
  big sum = 0;
  for (int k = 0; k < 200000; ++k) {
    sum += term;
    term *= q / (big(k + 1) * (big(k + 1) + big(nu)));
    if (k > x && term < sum * big("1e-40")) break;
  }
  const big log_prefix = big(nu) * log(half_x) - boost::multiprecision::lgamma(big(nu) + 1);
  return static_cast<double>(log_prefix + log(sum));
}

}  // namespace oracle
