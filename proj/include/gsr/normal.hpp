#pragma once

namespace gsr {

// Standard normal density phi(x) = exp(-x^2/2) / sqrt(2*pi).
double normal_pdf(double x);

// Standard normal distribution function Phi(x).  Implemented through erfc so
// the relative error stays below ~1e-14 deep into both tails, which is what
// bounds the accuracy of every kernel evaluation downstream.
double normal_cdf(double x);

// Inverse of normal_cdf on the open interval (0, 1).  A rational first guess
// is polished by two Halley steps against normal_cdf itself; absolute error
// is at machine-precision level across the full interval.  Throws
// std::invalid_argument outside (0, 1).
double normal_quantile(double u);

}  // namespace gsr
