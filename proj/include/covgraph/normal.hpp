#pragma once

namespace covgraph {

/// Standard normal CDF, via erfc for accuracy in the lower tail.
double normal_cdf(double x);

double normal_pdf(double x);

/// Inverse of normal_cdf on (0, 1). Rational initial guess refined with one
/// Halley step; |normal_cdf(normal_quantile(u)) - u| <= 1e-9.
double normal_quantile(double u);

}  // namespace covgraph
