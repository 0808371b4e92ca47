#pragma once

namespace dsense {

/// Generalized exponential integral E_n(x) = int_1^inf t^-n e^{-xt} dt.
/// Requires n >= 1 and x > 0; throws ModelError otherwise.
double exp_integral_en(int n, double x);

/// e^x * E_n(x). Stays finite where e^x alone would overflow, which is the
/// form the fading distortion needs for small average channel SNR.
double exp_integral_en_scaled(int n, double x);

/// Below this argument the power series is used; above it the continued
/// fraction. Both meet 1e-14 relative agreement with quadrature around 1.
inline constexpr double kExpIntSeriesCutoff = 1.0;

} // namespace dsense
