#pragma once

#include <cmath>

namespace countdfm {

inline constexpr double kInvSqrt2Pi = 0.39894228040143267794;

inline double norm_pdf(double z) { return kInvSqrt2Pi * std::exp(-0.5 * z * z); }

/// Standard normal CDF, accurate in both tails via erfc.
inline double norm_cdf(double z) { return 0.5 * std::erfc(-z * M_SQRT1_2); }

/// Upper tail P(Z > z).
inline double norm_sf(double z) { return 0.5 * std::erfc(z * M_SQRT1_2); }

/// Inverse of norm_cdf on (0,1); returns +-infinity at the endpoints.
double norm_quantile(double u);

}  // namespace countdfm
