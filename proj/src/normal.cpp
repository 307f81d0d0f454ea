#include "countdfm/normal.hpp"

#include <limits>

#include "countdfm/errors.hpp"

namespace countdfm {

double norm_quantile(double u) {
  if (u <= 0.0 || u >= 1.0) {
    if (u == 0.0) return -std::numeric_limits<double>::infinity();
    if (u == 1.0) return std::numeric_limits<double>::infinity();
    throw DomainError("norm_quantile: argument outside [0,1]");
  }
  // Rational initial guess (Abramowitz & Stegun 26.2.22, |err| < 3e-4),
  // then Halley steps against the erfc-based CDF to machine precision.
  const double q = u < 0.5 ? u : 1.0 - u;
  const double t = std::sqrt(-2.0 * std::log(q));
  double x = t - (2.30753 + 0.27061 * t) / (1.0 + t * (0.99229 + 0.04481 * t));
  if (u < 0.5) x = -x;
  for (int it = 0; it < 3; ++it) {
    const double err = norm_cdf(x) - u;
    const double pdf = norm_pdf(x);
    if (pdf <= 0.0) break;
    const double r = err / pdf;
    x -= r / (1.0 + 0.5 * x * r);
  }
  return x;
}

}  // namespace countdfm
