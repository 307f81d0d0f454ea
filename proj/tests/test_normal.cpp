#include <doctest.h>

#include <cmath>

#include "countdfm/normal.hpp"
#include "countdfm/rng.hpp"

using namespace countdfm;

TEST_CASE("norm_quantile inverts norm_cdf to machine precision") {
  // The right tail is limited by the double spacing of u near 1, so the
  // tight contract covers z <= 3.5 and the full left tail.
  for (double z = -37.0; z <= 3.5; z += 0.05)
    CHECK(norm_quantile(norm_cdf(z)) == doctest::Approx(z).epsilon(1e-12));
  CHECK(norm_quantile(0.5) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(norm_quantile(norm_cdf(-37.0)) == doctest::Approx(-37.0).epsilon(1e-9));
}

TEST_CASE("norm_quantile endpoints and symmetry") {
  CHECK(std::isinf(norm_quantile(0.0)));
  CHECK(std::isinf(norm_quantile(1.0)));
  for (double u : {1e-6, 0.01, 0.3, 0.49})
    CHECK(norm_quantile(u) == doctest::Approx(-norm_quantile(1.0 - u)).epsilon(1e-12));
}

TEST_CASE("tail survival agrees with the cdf complement in the bulk") {
  for (double z = -6.0; z <= 6.0; z += 0.1)
    CHECK(norm_sf(z) == doctest::Approx(1.0 - norm_cdf(z)).epsilon(1e-12));
}

TEST_CASE("rng streams are deterministic and mix_seed separates them") {
  Rng a(42), b(42), c(43);
  for (int i = 0; i < 100; ++i) {
    const double va = a.uniform();
    CHECK(va == b.uniform());
    CHECK(va != c.uniform());
    CHECK(va > 0.0);
    CHECK(va < 1.0);
  }
  CHECK(mix_seed(1, 0) != mix_seed(1, 1));
  CHECK(mix_seed(1, 0) != mix_seed(2, 0));
  CHECK(mix_seed(7, 3, 1) != mix_seed(7, 3, 2));
}

TEST_CASE("rng normal draws have the right first moments") {
  Rng rng(2024);
  const int n = 200000;
  double sum = 0.0, sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double z = rng.normal();
    sum += z;
    sq += z * z;
  }
  CHECK(sum / n == doctest::Approx(0.0).epsilon(0.02));
  CHECK(sq / n == doctest::Approx(1.0).epsilon(0.02));
}
