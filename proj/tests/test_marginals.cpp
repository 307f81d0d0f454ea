#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "countdfm/errors.hpp"
#include "countdfm/marginals.hpp"
#include "countdfm/normal.hpp"
#include "countdfm/rng.hpp"

using namespace countdfm;

TEST_CASE("quantile matches the generalized inverse") {
  const auto bern = MarginalSpec::bernoulli(0.3);
  CHECK(quantile(bern, 0.5) == 0);   // F(0) = 0.7 >= 0.5
  CHECK(quantile(bern, 0.9) == 1);   // F(0) = 0.7 < 0.9 <= F(1)
  const auto pois = MarginalSpec::poisson(1.0);
  CHECK(quantile(pois, 0.5) == 1);   // F(0) = e^{-1} < 0.5 <= F(1)
  CHECK_THROWS_AS(quantile(pois, 0.0), DomainError);
  CHECK_THROWS_AS(quantile(pois, 1.0), DomainError);
}

TEST_CASE("quantile is monotone in u") {
  for (const auto& spec : {MarginalSpec::poisson(3.0), MarginalSpec::neg_binomial(3, 0.4),
                           MarginalSpec::multinomial({0.2, 0.3, 0.5})}) {
    int prev = spec.support_min();
    for (double u = 0.01; u < 1.0; u += 0.01) {
      const int v = quantile(spec, u);
      CHECK(v >= prev);
      prev = v;
    }
  }
}

TEST_CASE("fit_marginal recovers the stated estimators") {
  CHECK(fit_marginal({1, 0, 1, 1}, Family::Bernoulli).params()[0] == doctest::Approx(0.75));
  CHECK(fit_marginal({0, 2, 4}, Family::Poisson).params()[0] == doctest::Approx(2.0));
  const auto multi = fit_marginal({1, 1, 2, 3}, Family::Multinomial);
  REQUIRE(multi.params().size() == 3);
  CHECK(multi.params()[0] == doctest::Approx(0.5).epsilon(1e-5));
  CHECK(multi.params()[1] == doctest::Approx(0.25).epsilon(1e-5));
  CHECK(multi.params()[2] == doctest::Approx(0.25).epsilon(1e-5));
  // moment matching for the negative binomial with fixed successes
  const auto nb = fit_marginal({2, 4, 6}, Family::NegBinomial, {.nb_successes = 3});
  CHECK(nb.params()[0] == doctest::Approx(3.0 / 7.0));
}

TEST_CASE("fit_marginal rejects degenerate boundary series") {
  CHECK_THROWS_AS(fit_marginal({0, 0, 0, 0}, Family::Bernoulli), DegenerateMarginalError);
  CHECK_THROWS_AS(fit_marginal({1, 1, 1}, Family::Bernoulli), DegenerateMarginalError);
  CHECK_THROWS_AS(fit_marginal({0, 0, 0}, Family::Poisson), DegenerateMarginalError);
  CHECK_THROWS_AS(fit_marginal({1, 1, 1}, Family::Multinomial, {.multinomial_m = 4}),
                  DegenerateMarginalError);
  // interior-only support gets clamped cells rather than an error
  const auto m = fit_marginal({2, 2, 3, 2}, Family::Multinomial, {.multinomial_m = 4});
  CHECK(m.params()[0] > 0.0);
  CHECK(m.params()[3] > 0.0);
}

TEST_CASE("hermite coefficients: Bernoulli closed form") {
  const auto coeffs = hermite_coefficients(MarginalSpec::bernoulli(0.5), 10);
  CHECK(coeffs.g[1] == doctest::Approx(0.3989422804).epsilon(1e-9));  // 1/sqrt(2 pi)
  CHECK(coeffs.g[2] == doctest::Approx(0.0).epsilon(1e-12));          // He_1(0) = 0
  // general p: g_1 = pdf at the threshold
  const auto c2 = hermite_coefficients(MarginalSpec::bernoulli(0.3), 10);
  CHECK(c2.g[1] == doctest::Approx(norm_pdf(norm_quantile(0.7))).epsilon(1e-12));
}

TEST_CASE("hermite tail truncation for Poisson(10) stays small") {
  const auto coeffs = hermite_coefficients(MarginalSpec::poisson(10.0), 100);
  CHECK(coeffs.tail_n < 60);
  CHECK(coeffs.tail_n > 25);
  const auto spec = MarginalSpec::poisson(10.0);
  CHECK(1.0 - spec.cdf(spec.support_max() - 1) >= 0.0);
  CHECK(spec.cdf(spec.support_max()) == 1.0);
}

TEST_CASE("hermite variance identity: Bessel bound and convergence in K") {
  // The tail of sum_k k! g_k^2 decays like K^{-1/2} for indicator-type
  // transforms (exactly 5.08% of the variance at K=100 for Bernoulli(0.5)),
  // so the identity is approached from below at that rate.
  for (const auto& spec :
       {MarginalSpec::bernoulli(0.2), MarginalSpec::bernoulli(0.5), MarginalSpec::bernoulli(0.7),
        MarginalSpec::poisson(0.1), MarginalSpec::poisson(1.0), MarginalSpec::poisson(10.0)}) {
    const auto coeffs = hermite_coefficients(spec, 100);
    double sum = 0.0, factorial = 1.0;
    std::vector<double> partial;
    for (int k = 1; k <= 100; ++k) {
      factorial *= k;
      sum += factorial * coeffs.g[static_cast<std::size_t>(k)] *
             coeffs.g[static_cast<std::size_t>(k)];
      CHECK(sum <= coeffs.variance + 1e-8);  // partial sums never exceed the variance
      partial.push_back(sum);
    }
    CHECK(coeffs.variance - sum < 0.06 * coeffs.variance);
    CHECK(coeffs.variance - partial[99] < coeffs.variance - partial[24]);  // gap shrinks with K
  }
  // exact tail for Bernoulli(0.5) at K=100, from high-precision arithmetic
  const auto b5 = hermite_coefficients(MarginalSpec::bernoulli(0.5), 100);
  double sum = 0.0, factorial = 1.0;
  for (int k = 1; k <= 100; ++k) {
    factorial *= k;
    sum += factorial * b5.g[static_cast<std::size_t>(k)] * b5.g[static_cast<std::size_t>(k)];
  }
  CHECK(sum == doctest::Approx(0.2372908420550930).epsilon(1e-10));
}

TEST_CASE("bin bounds: Bernoulli and Poisson displays") {
  const double p = 0.35;
  const auto bern = MarginalSpec::bernoulli(p);
  const auto b1 = bin_bounds(bern, 1);
  CHECK(b1.lo == doctest::Approx(norm_quantile(1.0 - p)).epsilon(1e-12));
  CHECK(std::isinf(b1.hi));
  const auto b0 = bin_bounds(bern, 0);
  CHECK(std::isinf(b0.lo));
  CHECK(b0.lo < 0.0);
  CHECK(b0.hi == doctest::Approx(norm_quantile(1.0 - p)).epsilon(1e-12));

  const auto pois = MarginalSpec::poisson(1.0);
  const auto pb = bin_bounds(pois, 0);
  CHECK(std::isinf(pb.lo));
  CHECK(pb.hi == doctest::Approx(-0.337475).epsilon(1e-4));  // Phi^{-1}(e^{-1})
  CHECK_THROWS_AS(bin_bounds(pois, -1), DomainError);
}

TEST_CASE("bins partition the real line consistently with the quantile") {
  Rng rng(7);
  for (const auto& spec :
       {MarginalSpec::bernoulli(0.25), MarginalSpec::poisson(2.5), MarginalSpec::neg_binomial(3, 0.6),
        MarginalSpec::multinomial({0.1, 0.4, 0.2, 0.3})}) {
    for (int trial = 0; trial < 500; ++trial) {
      const double z = std::clamp(2.5 * rng.normal(), -6.0, 6.0);
      const int n = quantile(spec, norm_cdf(z));
      const auto b = bin_bounds(spec, n);
      CHECK(z > b.lo);
      CHECK(z <= b.hi);
    }
    // Phi-measures of the bins reproduce the pmf
    for (int n = spec.support_min(); n <= spec.support_max(); ++n) {
      const auto b = bin_bounds(spec, n);
      CHECK(norm_cdf(b.hi) - norm_cdf(b.lo) == doctest::Approx(spec.pmf(n)).epsilon(1e-12));
    }
  }
}

TEST_CASE("marginal moments and mode") {
  const auto pois = MarginalSpec::poisson(4.0);
  CHECK(pois.mean() == doctest::Approx(4.0).epsilon(1e-10));
  CHECK(pois.variance() == doctest::Approx(4.0).epsilon(1e-9));
  CHECK(pois.mode() == 3);  // ties between 3 and 4 break toward the smaller
  const auto nb = MarginalSpec::neg_binomial(3, 0.4);
  CHECK(nb.mean() == doctest::Approx(3.0 * 0.6 / 0.4).epsilon(1e-9));
  CHECK(nb.variance() == doctest::Approx(3.0 * 0.6 / 0.16).epsilon(1e-8));
}
