#include <doctest.h>

#include <cmath>
#include <vector>

#include "countdfm/errors.hpp"
#include "countdfm/link.hpp"
#include "countdfm/normal.hpp"
#include "oracles.hpp"

using namespace countdfm;

namespace {

LinkFunction make_link(const MarginalSpec& a, const MarginalSpec& b, int K = 100) {
  return build_link(hermite_coefficients(a, K), hermite_coefficients(b, K));
}

// the marginal families and parameters of the illustrative link plots
std::vector<std::pair<MarginalSpec, MarginalSpec>> figure_pairs() {
  std::vector<MarginalSpec> bern = {MarginalSpec::bernoulli(0.2), MarginalSpec::bernoulli(0.4),
                                    MarginalSpec::bernoulli(0.7)};
  std::vector<MarginalSpec> pois = {MarginalSpec::poisson(0.1), MarginalSpec::poisson(1.0),
                                    MarginalSpec::poisson(10.0)};
  std::vector<MarginalSpec> nb = {MarginalSpec::neg_binomial(3, 0.2),
                                  MarginalSpec::neg_binomial(3, 0.4),
                                  MarginalSpec::neg_binomial(3, 0.7)};
  std::vector<std::pair<MarginalSpec, MarginalSpec>> pairs;
  for (const auto& family : {bern, pois, nb})
    for (std::size_t i = 0; i < family.size(); ++i)
      for (std::size_t j = i + 1; j < family.size(); ++j) pairs.push_back({family[i], family[j]});
  return pairs;
}

}  // namespace

// The attainable-bound series has a k^{-1/2} tail for indicator-type
// transforms, so the K=100 truncation sits a few percent inside the closed
// forms; the checks below assert that envelope plus convergence in K.
TEST_CASE("identical marginals give rho_plus = 1 up to the truncation tail") {
  for (const auto& spec : {MarginalSpec::bernoulli(0.3), MarginalSpec::poisson(2.0),
                           MarginalSpec::neg_binomial(3, 0.4)}) {
    const auto link = make_link(spec, spec);
    CHECK(link.rho_plus <= 1.0 + 1e-9);
    CHECK(link.rho_plus > 0.94);
    const auto coarse = make_link(spec, spec, 25);
    CHECK(1.0 - link.rho_plus < 1.0 - coarse.rho_plus);  // tail shrinks with K
  }
}

TEST_CASE("Bernoulli attainable bounds approach the closed forms") {
  // p_i <= p_j: rho_plus = sqrt(p_i(1-p_j) / (p_j(1-p_i)))
  const auto link = make_link(MarginalSpec::bernoulli(0.2), MarginalSpec::bernoulli(0.5));
  CHECK(link.rho_plus == doctest::Approx(0.5).epsilon(0.03));
  CHECK(link.rho_plus <= 0.5 + 1e-9);
  // p_i + p_j >= 1: rho_minus = -sqrt((1-p_i)(1-p_j) / (p_i p_j))
  const auto sym = make_link(MarginalSpec::bernoulli(0.5), MarginalSpec::bernoulli(0.5));
  CHECK(sym.rho_minus == doctest::Approx(-1.0).epsilon(0.06));
  const auto mixed = make_link(MarginalSpec::bernoulli(0.7), MarginalSpec::bernoulli(0.6));
  CHECK(mixed.rho_minus ==
        doctest::Approx(-std::sqrt(0.3 * 0.4 / (0.7 * 0.6))).epsilon(0.06));
}

TEST_CASE("link evaluation endpoints") {
  const auto link = make_link(MarginalSpec::poisson(1.0), MarginalSpec::bernoulli(0.4));
  CHECK(link_eval(link, 0.0) == 0.0);
  CHECK(link_eval(link, 1.0) == doctest::Approx(link.rho_plus).epsilon(1e-12));
  CHECK(link_eval(link, -1.0) == doctest::Approx(link.rho_minus).epsilon(1e-12));
  CHECK_THROWS_AS(link_eval(link, 1.5), DomainError);
}

TEST_CASE("Bernoulli(0.5) pair at u = 0.5 sits below the identity") {
  const auto link = make_link(MarginalSpec::bernoulli(0.5), MarginalSpec::bernoulli(0.5));
  const double v = link_eval(link, 0.5);
  CHECK(v > 0.0);
  CHECK(v < 0.5);
  // closed-form orthant oracle: corr = 4 P(Z1<=0, Z2<=0) - 1 at p = 1/2
  const double oracle = 4.0 * oracles::bvn_orthant(0.5) - 1.0;
  CHECK(v == doctest::Approx(oracle).epsilon(1e-6));
}

TEST_CASE("links are monotone on a dense grid") {
  auto pairs = figure_pairs();
  pairs.push_back({MarginalSpec::bernoulli(0.2), MarginalSpec::poisson(10.0)});
  pairs.push_back({MarginalSpec::multinomial({0.3, 0.4, 0.3}), MarginalSpec::poisson(1.0)});
  for (const auto& [a, b] : pairs) {
    const auto link = make_link(a, b);
    double prev = link_eval(link, -1.0);
    for (int g = 1; g <= 200; ++g) {
      const double u = -1.0 + 2.0 * g / 200.0;
      const double v = link_eval(link, u);
      // strict away from the ends; the saturated tails carry truncation
      // wiggles of a few 1e-6
      CHECK(v >= prev - (std::abs(u) > 0.98 ? 1e-5 : 1e-10));
      prev = v;
    }
  }
}

TEST_CASE("Bernoulli link matches the bivariate-normal rectangle oracle") {
  const std::vector<std::pair<double, double>> ps = {{0.2, 0.4}, {0.2, 0.7}, {0.4, 0.7}, {0.5, 0.5}};
  for (const auto& [pi, pj] : ps) {
    const auto link = make_link(MarginalSpec::bernoulli(pi), MarginalSpec::bernoulli(pj));
    const double ti = norm_quantile(1.0 - pi);
    const double tj = norm_quantile(1.0 - pj);
    for (double u = -0.9; u <= 0.91; u += 0.3) {
      const double p11 = oracles::bvn_survival(ti, tj, u);
      const double oracle = (p11 - pi * pj) / std::sqrt(pi * (1 - pi) * pj * (1 - pj));
      CHECK(link_eval(link, u) == doctest::Approx(oracle).epsilon(1e-4));
    }
  }
}

TEST_CASE("count-pair links match the rectangle-sum oracle") {
  const auto pairs = std::vector<std::pair<MarginalSpec, MarginalSpec>>{
      {MarginalSpec::poisson(0.1), MarginalSpec::poisson(1.0)},
      {MarginalSpec::neg_binomial(3, 0.4), MarginalSpec::neg_binomial(3, 0.7)},
      {MarginalSpec::multinomial({0.2, 0.5, 0.3}), MarginalSpec::multinomial({0.4, 0.3, 0.3})}};
  for (const auto& [a, b] : pairs) {
    const auto link = make_link(a, b);
    for (double u : {-0.6, 0.3, 0.8})
      CHECK(link_eval(link, u) ==
            doctest::Approx(oracles::count_pair_correlation(a, b, u)).epsilon(2e-4));
  }
}

TEST_CASE("inverse link round trip on the figure pairs") {
  for (const auto& [a, b] : figure_pairs()) {
    const auto link = make_link(a, b);
    const auto inverse = build_inverse(link, 200);
    CHECK(inverse(0.0) == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(inverse(link.rho_plus) == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(inverse(link.rho_minus) == doctest::Approx(-1.0).epsilon(1e-9));
    double worst = 0.0;
    for (int g = 0; g <= 100; ++g) {
      const double u = -1.0 + 2.0 * g / 100.0;
      worst = std::max(worst, std::abs(inverse(link_eval(link, u)) - u));
    }
    CHECK(worst < 1e-3);
  }
}

TEST_CASE("inverse clamps outside the attainable range") {
  const auto link = make_link(MarginalSpec::bernoulli(0.2), MarginalSpec::bernoulli(0.7));
  const auto inverse = build_inverse(link, 200);
  CHECK(inverse(link.rho_plus + 0.05) == 1.0);
  CHECK(inverse(link.rho_minus - 0.05) == -1.0);
  CHECK(inverse(1.0) == 1.0);
  CHECK(inverse(-1.0) == -1.0);
}

TEST_CASE("inverse spline interpolates every knot and stays monotone") {
  const auto link = make_link(MarginalSpec::poisson(1.0), MarginalSpec::poisson(10.0));
  const auto inverse = build_inverse(link, 60);
  const auto& v = inverse.knots_v();
  const auto& u = inverse.knots_u();
  REQUIRE(v.size() == u.size());
  CHECK(inverse.second_derivatives().front() == 0.0);
  CHECK(inverse.second_derivatives().back() == 0.0);
  for (std::size_t m = 1; m + 1 < v.size(); ++m)
    CHECK(inverse(v[m]) == doctest::Approx(u[m]).epsilon(1e-10));
  double prev = -1.0;
  for (int g = 0; g <= 500; ++g) {
    const double vv = link.rho_minus + (link.rho_plus - link.rho_minus) * g / 500.0;
    const double uu = inverse(vv);
    CHECK(uu >= prev - 1e-9);
    prev = uu;
  }
}

TEST_CASE("LinkSet deduplicates marginals and applies the inverse entrywise") {
  std::vector<MarginalSpec> marginals = {
      MarginalSpec::bernoulli(0.2), MarginalSpec::bernoulli(0.2), MarginalSpec::bernoulli(0.7),
      MarginalSpec::poisson(1.0)};
  const LinkSet links(marginals, 100, 200);
  const int d = 4;

  // identity in, identity out at lag 0
  Eigen::MatrixXd identity = Eigen::MatrixXd::Identity(d, d);
  CHECK((links.inverse_link_matrix(identity, true) - identity).norm() < 1e-9);

  // round trip through an off-diagonal entry
  Eigen::MatrixXd r_x = identity;
  const double target = link_eval(links.link(0, 3), 0.6);
  r_x(0, 3) = r_x(3, 0) = target;
  const Eigen::MatrixXd r_z = links.inverse_link_matrix(r_x, true);
  CHECK(r_z(0, 3) == doctest::Approx(0.6).epsilon(1e-3));

  // entries beyond rho_plus clamp to 1
  r_x(0, 2) = 0.99;  // rho_plus for Bern(0.2) vs Bern(0.7) is far below 0.99
  CHECK(links.link(0, 2).rho_plus < 0.9);
  CHECK(links.inverse_link_matrix(r_x, true)(0, 2) == 1.0);
}

TEST_CASE("zero-variance marginals are rejected") {
  HermiteCoeffs degenerate;
  degenerate.truncation_K = 10;
  degenerate.variance = 0.0;
  degenerate.g.assign(11, 0.0);
  const auto ok = hermite_coefficients(MarginalSpec::poisson(1.0), 10);
  CHECK_THROWS_AS(build_link(degenerate, ok), DegenerateMarginalError);
}
