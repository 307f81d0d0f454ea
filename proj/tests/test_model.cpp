#include <doctest.h>

#include <cmath>

#include "countdfm/errors.hpp"
#include "countdfm/estimation.hpp"
#include "countdfm/link.hpp"
#include "countdfm/model.hpp"

using namespace countdfm;

namespace {

DfmParams scalar_ar1(double psi, double sigma_eta, double sigma_eps) {
  DfmParams params;
  params.lambda = Eigen::MatrixXd::Identity(1, 1);
  params.psi = {psi * Eigen::MatrixXd::Identity(1, 1)};
  params.sigma_eta = sigma_eta * Eigen::MatrixXd::Identity(1, 1);
  params.sigma_eps = sigma_eps * Eigen::MatrixXd::Identity(1, 1);
  return params;
}

}  // namespace

TEST_CASE("validate catches the stated violations") {
  Preset preset = make_preset(Family::Poisson, 6, 2, 1, 11);
  CHECK(validate(preset.params).empty());

  DfmParams unstable = preset.params;
  unstable.psi = {1.1 * Eigen::MatrixXd::Identity(2, 2)};
  const auto v1 = validate(unstable);
  REQUIRE(!v1.empty());
  CHECK(v1.front().find("stability") != std::string::npos);

  DfmParams off = preset.params;
  off.lambda(0, 0) = 0.9;
  const auto v2 = validate(off);
  REQUIRE(!v2.empty());
  CHECK(v2.front().find("identifiability") != std::string::npos);
}

TEST_CASE("stationary_acvf: scalar AR(1) variance") {
  const auto acf = stationary_acvf(scalar_ar1(0.7, 1.0, 0.0));
  CHECK(acf.sigma_y[0](0, 0) == doctest::Approx(1.0 / 0.51).epsilon(1e-10));
  CHECK(acf.sigma_y[1](0, 0) == doctest::Approx(0.7 / 0.51).epsilon(1e-10));
}

TEST_CASE("stationary_acvf: zero transitions kill the lagged covariances") {
  Preset preset = make_preset(Family::Bernoulli, 6, 2, 1, 5);
  preset.params.psi = {Eigen::MatrixXd::Zero(2, 2)};
  const auto acf = stationary_acvf(preset.params);
  CHECK(acf.sigma_y[1].norm() == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(acf.r_z[1].norm() == doctest::Approx(0.0).epsilon(1e-14));
}

TEST_CASE("stationary_acvf: identity loadings and no noise reduce to the factor law") {
  DfmParams params;
  const int r = 3;
  params.lambda = Eigen::MatrixXd::Identity(r, r);
  params.psi = {0.5 * Eigen::MatrixXd::Identity(r, r)};
  params.sigma_eta = Eigen::MatrixXd::Identity(r, r);
  params.sigma_eps = Eigen::MatrixXd::Zero(r, r);
  const auto acf = stationary_acvf(params);
  const Eigen::VectorXd scale = acf.sigma_y[0].diagonal().cwiseSqrt();
  const Eigen::MatrixXd expected = scale.cwiseInverse().asDiagonal() * acf.sigma_y[1] *
                                   scale.cwiseInverse().asDiagonal();
  CHECK((acf.r_z[1] - expected).norm() < 1e-12);
  CHECK(acf.r_z[0].diagonal().isOnes(1e-12));
}

TEST_CASE("VAR(2) autocovariances satisfy the recursion") {
  Preset preset = make_preset(Family::Poisson, 6, 2, 3, 17);
  const auto sigma_y = factor_acvf(preset.params, 6);
  for (int h = 2; h <= 6; ++h) {
    const Eigen::MatrixXd expected =
        preset.params.psi[0] * sigma_y[static_cast<std::size_t>(h - 1)] +
        preset.params.psi[1] * sigma_y[static_cast<std::size_t>(h - 2)];
    CHECK((sigma_y[static_cast<std::size_t>(h)] - expected).norm() < 1e-10);
  }
}

TEST_CASE("simulate is reproducible and degenerate noise gives a constant path") {
  Preset preset = make_preset(Family::Poisson, 6, 2, 1, 3);
  const auto a = simulate(preset.params, preset.marginals, 50, 100, 999);
  const auto b = simulate(preset.params, preset.marginals, 50, 100, 999);
  CHECK((a.x.array() == b.x.array()).all());
  CHECK((a.z.array() == b.z.array()).all());
  const auto c = simulate(preset.params, preset.marginals, 50, 100, 1000);
  CHECK(!(a.x.array() == c.x.array()).all());

  DfmParams frozen = preset.params;
  frozen.sigma_eta.setZero();
  frozen.sigma_eps.setZero();
  const auto path = simulate(frozen, preset.marginals, 20, 50, 1);
  for (int t = 0; t < 20; ++t)
    for (int i = 0; i < 6; ++i)
      CHECK(path.x(t, i) == quantile(preset.marginals[static_cast<std::size_t>(i)], 0.5));
}

TEST_CASE("simulated latents have unit variance and the link identity holds") {
  Preset preset = make_preset(Family::Bernoulli, 6, 2, 1, 21);
  const int T = 10000;
  const auto path = simulate(preset.params, preset.marginals, T, 500, 4242);

  for (int i = 0; i < 6; ++i) {
    const double var = path.z.col(i).squaredNorm() / T -
                       std::pow(path.z.col(i).mean(), 2);
    CHECK(var == doctest::Approx(1.0).epsilon(0.05));
  }

  // sample count correlations converge to L(R_Z(0))
  const LinkSet links(preset.marginals, 100, 200);
  const auto acf = stationary_acvf(preset.params);
  const Eigen::MatrixXd r_x = sample_cross_correlation(path.x, 0);
  double worst = 0.0;
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 6; ++j) {
      if (i == j) continue;
      const double expected = link_eval(links.link(i, j), acf.r_z[0](i, j));
      worst = std::max(worst, std::abs(r_x(i, j) - expected));
    }
  CHECK(worst < 0.05);
}

TEST_CASE("simulated marginal law approaches the spec pmf") {
  Preset preset = make_preset(Family::Poisson, 6, 2, 1, 8);
  const int T = 20000;
  const auto path = simulate(preset.params, preset.marginals, T, 500, 77);
  for (int i = 0; i < 6; ++i) {
    const auto& spec = preset.marginals[static_cast<std::size_t>(i)];
    std::vector<double> freq(static_cast<std::size_t>(spec.support_max()) + 1, 0.0);
    for (int t = 0; t < T; ++t) freq[static_cast<std::size_t>(path.x(t, i))] += 1.0 / T;
    double chi2 = 0.0;
    for (int v = spec.support_min(); v <= spec.support_max(); ++v) {
      const double p = spec.pmf(v);
      if (p > 1e-8) chi2 += std::pow(freq[static_cast<std::size_t>(v)] - p, 2) / p;
    }
    CHECK(chi2 < 0.05);
  }
}

TEST_CASE("presets reproduce the documented transition structures") {
  const Preset p3 = make_preset(Family::NegBinomial, 15, 2, 3, 1);
  REQUIRE(p3.params.p() == 2);
  CHECK(p3.params.psi[0](0, 0) == doctest::Approx(0.7));
  CHECK(p3.params.psi[1](1, 1) == doctest::Approx(-0.4));
  const Preset p4 = make_preset(Family::Bernoulli, 15, 5, 4, 1);
  REQUIRE(p4.params.p() == 4);
  CHECK(p4.params.psi[2](0, 0) == doctest::Approx(0.3));
  CHECK(validate(p4.params).empty());
  CHECK(p4.params.lambda.topRows(5).isIdentity(0.0));
  for (int i = 5; i < 15; ++i)
    for (int j = 0; j < 5; ++j) {
      CHECK(p4.params.lambda(i, j) >= 0.0);
      CHECK(p4.params.lambda(i, j) <= 1.0);
    }
}
