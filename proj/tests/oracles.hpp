#pragma once

// Test-only oracles, independent of the library's computation paths.

#include <vector>

#include <Eigen/Dense>

#include "countdfm/marginals.hpp"
#include "countdfm/model.hpp"

namespace oracles {

/// P(Z1 > a, Z2 > b) under a standard bivariate normal with correlation rho,
/// by one-dimensional Simpson quadrature of the conditional tail.
double bvn_survival(double a, double b, double rho);

/// Closed-form orthant probability P(Z1 <= 0, Z2 <= 0) = 1/4 + asin(rho)/(2 pi).
double bvn_orthant(double rho);

/// corr(G_i(Z1), G_j(Z2)) under correlation rho, via the rectangle identity
/// E[XY] = sum_{n,m >= 1} P(X >= n, Y >= m) over the truncated supports.
double count_pair_correlation(const countdfm::MarginalSpec& fi, const countdfm::MarginalSpec& fj,
                              double rho);

/// E[Z_t | Z_1..Z_{t-1}] for every t, by direct joint-Gaussian conditioning on
/// the stacked covariance of Z_{1:T} implied by the model parameters.
Eigen::MatrixXd gaussian_conditioning_predictions(const countdfm::DfmParams& params,
                                                  const Eigen::MatrixXd& z_path);

/// Posterior mean E[Z_T | X_{1:T}] for a univariate factor model
/// Z = Y + eps with AR(1) factor, by sequential grid quadrature.
double grid_posterior_mean_z(double psi, double sigma_eta2, double sigma_eps2,
                             const countdfm::MarginalSpec& marginal,
                             const std::vector<int>& x_window, int grid_n = 2001);

/// Positive root of the scalar discrete algebraic Riccati equation for
/// q = psi^2 (q - q^2/(q + s_eps)) + s_eta.
double scalar_dare_root(double psi, double sigma_eta2, double sigma_eps2);

}  // namespace oracles
