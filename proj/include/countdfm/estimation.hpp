#pragma once

#include <vector>

#include <Eigen/Dense>

#include "countdfm/link.hpp"
#include "countdfm/marginals.hpp"
#include "countdfm/model.hpp"

namespace countdfm {

// Sample autocorrelation of the counts at lag h >= 0, entry (i,j) pairing
// X_{i,t+h} with X_{j,t}. Means and variances use the full sample and the
// denominator is T (biased form); the lag-0 diagonal is exactly 1 and no
// symmetry is imposed at other lags.
Eigen::MatrixXd sample_cross_correlation(const Eigen::MatrixXi& x, int h);

/// Same statistic restricted to row segments [start,end); no pair straddles a
/// segment boundary. Used by the block cross-validation folds.
Eigen::MatrixXd sample_cross_correlation_segments(
    const Eigen::MatrixXi& x, const std::vector<std::pair<int, int>>& segments, int h);

struct PcaFactorEstimate {
  Eigen::MatrixXd lambda;     // d x r, identity top block
  Eigen::MatrixXd sigma_y0;   // r x r
  Eigen::MatrixXd sigma_eps;  // d x d residual of the spectral split
  Eigen::VectorXd eigenvalues;  // all d, descending
};

// Principal-component split of a latent lag-0 correlation matrix: the leading
// r eigenpairs define the factor part, renormalized so the top block of the
// loadings is the identity; the remainder is the noise covariance.
PcaFactorEstimate pca_factor_estimate(const Eigen::MatrixXd& r_z0, int r);

/// GLS projection (L'L)^{-1} L' R_Zh L (L'L)^{-1}; also the Frobenius-optimal
/// Sigma_Y(h) for fixed loadings.
Eigen::MatrixXd factor_lag_cov(const Eigen::MatrixXd& lambda, const Eigen::MatrixXd& r_zh);

struct YuleWalkerEstimate {
  std::vector<Eigen::MatrixXd> psi;
  Eigen::MatrixXd sigma_eta;
};

/// Solves the block-Toeplitz Yule-Walker system for sigma_y = (Sigma_Y(0..p)).
YuleWalkerEstimate yule_walker(const std::vector<Eigen::MatrixXd>& sigma_y);

struct FitOptions {
  int hermite_K = 100;
  int spline_M = 200;
  int nb_successes = 3;
  int multinomial_m = 0;
  int threads = 1;
};

struct FittedModel {
  DfmParams params;
  std::vector<MarginalSpec> marginals;
  LatentAcfSet latent_acf;  // r_z[0] carries the psd-shifted copy used in forecasting
  double psd_shift = 0.0;
  std::vector<std::vector<int>> observed_support;  // per coordinate, ascending

  // Parameters for the forecaster: the eigenvalue shift applied to R_Z(0)
  // propagates into a uniformly rescaled noise/innovation pair so the model
  // stays standardized; sigma_eta is floored to stay positive definite.
  DfmParams forecast_params() const;
};

/// Full estimation pipeline: marginals -> links -> inverse-link correlations
/// -> PCA -> lagged factor covariances -> Yule-Walker.
FittedModel fit(const Eigen::MatrixXi& x, const std::vector<Family>& families, int r, int p,
                const FitOptions& options = {});

}  // namespace countdfm
