#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "countdfm/marginals.hpp"

namespace countdfm {

// Latent Gaussian dynamic factor model
//   Z_t = Lambda Y_t + eps_t,   Y_t = Psi_1 Y_{t-1} + ... + Psi_p Y_{t-p} + eta_t,
// with the identification that the top r x r block of Lambda is the identity.
struct DfmParams {
  Eigen::MatrixXd lambda;             // d x r
  std::vector<Eigen::MatrixXd> psi;   // p transition matrices, r x r
  Eigen::MatrixXd sigma_eps;          // d x d
  Eigen::MatrixXd sigma_eta;          // r x r

  int d() const { return static_cast<int>(lambda.rows()); }
  int r() const { return static_cast<int>(lambda.cols()); }
  int p() const { return static_cast<int>(psi.size()); }
};

/// Checks every structural invariant; returns one message per violation.
std::vector<std::string> validate(const DfmParams& params);

Eigen::MatrixXd companion_matrix(const std::vector<Eigen::MatrixXd>& psi);
double companion_spectral_radius(const std::vector<Eigen::MatrixXd>& psi);

/// Solves S = A S A' + Q (discrete Lyapunov) to residual < 1e-12.
Eigen::MatrixXd solve_stationary_covariance(const Eigen::MatrixXd& a, const Eigen::MatrixXd& q);

// Model-implied second-order structure.
struct LatentAcfSet {
  std::vector<Eigen::MatrixXd> r_z;      // latent autocorrelations, h = 0..p
  std::vector<Eigen::MatrixXd> sigma_y;  // factor autocovariances, h = 0..p
  Eigen::VectorXd z_scale;               // sqrt(diag Sigma_Z(0)) used to standardize
};

LatentAcfSet stationary_acvf(const DfmParams& params);

/// Factor autocovariances Sigma_Y(h) for h = 0..h_max.
std::vector<Eigen::MatrixXd> factor_acvf(const DfmParams& params, int h_max);

struct SimulatedPath {
  Eigen::MatrixXi x;  // T x d counts
  Eigen::MatrixXd z;  // T x d standardized latents
  Eigen::MatrixXd y;  // T x r factors
};

// Simulates (X, Z, Y). Z is rescaled entrywise by the theoretical stationary
// standard deviations so each coordinate has unit variance; X applies the
// marginal quantile transform. Deterministic given the seed.
SimulatedPath simulate(const DfmParams& params, const std::vector<MarginalSpec>& marginals,
                       int T, int burn_in, std::uint64_t seed);

// Simulation designs used in the numerical experiments: diagonal transitions
// (psi_set 1: 0.7, 2: -0.7, 3: VAR(2) with (0.7,-0.4), 4: VAR(4) with
// (0.7,-0.2,0.3,-0.4)), unit innovation/noise covariances, uniform loadings
// below the identity block, and three equal groups of marginal parameters.
struct Preset {
  DfmParams params;
  std::vector<MarginalSpec> marginals;
  std::vector<Family> families;
};

Preset make_preset(Family family, int d, int r, int psi_set, std::uint64_t seed,
                   int nb_successes = 3);

}  // namespace countdfm
