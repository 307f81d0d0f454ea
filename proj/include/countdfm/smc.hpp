#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "countdfm/estimation.hpp"
#include "countdfm/kalman.hpp"

namespace countdfm {

// P(N(mean, cov) in prod_j (lo_j, hi_j]) by separation-of-variables
// quasi-Monte Carlo (sequential conditioning on the Cholesky factor with a
// randomly shifted lattice). Deterministic given the seed. Exact for d = 1.
double mvn_rectangle_prob(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov,
                          const Eigen::VectorXd& lo, const Eigen::VectorXd& hi,
                          int n_qmc = 1 << 13, std::uint64_t seed = 0);

// Draw from N(mean, cov) restricted to the box, by coordinate-wise Gibbs over
// the full conditionals, initialized at the box-projected mean. Deterministic
// given the seed.
Eigen::VectorXd sample_truncated_mvn(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov,
                                     const Eigen::VectorXd& lo, const Eigen::VectorXd& hi,
                                     int sweeps = 10, std::uint64_t seed = 0);

enum class Resampling { Systematic, Multinomial };

/// Resampled particle indices. Systematic uses the stratified uniforms
/// U_k = U_1 + (k-1)/N; multinomial draws i.i.d. from the weight distribution.
std::vector<int> resample(const Eigen::VectorXd& weights, Resampling strategy,
                          std::uint64_t seed);

double effective_sample_size(const Eigen::VectorXd& weights);

struct SisrOptions {
  int particles = 1000;
  int n_qmc = 1 << 13;
  int gibbs_sweeps = 10;
  // Resampling criterion; the paper's wording and its cited convention
  // disagree on the direction, so both the threshold and the direction are
  // configurable. The default culls degenerate weights: fire when ESS < N/2.
  double ess_threshold_fraction = 0.5;
  bool resample_when_ess_above = false;
  Resampling resampling = Resampling::Systematic;
  int threads = 1;
};

struct ParticleEnsemble {
  StateSpace ss;
  KalmanCovs covs;              // shared covariance track after the window
  Eigen::MatrixXd states;       // rp x N filtered factor states
  Eigen::MatrixXd latents;      // d x N constrained draws at the final time
  Eigen::VectorXd weights;      // normalized
  std::vector<double> ess_trace;
  int resample_count = 0;
};

/// SIS/R over an observation window (spec default: the last 10 observations).
ParticleEnsemble run_sisr(const Eigen::MatrixXi& x_window, const FittedModel& model,
                          const SisrOptions& options, std::uint64_t seed);

struct ForecastDistribution {
  int horizon = 0;
  std::vector<std::vector<int>> support;  // per coordinate, ascending
  // pmf[h-1][i][k] = P(X_{i,T+h} = support[i][k] | data)
  std::vector<std::vector<std::vector<double>>> pmf;
};

// Per-coordinate h-step forecast pmfs: particle-weighted Gaussian bin masses
// under the h-step prediction law. Support values never observed in the
// estimation sample are excluded and the pmf renormalized.
ForecastDistribution forecast_distribution(const ParticleEnsemble& ensemble,
                                           const FittedModel& model, int H, int threads = 1);

/// Per-coordinate argmax of the pmf at each horizon; ties toward the smaller count.
Eigen::MatrixXi point_forecast(const ForecastDistribution& dist);

}  // namespace countdfm
