#pragma once

#include <vector>

#include <Eigen/Dense>

#include "countdfm/model.hpp"

namespace countdfm {

// Companion-form state space for the factor VAR: state (Y_t,...,Y_{t-p+1}),
// observation Z_t = Lambda Y_t + eps_t.
struct StateSpace {
  Eigen::MatrixXd psi_c;        // rp x rp transition
  Eigen::MatrixXd lambda_c;     // d x rp observation map (zero-padded)
  Eigen::MatrixXd sigma_eta_c;  // rp x rp, Sigma_eta in the top block
  Eigen::MatrixXd sigma_eps;    // d x d
  Eigen::MatrixXd q0;           // stationary state covariance Var(Y_0 state)
  int d = 0, r = 0, p = 0;

  int state_dim() const { return r * p; }
  bool use_woodbury = false;         // invert R via Sherman-Morrison-Woodbury
  Eigen::LDLT<Eigen::MatrixXd> eps_ldlt;  // cached factor for the Woodbury path
};

StateSpace build_state_space(const DfmParams& params);

struct KalmanCovs {
  Eigen::MatrixXd q_pred;  // state prediction-error covariance
  Eigen::MatrixXd q_filt;  // filtered state covariance
  Eigen::MatrixXd r_pred;  // observation prediction-error covariance
  Eigen::MatrixXd gain;    // Kalman gain, rp x d
  bool converged = false;
};

/// Covariances before the first observation: q_filt = Q0, nothing predicted yet.
KalmanCovs initial_covs(const StateSpace& ss);

// One covariance forecast/update cycle (data-independent, shared by all
// particles): Q_pred = Psi Q_filt Psi' + Sigma_eta, R = Lambda Q_pred Lambda'
// + Sigma_eps, K = Q_pred Lambda' R^{-1}, Q_filt = (I - K Lambda) Q_pred.
void advance_covs(const StateSpace& ss, KalmanCovs& covs);

struct KalmanStepResult {
  Eigen::VectorXd y_pred;  // state forecast
  Eigen::VectorXd z_pred;  // observation forecast
  Eigen::VectorXd y_filt;  // updated state
};

/// Full forecast + update step for one state vector and one observation.
KalmanStepResult kalman_step(const StateSpace& ss, KalmanCovs& covs,
                             const Eigen::VectorXd& y_filt, const Eigen::VectorXd& z_obs);

/// Iterates the prediction-error covariance recursion from the stationary
/// initialization until the Frobenius change drops below tol (the discrete
/// algebraic Riccati fixed point). converged=false if max_iter is exhausted.
KalmanCovs dare_converge(const StateSpace& ss, double tol = 1e-12, int max_iter = 1000);

struct HorizonPrediction {
  Eigen::VectorXd y_pred;  // full companion state
  Eigen::VectorXd z_pred;
  Eigen::MatrixXd q_pred;
  Eigen::MatrixXd r_pred;
};

/// h-step-ahead predictions for h = 1..H given the filtered state at time T.
std::vector<HorizonPrediction> predict_horizon(const StateSpace& ss, const KalmanCovs& covs,
                                               const Eigen::VectorXd& y_filt, int H);

/// Covariance-only part of predict_horizon (shared across particles).
std::vector<HorizonPrediction> predict_horizon_covs(const StateSpace& ss,
                                                    const Eigen::MatrixXd& q_filt, int H);

}  // namespace countdfm
