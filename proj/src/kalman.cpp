#include "countdfm/kalman.hpp"

#include <cmath>

#include "countdfm/errors.hpp"

namespace countdfm {

namespace {

void symmetrize(Eigen::MatrixXd& m) { m = 0.5 * (m + m.transpose()).eval(); }

// R^{-1} applied from the right to Q_pred Lambda'. Direct SPD solve with a
// jitter fallback; for d > 3r the Sherman-Morrison-Woodbury identity inverts
// at cost cubic in r using the cached Sigma_eps factorization.
Eigen::MatrixXd gain_from(const StateSpace& ss, const Eigen::MatrixXd& q_pred,
                          const Eigen::MatrixXd& r_pred) {
  const Eigen::MatrixXd cross = q_pred * ss.lambda_c.transpose();  // rp x d
  if (ss.use_woodbury) {
    // R^{-1} = E^{-1} - E^{-1} L (Q11^{-1} + L' E^{-1} L)^{-1} L' E^{-1},
    // with E = Sigma_eps and L the d x r loadings.
    const Eigen::MatrixXd loadings = ss.lambda_c.leftCols(ss.r);
    const Eigen::MatrixXd q11 = q_pred.topLeftCorner(ss.r, ss.r);
    Eigen::LDLT<Eigen::MatrixXd> q_ldlt(q11);
    if (q_ldlt.info() == Eigen::Success && q_ldlt.isPositive()) {
      const Eigen::MatrixXd ei_l = ss.eps_ldlt.solve(loadings);            // d x r
      Eigen::MatrixXd core = q_ldlt.solve(Eigen::MatrixXd::Identity(ss.r, ss.r));
      core += loadings.transpose() * ei_l;
      const Eigen::MatrixXd cross_ei = ss.eps_ldlt.solve(cross.transpose()).transpose();  // rp x d
      return cross_ei - (cross_ei * loadings) * core.ldlt().solve(ei_l.transpose());
    }
  }
  Eigen::LDLT<Eigen::MatrixXd> ldlt(r_pred);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) {
    Eigen::MatrixXd jittered = r_pred;
    jittered.diagonal().array() += 1e-10;
    ldlt.compute(jittered);
    if (ldlt.info() != Eigen::Success)
      throw NumericError("kalman: observation covariance not invertible");
  }
  return ldlt.solve(cross.transpose()).transpose();
}

}  // namespace

StateSpace build_state_space(const DfmParams& params) {
  {
    const auto violations = validate(params);
    for (const auto& v : violations)
      if (v.rfind("stability", 0) == 0) throw StabilityError("build_state_space: " + v);
    if (!violations.empty())
      throw ParameterError("build_state_space: " + violations.front());
  }
  StateSpace ss;
  ss.d = params.d();
  ss.r = params.r();
  ss.p = params.p();
  const int rp = ss.r * ss.p;
  ss.psi_c = companion_matrix(params.psi);
  ss.lambda_c = Eigen::MatrixXd::Zero(ss.d, rp);
  ss.lambda_c.leftCols(ss.r) = params.lambda;
  ss.sigma_eta_c = Eigen::MatrixXd::Zero(rp, rp);
  ss.sigma_eta_c.topLeftCorner(ss.r, ss.r) = params.sigma_eta;
  ss.sigma_eps = params.sigma_eps;

  if (ss.p == 1) {
    // Additive tail sum Q0 = sum_m Psi^m Sigma_eta (Psi')^m.
    Eigen::MatrixXd q0 = ss.sigma_eta_c;
    Eigen::MatrixXd term = ss.sigma_eta_c;
    for (int m = 1; m <= 5000; ++m) {
      term = (ss.psi_c * term * ss.psi_c.transpose()).eval();
      q0 += term;
      if (term.norm() < 1e-12) break;
    }
    symmetrize(q0);
    ss.q0 = q0;
  } else {
    ss.q0 = solve_stationary_covariance(ss.psi_c, ss.sigma_eta_c);
  }

  if (ss.d > 3 * ss.r) {
    Eigen::LDLT<Eigen::MatrixXd> eps_ldlt(ss.sigma_eps);
    if (eps_ldlt.info() == Eigen::Success && eps_ldlt.isPositive() &&
        ss.sigma_eps.diagonal().minCoeff() > 1e-10) {
      ss.eps_ldlt = std::move(eps_ldlt);
      ss.use_woodbury = true;
    }
  }
  return ss;
}

KalmanCovs initial_covs(const StateSpace& ss) {
  KalmanCovs covs;
  covs.q_filt = ss.q0;
  const int rp = ss.state_dim();
  covs.q_pred = Eigen::MatrixXd::Zero(rp, rp);
  covs.r_pred = Eigen::MatrixXd::Zero(ss.d, ss.d);
  covs.gain = Eigen::MatrixXd::Zero(rp, ss.d);
  return covs;
}

void advance_covs(const StateSpace& ss, KalmanCovs& covs) {
  covs.q_pred = ss.psi_c * covs.q_filt * ss.psi_c.transpose() + ss.sigma_eta_c;
  symmetrize(covs.q_pred);
  covs.r_pred = ss.lambda_c * covs.q_pred * ss.lambda_c.transpose() + ss.sigma_eps;
  symmetrize(covs.r_pred);
  covs.gain = gain_from(ss, covs.q_pred, covs.r_pred);
  covs.q_filt = (Eigen::MatrixXd::Identity(ss.state_dim(), ss.state_dim()) -
                 covs.gain * ss.lambda_c) *
                covs.q_pred;
  symmetrize(covs.q_filt);
}

KalmanStepResult kalman_step(const StateSpace& ss, KalmanCovs& covs,
                             const Eigen::VectorXd& y_filt, const Eigen::VectorXd& z_obs) {
  if (y_filt.size() != ss.state_dim()) throw ParameterError("kalman_step: bad state dimension");
  if (z_obs.size() != ss.d) throw ParameterError("kalman_step: bad observation dimension");
  advance_covs(ss, covs);
  KalmanStepResult out;
  out.y_pred = ss.psi_c * y_filt;
  out.z_pred = ss.lambda_c * out.y_pred;
  out.y_filt = out.y_pred + covs.gain * (z_obs - out.z_pred);
  return out;
}

KalmanCovs dare_converge(const StateSpace& ss, double tol, int max_iter) {
  KalmanCovs covs = initial_covs(ss);
  advance_covs(ss, covs);  // Q_{1|0} = Psi Q0 Psi' + Sigma_eta
  Eigen::MatrixXd prev = covs.q_pred;
  covs.converged = false;
  for (int it = 0; it < max_iter; ++it) {
    advance_covs(ss, covs);
    const double change = (covs.q_pred - prev).norm();
    prev = covs.q_pred;
    if (change < tol) {
      covs.converged = true;
      break;
    }
  }
  return covs;
}

std::vector<HorizonPrediction> predict_horizon_covs(const StateSpace& ss,
                                                    const Eigen::MatrixXd& q_filt, int H) {
  if (H < 1) throw ParameterError("predict_horizon: H must be >= 1");
  std::vector<HorizonPrediction> out(static_cast<std::size_t>(H));
  Eigen::MatrixXd q = q_filt;
  for (int h = 1; h <= H; ++h) {
    q = (ss.psi_c * q * ss.psi_c.transpose() + ss.sigma_eta_c).eval();
    symmetrize(q);
    auto& slot = out[static_cast<std::size_t>(h - 1)];
    slot.q_pred = q;
    slot.r_pred = ss.lambda_c * q * ss.lambda_c.transpose() + ss.sigma_eps;
    symmetrize(slot.r_pred);
  }
  return out;
}

std::vector<HorizonPrediction> predict_horizon(const StateSpace& ss, const KalmanCovs& covs,
                                               const Eigen::VectorXd& y_filt, int H) {
  std::vector<HorizonPrediction> out = predict_horizon_covs(ss, covs.q_filt, H);
  Eigen::VectorXd y = y_filt;
  for (auto& slot : out) {
    y = (ss.psi_c * y).eval();
    slot.y_pred = y;
    slot.z_pred = ss.lambda_c * y;
  }
  return out;
}

}  // namespace countdfm
