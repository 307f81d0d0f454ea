#pragma once

#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "countdfm/smc.hpp"

namespace countdfm {

// Relative l2 loss E||a_hat - a||_F / ||a||_F and the l1 bias
// ||mean(a_hat - a)||_1 / mean(||a||_1), aggregated over replications.
class LossAccumulator {
 public:
  void add(const Eigen::MatrixXd& estimate, const Eigen::MatrixXd& truth);
  double l2_loss() const;
  double bias() const;
  int count() const { return count_; }

 private:
  double loss_sum_ = 0.0;
  double truth_l1_sum_ = 0.0;
  Eigen::MatrixXd error_sum_;
  int count_ = 0;
};

/// Last-observation baseline: repeat the final observed vector.
Eigen::VectorXi last_baseline(const Eigen::MatrixXi& history);

/// Per-coordinate most frequent historical value; ties toward the smaller value.
Eigen::VectorXi marginal_baseline(const Eigen::MatrixXi& history);

struct ForecastMetrics {
  std::vector<double> rmfe_y, rmfe_z, rmfe_x;  // per horizon
  std::vector<double> sens, sens_last, sens_marginal;
};

// Root mean h-step forecasting errors of the two latent processes and the
// observations, plus the entrywise sensitivity of the point forecasts and the
// two baselines. Latent errors average over the particle cloud; denominators
// are the time-averaged squared history of each process.
ForecastMetrics forecast_metrics(const ParticleEnsemble& ensemble,
                                 const ForecastDistribution& dist,
                                 const Eigen::MatrixXi& point,      // H x d
                                 const Eigen::MatrixXi& holdout_x,  // H x d
                                 const Eigen::MatrixXd& holdout_z,  // H x d
                                 const Eigen::MatrixXd& holdout_y,  // H x r
                                 const Eigen::MatrixXi& history_x,
                                 const Eigen::MatrixXd& history_z,
                                 const Eigen::MatrixXd& history_y);

}  // namespace countdfm
