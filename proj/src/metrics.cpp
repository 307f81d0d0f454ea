#include "countdfm/metrics.hpp"

#include <cmath>
#include <map>

#include "countdfm/errors.hpp"

namespace countdfm {

void LossAccumulator::add(const Eigen::MatrixXd& estimate, const Eigen::MatrixXd& truth) {
  if (estimate.rows() != truth.rows() || estimate.cols() != truth.cols())
    throw ParameterError("LossAccumulator: estimate and truth shapes differ");
  const double denom = truth.norm();
  loss_sum_ += denom > 0.0 ? (estimate - truth).norm() / denom : (estimate - truth).norm();
  truth_l1_sum_ += truth.cwiseAbs().sum();
  if (count_ == 0)
    error_sum_ = estimate - truth;
  else
    error_sum_ += estimate - truth;
  ++count_;
}

double LossAccumulator::l2_loss() const {
  return count_ > 0 ? loss_sum_ / count_ : 0.0;
}

double LossAccumulator::bias() const {
  if (count_ == 0) return 0.0;
  const double denom = truth_l1_sum_ / count_;
  const double num = (error_sum_ / count_).cwiseAbs().sum();
  return denom > 0.0 ? num / denom : num;
}

Eigen::VectorXi last_baseline(const Eigen::MatrixXi& history) {
  if (history.rows() == 0) throw DataError("last_baseline: empty history");
  return history.row(history.rows() - 1).transpose();
}

Eigen::VectorXi marginal_baseline(const Eigen::MatrixXi& history) {
  if (history.rows() == 0) throw DataError("marginal_baseline: empty history");
  const int d = static_cast<int>(history.cols());
  Eigen::VectorXi out(d);
  for (int i = 0; i < d; ++i) {
    std::map<int, int> counts;
    for (int t = 0; t < history.rows(); ++t) ++counts[history(t, i)];
    int best_value = counts.begin()->first;
    int best_count = counts.begin()->second;
    for (const auto& [value, count] : counts) {
      if (count > best_count) {  // ties keep the smaller value (map is ordered)
        best_count = count;
        best_value = value;
      }
    }
    out[i] = best_value;
  }
  return out;
}

ForecastMetrics forecast_metrics(const ParticleEnsemble& ensemble,
                                 const ForecastDistribution& dist,
                                 const Eigen::MatrixXi& point, const Eigen::MatrixXi& holdout_x,
                                 const Eigen::MatrixXd& holdout_z, const Eigen::MatrixXd& holdout_y,
                                 const Eigen::MatrixXi& history_x, const Eigen::MatrixXd& history_z,
                                 const Eigen::MatrixXd& history_y) {
  const int H = dist.horizon;
  const int d = ensemble.ss.d;
  const int r = ensemble.ss.r;
  const int N = static_cast<int>(ensemble.weights.size());
  if (point.rows() != H || holdout_x.rows() != H || holdout_z.rows() != H || holdout_y.rows() != H)
    throw ParameterError("forecast_metrics: horizon mismatch across inputs");
  if (point.cols() != d || holdout_x.cols() != d || holdout_z.cols() != d || holdout_y.cols() != r)
    throw ParameterError("forecast_metrics: dimension mismatch across inputs");

  const double T = static_cast<double>(history_x.rows());
  const double denom_y = history_y.squaredNorm() / T;
  const double denom_z = history_z.squaredNorm() / T;
  const double denom_x = history_x.cast<double>().squaredNorm() / T;

  const Eigen::VectorXi last = last_baseline(history_x);
  const Eigen::VectorXi marginal = marginal_baseline(history_x);

  ForecastMetrics metrics;
  Eigen::MatrixXd states = ensemble.states;  // rp x N
  for (int h = 1; h <= H; ++h) {
    states = (ensemble.ss.psi_c * states).eval();
    const Eigen::MatrixXd y_pred = states.topRows(r);             // r x N
    const Eigen::MatrixXd z_pred = ensemble.ss.lambda_c * states;  // d x N

    const double err_y =
        (y_pred.colwise() - holdout_y.row(h - 1).transpose()).squaredNorm() / N;
    const double err_z =
        (z_pred.colwise() - holdout_z.row(h - 1).transpose()).squaredNorm() / N;
    metrics.rmfe_y.push_back(denom_y > 0.0 ? std::sqrt(err_y / denom_y) : std::sqrt(err_y));
    metrics.rmfe_z.push_back(denom_z > 0.0 ? std::sqrt(err_z / denom_z) : std::sqrt(err_z));

    const double err_x =
        (point.row(h - 1) - holdout_x.row(h - 1)).cast<double>().squaredNorm();
    metrics.rmfe_x.push_back(denom_x > 0.0 ? std::sqrt(err_x / denom_x) : std::sqrt(err_x));

    double hit = 0.0, hit_last = 0.0, hit_marginal = 0.0;
    for (int i = 0; i < d; ++i) {
      hit += point(h - 1, i) == holdout_x(h - 1, i) ? 1.0 : 0.0;
      hit_last += last[i] == holdout_x(h - 1, i) ? 1.0 : 0.0;
      hit_marginal += marginal[i] == holdout_x(h - 1, i) ? 1.0 : 0.0;
    }
    metrics.sens.push_back(hit / d);
    metrics.sens_last.push_back(hit_last / d);
    metrics.sens_marginal.push_back(hit_marginal / d);
  }
  return metrics;
}

}  // namespace countdfm
