#include "oracles.hpp"

#include <cmath>
#include <stdexcept>

#include "countdfm/model.hpp"
#include "countdfm/normal.hpp"

namespace oracles {

using countdfm::norm_cdf;
using countdfm::norm_pdf;
using countdfm::norm_sf;

double bvn_survival(double a, double b, double rho) {
  if (std::abs(rho) >= 1.0) throw std::invalid_argument("bvn_survival: |rho| must be < 1");
  const double s = std::sqrt(1.0 - rho * rho);
  const double lo = std::max(a, -12.0);
  const double hi = 12.0;
  if (lo >= hi) return 0.0;
  const int n = 4000;  // Simpson panels (even count)
  const double h = (hi - lo) / n;
  auto f = [&](double z) { return norm_pdf(z) * norm_sf((b - rho * z) / s); };
  double acc = f(lo) + f(hi);
  for (int i = 1; i < n; ++i) acc += f(lo + i * h) * (i % 2 ? 4.0 : 2.0);
  return acc * h / 3.0;
}

double bvn_orthant(double rho) { return 0.25 + std::asin(rho) / (2.0 * M_PI); }

double count_pair_correlation(const countdfm::MarginalSpec& fi, const countdfm::MarginalSpec& fj,
                              double rho) {
  // E[XY] over shifted supports; shift multinomial-style offsets away first so
  // the tail identity applies to nonnegative variables.
  const int oi = fi.support_min(), oj = fj.support_min();
  double exy = 0.0;
  for (int n = oi + 1; n <= fi.support_max(); ++n) {
    const double ti = countdfm::norm_quantile(fi.cdf(n - 1));
    for (int m = oj + 1; m <= fj.support_max(); ++m) {
      const double tj = countdfm::norm_quantile(fj.cdf(m - 1));
      exy += bvn_survival(ti, tj, rho);
    }
  }
  const double mi = fi.mean() - oi, mj = fj.mean() - oj;
  const double cov = exy - mi * mj;
  return cov / std::sqrt(fi.variance() * fj.variance());
}

Eigen::MatrixXd gaussian_conditioning_predictions(const countdfm::DfmParams& params,
                                                  const Eigen::MatrixXd& z_path) {
  const int T = static_cast<int>(z_path.rows());
  const int d = params.d();
  const auto sigma_y = countdfm::factor_acvf(params, T);
  auto sigma_z = [&](int h) {
    Eigen::MatrixXd s = params.lambda * sigma_y[static_cast<std::size_t>(std::abs(h))] *
                        params.lambda.transpose();
    if (h < 0) s.transposeInPlace();
    if (h == 0) s += params.sigma_eps;
    return s;
  };

  Eigen::MatrixXd big(T * d, T * d);
  for (int s = 0; s < T; ++s)
    for (int t = 0; t < T; ++t) big.block(s * d, t * d, d, d) = sigma_z(s - t);

  Eigen::MatrixXd pred = Eigen::MatrixXd::Zero(T, d);
  for (int t = 1; t < T; ++t) {
    const int n = t * d;
    const Eigen::MatrixXd block = big.topLeftCorner(n, n);
    const Eigen::MatrixXd cross = big.block(t * d, 0, d, n);
    Eigen::VectorXd history(n);
    for (int s = 0; s < t; ++s) history.segment(s * d, d) = z_path.row(s).transpose();
    pred.row(t) = (cross * block.ldlt().solve(history)).transpose();
  }
  return pred;
}

double grid_posterior_mean_z(double psi, double sigma_eta2, double sigma_eps2,
                             const countdfm::MarginalSpec& marginal,
                             const std::vector<int>& x_window, int grid_n) {
  const double sigma_y2 = sigma_eta2 / (1.0 - psi * psi);
  const double sd_y = std::sqrt(sigma_y2);
  const double sd_eps = std::sqrt(sigma_eps2);
  const double span = 8.0 * sd_y;
  const double dy = 2.0 * span / (grid_n - 1);

  std::vector<double> grid(static_cast<std::size_t>(grid_n));
  for (int i = 0; i < grid_n; ++i) grid[static_cast<std::size_t>(i)] = -span + i * dy;

  auto bin = [&](int x) { return countdfm::bin_bounds(marginal, x); };

  // Probability masses on the grid; prior at t=0 is the stationary factor law.
  std::vector<double> mass(static_cast<std::size_t>(grid_n));
  for (int i = 0; i < grid_n; ++i)
    mass[static_cast<std::size_t>(i)] = norm_pdf(grid[static_cast<std::size_t>(i)] / sd_y) / sd_y;

  const double sd_eta = std::sqrt(sigma_eta2);
  std::vector<double> pred(static_cast<std::size_t>(grid_n));
  for (int x : x_window) {
    // predict: push masses through the AR(1) transition kernel
    for (int i = 0; i < grid_n; ++i) {
      double acc = 0.0;
      for (int j = 0; j < grid_n; ++j)
        acc += norm_pdf((grid[static_cast<std::size_t>(i)] - psi * grid[static_cast<std::size_t>(j)]) / sd_eta) *
               mass[static_cast<std::size_t>(j)];
      pred[static_cast<std::size_t>(i)] = acc;
    }
    // update with the bin likelihood of the observation, then normalize
    const auto b = bin(x);
    double total = 0.0;
    for (int i = 0; i < grid_n; ++i) {
      const double y = grid[static_cast<std::size_t>(i)];
      const double like = norm_cdf((b.hi - y) / sd_eps) - norm_cdf((b.lo - y) / sd_eps);
      pred[static_cast<std::size_t>(i)] *= like;
      total += pred[static_cast<std::size_t>(i)];
    }
    for (int i = 0; i < grid_n; ++i) mass[static_cast<std::size_t>(i)] = pred[static_cast<std::size_t>(i)] / total;
  }

  // E[Z_T | X_1:T] = E_y[ E[Z | Y_T = y, Z in bin] ] over the posterior of Y_T
  const auto b = bin(x_window.back());
  double mean = 0.0, total = 0.0;
  for (int i = 0; i < grid_n; ++i) {
    const double y = grid[static_cast<std::size_t>(i)];
    const double alpha = (b.lo - y) / sd_eps;
    const double beta = (b.hi - y) / sd_eps;
    const double span_p = norm_cdf(beta) - norm_cdf(alpha);
    if (span_p <= 0.0) continue;
    const double ez = y + sd_eps * (norm_pdf(alpha) - norm_pdf(beta)) / span_p;
    mean += ez * mass[static_cast<std::size_t>(i)];
    total += mass[static_cast<std::size_t>(i)];
  }
  return mean / total;
}

double scalar_dare_root(double psi, double sigma_eta2, double sigma_eps2) {
  const double b = sigma_eps2 * (1.0 - psi * psi) - sigma_eta2;
  const double c = sigma_eta2 * sigma_eps2;
  return 0.5 * (-b + std::sqrt(b * b + 4.0 * c));
}

}  // namespace oracles
