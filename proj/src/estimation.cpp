#include "countdfm/estimation.hpp"

#include <algorithm>
#include <cmath>

#include "countdfm/errors.hpp"

namespace countdfm {

namespace {

struct ColumnMoments {
  Eigen::VectorXd mean;
  Eigen::VectorXd sd;  // denominator-T standard deviations
  double count = 0.0;
};

ColumnMoments column_moments(const Eigen::MatrixXi& x,
                             const std::vector<std::pair<int, int>>& segments) {
  const int d = static_cast<int>(x.cols());
  ColumnMoments m;
  m.mean = Eigen::VectorXd::Zero(d);
  Eigen::VectorXd sq = Eigen::VectorXd::Zero(d);
  for (const auto& [start, end] : segments) {
    for (int t = start; t < end; ++t) {
      for (int i = 0; i < d; ++i) {
        const double v = x(t, i);
        m.mean[i] += v;
        sq[i] += v * v;
      }
    }
    m.count += end - start;
  }
  if (m.count < 2) throw DataError("sample_cross_correlation: at least two rows required");
  m.mean /= m.count;
  m.sd = (sq / m.count - m.mean.cwiseProduct(m.mean)).cwiseMax(0.0).cwiseSqrt();
  for (int i = 0; i < d; ++i)
    if (!(m.sd[i] > 0.0))
      throw DegenerateSeriesError("sample_cross_correlation: column " + std::to_string(i) +
                                  " is constant");
  return m;
}

}  // namespace

Eigen::MatrixXd sample_cross_correlation_segments(
    const Eigen::MatrixXi& x, const std::vector<std::pair<int, int>>& segments, int h) {
  if (h < 0) throw ParameterError("sample_cross_correlation: negative lag");
  const int d = static_cast<int>(x.cols());
  const ColumnMoments m = column_moments(x, segments);

  Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(d, d);
  for (const auto& [start, end] : segments) {
    if (end - start <= h) continue;
    for (int t = start; t + h < end; ++t) {
      const auto lead = x.row(t + h).cast<double>().transpose();
      const auto base = x.row(t).cast<double>().transpose();
      acc.noalias() += (lead - m.mean) * (base - m.mean).transpose();
    }
  }
  acc /= m.count;
  Eigen::MatrixXd corr =
      m.sd.cwiseInverse().asDiagonal() * acc * m.sd.cwiseInverse().asDiagonal();
  if (h == 0) {
    corr = 0.5 * (corr + corr.transpose()).eval();
    corr.diagonal().setOnes();
  }
  return corr;
}

Eigen::MatrixXd sample_cross_correlation(const Eigen::MatrixXi& x, int h) {
  if (h >= x.rows()) throw ParameterError("sample_cross_correlation: lag exceeds sample length");
  return sample_cross_correlation_segments(x, {{0, static_cast<int>(x.rows())}}, h);
}

PcaFactorEstimate pca_factor_estimate(const Eigen::MatrixXd& r_z0, int r) {
  const int d = static_cast<int>(r_z0.rows());
  if (r_z0.cols() != d) throw ParameterError("pca_factor_estimate: matrix must be square");
  if (r < 1 || r >= d) throw ParameterError("pca_factor_estimate: need 1 <= r < d");
  if ((r_z0 - r_z0.transpose()).norm() > 1e-8 * (1.0 + r_z0.norm()))
    throw ParameterError("pca_factor_estimate: matrix must be symmetric");

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(r_z0);
  if (eig.info() != Eigen::Success) throw NumericError("pca_factor_estimate: eigensolver failed");

  PcaFactorEstimate out;
  out.eigenvalues = eig.eigenvalues().reverse();
  Eigen::MatrixXd vectors(d, r);
  for (int k = 0; k < r; ++k) {
    Eigen::VectorXd u = eig.eigenvectors().col(d - 1 - k);
    if (u[0] < 0.0) u = -u;  // sign convention: nonnegative first component
    vectors.col(k) = u;
  }
  if (!(out.eigenvalues[r - 1] > 0.0))
    throw RankError("pca_factor_estimate: fewer than r positive eigenvalues");

  const Eigen::MatrixXd b = vectors * out.eigenvalues.head(r).cwiseSqrt().asDiagonal();
  const Eigen::MatrixXd b1 = b.topRows(r);
  const Eigen::FullPivLU<Eigen::MatrixXd> lu(b1);
  if (!lu.isInvertible())
    throw IdentifiabilityError("pca_factor_estimate: singular top block of the factor split");

  out.lambda.resize(d, r);
  out.lambda.topRows(r).setIdentity();
  out.lambda.bottomRows(d - r) = b.bottomRows(d - r) * lu.inverse();
  out.sigma_y0 = b1 * b1.transpose();
  out.sigma_eps = r_z0 - b * b.transpose();
  out.sigma_eps = 0.5 * (out.sigma_eps + out.sigma_eps.transpose()).eval();
  return out;
}

Eigen::MatrixXd factor_lag_cov(const Eigen::MatrixXd& lambda, const Eigen::MatrixXd& r_zh) {
  const Eigen::MatrixXd gram = lambda.transpose() * lambda;
  const Eigen::FullPivLU<Eigen::MatrixXd> lu(gram);
  if (!lu.isInvertible()) throw SingularSystemError("factor_lag_cov: singular Gram matrix");
  const Eigen::MatrixXd gram_inv = lu.inverse();
  return gram_inv * (lambda.transpose() * r_zh * lambda) * gram_inv;
}

YuleWalkerEstimate yule_walker(const std::vector<Eigen::MatrixXd>& sigma_y) {
  if (sigma_y.size() < 2) throw ParameterError("yule_walker: need Sigma_Y(0..p) with p >= 1");
  const int p = static_cast<int>(sigma_y.size()) - 1;
  const int r = static_cast<int>(sigma_y[0].rows());

  Eigen::MatrixXd toeplitz(r * p, r * p);
  Eigen::MatrixXd rhs(r * p, r);
  for (int i = 0; i < p; ++i) {
    for (int j = 0; j < p; ++j) {
      const Eigen::MatrixXd& s = sigma_y[static_cast<std::size_t>(std::abs(j - i))];
      toeplitz.block(i * r, j * r, r, r) = j >= i ? s : s.transpose();
    }
    rhs.block(i * r, 0, r, r) = sigma_y[static_cast<std::size_t>(i + 1)].transpose();
  }

  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(toeplitz, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const double cond = svd.singularValues()(0) / svd.singularValues()(r * p - 1);
  if (!(svd.singularValues()(r * p - 1) > 1e-12 * svd.singularValues()(0)))
    throw SingularSystemError("yule_walker: near-singular block-Toeplitz system, condition number " +
                              std::to_string(cond));
  const Eigen::MatrixXd stacked = svd.solve(rhs);  // rows: Psi_1' .. Psi_p'

  YuleWalkerEstimate out;
  out.sigma_eta = sigma_y[0];
  for (int h = 1; h <= p; ++h) {
    out.psi.push_back(stacked.block((h - 1) * r, 0, r, r).transpose());
    out.sigma_eta -= out.psi.back() * sigma_y[static_cast<std::size_t>(h)].transpose();
  }
  out.sigma_eta = 0.5 * (out.sigma_eta + out.sigma_eta.transpose()).eval();
  return out;
}

DfmParams FittedModel::forecast_params() const {
  DfmParams out = params;
  const double s = psd_shift;
  if (s > 0.0) {
    const int d = params.d();
    out.sigma_eps = (params.sigma_eps + s * Eigen::MatrixXd::Identity(d, d)) / (1.0 + s);
    out.sigma_eta = params.sigma_eta / (1.0 + s);
  }
  // Clip the interior spectrum so downstream factorizations stay PD.
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig_eta(out.sigma_eta);
  if (eig_eta.eigenvalues().minCoeff() < 1e-10) {
    out.sigma_eta = eig_eta.eigenvectors() *
                    eig_eta.eigenvalues().cwiseMax(1e-10).asDiagonal() *
                    eig_eta.eigenvectors().transpose();
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig_eps(out.sigma_eps);
  if (eig_eps.eigenvalues().minCoeff() < 0.0) {
    out.sigma_eps = eig_eps.eigenvectors() *
                    eig_eps.eigenvalues().cwiseMax(0.0).asDiagonal() *
                    eig_eps.eigenvectors().transpose();
  }
  return out;
}

FittedModel fit(const Eigen::MatrixXi& x, const std::vector<Family>& families, int r, int p,
                const FitOptions& options) {
  const int T = static_cast<int>(x.rows());
  const int d = static_cast<int>(x.cols());
  if (static_cast<int>(families.size()) != d)
    throw ParameterError("fit: need one family per column");
  if (T <= p) throw DataError("fit: sample length must exceed the lag order");

  FittedModel model;
  model.marginals.reserve(static_cast<std::size_t>(d));
  model.observed_support.resize(static_cast<std::size_t>(d));
  FitMarginalOptions fit_opts;
  fit_opts.nb_successes = options.nb_successes;
  fit_opts.multinomial_m = options.multinomial_m;
  for (int i = 0; i < d; ++i) {
    std::vector<int> series(static_cast<std::size_t>(T));
    for (int t = 0; t < T; ++t) series[static_cast<std::size_t>(t)] = x(t, i);
    model.marginals.push_back(fit_marginal(series, families[static_cast<std::size_t>(i)], fit_opts));
    auto& support = model.observed_support[static_cast<std::size_t>(i)];
    support = series;
    std::sort(support.begin(), support.end());
    support.erase(std::unique(support.begin(), support.end()), support.end());
  }

  const LinkSet links(model.marginals, options.hermite_K, options.spline_M, options.threads);

  std::vector<Eigen::MatrixXd> r_z(static_cast<std::size_t>(p) + 1);
  for (int h = 0; h <= p; ++h)
    r_z[static_cast<std::size_t>(h)] = links.inverse_link_matrix(sample_cross_correlation(x, h), h == 0);

  PcaFactorEstimate pca = pca_factor_estimate(r_z[0], r);

  std::vector<Eigen::MatrixXd> sigma_y(static_cast<std::size_t>(p) + 1);
  sigma_y[0] = pca.sigma_y0;
  for (int h = 1; h <= p; ++h)
    sigma_y[static_cast<std::size_t>(h)] = factor_lag_cov(pca.lambda, r_z[static_cast<std::size_t>(h)]);

  YuleWalkerEstimate yw = yule_walker(sigma_y);

  model.params.lambda = std::move(pca.lambda);
  model.params.sigma_eps = std::move(pca.sigma_eps);
  model.params.psi = std::move(yw.psi);
  model.params.sigma_eta = std::move(yw.sigma_eta);
  model.latent_acf.r_z = std::move(r_z);
  model.latent_acf.sigma_y = std::move(sigma_y);
  model.latent_acf.z_scale = Eigen::VectorXd::Ones(d);

  // Non-negative definiteness is only enforced on the stored copy used by
  // forecasting; the estimation path above consumed the raw inverse-link
  // correlations.
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(model.latent_acf.r_z[0]);
  const double min_eig = eig.eigenvalues().minCoeff();
  if (min_eig < 0.0) {
    model.psd_shift = -min_eig + 1e-6;
    model.latent_acf.r_z[0] =
        (model.latent_acf.r_z[0] + model.psd_shift * Eigen::MatrixXd::Identity(d, d)) /
        (1.0 + model.psd_shift);
  }
  return model;
}

}  // namespace countdfm
