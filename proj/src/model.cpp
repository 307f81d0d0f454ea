#include "countdfm/model.hpp"

#include <cmath>

#include "countdfm/errors.hpp"
#include "countdfm/normal.hpp"
#include "countdfm/rng.hpp"

namespace countdfm {

namespace {

Eigen::MatrixXd matrix_sqrt_psd(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m);
  Eigen::VectorXd vals = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return eig.eigenvectors() * vals.asDiagonal() * eig.eigenvectors().transpose();
}

}  // namespace

Eigen::MatrixXd companion_matrix(const std::vector<Eigen::MatrixXd>& psi) {
  if (psi.empty()) throw ParameterError("companion_matrix: empty transition list");
  const int r = static_cast<int>(psi.front().rows());
  const int p = static_cast<int>(psi.size());
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(r * p, r * p);
  for (int h = 0; h < p; ++h) {
    if (psi[static_cast<std::size_t>(h)].rows() != r || psi[static_cast<std::size_t>(h)].cols() != r)
      throw ParameterError("companion_matrix: transition matrices must share shape r x r");
    a.block(0, h * r, r, r) = psi[static_cast<std::size_t>(h)];
  }
  if (p > 1) a.block(r, 0, r * (p - 1), r * (p - 1)).setIdentity();
  return a;
}

double companion_spectral_radius(const std::vector<Eigen::MatrixXd>& psi) {
  const Eigen::MatrixXd a = companion_matrix(psi);
  return a.eigenvalues().cwiseAbs().maxCoeff();
}

Eigen::MatrixXd solve_stationary_covariance(const Eigen::MatrixXd& a, const Eigen::MatrixXd& q) {
  // Doubling iteration for the fixed point S = A S A' + Q; each pass squares
  // the effective horizon, then the residual contract is verified directly.
  Eigen::MatrixXd s = q;
  Eigen::MatrixXd b = a;
  for (int it = 0; it < 200; ++it) {
    const Eigen::MatrixXd incr = b * s * b.transpose();
    s += incr;
    s = 0.5 * (s + s.transpose()).eval();
    if (incr.norm() < 1e-15 * (1.0 + s.norm())) break;
    b = (b * b).eval();
  }
  const double residual = (a * s * a.transpose() + q - s).norm();
  if (!(residual < 1e-10 * (1.0 + s.norm())))
    throw StabilityError("solve_stationary_covariance: fixed point did not converge");
  return s;
}

std::vector<std::string> validate(const DfmParams& params) {
  std::vector<std::string> violations;
  const int d = params.d(), r = params.r(), p = params.p();
  if (d < 1 || r < 1 || r > d) violations.push_back("dimensions: need 1 <= r <= d");
  if (p < 1) violations.push_back("lag order: need p >= 1");
  if (!violations.empty()) return violations;

  if (!params.lambda.topRows(r).isIdentity(1e-12))
    violations.push_back("identifiability: top r x r block of Lambda must be the identity");

  for (const auto& m : params.psi)
    if (m.rows() != r || m.cols() != r) {
      violations.push_back("transitions: each Psi_h must be r x r");
      return violations;
    }
  const double radius = companion_spectral_radius(params.psi);
  if (!(radius < 1.0))
    violations.push_back("stability: companion spectral radius " + std::to_string(radius) + " >= 1");

  auto check_sym = [&](const Eigen::MatrixXd& m, const char* name, double floor) {
    if (m.rows() != m.cols()) {
      violations.push_back(std::string(name) + ": must be square");
      return;
    }
    if ((m - m.transpose()).norm() > 1e-10 * (1.0 + m.norm()))
      violations.push_back(std::string(name) + ": must be symmetric");
    const double min_eig = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(m).eigenvalues().minCoeff();
    if (min_eig < floor)
      violations.push_back(std::string(name) + ": eigenvalue " + std::to_string(min_eig) + " below bound");
  };
  check_sym(params.sigma_eps, "sigma_eps", -1e-10);
  check_sym(params.sigma_eta, "sigma_eta", -1e-10);
  if (params.sigma_eps.rows() != d) violations.push_back("sigma_eps: must be d x d");
  if (params.sigma_eta.rows() != r) violations.push_back("sigma_eta: must be r x r");
  return violations;
}

std::vector<Eigen::MatrixXd> factor_acvf(const DfmParams& params, int h_max) {
  const int r = params.r(), p = params.p();
  const Eigen::MatrixXd a = companion_matrix(params.psi);
  Eigen::MatrixXd q_c = Eigen::MatrixXd::Zero(r * p, r * p);
  q_c.topLeftCorner(r, r) = params.sigma_eta;
  const Eigen::MatrixXd s = solve_stationary_covariance(a, q_c);

  std::vector<Eigen::MatrixXd> sigma_y;
  sigma_y.reserve(static_cast<std::size_t>(h_max) + 1);
  // Var(Y_t, ..., Y_{t-p+1}) holds Sigma_Y(0..p-1) along its first block row.
  for (int h = 0; h <= std::min(h_max, p - 1); ++h)
    sigma_y.push_back(s.block(0, h * r, r, r));
  for (int h = static_cast<int>(sigma_y.size()); h <= h_max; ++h) {
    Eigen::MatrixXd next = Eigen::MatrixXd::Zero(r, r);
    for (int m = 1; m <= p; ++m) {
      const Eigen::MatrixXd& past = sigma_y[static_cast<std::size_t>(h - m)];
      next += params.psi[static_cast<std::size_t>(m - 1)] * past;
    }
    sigma_y.push_back(next);
  }
  return sigma_y;
}

LatentAcfSet stationary_acvf(const DfmParams& params) {
  const int d = params.d(), p = params.p();
  LatentAcfSet out;
  out.sigma_y = factor_acvf(params, p);

  const Eigen::MatrixXd sigma_z0 =
      params.lambda * out.sigma_y[0] * params.lambda.transpose() + params.sigma_eps;
  out.z_scale = sigma_z0.diagonal().cwiseMax(0.0).cwiseSqrt();
  Eigen::VectorXd inv_scale(d);
  for (int i = 0; i < d; ++i)
    inv_scale[i] = out.z_scale[i] > 0.0 ? 1.0 / out.z_scale[i] : 0.0;

  out.r_z.reserve(static_cast<std::size_t>(p) + 1);
  for (int h = 0; h <= p; ++h) {
    Eigen::MatrixXd sigma_zh = params.lambda * out.sigma_y[static_cast<std::size_t>(h)] * params.lambda.transpose();
    if (h == 0) sigma_zh += params.sigma_eps;
    out.r_z.push_back(inv_scale.asDiagonal() * sigma_zh * inv_scale.asDiagonal());
  }
  out.r_z[0] = 0.5 * (out.r_z[0] + out.r_z[0].transpose()).eval();
  out.r_z[0].diagonal().setOnes();
  return out;
}

SimulatedPath simulate(const DfmParams& params, const std::vector<MarginalSpec>& marginals,
                       int T, int burn_in, std::uint64_t seed) {
  const int d = params.d(), r = params.r(), p = params.p();
  if (static_cast<int>(marginals.size()) != d)
    throw ParameterError("simulate: need one marginal per coordinate");
  if (T < 1) throw ParameterError("simulate: T must be positive");
  {
    const auto violations = validate(params);
    if (!violations.empty()) throw ParameterError("simulate: invalid params: " + violations.front());
  }

  const LatentAcfSet acf = stationary_acvf(params);
  const Eigen::MatrixXd eta_root = matrix_sqrt_psd(params.sigma_eta);
  const Eigen::MatrixXd eps_root = matrix_sqrt_psd(params.sigma_eps);

  Rng rng(seed);
  SimulatedPath path;
  path.x.resize(T, d);
  path.z.resize(T, d);
  path.y.resize(T, r);

  std::vector<Eigen::VectorXd> lags(static_cast<std::size_t>(p), Eigen::VectorXd::Zero(r));
  for (int t = -burn_in; t < T; ++t) {
    Eigen::VectorXd y = eta_root * rng.normal_vector(r);
    for (int m = 1; m <= p; ++m)
      y += params.psi[static_cast<std::size_t>(m - 1)] * lags[static_cast<std::size_t>(m - 1)];
    for (int m = p - 1; m >= 1; --m) lags[static_cast<std::size_t>(m)] = lags[static_cast<std::size_t>(m - 1)];
    lags[0] = y;
    if (t < 0) continue;
    Eigen::VectorXd z = params.lambda * y + eps_root * rng.normal_vector(d);
    for (int i = 0; i < d; ++i) {
      const double zi = acf.z_scale[i] > 0.0 ? z[i] / acf.z_scale[i] : 0.0;
      path.z(t, i) = zi;
      path.x(t, i) = quantile(marginals[static_cast<std::size_t>(i)], norm_cdf(zi));
    }
    path.y.row(t) = y.transpose();
  }
  return path;
}

Preset make_preset(Family family, int d, int r, int psi_set, std::uint64_t seed, int nb_successes) {
  if (d % 3 != 0) throw ParameterError("make_preset: d must be divisible by 3");
  if (r >= d) throw ParameterError("make_preset: need r < d");

  DfmParams params;
  switch (psi_set) {
    case 1:
      params.psi = {0.7 * Eigen::MatrixXd::Identity(r, r)};
      break;
    case 2:
      params.psi = {-0.7 * Eigen::MatrixXd::Identity(r, r)};
      break;
    case 3:
      params.psi = {0.7 * Eigen::MatrixXd::Identity(r, r), -0.4 * Eigen::MatrixXd::Identity(r, r)};
      break;
    case 4:
      params.psi = {0.7 * Eigen::MatrixXd::Identity(r, r), -0.2 * Eigen::MatrixXd::Identity(r, r),
                    0.3 * Eigen::MatrixXd::Identity(r, r), -0.4 * Eigen::MatrixXd::Identity(r, r)};
      break;
    default:
      throw ParameterError("make_preset: psi_set must be 1..4");
  }
  params.sigma_eta = Eigen::MatrixXd::Identity(r, r);
  params.sigma_eps = Eigen::MatrixXd::Identity(d, d);
  params.lambda = Eigen::MatrixXd::Zero(d, r);
  params.lambda.topRows(r).setIdentity();
  Rng rng(mix_seed(seed, 0x10adu));
  for (int i = r; i < d; ++i)
    for (int j = 0; j < r; ++j) params.lambda(i, j) = rng.uniform();

  Preset preset;
  preset.params = std::move(params);
  preset.families.assign(static_cast<std::size_t>(d), family);
  const int group = d / 3;
  for (int i = 0; i < d; ++i) {
    const int g = std::min(i / group, 2);
    switch (family) {
      case Family::Bernoulli:
        preset.marginals.push_back(MarginalSpec::bernoulli(g == 0 ? 0.2 : g == 1 ? 0.4 : 0.7));
        break;
      case Family::Poisson:
        preset.marginals.push_back(MarginalSpec::poisson(g == 0 ? 0.1 : g == 1 ? 1.0 : 10.0));
        break;
      case Family::NegBinomial:
        preset.marginals.push_back(
            MarginalSpec::neg_binomial(nb_successes, g == 0 ? 0.2 : g == 1 ? 0.4 : 0.7));
        break;
      case Family::Multinomial: {
        // five-point scale with a mild peak that shifts across the groups
        std::vector<double> q(5, 0.1);
        q[static_cast<std::size_t>(g + 1)] = 0.4;
        double tot = 0.0;
        for (double x : q) tot += x;
        for (double& x : q) x /= tot;
        preset.marginals.push_back(MarginalSpec::multinomial(q));
        break;
      }
    }
  }
  return preset;
}

}  // namespace countdfm
