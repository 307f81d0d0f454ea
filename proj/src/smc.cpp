#include "countdfm/smc.hpp"

#include <algorithm>
#include <cmath>

#include "countdfm/errors.hpp"
#include "countdfm/normal.hpp"
#include "countdfm/parallel.hpp"
#include "countdfm/rng.hpp"

namespace countdfm {

namespace {

constexpr int kPrimes[] = {2,  3,  5,  7,  11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47,
                           53, 59, 61, 67, 71, 73, 79, 83, 89, 97, 101, 103, 107, 109, 113,
                           127, 131, 137, 139, 149, 151, 157, 163, 167, 173};

double phi_interval(double a, double b) {
  // P(a < Z <= b) computed from the side with more mass.
  if (a >= b) return 0.0;
  if (a <= 0.0 && b >= 0.0) return norm_cdf(b) - norm_cdf(a);
  if (b < 0.0) return norm_cdf(b) - norm_cdf(a);
  return norm_sf(a) - norm_sf(b);
}

Eigen::MatrixXd cholesky_psd(const Eigen::MatrixXd& cov) {
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() == Eigen::Success) return llt.matrixL();
  Eigen::MatrixXd jittered = cov;
  jittered.diagonal().array() += 1e-12 * (1.0 + cov.diagonal().maxCoeff());
  llt.compute(jittered);
  if (llt.info() != Eigen::Success)
    throw NumericError("mvn_rectangle_prob: covariance is not positive semidefinite");
  return llt.matrixL();
}

// Prepared machinery for repeated rectangle probabilities and constrained
// draws under one covariance (shared across particles at each time step).
struct BoxSampler {
  Eigen::MatrixXd chol;       // lower Cholesky factor
  Eigen::MatrixXd precision;  // for the Gibbs full conditionals
  Eigen::VectorXd cond_sd;    // 1/sqrt(P_ii)
  int dim = 0;

  void prepare(const Eigen::MatrixXd& cov) {
    dim = static_cast<int>(cov.rows());
    chol = cholesky_psd(cov);
    Eigen::MatrixXd identity = Eigen::MatrixXd::Identity(dim, dim);
    precision = chol.transpose().triangularView<Eigen::Upper>().solve(
        chol.triangularView<Eigen::Lower>().solve(identity));
    cond_sd = precision.diagonal().cwiseInverse().cwiseSqrt();
  }

  double prob(const Eigen::VectorXd& mean, const Eigen::VectorXd& lo, const Eigen::VectorXd& hi,
              int n_qmc, std::uint64_t seed) const {
    if (dim == 1) return phi_interval((lo[0] - mean[0]) / chol(0, 0), (hi[0] - mean[0]) / chol(0, 0));

    Rng rng(seed);
    Eigen::VectorXd shift(dim - 1), lattice(dim - 1);
    for (int i = 0; i + 1 < dim; ++i) {
      shift[i] = rng.uniform();
      lattice[i] = std::sqrt(static_cast<double>(kPrimes[i % 40]));
    }
    Eigen::VectorXd y(dim - 1);
    double acc = 0.0;
    for (int s = 0; s < n_qmc; ++s) {
      double prod = 1.0;
      for (int i = 0; i < dim; ++i) {
        double m = 0.0;
        for (int j = 0; j < i; ++j) m += chol(i, j) * y[j];
        const double ci = chol(i, i);
        if (ci <= 0.0) {  // degenerate direction: the mass is an indicator
          const double point = mean[i] + m;
          if (point <= lo[i] || point > hi[i]) prod = 0.0;
          continue;
        }
        const double ai = (lo[i] - mean[i] - m) / ci;
        const double bi = (hi[i] - mean[i] - m) / ci;
        const double da = norm_cdf(ai);
        const double pr = phi_interval(ai, bi);
        prod *= pr;
        if (prod <= 0.0) break;
        if (i + 1 < dim) {
          double w = (s + 1) * lattice[i] + shift[i];
          w -= std::floor(w);
          y[i] = norm_quantile(std::min(std::max(da + w * pr, 1e-300), 1.0 - 1e-16));
        }
      }
      acc += prod;
    }
    return acc / n_qmc;
  }

  // One-dimensional truncated normal draw by inverse CDF, reflected so the
  // CDF differences are always taken in the accurate tail.
  static double truncated_normal(double a, double b, double u) {
    if (a > 0.0) return -truncated_normal(-b, -a, 1.0 - u);
    const double fa = norm_cdf(a);
    const double fb = norm_cdf(b);
    const double span = fb - fa;
    if (!(span > 0.0)) return 0.5 * (std::max(a, -37.0) + std::min(b, 37.0));
    return norm_quantile(std::min(std::max(fa + u * span, 1e-300), 1.0 - 1e-16));
  }

  Eigen::VectorXd gibbs(const Eigen::VectorXd& mean, const Eigen::VectorXd& lo,
                        const Eigen::VectorXd& hi, int sweeps, std::uint64_t seed) const {
    Eigen::VectorXd x(dim);
    for (int i = 0; i < dim; ++i)
      x[i] = std::min(std::max(mean[i], lo[i]), hi[i]);  // box-projected mean
    if (dim == 1) {
      Rng rng(seed);
      const double s = chol(0, 0);
      return Eigen::VectorXd::Constant(
          1, mean[0] + s * truncated_normal((lo[0] - mean[0]) / s, (hi[0] - mean[0]) / s,
                                            rng.uniform()));
    }
    Rng rng(seed);
    Eigen::VectorXd centered = x - mean;
    for (int sweep = 0; sweep < sweeps; ++sweep) {
      for (int i = 0; i < dim; ++i) {
        double dot = 0.0;
        for (int j = 0; j < dim; ++j)
          if (j != i) dot += precision(i, j) * centered[j];
        const double cm = mean[i] - cond_sd[i] * cond_sd[i] * dot;
        const double cs = cond_sd[i];
        const double draw =
            cm + cs * truncated_normal((lo[i] - cm) / cs, (hi[i] - cm) / cs, rng.uniform());
        centered[i] = draw - mean[i];
      }
    }
    return mean + centered;
  }
};

}  // namespace

double mvn_rectangle_prob(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov,
                          const Eigen::VectorXd& lo, const Eigen::VectorXd& hi, int n_qmc,
                          std::uint64_t seed) {
  const int d = static_cast<int>(mean.size());
  if (cov.rows() != d || cov.cols() != d || lo.size() != d || hi.size() != d)
    throw ParameterError("mvn_rectangle_prob: dimension mismatch");
  for (int i = 0; i < d; ++i)
    if (!(lo[i] < hi[i])) throw ParameterError("mvn_rectangle_prob: need lo < hi elementwise");
  BoxSampler sampler;
  sampler.prepare(cov);
  return sampler.prob(mean, lo, hi, n_qmc, seed);
}

Eigen::VectorXd sample_truncated_mvn(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov,
                                     const Eigen::VectorXd& lo, const Eigen::VectorXd& hi,
                                     int sweeps, std::uint64_t seed) {
  const int d = static_cast<int>(mean.size());
  if (cov.rows() != d || cov.cols() != d || lo.size() != d || hi.size() != d)
    throw ParameterError("sample_truncated_mvn: dimension mismatch");
  for (int i = 0; i < d; ++i)
    if (!(lo[i] < hi[i])) throw DegenerateBinError("sample_truncated_mvn: empty box");
  BoxSampler sampler;
  sampler.prepare(cov);
  return sampler.gibbs(mean, lo, hi, sweeps, seed);
}

double effective_sample_size(const Eigen::VectorXd& weights) {
  const double ss = weights.squaredNorm();
  if (!(ss > 0.0)) throw WeightDegeneracyError("effective_sample_size: all weights are zero");
  return 1.0 / ss;
}

std::vector<int> resample(const Eigen::VectorXd& weights, Resampling strategy,
                          std::uint64_t seed) {
  const int n = static_cast<int>(weights.size());
  if (n == 0) throw ParameterError("resample: empty weight vector");
  const double total = weights.sum();
  if (!(total > 0.0)) throw WeightDegeneracyError("resample: weights sum to zero");

  Rng rng(seed);
  std::vector<int> indices(static_cast<std::size_t>(n));
  if (strategy == Resampling::Systematic) {
    const double u1 = rng.uniform() / n;
    int j = 0;
    double cum = weights[0] / total;
    for (int k = 0; k < n; ++k) {
      const double u = u1 + static_cast<double>(k) / n;
      while (u > cum && j + 1 < n) {
        ++j;
        cum += weights[j] / total;
      }
      indices[static_cast<std::size_t>(k)] = j;
    }
  } else {
    for (int k = 0; k < n; ++k) {
      const double u = rng.uniform();
      int j = 0;
      double cum = weights[0] / total;
      while (u > cum && j + 1 < n) {
        ++j;
        cum += weights[j] / total;
      }
      indices[static_cast<std::size_t>(k)] = j;
    }
  }
  return indices;
}

ParticleEnsemble run_sisr(const Eigen::MatrixXi& x_window, const FittedModel& model,
                          const SisrOptions& options, std::uint64_t seed) {
  const int W = static_cast<int>(x_window.rows());
  const int d = static_cast<int>(x_window.cols());
  const int N = options.particles;
  if (W < 1) throw ParameterError("run_sisr: empty observation window");
  if (N < 1) throw ParameterError("run_sisr: need at least one particle");
  if (d != static_cast<int>(model.marginals.size()))
    throw ParameterError("run_sisr: window width does not match the model dimension");
  const int threads = resolve_threads(options.threads);

  ParticleEnsemble ens;
  ens.ss = build_state_space(model.forecast_params());
  ens.covs = initial_covs(ens.ss);
  const int rp = ens.ss.state_dim();

  // Y_0 ~ N(0, Q0) per particle, one independent stream each.
  const Eigen::MatrixXd q0_root = [&] {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(ens.ss.q0);
    return Eigen::MatrixXd(eig.eigenvectors() *
                           eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal());
  }();
  ens.states.resize(rp, N);
  parallel_for(N, threads, [&](int k) {
    Rng rng(mix_seed(seed, 0, static_cast<std::uint64_t>(k)));
    ens.states.col(k) = q0_root * rng.normal_vector(rp);
  });
  ens.weights = Eigen::VectorXd::Constant(N, 1.0 / N);
  ens.latents.resize(d, N);

  Eigen::MatrixXd y_pred(rp, N), z_pred(d, N), z_draw(d, N);
  Eigen::VectorXd step_prob(N);

  for (int t = 0; t < W; ++t) {
    advance_covs(ens.ss, ens.covs);
    BoxSampler sampler;
    sampler.prepare(ens.covs.r_pred);

    Eigen::VectorXd lo(d), hi(d);
    for (int i = 0; i < d; ++i) {
      const BinBounds b = bin_bounds(model.marginals[static_cast<std::size_t>(i)], x_window(t, i));
      lo[i] = b.lo;
      hi[i] = b.hi;
    }

    parallel_for(N, threads, [&](int k) {
      y_pred.col(k) = ens.ss.psi_c * ens.states.col(k);
      z_pred.col(k) = ens.ss.lambda_c * y_pred.col(k);
      step_prob[k] = sampler.prob(z_pred.col(k), lo, hi, options.n_qmc,
                                  mix_seed(seed, 3 * t + 1, static_cast<std::uint64_t>(k)));
      z_draw.col(k) = sampler.gibbs(z_pred.col(k), lo, hi, options.gibbs_sweeps,
                                    mix_seed(seed, 3 * t + 2, static_cast<std::uint64_t>(k)));
    });

    ens.weights = ens.weights.cwiseProduct(step_prob);
    const double total = ens.weights.sum();
    if (!(total > 0.0) || !std::isfinite(total))
      throw WeightDegeneracyError(
          "run_sisr: all importance weights vanished at step " + std::to_string(t) +
          "; increase the particle count");
    ens.weights /= total;

    const double ess = effective_sample_size(ens.weights);
    ens.ess_trace.push_back(ess);
    const double threshold = options.ess_threshold_fraction * N;
    const bool fire = options.resample_when_ess_above ? ess > threshold : ess < threshold;
    if (fire && N > 1) {
      const std::vector<int> idx =
          resample(ens.weights, options.resampling, mix_seed(seed, 3 * t + 3, 0));
      Eigen::MatrixXd y_new(rp, N), zp_new(d, N), zd_new(d, N);
      for (int k = 0; k < N; ++k) {
        y_new.col(k) = y_pred.col(idx[static_cast<std::size_t>(k)]);
        zp_new.col(k) = z_pred.col(idx[static_cast<std::size_t>(k)]);
        zd_new.col(k) = z_draw.col(idx[static_cast<std::size_t>(k)]);
      }
      y_pred = std::move(y_new);
      z_pred = std::move(zp_new);
      z_draw = std::move(zd_new);
      ens.weights.setConstant(1.0 / N);
      ++ens.resample_count;
    }

    parallel_for(N, threads, [&](int k) {
      ens.states.col(k) = y_pred.col(k) + ens.covs.gain * (z_draw.col(k) - z_pred.col(k));
    });
    ens.latents = z_draw;
  }
  return ens;
}

ForecastDistribution forecast_distribution(const ParticleEnsemble& ensemble,
                                           const FittedModel& model, int H, int threads) {
  if (H < 1) throw ParameterError("forecast_distribution: H must be >= 1");
  const int d = ensemble.ss.d;
  const int N = static_cast<int>(ensemble.weights.size());
  threads = resolve_threads(threads);

  ForecastDistribution dist;
  dist.horizon = H;
  dist.support.resize(static_cast<std::size_t>(d));
  std::vector<std::vector<double>> thr_lo(static_cast<std::size_t>(d)),
      thr_hi(static_cast<std::size_t>(d));
  for (int i = 0; i < d; ++i) {
    const MarginalSpec& spec = model.marginals[static_cast<std::size_t>(i)];
    for (int v = spec.support_min(); v <= spec.support_max(); ++v) {
      dist.support[static_cast<std::size_t>(i)].push_back(v);
      const BinBounds b = bin_bounds(spec, v);
      thr_lo[static_cast<std::size_t>(i)].push_back(b.lo);
      thr_hi[static_cast<std::size_t>(i)].push_back(b.hi);
    }
  }

  const std::vector<HorizonPrediction> horizon =
      predict_horizon_covs(ensemble.ss, ensemble.covs.q_filt, H);

  dist.pmf.assign(static_cast<std::size_t>(H), {});
  Eigen::MatrixXd states = ensemble.states;
  for (int h = 1; h <= H; ++h) {
    states = (ensemble.ss.psi_c * states).eval();
    const Eigen::MatrixXd z_pred = ensemble.ss.lambda_c * states;  // d x N
    const Eigen::VectorXd sd =
        horizon[static_cast<std::size_t>(h - 1)].r_pred.diagonal().cwiseMax(0.0).cwiseSqrt();

    auto& slot = dist.pmf[static_cast<std::size_t>(h - 1)];
    slot.resize(static_cast<std::size_t>(d));
    parallel_for(d, threads, [&](int i) {
      const auto& lo = thr_lo[static_cast<std::size_t>(i)];
      const auto& hi = thr_hi[static_cast<std::size_t>(i)];
      const std::size_t m = lo.size();
      std::vector<double>& pmf = slot[static_cast<std::size_t>(i)];
      pmf.assign(m, 0.0);
      const double s = sd[i] > 0.0 ? sd[i] : 1e-12;
      for (int k = 0; k < N; ++k) {
        const double w = ensemble.weights[k];
        const double mu = z_pred(i, k);
        for (std::size_t v = 0; v < m; ++v)
          pmf[v] += w * phi_interval((lo[v] - mu) / s, (hi[v] - mu) / s);
      }
    });
  }

  // Values never observed in the estimation sample are excluded and the
  // pmf renormalized.
  if (!model.observed_support.empty()) {
    for (int i = 0; i < d; ++i) {
      const auto& observed = model.observed_support[static_cast<std::size_t>(i)];
      if (observed.empty()) continue;
      auto& support = dist.support[static_cast<std::size_t>(i)];
      std::vector<std::size_t> keep;
      for (std::size_t v = 0; v < support.size(); ++v)
        if (std::binary_search(observed.begin(), observed.end(), support[v])) keep.push_back(v);
      if (keep.size() == support.size() || keep.empty()) continue;
      std::vector<int> new_support;
      for (std::size_t v : keep) new_support.push_back(support[v]);
      for (int h = 0; h < H; ++h) {
        auto& pmf = dist.pmf[static_cast<std::size_t>(h)][static_cast<std::size_t>(i)];
        std::vector<double> kept;
        double total = 0.0;
        for (std::size_t v : keep) {
          kept.push_back(pmf[v]);
          total += pmf[v];
        }
        if (total > 0.0)
          for (double& q : kept) q /= total;
        pmf = std::move(kept);
      }
      support = std::move(new_support);
    }
  }
  return dist;
}

Eigen::MatrixXi point_forecast(const ForecastDistribution& dist) {
  const int H = dist.horizon;
  const int d = static_cast<int>(dist.support.size());
  Eigen::MatrixXi out(H, d);
  for (int h = 0; h < H; ++h) {
    for (int i = 0; i < d; ++i) {
      const auto& pmf = dist.pmf[static_cast<std::size_t>(h)][static_cast<std::size_t>(i)];
      const auto& support = dist.support[static_cast<std::size_t>(i)];
      std::size_t best = 0;
      for (std::size_t v = 1; v < pmf.size(); ++v)
        if (pmf[v] > pmf[best]) best = v;  // strict: ties keep the smaller value
      out(h, i) = support[best];
    }
  }
  return out;
}

}  // namespace countdfm
