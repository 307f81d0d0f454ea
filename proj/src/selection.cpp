#include "countdfm/selection.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "countdfm/errors.hpp"
#include "countdfm/parallel.hpp"

namespace countdfm {

namespace {

std::vector<MarginalSpec> fit_all_marginals(const Eigen::MatrixXi& x,
                                            const std::vector<Family>& families,
                                            const SelectionOptions& options) {
  const int T = static_cast<int>(x.rows());
  const int d = static_cast<int>(x.cols());
  if (static_cast<int>(families.size()) != d)
    throw ParameterError("selection: need one family per column");
  FitMarginalOptions fit_opts;
  fit_opts.nb_successes = options.nb_successes;
  fit_opts.multinomial_m = options.multinomial_m;
  std::vector<MarginalSpec> marginals;
  marginals.reserve(static_cast<std::size_t>(d));
  for (int i = 0; i < d; ++i) {
    std::vector<int> series(static_cast<std::size_t>(T));
    for (int t = 0; t < T; ++t) series[static_cast<std::size_t>(t)] = x(t, i);
    marginals.push_back(fit_marginal(series, families[static_cast<std::size_t>(i)], fit_opts));
  }
  return marginals;
}

Eigen::MatrixXd fold_r_z(const Eigen::MatrixXi& x, const LinkSet& links,
                         const std::vector<std::pair<int, int>>& segments, int h, int fold) {
  try {
    return links.inverse_link_matrix(sample_cross_correlation_segments(x, segments, h), h == 0);
  } catch (const DegenerateSeriesError& e) {
    throw DegenerateSeriesError("fold " + std::to_string(fold) + ": " + e.what());
  }
}

std::vector<std::pair<int, int>> complement_segments(const BlockFolds& folds, int b) {
  std::vector<std::pair<int, int>> segments;
  const auto [start, end] = folds.ranges[static_cast<std::size_t>(b)];
  if (start > 0) segments.push_back({0, start});
  const int T = folds.ranges.back().second;
  if (end < T) segments.push_back({end, T});
  return segments;
}

int argmin_candidate(const std::vector<double>& scores) {
  // Smallest candidate within numerical distance of the minimum.
  double best = scores[0];
  for (double s : scores) best = std::min(best, s);
  for (std::size_t i = 0; i < scores.size(); ++i)
    if (scores[i] <= best + 1e-12 * (1.0 + std::abs(best))) return static_cast<int>(i);
  return 0;
}

// Yule-Walker transitions stacked as (Psi_1' ... Psi_l')' for the BCV
// prediction objective.
Eigen::MatrixXd stack_transitions(const std::vector<Eigen::MatrixXd>& psi) {
  const int r = static_cast<int>(psi.front().rows());
  const int l = static_cast<int>(psi.size());
  Eigen::MatrixXd stacked(r * l, r);
  for (int h = 0; h < l; ++h)
    stacked.block(h * r, 0, r, r) = psi[static_cast<std::size_t>(h)].transpose();
  return stacked;
}

}  // namespace

BlockFolds make_block_folds(int T, int B) {
  if (B < 2) throw ParameterError("make_block_folds: need at least two blocks");
  if (T < 2 * B) throw ParameterError("make_block_folds: sample too short for the block count");
  BlockFolds folds;
  folds.B = B;
  for (int b = 0; b < B; ++b) {
    const int start = static_cast<int>(static_cast<long>(T) * b / B);
    const int end = static_cast<int>(static_cast<long>(T) * (b + 1) / B);
    folds.ranges.push_back({start, end});
  }
  return folds;
}

std::string rank_method_name(RankMethod m) {
  switch (m) {
    case RankMethod::ED: return "ED";
    case RankMethod::IC1: return "IC1";
    case RankMethod::IC2: return "IC2";
    case RankMethod::IC3: return "IC3";
    case RankMethod::BCV_PC: return "BCV_PC";
  }
  return "unknown";
}

RankMethod rank_method_from_name(const std::string& name) {
  if (name == "ED") return RankMethod::ED;
  if (name == "IC1") return RankMethod::IC1;
  if (name == "IC2") return RankMethod::IC2;
  if (name == "IC3") return RankMethod::IC3;
  if (name == "BCV_PC") return RankMethod::BCV_PC;
  throw ParameterError("unknown rank selection method: " + name);
}

std::string lag_method_name(LagMethod m) {
  switch (m) {
    case LagMethod::AIC: return "AIC";
    case LagMethod::HQ: return "HQ";
    case LagMethod::SC: return "SC";
    case LagMethod::FPE: return "FPE";
    case LagMethod::BCV: return "BCV";
  }
  return "unknown";
}

LagMethod lag_method_from_name(const std::string& name) {
  if (name == "AIC") return LagMethod::AIC;
  if (name == "HQ") return LagMethod::HQ;
  if (name == "SC") return LagMethod::SC;
  if (name == "FPE") return LagMethod::FPE;
  if (name == "BCV") return LagMethod::BCV;
  throw ParameterError("unknown lag selection method: " + name);
}

SelectionResult select_rank(const Eigen::MatrixXi& x, const std::vector<Family>& families,
                            RankMethod method, int r_max, const SelectionOptions& options) {
  const int T = static_cast<int>(x.rows());
  const int d = static_cast<int>(x.cols());
  if (r_max < 1 || r_max >= d) throw ParameterError("select_rank: need 1 <= r_max < d");

  const std::vector<MarginalSpec> marginals = fit_all_marginals(x, families, options);
  const LinkSet links(marginals, options.hermite_K, options.spline_M, options.threads);
  const Eigen::MatrixXd r_z0 = links.inverse_link_matrix(sample_cross_correlation(x, 0), true);

  SelectionResult result;
  for (int q = 1; q <= r_max; ++q) result.candidates.push_back(q);

  if (method == RankMethod::ED) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(r_z0);
    const Eigen::VectorXd evals = eig.eigenvalues().reverse();
    const int regress_n = 5;
    if (r_max + regress_n > d)
      throw ParameterError("select_rank: ED needs r_max + 5 <= d eigenvalues");

    auto rank_for_delta = [&](double delta) {
      int rhat = 0;
      for (int k = 1; k <= r_max; ++k)
        if (evals[k - 1] - evals[k] >= delta) rhat = k;
      return rhat;
    };

    int j = r_max + 1;
    double delta = 0.0;
    int rhat = 0;
    for (int it = 0; it < 20; ++it) {
      // slope of e_j on (j-1)^{2/3} over five consecutive eigenvalues
      double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
      for (int m = 0; m < regress_n; ++m) {
        const double xr = std::pow(static_cast<double>(j + m - 1), 2.0 / 3.0);
        const double yr = evals[j + m - 1];
        sx += xr;
        sy += yr;
        sxx += xr * xr;
        sxy += xr * yr;
      }
      const double slope = (regress_n * sxy - sx * sy) / (regress_n * sxx - sx * sx);
      delta = 2.0 * std::abs(slope);
      const int next = rank_for_delta(delta);
      const int j_next = std::min(next + 1, d - regress_n + 1);
      if (j_next == j) {
        rhat = next;
        break;
      }
      j = j_next;
      rhat = next;
    }
    for (int q = 1; q <= r_max; ++q)
      result.scores.push_back(-(evals[q - 1] - evals[q]));  // report gaps (more negative = larger)
    if (rhat == 0) {
      result.warnings.push_back("ED: no eigenvalue gap exceeded delta; falling back to r = 1");
      rhat = 1;
    }
    result.chosen = rhat;
    return result;
  }

  if (method == RankMethod::IC1 || method == RankMethod::IC2 || method == RankMethod::IC3) {
    const double c2 = std::min(static_cast<double>(d), static_cast<double>(T));
    double penalty = 0.0;
    switch (method) {
      case RankMethod::IC1:
        penalty = (d + T) / static_cast<double>(d) / T * std::log(static_cast<double>(d) * T / (d + T));
        break;
      case RankMethod::IC2:
        penalty = (d + T) / static_cast<double>(d) / T * std::log(c2);
        break;
      default:
        penalty = std::log(c2) / c2;
        break;
    }
    for (int q = 1; q <= r_max; ++q) {
      const PcaFactorEstimate pca = pca_factor_estimate(r_z0, q);
      const double fit = std::log(pca.sigma_eps.squaredNorm() / (static_cast<double>(d) * T));
      result.scores.push_back(fit + q * penalty);
    }
    result.chosen = result.candidates[static_cast<std::size_t>(argmin_candidate(result.scores))];
    return result;
  }

  // BCV(PC)
  const BlockFolds folds = make_block_folds(T, options.blocks);
  std::vector<Eigen::MatrixXd> test_r(static_cast<std::size_t>(folds.B)),
      train_r(static_cast<std::size_t>(folds.B));
  for (int b = 0; b < folds.B; ++b) {
    test_r[static_cast<std::size_t>(b)] =
        fold_r_z(x, links, {folds.ranges[static_cast<std::size_t>(b)]}, 0, b);
    train_r[static_cast<std::size_t>(b)] = fold_r_z(x, links, complement_segments(folds, b), 0, b);
  }

  const int n_cells = r_max * folds.B;
  std::vector<double> cell(static_cast<std::size_t>(n_cells), 0.0);
  parallel_for(n_cells, options.threads, [&](int idx) {
    const int q = idx / folds.B + 1;
    const int b = idx % folds.B;
    const PcaFactorEstimate pca = pca_factor_estimate(train_r[static_cast<std::size_t>(b)], q);
    const Eigen::MatrixXd recon = train_r[static_cast<std::size_t>(b)] - pca.sigma_eps +
                                  Eigen::MatrixXd(pca.sigma_eps.diagonal().asDiagonal());
    cell[static_cast<std::size_t>(idx)] =
        (test_r[static_cast<std::size_t>(b)] - recon).squaredNorm();
  });

  result.fold_scores.resize(static_cast<std::size_t>(r_max));
  for (int q = 1; q <= r_max; ++q) {
    auto& per_fold = result.fold_scores[static_cast<std::size_t>(q - 1)];
    double mse = 0.0;
    for (int b = 0; b < folds.B; ++b) {
      const double v = cell[static_cast<std::size_t>((q - 1) * folds.B + b)];
      per_fold.push_back(v);
      mse += v;
    }
    result.scores.push_back(mse / folds.B);
  }
  result.chosen = result.candidates[static_cast<std::size_t>(argmin_candidate(result.scores))];
  return result;
}

SelectionResult select_lag(const Eigen::MatrixXi& x, const std::vector<Family>& families, int r,
                           LagMethod method, int p_max, const SelectionOptions& options) {
  const int T = static_cast<int>(x.rows());
  const int d = static_cast<int>(x.cols());
  if (p_max < 1) throw ParameterError("select_lag: p_max must be >= 1");
  if (p_max >= T / 4) throw ParameterError("select_lag: p_max must be below T/4");
  if (r < 1 || r >= d) throw ParameterError("select_lag: need 1 <= r < d");

  const std::vector<MarginalSpec> marginals = fit_all_marginals(x, families, options);
  const LinkSet links(marginals, options.hermite_K, options.spline_M, options.threads);

  SelectionResult result;
  for (int l = 1; l <= p_max; ++l) result.candidates.push_back(l);

  if (method != LagMethod::BCV) {
    std::vector<Eigen::MatrixXd> r_z(static_cast<std::size_t>(p_max) + 1);
    for (int h = 0; h <= p_max; ++h)
      r_z[static_cast<std::size_t>(h)] =
          links.inverse_link_matrix(sample_cross_correlation(x, h), h == 0);
    const PcaFactorEstimate pca = pca_factor_estimate(r_z[0], r);
    std::vector<Eigen::MatrixXd> sigma_y(static_cast<std::size_t>(p_max) + 1);
    sigma_y[0] = pca.sigma_y0;
    for (int h = 1; h <= p_max; ++h)
      sigma_y[static_cast<std::size_t>(h)] = factor_lag_cov(pca.lambda, r_z[static_cast<std::size_t>(h)]);

    double best = std::numeric_limits<double>::infinity();
    int chosen = 0;
    for (int l = 1; l <= p_max; ++l) {
      const std::vector<Eigen::MatrixXd> head(sigma_y.begin(), sigma_y.begin() + l + 1);
      double score = std::numeric_limits<double>::quiet_NaN();
      try {
        const YuleWalkerEstimate yw = yule_walker(head);
        const double det = yw.sigma_eta.determinant();
        if (det > 0.0) {
          double penalty = 0.0;
          const double lr2 = static_cast<double>(l) * r * r;
          switch (method) {
            case LagMethod::AIC: penalty = 2.0 * lr2 / T; break;
            case LagMethod::HQ: penalty = 2.0 * std::log(std::log(static_cast<double>(T))) * lr2 / T; break;
            case LagMethod::SC: penalty = std::log(static_cast<double>(T)) * lr2 / T; break;
            default: penalty = 2.0 * r * (r * l + 1.0) / T; break;
          }
          score = std::log(det) + penalty;
        } else {
          result.warnings.push_back("lag " + std::to_string(l) +
                                    ": innovation determinant not positive; candidate skipped");
        }
      } catch (const SingularSystemError& e) {
        result.warnings.push_back("lag " + std::to_string(l) + ": " + e.what());
      }
      result.scores.push_back(score);
      if (std::isfinite(score) && score < best - 1e-12 * (1.0 + std::abs(score))) {
        best = score;
        chosen = l;
      }
    }
    if (chosen == 0) throw NumericError("select_lag: every candidate was skipped");
    result.chosen = chosen;
    return result;
  }

  // BCV: training folds give the transitions; test folds supply the Gram
  // quantities of the prediction objective via their second-order latent
  // moments. The first l points of each test block act only as regressors.
  const BlockFolds folds = make_block_folds(T, options.blocks);

  struct FoldMoments {
    std::vector<Eigen::MatrixXd> train_sigma_y;  // 0..p_max
    std::vector<Eigen::MatrixXd> test_sigma_y;   // 0..p_max
    int test_len = 0;
  };
  std::vector<FoldMoments> moments(static_cast<std::size_t>(folds.B));
  parallel_for(folds.B, options.threads, [&](int b) {
    FoldMoments fm;
    const auto train_segments = complement_segments(folds, b);
    const std::vector<std::pair<int, int>> test_segments = {
        folds.ranges[static_cast<std::size_t>(b)]};
    fm.test_len = folds.ranges[static_cast<std::size_t>(b)].second -
                  folds.ranges[static_cast<std::size_t>(b)].first;

    const Eigen::MatrixXd train_r0 = fold_r_z(x, links, train_segments, 0, b);
    const PcaFactorEstimate pca = pca_factor_estimate(train_r0, r);
    const Eigen::MatrixXd gram_inv =
        (pca.lambda.transpose() * pca.lambda).ldlt().solve(Eigen::MatrixXd::Identity(r, r));
    const Eigen::MatrixXd proj = gram_inv * pca.lambda.transpose();  // r x d

    fm.train_sigma_y.resize(static_cast<std::size_t>(p_max) + 1);
    fm.test_sigma_y.resize(static_cast<std::size_t>(p_max) + 1);
    fm.train_sigma_y[0] = pca.sigma_y0;
    const Eigen::MatrixXd test_r0 = fold_r_z(x, links, test_segments, 0, b);
    // lag-0 test moment de-noised with the training noise covariance
    fm.test_sigma_y[0] = proj * (test_r0 - pca.sigma_eps) * proj.transpose();
    for (int h = 1; h <= p_max; ++h) {
      fm.train_sigma_y[static_cast<std::size_t>(h)] =
          factor_lag_cov(pca.lambda, fold_r_z(x, links, train_segments, h, b));
      fm.test_sigma_y[static_cast<std::size_t>(h)] =
          proj * fold_r_z(x, links, test_segments, h, b) * proj.transpose();
    }
    moments[static_cast<std::size_t>(b)] = std::move(fm);
  });

  result.fold_scores.resize(static_cast<std::size_t>(p_max));
  for (int l = 1; l <= p_max; ++l)
    result.fold_scores[static_cast<std::size_t>(l - 1)].resize(static_cast<std::size_t>(folds.B));
  std::vector<std::string> cell_warnings(static_cast<std::size_t>(p_max), "");

  parallel_for(p_max, options.threads, [&](int li) {
    const int l = li + 1;
    for (int b = 0; b < folds.B; ++b) {
      const FoldMoments& fm = moments[static_cast<std::size_t>(b)];
      double score = std::numeric_limits<double>::quiet_NaN();
      try {
        const std::vector<Eigen::MatrixXd> head(fm.train_sigma_y.begin(),
                                                fm.train_sigma_y.begin() + l + 1);
        const Eigen::MatrixXd stacked = stack_transitions(yule_walker(head).psi);  // rl x r

        const int n_b = fm.test_len - l;
        if (n_b < 1) throw ParameterError("test block shorter than the lag order");
        // Gram quantities from the test block's second-order moments:
        //   X'Y ~ n_b (Sigma(1)' ... Sigma(l)')',  X'X ~ n_b block-Toeplitz.
        Eigen::MatrixXd xy(r * l, r), xx(r * l, r * l);
        for (int g = 1; g <= l; ++g)
          xy.block((g - 1) * r, 0, r, r) = fm.test_sigma_y[static_cast<std::size_t>(g)].transpose();
        for (int i = 0; i < l; ++i)
          for (int j = 0; j < l; ++j) {
            const Eigen::MatrixXd& s = fm.test_sigma_y[static_cast<std::size_t>(std::abs(j - i))];
            xx.block(i * r, j * r, r, r) = j >= i ? s : s.transpose();
          }
        score = n_b * (-2.0 * (stacked.transpose() * xy).trace() +
                       (stacked.transpose() * xx * stacked).trace());
      } catch (const Error& e) {
        cell_warnings[static_cast<std::size_t>(li)] =
            "lag " + std::to_string(l) + ": " + e.what();
      }
      result.fold_scores[static_cast<std::size_t>(li)][static_cast<std::size_t>(b)] = score;
    }
  });

  double best = std::numeric_limits<double>::infinity();
  int chosen = 0;
  for (int l = 1; l <= p_max; ++l) {
    double total = 0.0;
    bool ok = true;
    for (int b = 0; b < folds.B; ++b) {
      const double v = result.fold_scores[static_cast<std::size_t>(l - 1)][static_cast<std::size_t>(b)];
      if (!std::isfinite(v)) ok = false;
      total += v;
    }
    if (!cell_warnings[static_cast<std::size_t>(l - 1)].empty())
      result.warnings.push_back(cell_warnings[static_cast<std::size_t>(l - 1)]);
    result.scores.push_back(ok ? total : std::numeric_limits<double>::quiet_NaN());
    if (ok && total < best - 1e-12 * (1.0 + std::abs(total))) {
      best = total;
      chosen = l;
    }
  }
  if (chosen == 0) throw NumericError("select_lag: every candidate was skipped");
  result.chosen = chosen;
  return result;
}

}  // namespace countdfm
