#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "countdfm/estimation.hpp"

namespace countdfm {

// Equally sized consecutive time blocks covering 1..T (sizes differ by at
// most one). Block b is the test fold; its complement is the training fold.
struct BlockFolds {
  int B = 0;
  std::vector<std::pair<int, int>> ranges;  // [start, end)
};

BlockFolds make_block_folds(int T, int B);

enum class RankMethod { ED, IC1, IC2, IC3, BCV_PC };
enum class LagMethod { AIC, HQ, SC, FPE, BCV };

std::string rank_method_name(RankMethod m);
RankMethod rank_method_from_name(const std::string& name);
std::string lag_method_name(LagMethod m);
LagMethod lag_method_from_name(const std::string& name);

struct SelectionResult {
  int chosen = 0;
  std::vector<int> candidates;
  std::vector<double> scores;  // per candidate (aggregated over folds for BCV)
  std::vector<std::vector<double>> fold_scores;  // [candidate][fold], BCV only
  std::vector<std::string> warnings;
};

struct SelectionOptions {
  int hermite_K = 100;
  int spline_M = 200;
  int nb_successes = 3;
  int multinomial_m = 0;
  int blocks = 5;
  int threads = 1;
};

// Number-of-factors selection on the inverse-link lag-0 correlations:
// eigenvalue-gap (ED with the iterative delta calibration), the three
// information criteria, or block cross-validation against rank-q
// reconstructions plus a diagonal.
SelectionResult select_rank(const Eigen::MatrixXi& x, const std::vector<Family>& families,
                            RankMethod method, int r_max, const SelectionOptions& options = {});

// VAR lag-order selection for a given factor count: innovation-determinant
// information criteria or the block cross-validated prediction objective
// built from fold-level second-order quantities.
SelectionResult select_lag(const Eigen::MatrixXi& x, const std::vector<Family>& families, int r,
                           LagMethod method, int p_max, const SelectionOptions& options = {});

}  // namespace countdfm
