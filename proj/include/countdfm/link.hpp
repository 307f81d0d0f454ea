#pragma once

#include <memory>
#include <vector>

#include <Eigen/Dense>

#include "countdfm/marginals.hpp"

namespace countdfm {

// Power-series map from latent Gaussian correlation to count correlation,
// truncated at the Hermite order K of its inputs.
struct LinkFunction {
  std::vector<double> coeffs;  // l_1..l_K stored at index k-1
  double rho_minus = -1.0;     // L(-1), smallest attainable correlation
  double rho_plus = 1.0;       // L(1), largest attainable correlation
};

LinkFunction build_link(const HermiteCoeffs& gi, const HermiteCoeffs& gj);

/// Horner evaluation of the truncated series at u in [-1,1].
double link_eval(const LinkFunction& link, double u);

// Natural cubic spline through the knots (v_m, u_m) with v_m = L(u_m) on a
// Chebyshev-type grid of u. Evaluation clamps to -1 below v_0 and +1 above
// v_M, extending the inverse to all of [-1,1].
class InverseLinkTable {
 public:
  InverseLinkTable() = default;
  InverseLinkTable(std::vector<double> knots_v, std::vector<double> knots_u);

  double operator()(double v) const;

  const std::vector<double>& knots_v() const { return v_; }
  const std::vector<double>& knots_u() const { return u_; }
  const std::vector<double>& second_derivatives() const { return a_; }

 private:
  std::vector<double> v_, u_, a_;
};

InverseLinkTable build_inverse(const LinkFunction& link, int M = 200);

// All pairwise links for a set of marginals, deduplicated by marginal
// parameters (simulation designs reuse a few distinct parameter values across
// many series). Immutable after construction; concurrent reads are safe.
class LinkSet {
 public:
  LinkSet(const std::vector<MarginalSpec>& marginals, int K = 100, int M = 200,
          int threads = 1);

  int dimension() const { return static_cast<int>(index_.size()); }
  const LinkFunction& link(int i, int j) const;
  const InverseLinkTable& inverse(int i, int j) const;
  const HermiteCoeffs& hermite(int i) const;

  /// Entrywise inverse link applied to a sample correlation matrix. Outputs
  /// are clamped to [-1,1]; at lag 0 the diagonal is forced to exactly 1.
  Eigen::MatrixXd inverse_link_matrix(const Eigen::MatrixXd& r_x, bool lag0) const;

 private:
  int pair_slot(int i, int j) const;

  std::vector<int> index_;                 // series -> distinct-marginal id
  std::vector<HermiteCoeffs> hermite_;     // per distinct id
  int n_distinct_ = 0;
  std::vector<LinkFunction> links_;        // per unordered distinct pair
  std::vector<InverseLinkTable> inverses_;
};

}  // namespace countdfm
