#pragma once

#include <string>
#include <vector>

namespace countdfm {

enum class Family { Bernoulli, Poisson, NegBinomial, Multinomial };

std::string family_name(Family f);
Family family_from_name(const std::string& name);

// Parametric count marginal distribution.
//
// Families and parameterizations:
//   Bernoulli(p)        on {0,1}
//   Poisson(lambda)     on {0,1,2,...}
//   NegBinomial(r,p)    on {0,1,2,...}, failures before the r-th success
//   Multinomial(q_1..q_m) on {1,...,m}
//
// Unbounded supports are truncated at the first value whose upper tail mass
// drops below 1e-12; the CDF is treated as exactly 1 from there on, so the
// latent bins partition the real line.
class MarginalSpec {
 public:
  static MarginalSpec bernoulli(double p);
  static MarginalSpec poisson(double lambda);
  static MarginalSpec neg_binomial(int successes, double p);
  static MarginalSpec multinomial(std::vector<double> probs);

  Family family() const { return family_; }
  /// Free parameters as fitted/reported: p, lambda, p, or the cell vector.
  const std::vector<double>& params() const { return params_; }
  int nb_successes() const { return nb_successes_; }

  int support_min() const { return support_offset_; }
  int support_max() const { return support_offset_ + static_cast<int>(cdf_.size()) - 1; }
  int support_offset() const { return support_offset_; }
  int support_size() const { return static_cast<int>(cdf_.size()); }

  /// C_n = P(X <= n). Values below support_min give 0, above support_max give 1.
  double cdf(int n) const;
  double pmf(int n) const;
  double mean() const { return mean_; }
  double variance() const { return variance_; }
  /// Most likely support value, ties broken toward the smaller value.
  int mode() const;

  bool operator==(const MarginalSpec& other) const;

 private:
  MarginalSpec(Family family, std::vector<double> params, int nb_successes,
               int support_offset, std::vector<double> cdf);

  Family family_;
  std::vector<double> params_;
  int nb_successes_ = 0;
  int support_offset_ = 0;
  std::vector<double> cdf_;  // C at support_min .. support_max; back() == 1
  double mean_ = 0.0;
  double variance_ = 0.0;
};

/// Generalized inverse F^{-1}(u) = inf{v : F(v) >= u} for u in (0,1).
int quantile(const MarginalSpec& spec, double u);

struct FitMarginalOptions {
  int nb_successes = 3;  // NegBinomial: number of successes, fixed not estimated
  int multinomial_m = 0;  // 0: use the largest observed value
};

/// Fits the family's parameters from one observed series (sample proportion,
/// sample mean, moment matching, or cell proportions depending on family).
MarginalSpec fit_marginal(const std::vector<int>& series, Family family,
                          const FitMarginalOptions& options = {});

struct HermiteCoeffs {
  std::vector<double> g;  // g_0..g_K; g_0 is the mean of X
  double variance = 0.0;  // Var(X) under the spec
  int truncation_K = 0;
  int tail_n = 0;  // largest support value whose threshold entered the sums
};

// Hermite expansion coefficients of the quantile transform z -> F^{-1}(Phi(z)),
// computed from the finite sum over the interior CDF thresholds with the
// probabilists' Hermite polynomials. Thresholds at CDF values 0 or 1
// contribute nothing.
HermiteCoeffs hermite_coefficients(const MarginalSpec& spec, int K);

struct BinBounds {
  double lo;  // open
  double hi;  // closed
};

/// Latent interval (Phi^{-1}(C_{n-1}), Phi^{-1}(C_n)] that maps to count n.
BinBounds bin_bounds(const MarginalSpec& spec, int n);

}  // namespace countdfm
