#include "countdfm/marginals.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "countdfm/errors.hpp"
#include "countdfm/normal.hpp"

namespace countdfm {

namespace {

constexpr double kTailTol = 1e-12;
constexpr double kProbClamp = 1e-6;
constexpr int kMaxSupport = 200000;

void check_prob(double p, const char* what) {
  if (!(p > 0.0 && p < 1.0))
    throw ParameterError(std::string(what) + ": probability must lie strictly in (0,1)");
}

}  // namespace

std::string family_name(Family f) {
  switch (f) {
    case Family::Bernoulli: return "bernoulli";
    case Family::Poisson: return "poisson";
    case Family::NegBinomial: return "negbinomial";
    case Family::Multinomial: return "multinomial";
  }
  return "unknown";
}

Family family_from_name(const std::string& name) {
  if (name == "bernoulli") return Family::Bernoulli;
  if (name == "poisson") return Family::Poisson;
  if (name == "negbinomial") return Family::NegBinomial;
  if (name == "multinomial") return Family::Multinomial;
  throw ParameterError("unknown marginal family: " + name);
}

MarginalSpec::MarginalSpec(Family family, std::vector<double> params, int nb_successes,
                           int support_offset, std::vector<double> cdf)
    : family_(family),
      params_(std::move(params)),
      nb_successes_(nb_successes),
      support_offset_(support_offset),
      cdf_(std::move(cdf)) {
  if (cdf_.empty()) throw ParameterError("marginal: empty support");
  cdf_.back() = 1.0;
  double m1 = 0.0, m2 = 0.0, prev = 0.0;
  for (std::size_t i = 0; i < cdf_.size(); ++i) {
    if (cdf_[i] < prev - 1e-14)
      throw ParameterError("marginal: CDF not nondecreasing");
    const double p = cdf_[i] - prev;
    const double v = static_cast<double>(support_offset_ + static_cast<int>(i));
    m1 += v * p;
    m2 += v * v * p;
    prev = cdf_[i];
  }
  mean_ = m1;
  variance_ = std::max(0.0, m2 - m1 * m1);
}

MarginalSpec MarginalSpec::bernoulli(double p) {
  check_prob(p, "bernoulli");
  return MarginalSpec(Family::Bernoulli, {p}, 0, 0, {1.0 - p, 1.0});
}

MarginalSpec MarginalSpec::poisson(double lambda) {
  if (!(lambda > 0.0)) throw ParameterError("poisson: lambda must be positive");
  std::vector<double> cdf;
  double pmf = std::exp(-lambda);
  double cum = pmf;
  cdf.push_back(cum);
  for (int n = 1; 1.0 - cum >= kTailTol; ++n) {
    if (n > kMaxSupport) throw ParameterError("poisson: support truncation cap exceeded");
    pmf *= lambda / n;
    cum += pmf;
    cdf.push_back(std::min(cum, 1.0));
  }
  return MarginalSpec(Family::Poisson, {lambda}, 0, 0, std::move(cdf));
}

MarginalSpec MarginalSpec::neg_binomial(int successes, double p) {
  if (successes < 1) throw ParameterError("negbinomial: successes must be >= 1");
  check_prob(p, "negbinomial");
  std::vector<double> cdf;
  double pmf = std::pow(p, successes);  // P(X = 0)
  double cum = pmf;
  cdf.push_back(cum);
  for (int n = 0; 1.0 - cum >= kTailTol; ++n) {
    if (n > kMaxSupport) throw ParameterError("negbinomial: support truncation cap exceeded");
    pmf *= (1.0 - p) * (n + successes) / (n + 1.0);
    cum += pmf;
    cdf.push_back(std::min(cum, 1.0));
  }
  return MarginalSpec(Family::NegBinomial, {p}, successes, 0, std::move(cdf));
}

MarginalSpec MarginalSpec::multinomial(std::vector<double> probs) {
  if (probs.size() < 2) throw ParameterError("multinomial: need at least two cells");
  double total = 0.0;
  for (double q : probs) {
    if (!(q >= 0.0)) throw ParameterError("multinomial: negative cell probability");
    total += q;
  }
  if (std::abs(total - 1.0) > 1e-12)
    throw ParameterError("multinomial: cell probabilities must sum to 1");
  std::vector<double> cdf(probs.size());
  double cum = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    cum += probs[i];
    cdf[i] = cum;
  }
  return MarginalSpec(Family::Multinomial, std::move(probs), 0, 1, std::move(cdf));
}

double MarginalSpec::cdf(int n) const {
  if (n < support_min()) return 0.0;
  if (n >= support_max()) return 1.0;
  return cdf_[static_cast<std::size_t>(n - support_offset_)];
}

double MarginalSpec::pmf(int n) const {
  if (n < support_min() || n > support_max()) return 0.0;
  return cdf(n) - cdf(n - 1);
}

int MarginalSpec::mode() const {
  int best = support_min();
  double best_p = pmf(best);
  for (int v = support_min() + 1; v <= support_max(); ++v) {
    const double p = pmf(v);
    if (p > best_p) {
      best_p = p;
      best = v;
    }
  }
  return best;
}

bool MarginalSpec::operator==(const MarginalSpec& other) const {
  return family_ == other.family_ && nb_successes_ == other.nb_successes_ &&
         params_ == other.params_;
}

int quantile(const MarginalSpec& spec, double u) {
  if (!(u > 0.0 && u < 1.0)) throw DomainError("quantile: u must lie in (0,1)");
  int lo = spec.support_min(), hi = spec.support_max();
  while (lo < hi) {
    const int mid = lo + (hi - lo) / 2;
    if (spec.cdf(mid) >= u)
      hi = mid;
    else
      lo = mid + 1;
  }
  return lo;
}

MarginalSpec fit_marginal(const std::vector<int>& series, Family family,
                          const FitMarginalOptions& options) {
  const std::size_t T = series.size();
  if (T < 2) throw DataError("fit_marginal: need at least two observations");

  switch (family) {
    case Family::Bernoulli: {
      long ones = 0;
      for (int v : series) {
        if (v != 0 && v != 1) throw DataError("fit_marginal: bernoulli series must be 0/1");
        ones += v;
      }
      if (ones == 0 || ones == static_cast<long>(T))
        throw DegenerateMarginalError("fit_marginal: constant bernoulli series");
      return MarginalSpec::bernoulli(static_cast<double>(ones) / T);
    }
    case Family::Poisson: {
      double sum = 0.0;
      for (int v : series) {
        if (v < 0) throw DataError("fit_marginal: poisson series must be nonnegative");
        sum += v;
      }
      if (sum == 0.0)
        throw DegenerateMarginalError("fit_marginal: all-zero poisson series");
      return MarginalSpec::poisson(sum / T);
    }
    case Family::NegBinomial: {
      double sum = 0.0;
      for (int v : series) {
        if (v < 0) throw DataError("fit_marginal: negbinomial series must be nonnegative");
        sum += v;
      }
      if (sum == 0.0)
        throw DegenerateMarginalError("fit_marginal: all-zero negbinomial series");
      // Moment matching with the number of successes fixed.
      const double mean = sum / T;
      double p = options.nb_successes / (options.nb_successes + mean);
      p = std::clamp(p, kProbClamp, 1.0 - kProbClamp);
      return MarginalSpec::neg_binomial(options.nb_successes, p);
    }
    case Family::Multinomial: {
      int m = options.multinomial_m;
      for (int v : series) {
        if (v < 1) throw DataError("fit_marginal: multinomial values must be >= 1");
        m = std::max(m, v);
      }
      if (m < 2) throw DegenerateMarginalError("fit_marginal: single-valued multinomial support");
      std::vector<double> counts(static_cast<std::size_t>(m), 0.0);
      for (int v : series) counts[static_cast<std::size_t>(v - 1)] += 1.0;
      const int lo_const = *std::min_element(series.begin(), series.end());
      const int hi_const = *std::max_element(series.begin(), series.end());
      if (lo_const == hi_const && (lo_const == 1 || hi_const == m))
        throw DegenerateMarginalError("fit_marginal: constant multinomial series at a support boundary");
      // Unobserved cells get a clamped floor so every bin has positive width.
      double total = 0.0;
      for (double& c : counts) {
        c = std::max(c / T, kProbClamp);
        total += c;
      }
      for (double& c : counts) c /= total;
      return MarginalSpec::multinomial(std::move(counts));
    }
  }
  throw ParameterError("fit_marginal: unknown family");
}

HermiteCoeffs hermite_coefficients(const MarginalSpec& spec, int K) {
  if (K < 1) throw ParameterError("hermite_coefficients: K must be >= 1");
  if (K > 150) throw ParameterError("hermite_coefficients: K > 150 overflows k!");

  HermiteCoeffs out;
  out.truncation_K = K;
  out.variance = spec.variance();
  out.g.assign(static_cast<std::size_t>(K) + 1, 0.0);
  out.g[0] = spec.mean();

  // Interior thresholds z_n = Phi^{-1}(C_n); endpoints with C in {0,1} drop out.
  std::vector<double> acc(static_cast<std::size_t>(K) + 1, 0.0);
  out.tail_n = spec.support_min();
  for (int n = spec.support_min(); n < spec.support_max(); ++n) {
    const double c = spec.cdf(n);
    if (c <= 0.0 || c >= 1.0) continue;
    out.tail_n = n;
    const double z = norm_quantile(c);
    const double w = std::exp(-0.5 * z * z);
    // He_{k-1}(z) by the three-term recurrence.
    double h_prev = 0.0, h = 1.0;  // He_0
    acc[1] += w;                   // k = 1 uses He_0 = 1
    for (int k = 2; k <= K; ++k) {
      const double h_next = z * h - (k - 2) * h_prev;
      h_prev = h;
      h = h_next;
      acc[static_cast<std::size_t>(k)] += w * h;
    }
  }
  double factorial = 1.0;
  for (int k = 1; k <= K; ++k) {
    factorial *= k;
    out.g[static_cast<std::size_t>(k)] = acc[static_cast<std::size_t>(k)] * kInvSqrt2Pi / factorial;
  }
  return out;
}

BinBounds bin_bounds(const MarginalSpec& spec, int n) {
  if (n < spec.support_min() || n > spec.support_max())
    throw DomainError("bin_bounds: value outside the marginal support");
  const double inf = std::numeric_limits<double>::infinity();
  BinBounds b;
  b.lo = n == spec.support_min() ? -inf : norm_quantile(spec.cdf(n - 1));
  b.hi = n == spec.support_max() ? inf : norm_quantile(spec.cdf(n));
  return b;
}

}  // namespace countdfm
