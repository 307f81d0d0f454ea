#include "countdfm/link.hpp"

#include <algorithm>
#include <cmath>

#include "countdfm/errors.hpp"
#include "countdfm/parallel.hpp"

namespace countdfm {

LinkFunction build_link(const HermiteCoeffs& gi, const HermiteCoeffs& gj) {
  if (gi.truncation_K != gj.truncation_K)
    throw ParameterError("build_link: coefficient sets use different truncation K");
  if (!(gi.variance > 0.0) || !(gj.variance > 0.0))
    throw DegenerateMarginalError("build_link: zero-variance marginal");

  const int K = gi.truncation_K;
  const double scale = std::sqrt(gi.variance * gj.variance);
  LinkFunction link;
  link.coeffs.resize(static_cast<std::size_t>(K));
  // l_k = k! g_{i,k} g_{j,k} / (sd_i sd_j), assembled via sqrt(k!) factors so
  // intermediate products stay in range.
  double sqrt_fact = 1.0;
  double plus = 0.0, minus = 0.0;
  for (int k = 1; k <= K; ++k) {
    sqrt_fact *= std::sqrt(static_cast<double>(k));
    const double ck_i = sqrt_fact * gi.g[static_cast<std::size_t>(k)];
    const double ck_j = sqrt_fact * gj.g[static_cast<std::size_t>(k)];
    const double lk = ck_i * ck_j / scale;
    link.coeffs[static_cast<std::size_t>(k - 1)] = lk;
    plus += lk;
    minus += (k % 2 == 0) ? lk : -lk;
  }
  link.rho_plus = plus;
  link.rho_minus = minus;
  return link;
}

double link_eval(const LinkFunction& link, double u) {
  if (std::abs(u) > 1.0 + 1e-12) throw DomainError("link_eval: |u| > 1");
  u = std::clamp(u, -1.0, 1.0);
  double acc = 0.0;
  for (auto it = link.coeffs.rbegin(); it != link.coeffs.rend(); ++it) acc = (acc + *it) * u;
  return acc;
}

InverseLinkTable::InverseLinkTable(std::vector<double> knots_v, std::vector<double> knots_u)
    : v_(std::move(knots_v)), u_(std::move(knots_u)) {
  const std::size_t n = v_.size();
  if (n != u_.size() || n < 2)
    throw ParameterError("InverseLinkTable: need matching knot vectors of length >= 2");
  for (std::size_t m = 1; m < n; ++m)
    if (!(v_[m] > v_[m - 1]))
      throw LinkMonotonicityError("InverseLinkTable: knots v_m not strictly increasing");

  // Natural cubic spline second derivatives: symmetric tridiagonal system with
  // a_0 = a_M = 0, solved by the Thomas algorithm.
  a_.assign(n, 0.0);
  if (n == 2) return;
  const std::size_t inner = n - 2;
  std::vector<double> diag(inner), rhs(inner), upper(inner, 0.0);
  for (std::size_t i = 0; i < inner; ++i) {
    const std::size_t m = i + 1;
    const double h_m = v_[m] - v_[m - 1];
    const double h_m1 = v_[m + 1] - v_[m];
    diag[i] = (h_m + h_m1) / 3.0;
    if (i + 1 < inner) upper[i] = h_m1 / 6.0;
    rhs[i] = (u_[m + 1] - u_[m]) / h_m1 - (u_[m] - u_[m - 1]) / h_m;
  }
  for (std::size_t i = 1; i < inner; ++i) {
    const double w = upper[i - 1] / diag[i - 1];
    diag[i] -= w * upper[i - 1];
    rhs[i] -= w * rhs[i - 1];
  }
  a_[inner] = rhs[inner - 1] / diag[inner - 1];
  for (std::size_t i = inner - 1; i >= 1; --i)
    a_[i] = (rhs[i - 1] - upper[i - 1] * a_[i + 1]) / diag[i - 1];
}

double InverseLinkTable::operator()(double v) const {
  if (v_.empty()) throw NumericError("InverseLinkTable: empty table");
  if (v <= v_.front()) return -1.0;
  if (v >= v_.back()) return 1.0;
  const auto it = std::upper_bound(v_.begin(), v_.end(), v);
  const std::size_t m = static_cast<std::size_t>(it - v_.begin());  // v in (v_{m-1}, v_m]
  const double h = v_[m] - v_[m - 1];
  const double dl = v - v_[m - 1], dr = v_[m] - v;
  const double cubic = (a_[m - 1] * dr * dr * dr + a_[m] * dl * dl * dl) / (6.0 * h);
  const double b1 = u_[m] / h - a_[m] * h / 6.0;
  const double b2 = u_[m - 1] / h - a_[m - 1] * h / 6.0;
  return cubic + b1 * dl + b2 * dr;
}

InverseLinkTable build_inverse(const LinkFunction& link, int M) {
  if (M < 10) throw ParameterError("build_inverse: M must be >= 10");
  std::vector<double> u, v;
  u.reserve(static_cast<std::size_t>(M) + 1);
  v.reserve(static_cast<std::size_t>(M) + 1);
  for (int m = 0; m <= M; ++m) {
    // Chebyshev-type grid: finer near the endpoints where L is steeper.
    const double um = -std::cos(M_PI * m / M);
    const double vm = link_eval(link, um);
    if (!v.empty()) {
      if (vm < v.back() - 1e-4)
        throw LinkMonotonicityError("build_inverse: link values decrease on the grid");
      // Truncating the series leaves sub-1e-4 wiggles where the link
      // saturates near +-1; merge those knots instead of failing.
      if (vm <= v.back()) continue;
    }
    u.push_back(um);
    v.push_back(vm);
  }
  if (v.size() < 2) throw LinkMonotonicityError("build_inverse: degenerate link range");
  return InverseLinkTable(std::move(v), std::move(u));
}

LinkSet::LinkSet(const std::vector<MarginalSpec>& marginals, int K, int M, int threads) {
  const int d = static_cast<int>(marginals.size());
  if (d == 0) throw ParameterError("LinkSet: no marginals");
  index_.resize(static_cast<std::size_t>(d));
  std::vector<const MarginalSpec*> distinct;
  for (int i = 0; i < d; ++i) {
    int id = -1;
    for (std::size_t k = 0; k < distinct.size(); ++k) {
      if (*distinct[k] == marginals[static_cast<std::size_t>(i)]) {
        id = static_cast<int>(k);
        break;
      }
    }
    if (id < 0) {
      id = static_cast<int>(distinct.size());
      distinct.push_back(&marginals[static_cast<std::size_t>(i)]);
    }
    index_[static_cast<std::size_t>(i)] = id;
  }
  n_distinct_ = static_cast<int>(distinct.size());

  hermite_.resize(static_cast<std::size_t>(n_distinct_));
  parallel_for(n_distinct_, threads, [&](int k) {
    hermite_[static_cast<std::size_t>(k)] = hermite_coefficients(*distinct[static_cast<std::size_t>(k)], K);
  });

  const int n_pairs = n_distinct_ * (n_distinct_ + 1) / 2;
  links_.resize(static_cast<std::size_t>(n_pairs));
  inverses_.resize(static_cast<std::size_t>(n_pairs));
  parallel_for(n_pairs, threads, [&](int slot) {
    // unrank the (a <= b) pair index
    int a = 0, offset = slot;
    while (offset >= n_distinct_ - a) {
      offset -= n_distinct_ - a;
      ++a;
    }
    const int b = a + offset;
    links_[static_cast<std::size_t>(slot)] =
        build_link(hermite_[static_cast<std::size_t>(a)], hermite_[static_cast<std::size_t>(b)]);
    inverses_[static_cast<std::size_t>(slot)] = build_inverse(links_[static_cast<std::size_t>(slot)], M);
  });
}

int LinkSet::pair_slot(int i, int j) const {
  int a = index_[static_cast<std::size_t>(i)];
  int b = index_[static_cast<std::size_t>(j)];
  if (a > b) std::swap(a, b);
  // slot of (a,b), a <= b, in the row-major upper triangle
  return a * n_distinct_ - a * (a - 1) / 2 + (b - a);
}

const LinkFunction& LinkSet::link(int i, int j) const {
  return links_[static_cast<std::size_t>(pair_slot(i, j))];
}

const InverseLinkTable& LinkSet::inverse(int i, int j) const {
  return inverses_[static_cast<std::size_t>(pair_slot(i, j))];
}

const HermiteCoeffs& LinkSet::hermite(int i) const {
  return hermite_[static_cast<std::size_t>(index_[static_cast<std::size_t>(i)])];
}

Eigen::MatrixXd LinkSet::inverse_link_matrix(const Eigen::MatrixXd& r_x, bool lag0) const {
  const int d = dimension();
  if (r_x.rows() != d || r_x.cols() != d)
    throw ParameterError("inverse_link_matrix: dimension mismatch");
  Eigen::MatrixXd r_z(d, d);
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) {
      if (lag0 && i == j) {
        r_z(i, j) = 1.0;
        continue;
      }
      const double v = std::clamp(r_x(i, j), -1.0, 1.0);
      r_z(i, j) = inverse(i, j)(v);
    }
  }
  return r_z;
}

}  // namespace countdfm
