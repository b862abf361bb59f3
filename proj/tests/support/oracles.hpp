#pragma once

// Direct, slow reference computations used only by tests. None of these share
// code paths with the library routines they check.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "gsw/linalg.hpp"
#include "gsw/random.hpp"

namespace gsw::oracle {

inline Matrixd gaussian_matrix(RandomStream& rng, Index rows, Index cols) {
  Matrixd m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) m(i, j) = rng.normal();
  return m;
}

inline Vectord gaussian_vector(RandomStream& rng, Index n) {
  Vectord v(n);
  for (Index i = 0; i < n; ++i) v[i] = rng.normal();
  return v;
}

inline Index uniform_index(RandomStream& rng, Index lo, Index hi) {
  return lo + std::min<Index>(hi - lo, Index(rng.uniform() * double(hi - lo + 1)));
}

/// B = [I_n; Y^T] formed explicitly.
inline Matrixd augmented_matrix(const Matrixd& y) {
  const Index n = y.rows();
  Matrixd b = Matrixd::Zero(n + y.cols(), n);
  b.topRows(n).setIdentity();
  b.bottomRows(y.cols()) = y.transpose();
  return b;
}

/// argmin ||Bu||^2 over u with u[p] = 1 and support in `active`, by
/// Householder QR least squares on the free columns.
inline Vectord constrained_direction(const Matrixd& y, const IndexSet& active, Index p) {
  const Matrixd b = augmented_matrix(y);
  std::vector<Index> free;
  for (Index i : active)
    if (i != p) free.push_back(i);
  Vectord u = Vectord::Zero(y.rows());
  u[p] = 1.0;
  if (free.empty()) return u;
  Matrixd cols(b.rows(), Index(free.size()));
  for (std::size_t j = 0; j < free.size(); ++j) cols.col(Index(j)) = b.col(free[j]);
  const Vectord w = cols.householderQr().solve(-b.col(p));
  for (std::size_t j = 0; j < free.size(); ++j) u[free[j]] = w[Index(j)];
  return u;
}

/// (I + Y_A^T Y_A)^{-1} by LU on the explicitly gathered rows.
inline Matrixd direct_inverse(const Matrixd& y, const IndexSet& active) {
  Matrixd rows(Index(active.size()), y.cols());
  for (std::size_t k = 0; k < active.size(); ++k) rows.row(Index(k)) = y.row(active[k]);
  Matrixd system = Matrixd::Identity(y.cols(), y.cols()) + rows.transpose() * rows;
  return system.partialPivLu().inverse();
}

struct Moments {
  double m2 = 0.0;
  double m4 = 0.0;
};

/// E[W^2], E[W^4] for W the sum over a uniform a-subset of centered x, by
/// walking every subset bitmask.
inline Moments subset_moments(const Vectord& x_raw, Index a) {
  const Index n = x_raw.size();
  const Vectord x = x_raw.array() - x_raw.mean();
  double s2 = 0.0, s4 = 0.0;
  double count = 0.0;
  for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
    if (Index(__builtin_popcount(mask)) != a) continue;
    double w = 0.0;
    for (Index i = 0; i < n; ++i)
      if (mask & (1u << i)) w += x[i];
    s2 += w * w;
    s4 += w * w * w * w;
    count += 1.0;
  }
  return {s2 / count, s4 / count};
}

/// Phi^{-1}(p) by bisection on erfc; accurate to ~1e-15 in the argument.
inline double normal_quantile(double p) {
  double lo = -40.0, hi = 40.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (0.5 * std::erfc(-mid / std::sqrt(2.0)) < p) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace gsw::oracle
