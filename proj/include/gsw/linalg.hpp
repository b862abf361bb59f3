#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "gsw/errors.hpp"

namespace gsw {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Index = Eigen::Index;
/// Row indices, always kept in ascending order.
using IndexSet = std::vector<Index>;

/// Sherman-Morrison denominators below this force a full recompute.
inline constexpr double kDowndateThreshold = 1e-10;
/// Number of rank-one downdates between full recomputes.
inline constexpr int kRefreshInterval = 64;

/// Covariates and the derived normalized matrix Y = xi^{-1} sqrt((1-phi)/phi) X.
///
/// The augmented matrix of the walk is B = [I_n; Y^T]. When X has no columns
/// or is identically zero, Y has zero columns and B = I_n.
template <typename Scalar>
struct CovariateSetup {
  Matrix<Scalar> x;
  Matrix<Scalar> y;
  Scalar phi{0.5};
  Scalar xi{0};
  Scalar zeta{1};

  Index n() const { return x.rows(); }
  /// Effective covariate dimension (columns of Y).
  Index d() const { return y.cols(); }

  /// C_1(zeta) = 1 + zeta^2 (1 + zeta^2), the ceiling on ||Bu||^2.
  Scalar direction_norm_ceiling() const {
    const Scalar z2 = zeta * zeta;
    return Scalar(1) + z2 * (Scalar(1) + z2);
  }
};

template <typename Scalar>
CovariateSetup<Scalar> build_setup(const Matrix<Scalar>& x, Scalar phi) {
  if (!(phi > Scalar(0) && phi < Scalar(1))) {
    throw ParameterError("phi must lie strictly between 0 and 1, got " + std::to_string(double(phi)));
  }
  if (x.rows() < 1) throw DataError("covariate matrix must have at least one row");
  if (!x.allFinite()) throw DataError("covariate matrix contains non-finite entries");

  CovariateSetup<Scalar> setup;
  setup.x = x;
  setup.phi = phi;
  setup.zeta = std::sqrt((Scalar(1) - phi) / phi);
  setup.xi = x.cols() > 0 ? x.rowwise().norm().maxCoeff() : Scalar(0);
  if (setup.xi > Scalar(0)) {
    setup.y = (setup.zeta / setup.xi) * x;
  } else {
    setup.y.resize(x.rows(), 0);
  }
  return setup;
}

/// D = (I_d + Y_A^T Y_A)^{-1} for the current active rows, together with the
/// Gram matrix Y_A^T Y_A it was built from.
template <typename Scalar>
struct InverseCache {
  Matrix<Scalar> inverse;
  Matrix<Scalar> gram;
  Index active_count = 0;
  int dirty_counter = 0;

  Index dim() const { return inverse.rows(); }
};

namespace detail {

template <typename Scalar>
Matrix<Scalar> inverse_from_gram(const Matrix<Scalar>& gram) {
  const Index d = gram.rows();
  Matrix<Scalar> system = gram;
  system.diagonal().array() += Scalar(1);
  Eigen::LLT<Matrix<Scalar>> llt(system);
  if (llt.info() != Eigen::Success) throw NumericError("Cholesky factorization of I + Y^T Y failed");
  Matrix<Scalar> inv = llt.solve(Matrix<Scalar>::Identity(d, d));
  if (!inv.allFinite()) throw NumericError("non-finite inverse of I + Y^T Y");
  return inv;
}

}  // namespace detail

template <typename Scalar, typename Derived>
InverseCache<Scalar> init_inverse(const Eigen::MatrixBase<Derived>& y_active) {
  if (!y_active.allFinite()) throw NumericError("active covariate rows contain non-finite entries");
  InverseCache<Scalar> cache;
  const Index d = y_active.cols();
  cache.gram = Matrix<Scalar>::Zero(d, d);
  cache.gram.template selfadjointView<Eigen::Lower>().rankUpdate(y_active.transpose());
  cache.gram = cache.gram.template selfadjointView<Eigen::Lower>();
  cache.inverse = detail::inverse_from_gram(cache.gram);
  cache.active_count = y_active.rows();
  return cache;
}

/// Builds the cache for the rows of `y` listed in `active`.
template <typename Scalar>
InverseCache<Scalar> init_inverse(const Matrix<Scalar>& y, const IndexSet& active) {
  Matrix<Scalar> rows(static_cast<Index>(active.size()), y.cols());
  for (std::size_t k = 0; k < active.size(); ++k) rows.row(Index(k)) = y.row(active[k]);
  return init_inverse<Scalar>(rows);
}

/// Removes row y_p from the cache.
///
/// Rank-one Sherman-Morrison downdate D + D y y^T D / (1 - y^T D y). The
/// inverse is rebuilt from the maintained Gram matrix when the denominator
/// falls below kDowndateThreshold or after kRefreshInterval downdates.
template <typename Scalar, typename Derived>
InverseCache<Scalar> downdate_inverse(InverseCache<Scalar> cache, const Eigen::MatrixBase<Derived>& y_p) {
  if (cache.active_count < 1) throw std::logic_error("downdate of an empty inverse cache");
  cache.active_count -= 1;
  if (cache.dim() == 0) return cache;

  const Vector<Scalar> w = cache.inverse * y_p;
  const Scalar denom = Scalar(1) - y_p.dot(w);
  cache.gram.noalias() -= y_p * y_p.transpose();
  cache.dirty_counter += 1;
  if (denom < Scalar(kDowndateThreshold) || cache.dirty_counter >= kRefreshInterval) {
    cache.inverse = detail::inverse_from_gram(cache.gram);
    cache.dirty_counter = 0;
    return cache;
  }
  cache.inverse.noalias() += (w / denom) * w.transpose();
  return cache;
}

/// The minimizer u of ||Bu||^2 subject to u[p] = 1 and supp(u) within the
/// active set, together with ||Bu||^2 = 1 / (1 - y_p^T D y_p).
template <typename Scalar>
struct StepDirection {
  Vector<Scalar> u;
  Index p = -1;
  Scalar bu_norm_sq{1};
};

namespace detail {

inline bool contains(const IndexSet& active, Index p) {
  return std::binary_search(active.begin(), active.end(), p);
}

template <typename Scalar>
Scalar direction_denominator(const CovariateSetup<Scalar>& setup, Index p, const InverseCache<Scalar>& cache,
                             Vector<Scalar>& dy) {
  if (setup.d() == 0) {
    dy.resize(0);
    return Scalar(1);
  }
  dy.noalias() = cache.inverse * setup.y.row(p).transpose();
  const Scalar denom = Scalar(1) - setup.y.row(p).dot(dy);
  if (!(denom >= Scalar(kDowndateThreshold))) {
    throw NumericError("step direction denominator 1 - y_p^T D y_p below stability threshold");
  }
  return denom;
}

}  // namespace detail

/// Writes u(p, A) into `out`, reusing its storage.
template <typename Scalar>
void step_direction_into(const CovariateSetup<Scalar>& setup, const IndexSet& active, Index p,
                         const InverseCache<Scalar>& cache, StepDirection<Scalar>& out) {
  if (!detail::contains(active, p)) throw std::logic_error("pivot is not in the active set");
  Vector<Scalar> dy;
  const Scalar denom = detail::direction_denominator(setup, p, cache, dy);
  out.u.setZero(setup.n());
  out.p = p;
  out.bu_norm_sq = Scalar(1) / denom;
  if (setup.d() > 0) {
    const Scalar scale = Scalar(-1) / denom;
    for (Index i : active) out.u[i] = scale * setup.y.row(i).dot(dy);
  }
  out.u[p] = Scalar(1);
}

template <typename Scalar>
StepDirection<Scalar> step_direction(const CovariateSetup<Scalar>& setup, const IndexSet& active, Index p,
                                     const InverseCache<Scalar>& cache) {
  StepDirection<Scalar> out;
  step_direction_into(setup, active, p, cache, out);
  return out;
}

/// <u(p, A), v> without forming u:
/// ||Bu||^2 * v[A]^T (I - Y_A D Y_A^T) e_p[A].
template <typename Scalar>
Scalar direction_inner_product(const CovariateSetup<Scalar>& setup, const IndexSet& active, Index p,
                               const InverseCache<Scalar>& cache, const Vector<Scalar>& v) {
  if (!detail::contains(active, p)) throw std::logic_error("pivot is not in the active set");
  Vector<Scalar> dy;
  const Scalar denom = detail::direction_denominator(setup, p, cache, dy);
  Scalar projected = v[p];
  if (setup.d() > 0) {
    Vector<Scalar> yv = Vector<Scalar>::Zero(setup.d());
    for (Index i : active) yv.noalias() += v[i] * setup.y.row(i).transpose();
    projected -= yv.dot(dy);
  }
  return projected / denom;
}

/// Q(A) = (v[A]^T (I - Y_A D Y_A^T) e_p[A])^2 = ||Bu||^{-4} <u, v>^2.
template <typename Scalar>
Scalar direction_quadratic(const CovariateSetup<Scalar>& setup, const IndexSet& active, Index p,
                           const InverseCache<Scalar>& cache, const Vector<Scalar>& v) {
  Vector<Scalar> dy;
  const Scalar denom = detail::direction_denominator(setup, p, cache, dy);
  const Scalar inner = direction_inner_product(setup, active, p, cache, v);
  const Scalar projected = inner * denom;
  return projected * projected;
}

/// Bu = (u; Y^T u) for an explicit direction.
template <typename Scalar>
Vector<Scalar> augmented_image(const CovariateSetup<Scalar>& setup, const Vector<Scalar>& u) {
  Vector<Scalar> out(setup.n() + setup.d());
  out.head(setup.n()) = u;
  if (setup.d() > 0) out.tail(setup.d()).noalias() = setup.y.transpose() * u;
  return out;
}

/// Column j of B = [I_n; Y^T].
template <typename Scalar>
Vector<Scalar> augmented_column(const CovariateSetup<Scalar>& setup, Index j) {
  Vector<Scalar> col = Vector<Scalar>::Zero(setup.n() + setup.d());
  col[j] = Scalar(1);
  if (setup.d() > 0) col.tail(setup.d()) = setup.y.row(j).transpose();
  return col;
}

using CovariateSetupd = CovariateSetup<double>;
using InverseCached = InverseCache<double>;

/// Double overload so Eigen expressions convert implicitly.
inline CovariateSetupd build_setup(const Matrix<double>& x, double phi) { return build_setup<double>(x, phi); }
using StepDirectiond = StepDirection<double>;
using Matrixd = Matrix<double>;
using Vectord = Vector<double>;

}  // namespace gsw
