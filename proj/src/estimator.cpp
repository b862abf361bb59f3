#include "gsw/estimator.hpp"

#include <cmath>
#include <limits>

#include <Eigen/Eigenvalues>
#include <Eigen/QR>

namespace gsw {

namespace {

void require_same_length(const Vectord& a, const Vectord& b, const char* what) {
  if (a.size() != b.size()) throw DataError(std::string(what) + ": vector lengths differ");
}

}  // namespace

OutcomeData make_outcomes(const Vectord& a, const Vectord& b) {
  require_same_length(a, b, "outcomes");
  return {a, b, a + b};
}

double ate(const Vectord& a, const Vectord& b) {
  require_same_length(a, b, "ate");
  if (a.size() == 0) throw DataError("ate: empty outcome vectors");
  return (a - b).sum() / double(a.size());
}

double ht_estimate(const Vectord& z, const Vectord& a, const Vectord& b) {
  require_same_length(a, b, "ht_estimate");
  require_same_length(z, a, "ht_estimate");
  double acc = 0.0;
  for (Index i = 0; i < z.size(); ++i) {
    if (z[i] == 1.0) {
      acc += 2.0 * a[i];
    } else if (z[i] == -1.0) {
      acc -= 2.0 * b[i];
    } else {
      throw DataError("ht_estimate: assignment entries must be +1 or -1");
    }
  }
  return acc / double(z.size());
}

ResidualDecomposition residual_projection(const Vectord& mu, const Matrixd& x) {
  if (mu.size() != x.rows()) throw DataError("residual_projection: mu length differs from rows of X");
  ResidualDecomposition out;
  if (x.cols() == 0) {
    out.beta_ls.resize(0);
    out.v = mu;
  } else {
    Eigen::CompleteOrthogonalDecomposition<Matrixd> cod(x);
    out.beta_ls = cod.solve(mu);
    out.rank = cod.rank();
    out.rank_deficient = out.rank < x.cols();
    out.v = mu - x * out.beta_ls;
    // Residuals at round-off level mean mu lies in ColSp(X).
    if (out.v.norm() <= 1e-12 * mu.norm()) out.v.setZero();
  }
  out.v_norm_sq = out.v.squaredNorm();
  out.v_inf = out.v.size() ? out.v.cwiseAbs().maxCoeff() : 0.0;
  return out;
}

double mse_bound(const ResidualDecomposition& decomp, const CovariateSetupd& setup, Index n) {
  const double nd = double(n);
  const double fit = decomp.v_norm_sq / (setup.phi * nd);
  const double beta_sq = decomp.beta_ls.squaredNorm();
  const double penalty = setup.xi > 0.0 ? setup.xi * setup.xi * beta_sq / ((1.0 - setup.phi) * nd) : 0.0;
  return fit + penalty;
}

double mse_bound_tightened(const ResidualDecomposition& decomp, const CovariateSetupd& setup, Index n) {
  const double nd = double(n);
  // ||mu - c X beta||^2 = ||v||^2 + (1 - c)^2 ||X beta||^2 since v is orthogonal to X beta.
  const double fitted = (setup.x.cols() > 0 ? (setup.x * decomp.beta_ls).squaredNorm() : 0.0) / (setup.phi * nd);
  const double penalty = setup.xi * setup.xi * decomp.beta_ls.squaredNorm() / ((1.0 - setup.phi) * nd);
  const double c = fitted + penalty > 0.0 ? fitted / (fitted + penalty) : 1.0;
  return decomp.v_norm_sq / (setup.phi * nd) + (1.0 - c) * (1.0 - c) * fitted + c * c * penalty;
}

double kappa_diagnostic(const CovariateSetupd& setup) {
  if (setup.d() == 0) return 0.0;
  const Matrixd gram = setup.y.transpose() * setup.y;
  Eigen::SelfAdjointEigenSolver<Matrixd> eig(gram, Eigen::EigenvaluesOnly);
  const double lmin = eig.eigenvalues().minCoeff();
  const double lmax = eig.eigenvalues().maxCoeff();
  if (lmin <= 1e-12 * lmax) return std::numeric_limits<double>::infinity();
  return double(setup.n()) / lmin;
}

double formal_condition(const ResidualDecomposition& decomp, const CovariateSetupd& setup, Index n) {
  if (decomp.v_norm_sq == 0.0) throw DataError("formal_condition: residual vector is zero");
  const double kappa = kappa_diagnostic(setup);
  return std::sqrt(double(setup.d())) * (decomp.v_inf / std::sqrt(decomp.v_norm_sq)) * kappa * kappa *
         std::log(double(n));
}

std::pair<double, double> predicted_variances(const ResidualDecomposition& decomp, const Vectord& mu, Index n) {
  const double n2 = double(n) * double(n);
  return {mu.squaredNorm() / n2, decomp.v_norm_sq / n2};
}

RegularityDiagnostics regularity_diagnostics(const ResidualDecomposition& decomp, const CovariateSetupd& setup) {
  RegularityDiagnostics r;
  const double n = double(setup.n());
  const double logn = std::log(n);
  const double vnorm = std::sqrt(decomp.v_norm_sq);
  const double nan = std::numeric_limits<double>::quiet_NaN();
  r.sparsity_log3 = vnorm > 0.0 ? decomp.v_inf / vnorm * logn * logn * logn : nan;
  r.beta_norm_sq_over_log = logn > 0.0 ? decomp.beta_ls.squaredNorm() / logn : nan;
  if (setup.x.cols() > 0) {
    const Matrixd xtx = setup.x.transpose() * setup.x;
    Eigen::SelfAdjointEigenSolver<Matrixd> eig(xtx, Eigen::EigenvaluesOnly);
    r.lambda_min_xtx_over_n = eig.eigenvalues().minCoeff() / n;
    r.xi_sq_over_dlogn = logn > 0.0 ? setup.xi * setup.xi / (double(setup.x.cols()) * logn) : nan;
  } else {
    r.xi_sq_over_dlogn = nan;
    r.lambda_min_xtx_over_n = nan;
  }
  r.v_norm_sq_over_log2 = logn > 0.0 ? decomp.v_norm_sq / (logn * logn) : nan;
  return r;
}

}  // namespace gsw
