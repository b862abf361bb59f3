#pragma once

#include <utility>

#include "gsw/linalg.hpp"

namespace gsw {

/// Potential outcomes under the two treatments and their sum mu = a + b.
struct OutcomeData {
  Vectord a;
  Vectord b;
  Vectord mu;
};

OutcomeData make_outcomes(const Vectord& a, const Vectord& b);

/// mu = X beta_ls + v with v orthogonal to ColSp(X).
struct ResidualDecomposition {
  Vectord beta_ls;
  Vectord v;
  double v_norm_sq = 0.0;
  double v_inf = 0.0;
  Index rank = 0;
  bool rank_deficient = false;
};

/// Raw regularity quantities; the constants they are compared against are
/// left to the user.
struct RegularityDiagnostics {
  double sparsity_log3 = 0.0;          // ||v||_inf / ||v|| * log^3 n
  double beta_norm_sq_over_log = 0.0;  // ||beta_ls||^2 / log n
  double lambda_min_xtx_over_n = 0.0;  // lambda_min(X^T X) / n
  double xi_sq_over_dlogn = 0.0;       // xi^2 / (d log n)
  double v_norm_sq_over_log2 = 0.0;    // ||v||^2 / log^2 n
};

struct EstimateReport {
  double tau = 0.0;
  double tau_hat = 0.0;
  double mse_bound = 0.0;
  double mse_bound_tightened = 0.0;
  double var_iid = 0.0;
  double var_gsw_asymptotic = 0.0;
  double kappa = 0.0;
  double formal_condition_value = 0.0;
};

double ate(const Vectord& a, const Vectord& b);

/// (1/n) (sum_{z_i=+1} 2 a_i - sum_{z_i=-1} 2 b_i); z must be a sign vector.
double ht_estimate(const Vectord& z, const Vectord& a, const Vectord& b);

ResidualDecomposition residual_projection(const Vectord& mu, const Matrixd& x);

/// Right-hand side of the MSE bound at beta = beta_ls, a bound on n E[(tau_hat - tau)^2]:
/// ||mu - X beta||^2 / (phi n) + xi^2 ||beta||^2 / ((1 - phi) n).
double mse_bound(const ResidualDecomposition& decomp, const CovariateSetupd& setup, Index n);

/// Same bound minimized over beta = c * beta_ls, c real.
double mse_bound_tightened(const ResidualDecomposition& decomp, const CovariateSetupd& setup, Index n);

/// n / lambda_min(Y^T Y). Returns 0 when there are no effective covariates and
/// +inf when lambda_min <= 1e-12 ||Y||_op^2.
double kappa_diagnostic(const CovariateSetupd& setup);

/// sqrt(d) (||v||_inf / ||v||) kappa^2 log n. Throws DataError when v = 0.
double formal_condition(const ResidualDecomposition& decomp, const CovariateSetupd& setup, Index n);

/// (||mu||^2 / n^2, ||v||^2 / n^2).
std::pair<double, double> predicted_variances(const ResidualDecomposition& decomp, const Vectord& mu, Index n);

RegularityDiagnostics regularity_diagnostics(const ResidualDecomposition& decomp, const CovariateSetupd& setup);

}  // namespace gsw
