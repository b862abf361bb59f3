#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gsw/estimator.hpp"
#include "gsw/linalg.hpp"
#include "gsw/random.hpp"

namespace gsw {

enum class Mode { kGsw, kSkeletal, kCoupled, kIid };
enum class Target { kTauHat, kResidual };
enum class CovariateGenerator { kGaussian, kSphere, kOnes };
enum class OutcomeProfile { kDense, kSparse, kColumnSpace };

std::string to_string(Mode m);
std::string to_string(Target t);
std::string to_string(CovariateGenerator g);
std::string to_string(OutcomeProfile p);
Mode parse_mode(const std::string& s);
Target parse_target(const std::string& s);
CovariateGenerator parse_covariate_generator(const std::string& s);
OutcomeProfile parse_outcome_profile(const std::string& s);

struct SimConfig {
  Index n = 100;
  Index d = 2;
  double phi = 0.5;
  Index replications = 1000;
  std::uint64_t seed = 1;
  Mode mode = Mode::kGsw;
  Target target = Target::kResidual;
  CovariateGenerator x_generator = CovariateGenerator::kGaussian;
  OutcomeProfile outcome_profile = OutcomeProfile::kDense;
  double treatment_effect = 1.0;
  std::optional<double> epsilon_override;
  double freeze_tol = 1e-9;
  /// Worker threads; 0 means hardware concurrency.
  unsigned threads = 0;
};

/// Validates the fields every command relies on; throws ParameterError.
void validate(const SimConfig& config);

/// A design problem with outcomes and the derived residual decomposition.
struct Problem {
  CovariateSetupd setup;
  OutcomeData outcomes;
  ResidualDecomposition decomp;
};

Problem make_problem(const Matrixd& x, const OutcomeData& outcomes, double phi);

/// Stream reserved for synthesizing data; replications use streams 0, 1, 2, ...
inline constexpr std::uint64_t kSynthesisStream = 0xffffffffffffffffULL;

Matrixd generate_covariates(CovariateGenerator gen, Index n, Index d, RandomStream& rng);

/// Draws X and outcomes from the config's generators on the synthesis stream.
/// mu = X 1_d + noise, with noise dense N(0,1), a single spike of size sqrt(n),
/// or zero. a = (mu + effect)/2 and b = (mu - effect)/2.
Problem synthesize_problem(const SimConfig& config);

struct SimulationDiagnostics {
  std::vector<double> samples;
  Index replications = 0;
  double center = 0.0;
  double mean = 0.0;
  double variance = 0.0;
  bool variance_defined = false;
  double mc_standard_error = 0.0;
  /// Mean of (sample - center)^2 and its standard error.
  double mse = 0.0;
  double mse_standard_error = 0.0;
  double reference_variance = 0.0;
  double variance_ratio = 0.0;
  double variance_ratio_standard_error = 0.0;
  double ks_distance = 0.0;
  /// 1/phi, the variance ratio implied by the MSE bound.
  double phi_ceiling = 0.0;
};

/// Replication k draws from stream (seed, k). Samples are tau_hat or <z, v>
/// (gsw, iid), M_n (skeletal) or M_n^gs through the coupling (coupled).
SimulationDiagnostics run_replications(const SimConfig& config, const Problem& problem);

/// Summary statistics against a reference variance; order-independent sums.
SimulationDiagnostics summarize(std::vector<double> samples, double center, double reference_variance);

/// Runs the walk with the residual target and reports Var<z,v> / ||v||^2.
SimulationDiagnostics variance_ratio_experiment(SimConfig config, const Problem& problem);

struct Atom {
  std::vector<int> signs;
  double probability = 0.0;
};

/// Exact law of the walk's output from the full decision tree.
struct ExactLaw {
  std::vector<Atom> atoms;
  Vectord mean_z;
  double total_probability = 0.0;
  std::optional<double> mean_tau_hat;
  std::optional<double> var_tau_hat;
};

inline constexpr Index kMaxEnumerationUnits = 4;

ExactLaw exact_enumeration(const CovariateSetupd& setup, const OutcomeData* outcomes = nullptr, double freeze_tol = 1e-9);

struct SrsworCase {
  Vectord x;
  Index a = 0;
};

struct SrsworMoments {
  double m2 = 0.0;
  std::optional<double> m4;
  /// Mean subtracted from x before evaluation.
  double centering_shift = 0.0;
};

/// Closed-form second and fourth moments of the sum of a simple random sample
/// of size a from centered values. m4 needs n >= 4.
SrsworMoments srswor_moments(const SrsworCase& c);

inline constexpr Index kMaxBruteforceUnits = 12;

/// Same moments by averaging over all C(n, a) subsets.
SrsworMoments srswor_bruteforce(const SrsworCase& c);

struct ConcentrationRow {
  double x = 0.0;
  double empirical_prob = 0.0;
  double bound = 0.0;
  double standard_error = 0.0;
  bool within_bound = true;
};

/// 2d exp(-n x^2 / (2 a (n - a))).
double concentration_bound(Index n, Index d, Index a, double x);

/// Empirical P[||W - E W||_op >= x] over random subsets of size a, with W the
/// sum of the selected matrices.
std::vector<ConcentrationRow> matrix_concentration_check(const std::vector<Matrixd>& matrices, Index a,
                                                         std::span<const double> x_grid, Index reps,
                                                         std::uint64_t seed);

/// Phi(x) = erfc(-x / sqrt 2) / 2.
double normal_cdf(double x);

/// sup |F_emp - Phi| over the sample.
double ks_distance(std::span<const double> samples);

/// Upper tail probability of a chi-square statistic.
double chi_square_pvalue(double statistic, double dof);

/// Sum with pairwise recursion in index order.
double pairwise_sum(std::span<const double> values);

}  // namespace gsw
