#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <vector>

#include "gsw/linalg.hpp"
#include "gsw/random.hpp"
#include "gsw/sampler.hpp"

namespace gsw {

/// eps_n = min(1 / sqrt(log(e n)), 1/3).
double epsilon_schedule(Index n);

/// True iff max over the active set of |z_prev[i]| < eps (strict).
bool check_g1(const Vectord& z_prev, const IndexSet& active, double eps);

/// Spectral concentration of the active rows at round t:
/// ||Y_t^T Y_t - ((n-t+1)/n) Y^T Y||_op <= ((n-t+1)/(2n)) lambda_min(Y^T Y).
/// Requires |active| = n - t + 1. Vacuously true when d = 0.
bool check_g2(const CovariateSetupd& setup, const IndexSet& active, Index t);

/// Same event from precomputed Gram matrices.
bool check_g2(const Matrixd& active_gram, const Matrixd& full_gram, double lambda_min, Index n, Index t);

/// +1 iff draw <= 1/2.
int eta_draw(double draw);

/// Quantities of Y^T Y shared by every trajectory on one setup.
struct CouplingGeometry {
  Matrixd full_gram;
  double lambda_min = 0.0;
  /// n / lambda_min(Y^T Y); 0 when d = 0, +inf when Y^T Y is numerically singular.
  double kappa = 0.0;
  /// floor(n - 6 C_1(zeta) zeta^2 kappa); Case 1 is possible only for t <= threshold.
  double threshold = 0.0;
};

CouplingGeometry coupling_geometry(const CovariateSetupd& setup);

struct CoupledOptions {
  std::optional<double> epsilon_override;
  SamplerOptions sampler;
  /// Store the normalized augmented directions Bu_t / ||Bu_t|| (n x (n+d) memory).
  bool record_directions = false;
  /// Keep one StepLog per round.
  bool record_steps = true;
};

/// Per-round record of the coupled construction.
struct StepLog {
  Index t = 0;
  int branch = 1;  // 1 or 2
  Index pivot_gs = -1;
  Index pivot_sk = -1;
  bool g1 = true;
  bool g2 = true;
  double delta_gs = 0.0;
  double delta_sk = 0.0;
  double delta_plus = 0.0;
  double delta_minus = 0.0;
  int eta = 0;
  double m_gs = 0.0;
  double m_tilde = 0.0;
  double m = 0.0;
};

/// Both processes and the three martingales after some number of rounds.
struct CoupledState {
  DesignStated gs;
  Vectord sk_z;
  IndexSet sk_active;
  InverseCached sk_cache;
  RandomStream sk_rng{0, 0};
  bool in_case1 = true;
  double eps_n = 1.0 / 3.0;
  Index t = 0;
  double m_gs = 0.0;
  double m_tilde = 0.0;
  double m = 0.0;
  /// Running sum of <Bu_t / ||Bu_t||, (v; 0)>^2.
  double quadratic_variation = 0.0;
  std::optional<Index> first_violation_t;
};

CoupledState make_coupled_state(const CovariateSetupd& setup, std::uint64_t seed, std::uint64_t stream,
                                const CoupledOptions& opts = {});

/// Advances both processes by one round. Throws InternalConsistencyError if a
/// consequence of the coupling fails while in Case 1.
StepLog coupled_step(CoupledState& state, const CovariateSetupd& setup, const CouplingGeometry& geometry,
                     const Vectord& v, const CoupledOptions& opts = {}, Vectord* normalized_direction = nullptr);

struct CoupledTrajectory {
  std::vector<StepLog> steps;
  Vectord z_gs;
  Vectord z_sk;
  double m_gs = 0.0;
  double m_tilde = 0.0;
  double m = 0.0;
  double quadratic_variation = 0.0;
  double v_norm_sq = 0.0;
  double eps_n = 0.0;
  double kappa = 0.0;
  double threshold = 0.0;
  /// Threshold below 1: every round is Case 2.
  bool coupling_vacuous = false;
  Index case1_steps = 0;
  std::optional<Index> first_violation_t;
  /// v^T X exceeded 1e-8 ||v|| ||X_j|| in some column.
  bool orthogonality_warning = false;
  /// Rows are Bu_t / ||Bu_t|| when record_directions is set.
  Matrixd directions;
};

CoupledTrajectory run_coupled(const CovariateSetupd& setup, const Vectord& v, std::uint64_t seed,
                              const CoupledOptions& opts = {}, std::uint64_t stream = 0);

CoupledTrajectory run_coupled(const CovariateSetupd& setup, const CouplingGeometry& geometry, const Vectord& v,
                              std::uint64_t seed, const CoupledOptions& opts = {}, std::uint64_t stream = 0);

/// CSV with header t,case,pivot_gs,pivot_sk,g1,g2,delta,eta,M_gs,M_tilde,M.
void write_trajectory_csv(std::ostream& out, const CoupledTrajectory& traj);

}  // namespace gsw
