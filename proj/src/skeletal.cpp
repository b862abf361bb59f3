#include "gsw/skeletal.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <string>

#include <Eigen/Eigenvalues>
#include <fmt/format.h>

namespace gsw {

double epsilon_schedule(Index n) {
  if (n < 1) throw ParameterError("epsilon_schedule requires n >= 1");
  return std::min(1.0 / std::sqrt(std::log(std::exp(1.0) * double(n))), 1.0 / 3.0);
}

bool check_g1(const Vectord& z_prev, const IndexSet& active, double eps) {
  double worst = 0.0;
  for (Index i : active) worst = std::max(worst, std::abs(z_prev[i]));
  return worst < eps;
}

bool check_g2(const Matrixd& active_gram, const Matrixd& full_gram, double lambda_min, Index n, Index t) {
  if (full_gram.rows() == 0) return true;
  const double frac = double(n - t + 1) / double(n);
  const Matrixd diff = active_gram - frac * full_gram;
  Eigen::SelfAdjointEigenSolver<Matrixd> eig(diff, Eigen::EigenvaluesOnly);
  const double op = eig.eigenvalues().cwiseAbs().maxCoeff();
  return op <= 0.5 * frac * lambda_min;
}

bool check_g2(const CovariateSetupd& setup, const IndexSet& active, Index t) {
  const Index n = setup.n();
  if (Index(active.size()) != n - t + 1) {
    throw std::logic_error("check_g2 expects an active set of size n - t + 1");
  }
  if (setup.d() == 0) return true;
  const auto geometry = coupling_geometry(setup);
  const auto cache = init_inverse<double>(setup.y, active);
  return check_g2(cache.gram, geometry.full_gram, geometry.lambda_min, n, t);
}

int eta_draw(double draw) { return draw <= 0.5 ? 1 : -1; }

CouplingGeometry coupling_geometry(const CovariateSetupd& setup) {
  CouplingGeometry g;
  const Index n = setup.n();
  const Index d = setup.d();
  g.full_gram = setup.y.transpose() * setup.y;
  if (d == 0) {
    g.kappa = 0.0;
    g.threshold = double(n);
    return g;
  }
  Eigen::SelfAdjointEigenSolver<Matrixd> eig(g.full_gram, Eigen::EigenvaluesOnly);
  g.lambda_min = eig.eigenvalues().minCoeff();
  const double lambda_max = eig.eigenvalues().maxCoeff();
  if (g.lambda_min <= 1e-12 * lambda_max) {
    g.kappa = std::numeric_limits<double>::infinity();
    g.threshold = -std::numeric_limits<double>::infinity();
    return g;
  }
  g.kappa = double(n) / g.lambda_min;
  const double z2 = setup.zeta * setup.zeta;
  g.threshold = std::floor(double(n) - 6.0 * setup.direction_norm_ceiling() * z2 * g.kappa);
  return g;
}

CoupledState make_coupled_state(const CovariateSetupd& setup, std::uint64_t seed, std::uint64_t stream,
                                const CoupledOptions& opts) {
  CoupledState s;
  s.gs = make_design_state(setup, RandomStream(seed, stream));
  s.sk_rng = s.gs.rng.substream(1);
  s.sk_z = Vectord::Zero(setup.n());
  s.sk_active = s.gs.active;
  s.sk_cache = s.gs.cache;
  s.eps_n = opts.epsilon_override.value_or(epsilon_schedule(setup.n()));
  if (!(s.eps_n > 0.0 && s.eps_n < 1.0)) throw ParameterError("epsilon must lie in (0, 1)");
  return s;
}

namespace {

double inner_over(const Vectord& u, const Vectord& v, const IndexSet& active) {
  double acc = 0.0;
  for (Index i : active) acc += u[i] * v[i];
  return acc;
}

void erase_sorted(IndexSet& set, Index value) {
  auto it = std::lower_bound(set.begin(), set.end(), value);
  if (it == set.end() || *it != value) throw std::logic_error("index not present in active set");
  set.erase(it);
}

[[noreturn]] void inconsistency(Index t, const std::string& what) {
  throw InternalConsistencyError(fmt::format("round {}: {} while in Case 1", t, what));
}

}  // namespace

StepLog coupled_step(CoupledState& state, const CovariateSetupd& setup, const CouplingGeometry& geometry,
                     const Vectord& v, const CoupledOptions& opts, Vectord* normalized_direction) {
  const Index n = setup.n();
  const Index t = state.t + 1;
  if (t > n) throw std::logic_error("coupled_step past round n");
  if (Index(state.sk_active.size()) != n - t + 1) {
    throw InternalConsistencyError("skeletal active set has the wrong cardinality");
  }

  StepLog log;
  log.t = t;
  log.g1 = check_g1(state.sk_z, state.sk_active, state.eps_n);
  log.g2 = check_g2(state.sk_cache.gram, geometry.full_gram, geometry.lambda_min, n, t);
  const bool case1 = state.in_case1 && double(t) <= geometry.threshold && log.g1 && log.g2;
  if (!case1 && state.in_case1) {
    state.in_case1 = false;
    state.first_violation_t = t;
  }

  StepDirectiond dir;
  if (case1) {
    log.branch = 1;
    if (state.gs.active != state.sk_active) inconsistency(t, "gs and skeletal active sets differ");
    const bool fresh = !(state.gs.pivot && std::binary_search(state.gs.active.begin(), state.gs.active.end(),
                                                              *state.gs.pivot));
    if (!fresh) inconsistency(t, "previous pivot still active");
    const Index p = select_pivot(state.gs);
    step_direction_into(setup, state.gs.active, p, state.gs.cache, dir);
    const auto interval = feasible_interval(state.gs.z, dir, state.gs.active);
    const double draw = state.gs.rng.uniform();
    const double delta = sample_step(interval.delta_plus, interval.delta_minus, draw);
    constexpr double kSlack = 1e-12;
    if (std::abs(interval.delta_plus - 1.0) > state.eps_n + kSlack ||
        std::abs(interval.delta_minus - 1.0) > state.eps_n + kSlack) {
      inconsistency(t, fmt::format("step interval ({}, {}) departs from 1 by more than eps_n = {}",
                                   interval.delta_plus, interval.delta_minus, state.eps_n));
    }
    const double inner = inner_over(dir.u, v, state.gs.active);
    IndexSet frozen;
    apply_step(setup, state.gs, dir, interval, delta, opts.sampler, &frozen);
    if (frozen.size() != 1 || frozen.front() != p) inconsistency(t, "a non-pivot coordinate froze");

    state.sk_z = state.gs.z;
    state.sk_active = state.gs.active;
    state.sk_cache = state.gs.cache;

    log.pivot_gs = log.pivot_sk = p;
    log.delta_gs = log.delta_sk = delta;
    log.delta_plus = interval.delta_plus;
    log.delta_minus = interval.delta_minus;
    log.eta = eta_draw(draw);
    state.m_gs += delta * inner;
    state.m_tilde += delta * inner;
    state.m += log.eta * inner / std::sqrt(dir.bu_norm_sq);
    state.quadratic_variation += inner * inner / dir.bu_norm_sq;
  } else {
    log.branch = 2;
    double draw = 0.0;
    if (state.gs.active.empty()) {
      draw = state.gs.rng.uniform();
    } else {
      StepDirectiond gs_dir;
      const Index p_gs = select_pivot(state.gs);
      step_direction_into(setup, state.gs.active, p_gs, state.gs.cache, gs_dir);
      const auto interval = feasible_interval(state.gs.z, gs_dir, state.gs.active);
      draw = state.gs.rng.uniform();
      const double delta = sample_step(interval.delta_plus, interval.delta_minus, draw);
      const double inner_gs = inner_over(gs_dir.u, v, state.gs.active);
      apply_step(setup, state.gs, gs_dir, interval, delta, opts.sampler);
      log.pivot_gs = p_gs;
      log.delta_gs = delta;
      log.delta_plus = interval.delta_plus;
      log.delta_minus = interval.delta_minus;
      state.m_gs += delta * inner_gs;
    }
    log.eta = eta_draw(draw);

    const Index p = pivot_from_draw(state.sk_active, state.sk_rng.uniform());
    step_direction_into(setup, state.sk_active, p, state.sk_cache, dir);
    const double inner = inner_over(dir.u, v, state.sk_active);
    for (Index i : state.sk_active) state.sk_z[i] += log.eta * dir.u[i];
    erase_sorted(state.sk_active, p);
    state.sk_cache = downdate_inverse(std::move(state.sk_cache), setup.y.row(p).transpose());

    log.pivot_sk = p;
    log.delta_sk = log.eta;
    state.m_tilde += log.eta * inner;
    state.m += log.eta * inner / std::sqrt(dir.bu_norm_sq);
    state.quadratic_variation += inner * inner / dir.bu_norm_sq;
  }

  if (normalized_direction) {
    *normalized_direction = augmented_image(setup, dir.u) / std::sqrt(dir.bu_norm_sq);
  }
  state.t = t;
  log.m_gs = state.m_gs;
  log.m_tilde = state.m_tilde;
  log.m = state.m;
  return log;
}

CoupledTrajectory run_coupled(const CovariateSetupd& setup, const Vectord& v, std::uint64_t seed,
                              const CoupledOptions& opts, std::uint64_t stream) {
  return run_coupled(setup, coupling_geometry(setup), v, seed, opts, stream);
}

CoupledTrajectory run_coupled(const CovariateSetupd& setup, const CouplingGeometry& geometry, const Vectord& v,
                              std::uint64_t seed, const CoupledOptions& opts, std::uint64_t stream) {
  const Index n = setup.n();
  if (v.size() != n) throw DataError("residual vector length differs from the number of units");
  if (!v.allFinite()) throw DataError("residual vector contains non-finite entries");

  CoupledTrajectory traj;
  traj.v_norm_sq = v.squaredNorm();
  traj.kappa = geometry.kappa;
  traj.threshold = geometry.threshold;
  traj.coupling_vacuous = geometry.threshold < 1.0;
  if (setup.x.cols() > 0) {
    const Vectord xv = setup.x.transpose() * v;
    const double vnorm = v.norm();
    for (Index j = 0; j < setup.x.cols(); ++j) {
      if (std::abs(xv[j]) > 1e-8 * vnorm * setup.x.col(j).norm()) traj.orthogonality_warning = true;
    }
  }

  auto state = make_coupled_state(setup, seed, stream, opts);
  traj.eps_n = state.eps_n;
  if (opts.record_steps) traj.steps.reserve(std::size_t(n));
  if (opts.record_directions) traj.directions.resize(n, n + setup.d());
  Vectord direction;
  for (Index t = 1; t <= n; ++t) {
    const StepLog log = coupled_step(state, setup, geometry, v, opts, opts.record_directions ? &direction : nullptr);
    if (log.branch == 1) ++traj.case1_steps;
    if (opts.record_directions) traj.directions.row(t - 1) = direction.transpose();
    if (opts.record_steps) traj.steps.push_back(log);
  }
  if (!state.gs.active.empty()) throw NumericError("gs process did not finish within n rounds");

  traj.z_gs = state.gs.z;
  traj.z_sk = state.sk_z;
  traj.m_gs = state.m_gs;
  traj.m_tilde = state.m_tilde;
  traj.m = state.m;
  traj.quadratic_variation = state.quadratic_variation;
  traj.first_violation_t = state.first_violation_t;
  return traj;
}

void write_trajectory_csv(std::ostream& out, const CoupledTrajectory& traj) {
  out << "t,case,pivot_gs,pivot_sk,g1,g2,delta,eta,M_gs,M_tilde,M\n";
  for (const auto& s : traj.steps) {
    out << fmt::format("{},{},{},{},{},{},{:.17g},{},{:.17g},{:.17g},{:.17g}\n", s.t, s.branch, s.pivot_gs,
                       s.pivot_sk, int(s.g1), int(s.g2), s.delta_gs, s.eta, s.m_gs, s.m_tilde, s.m);
  }
}

}  // namespace gsw
