#include "gsw/montecarlo.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <exception>
#include <limits>
#include <map>
#include <mutex>
#include <numeric>
#include <thread>

#include <Eigen/Eigenvalues>
#include <boost/math/special_functions/gamma.hpp>
#include <fmt/format.h>

#include "gsw/sampler.hpp"
#include "gsw/skeletal.hpp"

namespace gsw {

std::string to_string(Mode m) {
  switch (m) {
    case Mode::kGsw: return "gsw";
    case Mode::kSkeletal: return "skeletal";
    case Mode::kCoupled: return "coupled";
    case Mode::kIid: return "iid";
  }
  return "?";
}

std::string to_string(Target t) { return t == Target::kTauHat ? "tau_hat" : "residual"; }

std::string to_string(CovariateGenerator g) {
  switch (g) {
    case CovariateGenerator::kGaussian: return "gaussian";
    case CovariateGenerator::kSphere: return "sphere";
    case CovariateGenerator::kOnes: return "ones";
  }
  return "?";
}

std::string to_string(OutcomeProfile p) {
  switch (p) {
    case OutcomeProfile::kDense: return "dense";
    case OutcomeProfile::kSparse: return "sparse";
    case OutcomeProfile::kColumnSpace: return "colspace";
  }
  return "?";
}

Mode parse_mode(const std::string& s) {
  for (Mode m : {Mode::kGsw, Mode::kSkeletal, Mode::kCoupled, Mode::kIid}) {
    if (to_string(m) == s) return m;
  }
  throw ParameterError("unknown mode '" + s + "' (expected gsw, skeletal, coupled or iid)");
}

Target parse_target(const std::string& s) {
  if (s == "tau_hat") return Target::kTauHat;
  if (s == "residual") return Target::kResidual;
  throw ParameterError("unknown target '" + s + "' (expected tau_hat or residual)");
}

CovariateGenerator parse_covariate_generator(const std::string& s) {
  for (auto g : {CovariateGenerator::kGaussian, CovariateGenerator::kSphere, CovariateGenerator::kOnes}) {
    if (to_string(g) == s) return g;
  }
  throw ParameterError("unknown covariate generator '" + s + "' (expected gaussian, sphere or ones)");
}

OutcomeProfile parse_outcome_profile(const std::string& s) {
  for (auto p : {OutcomeProfile::kDense, OutcomeProfile::kSparse, OutcomeProfile::kColumnSpace}) {
    if (to_string(p) == s) return p;
  }
  throw ParameterError("unknown outcome profile '" + s + "' (expected dense, sparse or colspace)");
}

void validate(const SimConfig& config) {
  if (config.n < 1) throw ParameterError("n must be at least 1");
  if (config.d < 0) throw ParameterError("d must be non-negative");
  if (!(config.phi > 0.0 && config.phi < 1.0)) throw ParameterError("phi must lie strictly between 0 and 1");
  if (config.replications < 1) throw ParameterError("replications must be at least 1");
  if (!(config.freeze_tol >= 0.0 && config.freeze_tol < 0.5)) throw ParameterError("freeze_tol must lie in [0, 0.5)");
  if (config.epsilon_override && !(*config.epsilon_override > 0.0 && *config.epsilon_override < 1.0)) {
    throw ParameterError("epsilon_override must lie in (0, 1)");
  }
}

Problem make_problem(const Matrixd& x, const OutcomeData& outcomes, double phi) {
  if (outcomes.mu.size() != x.rows()) throw DataError("outcome length differs from the number of covariate rows");
  Problem p;
  p.setup = build_setup(x, phi);
  p.outcomes = outcomes;
  p.decomp = residual_projection(outcomes.mu, x);
  return p;
}

Matrixd generate_covariates(CovariateGenerator gen, Index n, Index d, RandomStream& rng) {
  Matrixd x(n, d);
  switch (gen) {
    case CovariateGenerator::kOnes:
      x.setOnes();
      break;
    case CovariateGenerator::kGaussian:
    case CovariateGenerator::kSphere:
      for (Index i = 0; i < n; ++i) {
        for (Index j = 0; j < d; ++j) x(i, j) = rng.normal();
        if (gen == CovariateGenerator::kSphere && d > 0) {
          const double norm = x.row(i).norm();
          if (norm > 0.0) x.row(i) /= norm;
        }
      }
      break;
  }
  return x;
}

Problem synthesize_problem(const SimConfig& config) {
  validate(config);
  RandomStream rng(config.seed, kSynthesisStream);
  const Matrixd x = generate_covariates(config.x_generator, config.n, config.d, rng);
  Vectord mu = x * Vectord::Ones(config.d);
  switch (config.outcome_profile) {
    case OutcomeProfile::kDense:
      for (Index i = 0; i < config.n; ++i) mu[i] += rng.normal();
      break;
    case OutcomeProfile::kSparse:
      mu[0] += std::sqrt(double(config.n));
      break;
    case OutcomeProfile::kColumnSpace:
      break;
  }
  const Vectord effect = Vectord::Constant(config.n, config.treatment_effect);
  return make_problem(x, make_outcomes((mu + effect) / 2.0, (mu - effect) / 2.0), config.phi);
}

double pairwise_sum(std::span<const double> values) {
  if (values.size() <= 8) {
    double acc = 0.0;
    for (double v : values) acc += v;
    return acc;
  }
  const std::size_t half = values.size() / 2;
  return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double ks_distance(std::span<const double> samples) {
  if (samples.empty()) throw DataError("ks_distance: empty sample");
  std::vector<double> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());
  const double m = double(sorted.size());
  double worst = 0.0;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const double cdf = normal_cdf(sorted[i]);
    worst = std::max({worst, double(i + 1) / m - cdf, cdf - double(i) / m});
  }
  return worst;
}

double chi_square_pvalue(double statistic, double dof) {
  if (statistic <= 0.0) return 1.0;
  return boost::math::gamma_q(dof / 2.0, statistic / 2.0);
}

SimulationDiagnostics summarize(std::vector<double> samples, double center, double reference_variance) {
  SimulationDiagnostics out;
  const Index m = Index(samples.size());
  out.replications = m;
  out.center = center;
  out.reference_variance = reference_variance;
  if (m == 0) throw DataError("summarize: no samples");
  const double nan = std::numeric_limits<double>::quiet_NaN();

  out.mean = pairwise_sum(samples) / double(m);
  std::vector<double> work(samples.size());
  auto moment = [&](auto f) {
    for (std::size_t k = 0; k < samples.size(); ++k) work[k] = f(samples[k]);
    return pairwise_sum(work) / double(m);
  };
  const double m2 = moment([&](double s) { return (s - out.mean) * (s - out.mean); });
  const double m4 = moment([&](double s) { return std::pow(s - out.mean, 4); });
  out.mse = moment([&](double s) { return (s - center) * (s - center); });
  const double mse2 = moment([&](double s) { return std::pow(s - center, 4); });

  out.variance_defined = m >= 2;
  if (out.variance_defined) {
    out.variance = m2 * double(m) / double(m - 1);
    out.mc_standard_error = std::sqrt(out.variance / double(m));
    out.mse_standard_error = std::sqrt(std::max(0.0, mse2 - out.mse * out.mse) / double(m - 1));
    const double var_se = std::sqrt(std::max(0.0, m4 - m2 * m2) / double(m));
    if (reference_variance > 0.0) {
      out.variance_ratio = out.variance / reference_variance;
      out.variance_ratio_standard_error = var_se / reference_variance;
    } else {
      out.variance_ratio = nan;
      out.variance_ratio_standard_error = nan;
    }
  } else {
    out.variance = out.mc_standard_error = out.mse_standard_error = nan;
    out.variance_ratio = out.variance_ratio_standard_error = nan;
  }

  if (reference_variance > 0.0) {
    const double scale = std::sqrt(reference_variance);
    for (std::size_t k = 0; k < samples.size(); ++k) work[k] = (samples[k] - center) / scale;
    out.ks_distance = ks_distance(work);
  } else {
    out.ks_distance = nan;
  }
  out.samples = std::move(samples);
  return out;
}

namespace {

template <typename Fn>
void parallel_for(Index count, unsigned threads, Fn&& fn) {
  unsigned workers = threads ? threads : std::max(1u, std::thread::hardware_concurrency());
  workers = unsigned(std::min<Index>(workers, std::max<Index>(count, 1)));
  if (workers <= 1) {
    for (Index k = 0; k < count; ++k) fn(k);
    return;
  }
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (Index k = w; k < count; k += workers) fn(k);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace

SimulationDiagnostics run_replications(const SimConfig& config, const Problem& problem) {
  validate(config);
  const auto& setup = problem.setup;
  const Index n = setup.n();
  const auto& out = problem.outcomes;
  const Vectord& v = problem.decomp.v;
  const bool tau_target = config.target == Target::kTauHat;
  if (tau_target && (out.a.size() != n || out.b.size() != n)) {
    throw DataError("tau_hat target needs both potential outcome vectors a and b");
  }

  SamplerOptions sampler{config.freeze_tol};
  CoupledOptions coupled;
  coupled.epsilon_override = config.epsilon_override;
  coupled.sampler = sampler;
  coupled.record_steps = false;
  CouplingGeometry geometry;
  if (config.mode == Mode::kSkeletal || config.mode == Mode::kCoupled) geometry = coupling_geometry(setup);

  std::vector<double> samples(std::size_t(config.replications));
  parallel_for(config.replications, config.threads, [&](Index k) {
    const auto stream = std::uint64_t(k);
    double value = 0.0;
    if (config.mode == Mode::kGsw || config.mode == Mode::kIid) {
      Vectord z;
      if (config.mode == Mode::kGsw) {
        z = run_gsw(setup, RandomStream(config.seed, stream), sampler);
      } else {
        RandomStream rng(config.seed, stream);
        z.resize(n);
        for (Index i = 0; i < n; ++i) z[i] = eta_draw(rng.uniform());
      }
      value = tau_target ? ht_estimate(z, out.a, out.b) : z.dot(v);
    } else {
      // tau_hat - tau = <z, mu> / n, so the tau target tracks mu instead of v.
      const auto traj = run_coupled(setup, geometry, tau_target ? out.mu : v, config.seed, coupled, stream);
      const double m = config.mode == Mode::kSkeletal ? traj.m : traj.m_gs;
      value = tau_target ? ate(out.a, out.b) + m / double(n) : m;
    }
    samples[std::size_t(k)] = value;
  });

  double center = 0.0;
  double reference = problem.decomp.v_norm_sq;
  if (tau_target) {
    center = ate(out.a, out.b);
    const auto [var_iid, var_gsw] = predicted_variances(problem.decomp, out.mu, n);
    reference = config.mode == Mode::kIid ? var_iid : var_gsw;
  }
  auto diag = summarize(std::move(samples), center, reference);
  diag.phi_ceiling = 1.0 / config.phi;
  return diag;
}

SimulationDiagnostics variance_ratio_experiment(SimConfig config, const Problem& problem) {
  if (problem.decomp.v_norm_sq == 0.0) throw DataError("variance ratio undefined for a zero residual vector");
  config.mode = Mode::kGsw;
  config.target = Target::kResidual;
  return run_replications(config, problem);
}

namespace {

struct Enumerator {
  const CovariateSetupd& setup;
  SamplerOptions opts;
  std::map<std::vector<int>, double> atoms;

  void walk(DesignStated state, double prob) {
    if (state.active.empty()) {
      std::vector<int> signs(std::size_t(state.z.size()));
      for (Index i = 0; i < state.z.size(); ++i) signs[std::size_t(i)] = state.z[i] > 0 ? 1 : -1;
      atoms[signs] += prob;
      return;
    }
    const bool keep = state.pivot && std::binary_search(state.active.begin(), state.active.end(), *state.pivot);
    if (keep) {
      const Index p = *state.pivot;
      branch(std::move(state), p, prob);
      return;
    }
    const double share = prob / double(state.active.size());
    for (Index p : state.active) {
      DesignStated child = state;
      child.pivot = p;
      branch(std::move(child), p, share);
    }
  }

  void branch(DesignStated state, Index p, double prob) {
    StepDirectiond dir;
    step_direction_into(setup, state.active, p, state.cache, dir);
    const auto interval = feasible_interval(state.z, dir, state.active);
    const double total = interval.delta_plus + interval.delta_minus;
    DesignStated up = state;
    apply_step(setup, up, dir, interval, interval.delta_plus, opts);
    walk(std::move(up), prob * interval.delta_minus / total);
    apply_step(setup, state, dir, interval, -interval.delta_minus, opts);
    walk(std::move(state), prob * interval.delta_plus / total);
  }
};

}  // namespace

ExactLaw exact_enumeration(const CovariateSetupd& setup, const OutcomeData* outcomes, double freeze_tol) {
  const Index n = setup.n();
  if (n > kMaxEnumerationUnits) {
    throw ParameterError(fmt::format("exact enumeration is limited to n <= {}", kMaxEnumerationUnits));
  }
  Enumerator e{setup, SamplerOptions{freeze_tol}, {}};
  e.walk(make_design_state(setup, RandomStream(0, 0)), 1.0);

  ExactLaw law;
  law.mean_z = Vectord::Zero(n);
  for (const auto& [signs, prob] : e.atoms) {
    law.atoms.push_back({signs, prob});
    law.total_probability += prob;
    for (Index i = 0; i < n; ++i) law.mean_z[i] += prob * signs[std::size_t(i)];
  }
  if (outcomes) {
    double m1 = 0.0;
    double m2 = 0.0;
    for (const auto& atom : law.atoms) {
      Vectord z(n);
      for (Index i = 0; i < n; ++i) z[i] = atom.signs[std::size_t(i)];
      const double est = ht_estimate(z, outcomes->a, outcomes->b);
      m1 += atom.probability * est;
      m2 += atom.probability * est * est;
    }
    law.mean_tau_hat = m1;
    law.var_tau_hat = m2 - m1 * m1;
  }
  return law;
}

namespace {

double falling(double n, int k) {
  double out = 1.0;
  for (int j = 0; j < k; ++j) out *= (n - j);
  return out;
}

Vectord centered(const SrsworCase& c, double& shift) {
  const Index n = c.x.size();
  if (n < 1) throw DataError("srswor: empty population");
  if (c.a < 1 || c.a > n) throw ParameterError("srswor: sample size must lie in [1, n]");
  shift = c.x.mean();
  return c.x.array() - shift;
}

}  // namespace

SrsworMoments srswor_moments(const SrsworCase& c) {
  SrsworMoments out;
  const Vectord x = centered(c, out.centering_shift);
  const double n = double(x.size());
  const double a = double(c.a);
  const double s2 = x.squaredNorm();
  const double s4 = x.array().pow(4).sum();
  if (x.size() < 2) {
    out.m2 = 0.0;  // a = n = 1 and the single centered value is zero
    return out;
  }
  const double pair = a * (n - a) / falling(n, 2);
  out.m2 = pair * s2;
  if (x.size() >= 4) {
    out.m4 = 3.0 * falling(a, 2) * falling(n - a, 2) / falling(n, 4) * s2 * s2 +
             pair * (1.0 - 6.0 * (a - 1.0) * (n - a - 1.0) / ((n - 2.0) * (n - 3.0))) * s4;
  }
  return out;
}

SrsworMoments srswor_bruteforce(const SrsworCase& c) {
  SrsworMoments out;
  const Vectord x = centered(c, out.centering_shift);
  const Index n = x.size();
  if (n > kMaxBruteforceUnits) {
    throw ParameterError(fmt::format("brute-force enumeration is limited to n <= {}", kMaxBruteforceUnits));
  }
  double m2 = 0.0;
  double m4 = 0.0;
  std::uint64_t subsets = 0;
  for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
    if (std::popcount(mask) != c.a) continue;
    double w = 0.0;
    for (Index i = 0; i < n; ++i) {
      if (mask & (1u << i)) w += x[i];
    }
    m2 += w * w;
    m4 += w * w * w * w;
    ++subsets;
  }
  out.m2 = m2 / double(subsets);
  out.m4 = m4 / double(subsets);
  return out;
}

double concentration_bound(Index n, Index d, Index a, double x) {
  const double spread = 2.0 * double(a) * double(n - a);
  if (spread == 0.0) return x > 0.0 ? 0.0 : 2.0 * double(d);
  return 2.0 * double(d) * std::exp(-double(n) * x * x / spread);
}

std::vector<ConcentrationRow> matrix_concentration_check(const std::vector<Matrixd>& matrices, Index a,
                                                         std::span<const double> x_grid, Index reps,
                                                         std::uint64_t seed) {
  const Index n = Index(matrices.size());
  if (n < 1) throw DataError("matrix_concentration_check: no matrices");
  if (a < 1 || a > n) throw ParameterError("matrix_concentration_check: sample size must lie in [1, n]");
  if (reps < 1) throw ParameterError("matrix_concentration_check: reps must be positive");
  const Index d = matrices.front().rows();
  Matrixd total = Matrixd::Zero(d, d);
  for (Index i = 0; i < n; ++i) {
    const auto& m = matrices[std::size_t(i)];
    if (m.rows() != d || m.cols() != d) throw DataError("matrix_concentration_check: inconsistent shapes");
    if (!m.isApprox(m.transpose(), 1e-12) && m.norm() > 0.0) {
      throw DataError(fmt::format("matrix {} is not symmetric", i));
    }
    Eigen::SelfAdjointEigenSolver<Matrixd> eig(m, Eigen::EigenvaluesOnly);
    if (eig.eigenvalues().cwiseAbs().maxCoeff() > 1.0 + 1e-12) {
      throw DataError(fmt::format("matrix {} has operator norm above 1", i));
    }
    total += m;
  }
  const Matrixd mean = (double(a) / double(n)) * total;

  RandomStream rng(seed, 0);
  std::vector<Index> perm(static_cast<std::size_t>(n));
  std::vector<Index> exceed(x_grid.size(), 0);
  for (Index r = 0; r < reps; ++r) {
    std::iota(perm.begin(), perm.end(), Index{0});
    Matrixd w = -mean;
    // Partial Fisher-Yates: the first a slots are a uniform a-subset.
    for (Index k = 0; k < a; ++k) {
      const Index j = k + Index(std::floor(rng.uniform() * double(n - k)));
      std::swap(perm[std::size_t(k)], perm[std::size_t(std::min(j, n - 1))]);
      w += matrices[std::size_t(perm[std::size_t(k)])];
    }
    Eigen::SelfAdjointEigenSolver<Matrixd> eig(w, Eigen::EigenvaluesOnly);
    const double op = eig.eigenvalues().cwiseAbs().maxCoeff();
    for (std::size_t g = 0; g < x_grid.size(); ++g) {
      if (op >= x_grid[g]) ++exceed[g];
    }
  }

  std::vector<ConcentrationRow> rows;
  for (std::size_t g = 0; g < x_grid.size(); ++g) {
    ConcentrationRow row;
    row.x = x_grid[g];
    row.empirical_prob = double(exceed[g]) / double(reps);
    row.standard_error = std::sqrt(row.empirical_prob * (1.0 - row.empirical_prob) / double(reps));
    row.bound = concentration_bound(n, d, a, row.x);
    row.within_bound = row.empirical_prob <= row.bound + 3.0 * row.standard_error;
    rows.push_back(row);
  }
  return rows;
}

}  // namespace gsw
