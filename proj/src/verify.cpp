#include "gsw/verify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <Eigen/QR>
#include <fmt/format.h>

#include "gsw/montecarlo.hpp"
#include "gsw/sampler.hpp"
#include "gsw/skeletal.hpp"

namespace gsw {

namespace {

// Sub-stream ids keep each suite's randomness separate under one seed.
enum SuiteStream : std::uint64_t {
  kSrsworStream = 1,
  kIdentityStream,
  kDowndateStream,
  kEnumerationStream,
  kQvStream,
  kConcentrationStream,
  kCouplingStream,
};

Index uniform_index(RandomStream& rng, Index lo, Index hi) {
  return lo + Index(rng.uniform() * double(hi - lo + 1));
}

Matrixd gaussian_matrix(RandomStream& rng, Index rows, Index cols) {
  Matrixd m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) m(i, j) = rng.normal();
  return m;
}

Vectord gaussian_vector(RandomStream& rng, Index n) {
  Vectord v(n);
  for (Index i = 0; i < n; ++i) v[i] = rng.normal();
  return v;
}

IndexSet random_subset_with(RandomStream& rng, Index n, Index must) {
  IndexSet out;
  for (Index i = 0; i < n; ++i)
    if (i == must || rng.uniform() < 0.6) out.push_back(i);
  return out;
}

CheckResult bounded(std::string name, double err, double tol, std::string detail = {}) {
  return {std::move(name), err <= tol, err, tol, std::move(detail)};
}

double rel(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

SuiteReport srswor_suite(std::uint64_t seed) {
  SuiteReport rep{"srswor", {}, Json::array()};
  RandomStream rng(seed, kSrsworStream);
  double worst_m2 = 0.0;
  double worst_m4 = 0.0;
  for (Index n = 1; n <= 8; ++n) {
    for (Index a = 1; a <= n; ++a) {
      double row_m2 = 0.0;
      double row_m4 = 0.0;
      for (int k = 0; k < 50; ++k) {
        SrsworCase c{gaussian_vector(rng, n), a};
        const auto formula = srswor_moments(c);
        const auto brute = srswor_bruteforce(c);
        row_m2 = std::max(row_m2, rel(formula.m2, brute.m2));
        if (formula.m4 && brute.m4) row_m4 = std::max(row_m4, rel(*formula.m4, *brute.m4));
      }
      worst_m2 = std::max(worst_m2, row_m2);
      worst_m4 = std::max(worst_m4, row_m4);
      rep.table.push_back(Json{{"n", n}, {"a", a}, {"max_delta_m2", row_m2}, {"max_delta_m4", row_m4}});
    }
  }
  rep.checks.push_back(bounded("m2 formula vs brute force", worst_m2, 1e-10));
  rep.checks.push_back(bounded("m4 formula vs brute force", worst_m4, 1e-10));
  Vectord x(4);
  x << 1, 1, -1, -1;
  const auto worked = srswor_moments({x, 2});
  rep.checks.push_back(bounded("worked case m4 = 16/3", std::abs(worked.m4.value_or(0.0) - 16.0 / 3.0), 1e-12));
  return rep;
}

SuiteReport identities_suite(std::uint64_t seed) {
  SuiteReport rep{"identities", {}, Json::array()};
  RandomStream rng(seed, kIdentityStream);
  double err_dir = 0.0, err_norm = 0.0, err_inner = 0.0, err_quad = 0.0, bound_violation = 0.0;
  const int instances = 200;
  for (int k = 0; k < instances; ++k) {
    const Index n = uniform_index(rng, 2, 30);
    const Index d = uniform_index(rng, 0, 4);
    const double phi = 0.1 + 0.8 * rng.uniform();
    const auto setup = build_setup(gaussian_matrix(rng, n, d), phi);
    const Index p = uniform_index(rng, 0, n - 1);
    const IndexSet active = random_subset_with(rng, n, p);
    const auto cache = init_inverse(setup.y, active);
    const auto dir = step_direction(setup, active, p, cache);

    // Least squares over the free coordinates A \ {p}.
    IndexSet free;
    for (Index i : active)
      if (i != p) free.push_back(i);
    Vectord u_ls = Vectord::Zero(n);
    u_ls[p] = 1.0;
    if (!free.empty()) {
      Matrixd cols(n + setup.d(), Index(free.size()));
      for (std::size_t j = 0; j < free.size(); ++j) cols.col(Index(j)) = augmented_column(setup, free[j]);
      const Vectord w = cols.completeOrthogonalDecomposition().solve(-augmented_column(setup, p));
      for (std::size_t j = 0; j < free.size(); ++j) u_ls[free[j]] = w[Index(j)];
    }
    err_dir = std::max(err_dir, (dir.u - u_ls).lpNorm<Eigen::Infinity>() / dir.u.lpNorm<Eigen::Infinity>());

    const double bu2 = augmented_image(setup, dir.u).squaredNorm();
    err_norm = std::max(err_norm, rel(dir.bu_norm_sq, bu2));
    bound_violation = std::max({bound_violation, 1.0 - dir.bu_norm_sq - 1e-12,
                                dir.bu_norm_sq - setup.direction_norm_ceiling() - 1e-12});

    const Vectord v = gaussian_vector(rng, n);
    const double inner = direction_inner_product(setup, active, p, cache, v);
    err_inner = std::max(err_inner, rel(inner, dir.u.dot(v)));
    const double q = direction_quadratic(setup, active, p, cache, v);
    err_quad = std::max(err_quad, rel(q, std::pow(dir.u.dot(v) / dir.bu_norm_sq, 2)));
  }
  rep.table.push_back(Json{{"instances", instances},
                           {"direction_rel", err_dir},
                           {"norm_rel", err_norm},
                           {"inner_rel", err_inner},
                           {"quadratic_rel", err_quad}});
  rep.checks.push_back(bounded("direction vs constrained least squares", err_dir, 1e-8));
  rep.checks.push_back(bounded("norm identity", err_norm, 1e-10));
  rep.checks.push_back(bounded("1 <= ||Bu||^2 <= C1", std::max(0.0, bound_violation), 0.0));
  rep.checks.push_back(bounded("inner product identity", err_inner, 1e-10));
  rep.checks.push_back(bounded("quadratic identity", err_quad, 1e-10));
  return rep;
}

SuiteReport downdate_suite(std::uint64_t seed) {
  SuiteReport rep{"downdate", {}, Json::array()};
  RandomStream rng(seed, kDowndateStream);
  double worst = 0.0;
  for (int k = 0; k < 50; ++k) {
    const Index d = uniform_index(rng, 1, 5);
    const Index n = uniform_index(rng, d + 1, 60);
    const auto setup = build_setup(gaussian_matrix(rng, n, d), 0.1 + 0.8 * rng.uniform());
    IndexSet active(static_cast<std::size_t>(n));
    std::iota(active.begin(), active.end(), Index(0));
    auto cache = init_inverse(setup.y, active);
    const Index removals = std::min<Index>(n - 1, 50);
    double row = 0.0;
    for (Index r = 0; r < removals; ++r) {
      const auto pos = std::size_t(uniform_index(rng, 0, Index(active.size()) - 1));
      const Index gone = active[pos];
      active.erase(active.begin() + std::ptrdiff_t(pos));
      cache = downdate_inverse(std::move(cache), setup.y.row(gone).transpose());
      const auto fresh = init_inverse(setup.y, active);
      row = std::max(row, (cache.inverse - fresh.inverse).norm() / std::sqrt(double(d)));
    }
    worst = std::max(worst, row);
    rep.table.push_back(Json{{"n", n}, {"d", d}, {"removals", removals}, {"frobenius_over_sqrt_d", row}});
  }
  rep.checks.push_back(bounded("downdate vs recompute", worst, 1e-8));
  return rep;
}

SuiteReport enumeration_suite(std::uint64_t seed) {
  SuiteReport rep{"enumeration", {}, Json::array()};
  RandomStream rng(seed, kEnumerationStream);
  const std::pair<Index, Index> shapes[] = {{1, 0}, {2, 0}, {2, 1}, {3, 1}, {4, 2}};
  double worst_z = 0.0, worst_tau = 0.0, worst_mass = 0.0;
  for (const auto& [n, d] : shapes) {
    const auto setup = build_setup(gaussian_matrix(rng, n, d), 0.5);
    const auto outcomes = make_outcomes(gaussian_vector(rng, n), gaussian_vector(rng, n));
    const auto law = exact_enumeration(setup, &outcomes);
    const double ez = law.mean_z.lpNorm<Eigen::Infinity>();
    const double et = std::abs(law.mean_tau_hat.value() - ate(outcomes.a, outcomes.b));
    const double mass = std::abs(law.total_probability - 1.0);
    worst_z = std::max(worst_z, ez);
    worst_tau = std::max(worst_tau, et);
    worst_mass = std::max(worst_mass, mass);
    rep.table.push_back(Json{{"n", n},
                             {"d", d},
                             {"atoms", law.atoms.size()},
                             {"max_abs_mean_z", ez},
                             {"bias_tau_hat", et},
                             {"mass_error", mass}});
  }
  rep.checks.push_back(bounded("E[z] = 0", worst_z, 1e-10));
  rep.checks.push_back(bounded("E[tau_hat] = tau", worst_tau, 1e-10));
  rep.checks.push_back(bounded("atom mass sums to 1", worst_mass, 1e-12));
  return rep;
}

SuiteReport qv_suite(std::uint64_t seed) {
  SuiteReport rep{"qv", {}, Json::array()};
  RandomStream rng(seed, kQvStream);
  const Index n = 100, d = 3;
  const Matrixd x = gaussian_matrix(rng, n, d);
  const auto setup = build_setup(x, 0.5);
  const auto decomp = residual_projection(gaussian_vector(rng, n), x);
  const auto geometry = coupling_geometry(setup);
  CoupledOptions opts;
  opts.record_steps = false;
  double worst = 0.0;
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto traj = run_coupled(setup, geometry, decomp.v, seed, opts, s);
    const double err = std::abs(traj.quadratic_variation - decomp.v_norm_sq) / decomp.v_norm_sq;
    worst = std::max(worst, err);
    rep.table.push_back(Json{{"stream", s}, {"quadratic_variation", traj.quadratic_variation}, {"rel_error", err}});
  }
  rep.checks.push_back(bounded("sum of squared projections = ||v||^2", worst, 1e-8));
  return rep;
}

SuiteReport concentration_suite(std::uint64_t seed) {
  SuiteReport rep{"concentration", {}, Json::array()};
  RandomStream rng(seed, kConcentrationStream);
  const Index n = 40;
  Index violations = 0;
  double worst_excess = -std::numeric_limits<double>::infinity();
  for (Index d : {Index(1), Index(3)}) {
    std::vector<Matrixd> mats;
    for (Index i = 0; i < n; ++i) {
      const Vectord g = gaussian_vector(rng, d).normalized();
      mats.push_back((rng.uniform() < 0.5 ? 1.0 : -1.0) * g * g.transpose());
    }
    for (Index a : {Index(10), Index(20)}) {
      const double scale = std::sqrt(double(a * (n - a)) / double(n));
      std::vector<double> grid;
      for (int k = 0; k < 8; ++k) grid.push_back(0.5 * k * scale);
      const auto rows = matrix_concentration_check(mats, a, grid, 20000, seed);
      for (const auto& r : rows) {
        if (!r.within_bound) ++violations;
        worst_excess = std::max(worst_excess, r.empirical_prob - r.bound - 3.0 * r.standard_error);
        rep.table.push_back(Json{{"d", d},
                                 {"a", a},
                                 {"x", r.x},
                                 {"empirical", r.empirical_prob},
                                 {"bound", r.bound},
                                 {"se", r.standard_error}});
      }
    }
  }
  rep.checks.push_back({"empirical tail <= bound + 3 SE", violations == 0, worst_excess, 0.0,
                        fmt::format("{} violations", violations)});
  return rep;
}

SuiteReport coupling_suite(std::uint64_t seed) {
  SuiteReport rep{"coupling", {}, Json::array()};
  RandomStream rng(seed, kCouplingStream);
  const Index n = 200;
  const Matrixd x = generate_covariates(CovariateGenerator::kSphere, n, 2, rng);
  const auto setup = build_setup(x, 0.5);
  const auto decomp = residual_projection(gaussian_vector(rng, n), x);
  const auto geometry = coupling_geometry(setup);
  Index failures = 0;
  Index case1 = 0;
  double worst_delta = 0.0;
  const double eps = epsilon_schedule(n);
  for (std::uint64_t s = 0; s < 30; ++s) {
    try {
      const auto traj = run_coupled(setup, geometry, decomp.v, seed, {}, s);
      case1 += traj.case1_steps;
      for (const auto& step : traj.steps) {
        if (step.branch != 1) continue;
        worst_delta = std::max({worst_delta, std::abs(step.delta_plus - 1.0), std::abs(step.delta_minus - 1.0)});
      }
    } catch (const InternalConsistencyError&) {
      ++failures;
    }
  }
  rep.table.push_back(Json{{"n", n},
                           {"kappa", geometry.kappa},
                           {"threshold", geometry.threshold},
                           {"case1_steps", case1},
                           {"assertion_failures", failures},
                           {"max_delta_deviation", worst_delta},
                           {"epsilon", eps}});
  rep.checks.push_back({"no Case 1 assertion failures", failures == 0, double(failures), 0.0, {}});
  rep.checks.push_back(bounded("|delta - 1| <= eps_n in Case 1", worst_delta, eps));
  rep.checks.push_back({"Case 1 reached", case1 > 0, double(case1), 0.0, "coupling would be vacuous otherwise"});
  return rep;
}

}  // namespace

bool SuiteReport::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.passed; });
}

const std::vector<std::string>& suite_names() {
  static const std::vector<std::string> names = {"srswor", "identities",    "downdate", "enumeration",
                                                 "qv",     "concentration", "coupling"};
  return names;
}

SuiteReport run_suite(const std::string& name, std::uint64_t seed) {
  if (name == "srswor") return srswor_suite(seed);
  if (name == "identities") return identities_suite(seed);
  if (name == "downdate") return downdate_suite(seed);
  if (name == "enumeration") return enumeration_suite(seed);
  if (name == "qv") return qv_suite(seed);
  if (name == "concentration") return concentration_suite(seed);
  if (name == "coupling") return coupling_suite(seed);
  throw ParameterError("unknown verify suite '" + name + "'");
}

Json to_json(const SuiteReport& report) {
  Json checks = Json::array();
  for (const auto& c : report.checks) {
    checks.push_back(Json{{"name", c.name},
                          {"passed", c.passed},
                          {"max_error", c.max_error},
                          {"tolerance", c.tolerance},
                          {"detail", c.detail}});
  }
  return Json{{"suite", report.suite}, {"passed", report.passed()}, {"checks", checks}, {"table", report.table}};
}

}  // namespace gsw
