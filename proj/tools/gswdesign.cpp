// gswdesign: command-line front end for the Gram-Schmidt Walk design library.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "gsw/errors.hpp"
#include "gsw/estimator.hpp"
#include "gsw/io.hpp"
#include "gsw/montecarlo.hpp"
#include "gsw/sampler.hpp"
#include "gsw/skeletal.hpp"
#include "gsw/verify.hpp"

namespace fs = std::filesystem;
using namespace gsw;

namespace {

struct VerificationFailed {};

// Options shared by every subcommand. Values from --config fill in whatever the
// command line leaves unset.
struct Common {
  std::string config_path;
  double phi = 0.5;
  std::uint64_t seed = 1;
  Index replications = 1000;
  std::string mode = "gsw";
  std::optional<double> epsilon_override;
  double freeze_tol = 1e-9;
  bool no_mkdir = false;
  bool stamp = false;

  CLI::Option* phi_opt = nullptr;
  CLI::Option* seed_opt = nullptr;
  CLI::Option* reps_opt = nullptr;
  CLI::Option* mode_opt = nullptr;
  CLI::Option* eps_opt = nullptr;
  CLI::Option* tol_opt = nullptr;
};

template <typename T>
T parse_value(const std::string& key, const std::string& text) {
  std::istringstream in(text);
  T value{};
  in >> value;
  if (in.fail() || !in.eof()) throw ParameterError(fmt::format("config key '{}': cannot parse '{}'", key, text));
  return value;
}

void apply_config_file(Common& c) {
  if (c.config_path.empty()) return;
  for (const auto& [key, value] : load_config_file(c.config_path)) {
    if (key == "phi" && !c.phi_opt->count()) c.phi = parse_value<double>(key, value);
    if (key == "seed" && !c.seed_opt->count()) c.seed = parse_value<std::uint64_t>(key, value);
    if (key == "replications" && c.reps_opt && !c.reps_opt->count()) c.replications = parse_value<Index>(key, value);
    if (key == "mode" && c.mode_opt && !c.mode_opt->count()) c.mode = value;
    if (key == "epsilon_override" && c.eps_opt && !c.eps_opt->count()) c.epsilon_override = parse_value<double>(key, value);
    if (key == "freeze_tol" && !c.tol_opt->count()) c.freeze_tol = parse_value<double>(key, value);
  }
}

void add_common(CLI::App* cmd, Common& c, bool with_sim) {
  cmd->add_option("--config", c.config_path, "key=value config file; flags override it");
  c.phi_opt = cmd->add_option("--phi", c.phi, "robustness-balance parameter in (0, 1)");
  c.seed_opt = cmd->add_option("--seed", c.seed, "master seed");
  c.tol_opt = cmd->add_option("--freeze-tol", c.freeze_tol, "tolerance for freezing a coordinate at +-1");
  cmd->add_flag("--no-mkdir", c.no_mkdir, "fail instead of creating missing output directories");
  cmd->add_flag("--stamp", c.stamp, "record a wall-clock timestamp in the manifest");
  if (with_sim) {
    c.reps_opt = cmd->add_option("--reps,--replications", c.replications, "number of replications");
    c.mode_opt = cmd->add_option("--mode", c.mode, "gsw | skeletal | coupled | iid");
    c.eps_opt = cmd->add_option("--epsilon", c.epsilon_override, "override the good-event tolerance eps_n");
  }
}

Json input_entry(const std::string& path, const std::string& digest) {
  return Json{{"path", path}, {"sha256", digest}};
}

Json manifest(const std::string& command, const std::vector<std::string>& argv, const Common& c, Json config,
              Json inputs) {
  Json m;
  m["command"] = command;
  m["argv"] = argv;
  m["tool_version"] = kToolVersion;
  m["seed"] = c.seed;
  config["phi"] = c.phi;
  config["freeze_tol"] = c.freeze_tol;
  if (c.config_path.size()) config["config_file"] = c.config_path;
  m["config"] = std::move(config);
  m["inputs"] = std::move(inputs);
  if (c.stamp) {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
    m["timestamp"] = buf;
  }
  return m;
}

Json report_header(const std::string& kind) {
  Json r;
  r["schema_version"] = kSchemaVersion;
  r["report"] = kind;
  return r;
}

Json estimate_json(const EstimateReport& e, bool has_tau) {
  Json j;
  if (has_tau) {
    j["tau"] = e.tau;
    j["tau_hat"] = e.tau_hat;
  }
  j["mse_bound"] = e.mse_bound;
  j["mse_bound_tightened"] = e.mse_bound_tightened;
  j["var_iid"] = e.var_iid;
  j["var_gsw_asymptotic"] = e.var_gsw_asymptotic;
  j["kappa"] = e.kappa;
  j["formal_condition_value"] = e.formal_condition_value;
  return j;
}

std::string samples_csv(const std::vector<double>& samples) {
  std::string out = "replication,sample\n";
  for (std::size_t k = 0; k < samples.size(); ++k) out += fmt::format("{},{:.17g}\n", k, samples[k]);
  return out;
}

Json histogram(const std::vector<double>& samples, int bins) {
  const auto [lo_it, hi_it] = std::minmax_element(samples.begin(), samples.end());
  const double lo = *lo_it;
  const double hi = *hi_it > lo ? *hi_it : lo + 1.0;
  std::vector<Index> counts(std::size_t(bins), 0);
  for (double s : samples) {
    const int b = std::min(bins - 1, int((s - lo) / (hi - lo) * bins));
    ++counts[std::size_t(b)];
  }
  Json out = Json::array();
  for (int b = 0; b < bins; ++b) {
    out.push_back(Json{{"lower", lo + (hi - lo) * b / bins},
                       {"upper", lo + (hi - lo) * (b + 1) / bins},
                       {"count", counts[std::size_t(b)]}});
  }
  return out;
}

std::string histogram_csv(const Json& bins) {
  std::string out = "lower,upper,count\n";
  for (const auto& b : bins) {
    out += fmt::format("{:.17g},{:.17g},{}\n", b["lower"].get<double>(), b["upper"].get<double>(),
                       b["count"].get<Index>());
  }
  return out;
}

Json diagnostics_json(const SimulationDiagnostics& d) {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  Json j;
  j["replications"] = d.replications;
  j["center"] = d.center;
  j["mean"] = d.mean;
  j["variance_defined"] = d.variance_defined;
  j["variance"] = d.variance_defined ? d.variance : nan;
  j["mc_standard_error"] = d.mc_standard_error;
  j["mse"] = d.mse;
  j["mse_standard_error"] = d.mse_standard_error;
  j["reference_variance"] = d.reference_variance;
  j["variance_ratio"] = d.variance_ratio;
  j["variance_ratio_standard_error"] = d.variance_ratio_standard_error;
  j["ks"] = d.ks_distance;
  j["phi_ceiling"] = d.phi_ceiling;
  return j;
}

struct Inputs {
  std::string x_path;
  std::string outcomes_path;
};

Json dataset_inputs(const Dataset& ds) {
  Json inputs = Json::array();
  inputs.push_back(input_entry(ds.x_path, ds.x_digest));
  if (!ds.outcomes_path.empty()) inputs.push_back(input_entry(ds.outcomes_path, ds.outcomes_digest));
  return inputs;
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::string> args(argv + 1, argv + argc);
  CLI::App app{"Gram-Schmidt Walk experimental design"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);

  // design
  Common design_c;
  Inputs design_in;
  std::string design_out = "z.csv";
  std::string design_report;
  auto* design = app.add_subcommand("design", "draw a GSW assignment and write z as CSV");
  add_common(design, design_c, false);
  design->add_option("--x", design_in.x_path, "covariate CSV (no header)")->required();
  design->add_option("--out", design_out, "assignment CSV path");
  design->add_option("--report", design_report, "optional JSON summary with manifest");

  // estimate
  Common est_c;
  Inputs est_in;
  std::string est_z;
  std::string est_out = "estimate.json";
  auto* estimate = app.add_subcommand("estimate", "Horvitz-Thompson estimate and error bounds");
  add_common(estimate, est_c, false);
  estimate->add_option("--x", est_in.x_path, "covariate CSV (no header)")->required();
  estimate->add_option("--outcomes", est_in.outcomes_path, "outcome CSV with header from {a,b,mu}")->required();
  estimate->add_option("--z", est_z, "assignment CSV; drawn from --seed when absent");
  estimate->add_option("--out", est_out, "report JSON path");

  // simulate
  Common sim_c;
  Inputs sim_in;
  SimConfig sim_cfg;
  std::string sim_target = "residual", sim_xgen = "gaussian", sim_profile = "dense";
  std::string sim_out = "simulate";
  auto* simulate = app.add_subcommand("simulate", "Monte Carlo replications of the design");
  add_common(simulate, sim_c, true);
  simulate->add_option("--x", sim_in.x_path, "covariate CSV; synthetic when absent");
  simulate->add_option("--outcomes", sim_in.outcomes_path, "outcome CSV with a and b");
  simulate->add_option("--n", sim_cfg.n, "units for synthetic data");
  simulate->add_option("--d", sim_cfg.d, "covariates for synthetic data");
  simulate->add_option("--target", sim_target, "tau_hat | residual");
  simulate->add_option("--x-gen", sim_xgen, "gaussian | sphere | ones");
  simulate->add_option("--profile", sim_profile, "dense | sparse | colspace");
  simulate->add_option("--effect", sim_cfg.treatment_effect, "synthetic treatment effect");
  simulate->add_option("--threads", sim_cfg.threads, "worker threads, 0 for all cores");
  simulate->add_option("--out", sim_out, "output directory");

  // skeletal
  Common sk_c;
  Inputs sk_in;
  SimConfig sk_cfg;
  std::string sk_xgen = "gaussian", sk_profile = "dense";
  std::uint64_t sk_stream = 0;
  std::string sk_out = "skeletal";
  auto* skeletal = app.add_subcommand("skeletal", "one coupled gs/skeletal trajectory");
  add_common(skeletal, sk_c, false);
  sk_c.eps_opt = skeletal->add_option("--epsilon", sk_c.epsilon_override, "override eps_n");
  skeletal->add_option("--x", sk_in.x_path, "covariate CSV; synthetic when absent");
  skeletal->add_option("--outcomes", sk_in.outcomes_path, "outcome CSV with a,b or mu");
  skeletal->add_option("--n", sk_cfg.n, "units for synthetic data");
  skeletal->add_option("--d", sk_cfg.d, "covariates for synthetic data");
  skeletal->add_option("--x-gen", sk_xgen, "gaussian | sphere | ones");
  skeletal->add_option("--profile", sk_profile, "dense | sparse | colspace");
  skeletal->add_option("--stream", sk_stream, "replication stream index");
  skeletal->add_option("--out", sk_out, "output directory");

  // verify
  Common ver_c;
  std::string ver_suite = "all";
  std::string ver_out;
  auto* verify = app.add_subcommand("verify", "run the oracle and invariant suites");
  add_common(verify, ver_c, false);
  verify->add_option("--suite", ver_suite, "all | " + fmt::format("{}", fmt::join(suite_names(), " | ")));
  verify->add_option("--out", ver_out, "optional JSON report path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? int(ExitCode::kSuccess) : int(ExitCode::kUsage);
  }

  try {
    if (design->parsed()) {
      apply_config_file(design_c);
      const Dataset ds = load_dataset(design_in.x_path, std::nullopt);
      const auto setup = build_setup(ds.x, design_c.phi);
      const Vectord z = run_gsw(setup, design_c.seed, SamplerOptions{design_c.freeze_tol});
      std::ostringstream out;
      write_assignment(out, z);
      write_text_file(out.str(), design_out, !design_c.no_mkdir);
      if (!design_report.empty()) {
        Json r = report_header("design");
        r["manifest"] = manifest("design", args, design_c, Json::object(), dataset_inputs(ds));
        r["n"] = ds.n();
        r["d"] = ds.d();
        r["treated"] = Index((z.array() > 0).count());
        r["assignment_sha256"] = sha256_hex(out.str());
        emit_report(r, design_report, !design_c.no_mkdir);
      }
    } else if (estimate->parsed()) {
      apply_config_file(est_c);
      const Dataset ds = load_dataset(est_in.x_path, est_in.outcomes_path);
      const auto mu = ds.outcome_sum();
      if (!mu) throw DataError("outcome file provides neither a,b nor mu");
      const auto setup = build_setup(ds.x, est_c.phi);
      const auto decomp = residual_projection(*mu, ds.x);
      Json inputs = dataset_inputs(ds);
      EstimateReport e;
      const bool has_tau = ds.has_potential_outcomes();
      if (has_tau) {
        Vectord z;
        if (!est_z.empty()) {
          const std::string bytes = [&] {
            std::ifstream in(est_z, std::ios::binary);
            if (!in) throw DataError(fmt::format("cannot open '{}'", est_z));
            std::ostringstream ss;
            ss << in.rdbuf();
            return ss.str();
          }();
          std::istringstream in(bytes);
          z = read_assignment(in, est_z);
          if (z.size() != ds.n()) throw DataError(fmt::format("{}: {} assignments for {} units", est_z, z.size(), ds.n()));
          inputs.push_back(input_entry(est_z, sha256_hex(bytes)));
        } else {
          z = run_gsw(setup, est_c.seed, SamplerOptions{est_c.freeze_tol});
        }
        e.tau = ate(*ds.a, *ds.b);
        e.tau_hat = ht_estimate(z, *ds.a, *ds.b);
      }
      e.mse_bound = mse_bound(decomp, setup, ds.n());
      e.mse_bound_tightened = mse_bound_tightened(decomp, setup, ds.n());
      std::tie(e.var_iid, e.var_gsw_asymptotic) = predicted_variances(decomp, *mu, ds.n());
      e.kappa = kappa_diagnostic(setup);
      e.formal_condition_value =
          decomp.v_norm_sq > 0.0 ? formal_condition(decomp, setup, ds.n()) : std::numeric_limits<double>::quiet_NaN();
      Json cfg;
      cfg["assignment"] = est_z.empty() ? "drawn" : "file";
      Json r = report_header("estimate");
      r["manifest"] = manifest("estimate", args, est_c, cfg, inputs);
      r["n"] = ds.n();
      r["d"] = ds.d();
      r["estimate"] = estimate_json(e, has_tau);
      r["residual"] = Json{{"v_norm_sq", decomp.v_norm_sq},
                           {"v_inf", decomp.v_inf},
                           {"rank", decomp.rank},
                           {"rank_deficient", decomp.rank_deficient}};
      const auto reg = regularity_diagnostics(decomp, setup);
      r["regularity"] = Json{{"sparsity_log3", reg.sparsity_log3},
                             {"beta_norm_sq_over_log", reg.beta_norm_sq_over_log},
                             {"lambda_min_xtx_over_n", reg.lambda_min_xtx_over_n},
                             {"xi_sq_over_dlogn", reg.xi_sq_over_dlogn},
                             {"v_norm_sq_over_log2", reg.v_norm_sq_over_log2}};
      emit_report(r, est_out, !est_c.no_mkdir);
    } else if (simulate->parsed()) {
      apply_config_file(sim_c);
      sim_cfg.phi = sim_c.phi;
      sim_cfg.seed = sim_c.seed;
      sim_cfg.replications = sim_c.replications;
      sim_cfg.mode = parse_mode(sim_c.mode);
      sim_cfg.target = parse_target(sim_target);
      sim_cfg.x_generator = parse_covariate_generator(sim_xgen);
      sim_cfg.outcome_profile = parse_outcome_profile(sim_profile);
      sim_cfg.epsilon_override = sim_c.epsilon_override;
      sim_cfg.freeze_tol = sim_c.freeze_tol;
      Json inputs = Json::array();
      Problem problem;
      if (!sim_in.x_path.empty()) {
        if (sim_in.outcomes_path.empty()) throw ParameterError("--x requires --outcomes");
        const Dataset ds = load_dataset(sim_in.x_path, sim_in.outcomes_path);
        problem = make_problem(ds.x, ds.outcomes(), sim_cfg.phi);
        sim_cfg.n = ds.n();
        sim_cfg.d = ds.d();
        inputs = dataset_inputs(ds);
      } else {
        problem = synthesize_problem(sim_cfg);
      }
      validate(sim_cfg);
      const auto diag = run_replications(sim_cfg, problem);

      Json cfg;
      cfg["n"] = sim_cfg.n;
      cfg["d"] = sim_cfg.d;
      cfg["replications"] = sim_cfg.replications;
      cfg["mode"] = to_string(sim_cfg.mode);
      cfg["target"] = to_string(sim_cfg.target);
      cfg["data"] = inputs.empty() ? "synthetic" : "file";
      if (inputs.empty()) {
        cfg["x_generator"] = to_string(sim_cfg.x_generator);
        cfg["outcome_profile"] = to_string(sim_cfg.outcome_profile);
        cfg["treatment_effect"] = sim_cfg.treatment_effect;
      }
      if (sim_cfg.epsilon_override) cfg["epsilon_override"] = *sim_cfg.epsilon_override;
      Json r = report_header("simulate");
      r["manifest"] = manifest("simulate", args, sim_c, cfg, inputs);
      r["problem"] = Json{{"tau", ate(problem.outcomes.a, problem.outcomes.b)},
                          {"v_norm_sq", problem.decomp.v_norm_sq},
                          {"mu_norm_sq", problem.outcomes.mu.squaredNorm()},
                          {"kappa", kappa_diagnostic(problem.setup)},
                          {"mse_bound", mse_bound(problem.decomp, problem.setup, sim_cfg.n)}};
      r["diagnostics"] = diagnostics_json(diag);

      Json checks = Json::array();
      if (diag.variance_defined && diag.reference_variance > 0.0) {
        const double z = (diag.variance_ratio - 1.0) / diag.variance_ratio_standard_error;
        checks.push_back(Json{{"name", "variance within 4 MC SE of reference"}, {"passed", std::abs(z) <= 4.0}});
      }
      if (sim_cfg.target == Target::kTauHat && sim_cfg.mode == Mode::kGsw && diag.variance_defined) {
        const double n = double(sim_cfg.n);
        const double bound = mse_bound(problem.decomp, problem.setup, sim_cfg.n);
        checks.push_back(Json{{"name", "n * MSE <= mse_bound + 3 SE"},
                              {"passed", n * diag.mse <= bound + 3.0 * n * diag.mse_standard_error}});
      }
      r["checks"] = checks;
      const Json bins = histogram(diag.samples, 40);
      r["histogram"] = bins;
      const fs::path dir(sim_out);
      emit_report(r, dir / "simulate.json", !sim_c.no_mkdir);
      write_text_file(samples_csv(diag.samples), dir / "samples.csv", !sim_c.no_mkdir);
      write_text_file(histogram_csv(bins), dir / "histogram.csv", !sim_c.no_mkdir);
    } else if (skeletal->parsed()) {
      apply_config_file(sk_c);
      Json inputs = Json::array();
      Matrixd x;
      Vectord mu;
      if (!sk_in.x_path.empty()) {
        if (sk_in.outcomes_path.empty()) throw ParameterError("--x requires --outcomes");
        const Dataset ds = load_dataset(sk_in.x_path, sk_in.outcomes_path);
        x = ds.x;
        mu = *ds.outcome_sum();
        inputs = dataset_inputs(ds);
      } else {
        sk_cfg.phi = sk_c.phi;
        sk_cfg.seed = sk_c.seed;
        sk_cfg.x_generator = parse_covariate_generator(sk_xgen);
        sk_cfg.outcome_profile = parse_outcome_profile(sk_profile);
        const Problem p = synthesize_problem(sk_cfg);
        x = p.setup.x;
        mu = p.outcomes.mu;
      }
      const auto setup = build_setup(x, sk_c.phi);
      const auto decomp = residual_projection(mu, x);
      CoupledOptions opts;
      opts.epsilon_override = sk_c.epsilon_override;
      opts.sampler.freeze_tol = sk_c.freeze_tol;
      const auto traj = run_coupled(setup, decomp.v, sk_c.seed, opts, sk_stream);

      const fs::path dir(sk_out);
      std::ostringstream csv;
      write_trajectory_csv(csv, traj);
      write_text_file(csv.str(), dir / "trajectory.csv", !sk_c.no_mkdir);

      Json cfg;
      cfg["n"] = setup.n();
      cfg["d"] = x.cols();
      cfg["stream"] = sk_stream;
      cfg["data"] = inputs.empty() ? "synthetic" : "file";
      if (inputs.empty()) {
        cfg["x_generator"] = to_string(sk_cfg.x_generator);
        cfg["outcome_profile"] = to_string(sk_cfg.outcome_profile);
      }
      if (sk_c.epsilon_override) cfg["epsilon_override"] = *sk_c.epsilon_override;
      Json r = report_header("skeletal");
      r["manifest"] = manifest("skeletal", args, sk_c, cfg, inputs);
      r["summary"] = Json{{"eps_n", traj.eps_n},
                          {"kappa", traj.kappa},
                          {"threshold", traj.threshold},
                          {"coupling_vacuous", traj.coupling_vacuous},
                          {"case1_steps", traj.case1_steps},
                          {"first_violation_t", traj.first_violation_t ? Json(*traj.first_violation_t) : Json()},
                          {"m_gs", traj.m_gs},
                          {"m_tilde", traj.m_tilde},
                          {"m", traj.m},
                          {"quadratic_variation", traj.quadratic_variation},
                          {"v_norm_sq", traj.v_norm_sq},
                          {"orthogonality_warning", traj.orthogonality_warning}};
      emit_report(r, dir / "summary.json", !sk_c.no_mkdir);
    } else if (verify->parsed()) {
      apply_config_file(ver_c);
      std::vector<std::string> suites;
      if (ver_suite == "all") {
        suites = suite_names();
      } else {
        suites.push_back(ver_suite);
      }
      bool ok = true;
      Json results = Json::array();
      for (const auto& name : suites) {
        const auto rep = run_suite(name, ver_c.seed);
        ok = ok && rep.passed();
        fmt::print("[{}] {}\n", rep.passed() ? "PASS" : "FAIL", rep.suite);
        for (const auto& c : rep.checks) {
          fmt::print("  {:<4} {:<44} max_error={:<12.4g} tol={:.3g} {}\n", c.passed ? "ok" : "FAIL", c.name,
                     c.max_error, c.tolerance, c.detail);
        }
        results.push_back(to_json(rep));
      }
      if (!ver_out.empty()) {
        Json cfg;
        cfg["suite"] = ver_suite;
        Json r = report_header("verify");
        r["manifest"] = manifest("verify", args, ver_c, cfg, Json::array());
        r["passed"] = ok;
        r["suites"] = results;
        emit_report(r, ver_out, !ver_c.no_mkdir);
      }
      if (!ok) throw VerificationFailed{};
    }
  } catch (const VerificationFailed&) {
    return int(ExitCode::kVerification);
  } catch (const ParameterError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return int(ExitCode::kUsage);
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return int(ExitCode::kData);
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << '\n';
    return int(ExitCode::kNumeric);
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return int(ExitCode::kNumeric);
  }
  return int(ExitCode::kSuccess);
}
