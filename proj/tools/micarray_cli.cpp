// Copyright 2026 The micarray Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// micarray: simulate, initialize, calibrate and analyze asynchronous
// microphone-array datasets.
//
// Exit status: 0 success, 1 usage or file error, 2 degenerate input,
// 3 solver divergence or singular normal equations, 4 internal error.

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "micarray/dataset.hpp"
#include "micarray/init.hpp"
#include "micarray/metrics.hpp"
#include "micarray/montecarlo.hpp"
#include "micarray/observability.hpp"
#include "micarray/report.hpp"
#include "micarray/scenario.hpp"
#include "micarray/solver.hpp"

using nlohmann::json;

namespace micarray {
namespace {

enum Exit { kOk = 0, kUsage = 1, kDegenerate = 2, kDiverged = 3, kInternal = 4 };

struct Common {
  std::uint64_t seed = 0;
  std::string config;
  std::string output;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--seed", c.seed, "Master RNG seed")->capture_default_str();
  cmd->add_option("--config", c.config, "JSON config file (default: $MICARRAY_CONFIG)");
  cmd->add_option("-o,--output", c.output, "Output file (default: stdout)");
}

RunConfig resolve_config(const Common& c) {
  std::string path = c.config;
  if (path.empty()) {
    if (const char* env = std::getenv("MICARRAY_CONFIG"); env && *env) path = env;
  }
  return path.empty() ? RunConfig{} : load_run_config(path);
}

void emit(const std::string& output, const std::string& text) {
  if (output.empty() || output == "-") {
    std::cout << text;
  } else {
    write_text_file(output, text);
  }
}

Scenario scenario_from_flags(const std::string& tag, std::optional<int> arrays, std::optional<int> steps,
                             std::uint64_t seed, const std::string& noise) {
  ScenarioSpec spec;
  spec.kind = scenario_kind_from_string(tag);
  spec.n_arrays = arrays;
  spec.n_steps = steps;
  spec.seed = seed;
  if (noise == "none") {
    spec.noise = NoiseModel{};
  } else if (noise != "table") {
    throw Error(ErrorCode::kInvalidSpec, "--noise must be 'table' or 'none'");
  }
  return make_scenario(spec);
}

// Ground truth is preferred; otherwise the estimate itself is diagnosed.
std::optional<TheoremDiagnosis> diagnose(const Dataset& ds, const StateVector* estimate, const RunConfig& cfg) {
  try {
    if (ds.ground_truth) return check_theorem_conditions(*ds.ground_truth, cfg.diagnosis);
    if (estimate) return check_theorem_conditions(unpack_state(*estimate, ds.measurements.emission_times), cfg.diagnosis);
  } catch (const Error&) {
  }
  return std::nullopt;
}

StateVector read_initial_state(const std::string& path) {
  const json j = parse_json_text(read_text_file(path), "initial state");
  if (j.contains("final_state")) return state_from_json(j["final_state"]);
  if (j.contains("initial_state")) return state_from_json(j["initial_state"]);
  return state_from_json(j);
}

int exit_for(const Error& e) {
  if (e.code() == ErrorCode::kSingularNormalEquations) return kDiverged;
  if (e.is_degenerate_input()) return kDegenerate;
  return kUsage;
}

void sync_sound_speed(RunConfig& cfg, double c) {
  cfg.solver.sound_speed = cfg.init.sound_speed = cfg.diagnosis.sound_speed = c;
}

// ---------------------------------------------------------------------------

struct SimulateArgs {
  Common common;
  std::string scenario = "preset";
  std::optional<int> arrays;
  std::optional<int> steps;
  std::string noise = "table";
  std::string doa_format = "vector";
};

int run_simulate(const SimulateArgs& a) {
  resolve_config(a.common);
  const Scenario sc = scenario_from_flags(a.scenario, a.arrays, a.steps, a.common.seed, a.noise);
  Dataset ds;
  ds.sound_speed = kDefaultSoundSpeed;
  ds.noise = sc.noise;
  ds.ground_truth = sc.truth;
  ds.scenario = sc.tag();
  ds.seed = a.common.seed;
  ds.measurements = add_noise(predict_measurements(sc.truth, ds.sound_speed), sc.noise,
                              derive_seed(a.common.seed, 0, 1));
  const auto enc = a.doa_format == "angles" ? DoaEncoding::kAzimuthElevation : DoaEncoding::kUnitVector;
  emit(a.common.output, dataset_to_json(ds, enc).dump(2) + "\n");
  return kOk;
}

struct DatasetArgs {
  Common common;
  std::string dataset;
  std::string initial_state;
  std::string trace;
};

CalibrationReport new_report(const DatasetArgs& a, const RunConfig& cfg, const Dataset& ds) {
  CalibrationReport r;
  r.software_version = std::string(software_version());
  r.generated_at = utc_timestamp();
  r.seed = a.common.seed;
  r.config = cfg;
  r.dataset = a.dataset;
  r.emission_times = ds.measurements.emission_times;
  return r;
}

int run_init(const DatasetArgs& a) {
  RunConfig cfg = resolve_config(a.common);
  const Dataset ds = load_dataset(a.dataset);
  sync_sound_speed(cfg, ds.sound_speed);
  CalibrationReport r = new_report(a, cfg, ds);
  InitConfig ic = cfg.init;
  ic.seed = a.common.seed;
  int code = kOk;
  try {
    const InitResult init = initialize(ds.measurements, ic);
    r.initial_state = init.state;
    if (ds.ground_truth) r.initial_errors = error_metrics(init.state, pack_state(*ds.ground_truth));
  } catch (const Error& e) {
    r.error = e.code();
    r.error_message = e.message();
    code = exit_for(e);
    std::cerr << "micarray init: " << e.what() << "\n";
  }
  r.diagnosis = diagnose(ds, r.initial_state ? &*r.initial_state : nullptr, cfg);
  emit(a.common.output, to_json(r).dump(2) + "\n");
  return code;
}

int run_calibrate(const DatasetArgs& a) {
  RunConfig cfg = resolve_config(a.common);
  const Dataset ds = load_dataset(a.dataset);
  sync_sound_speed(cfg, ds.sound_speed);
  CalibrationReport r = new_report(a, cfg, ds);
  const auto& ms = ds.measurements;
  int code = kOk;
  try {
    if (!a.initial_state.empty()) {
      r.initial_state = read_initial_state(a.initial_state);
    } else {
      InitConfig ic = cfg.init;
      ic.seed = a.common.seed;
      r.initial_state = initialize(ms, ic).state;
    }
    const std::optional<StateVector> truth =
        ds.ground_truth ? std::optional<StateVector>(pack_state(*ds.ground_truth)) : std::nullopt;
    if (truth) r.initial_errors = error_metrics(*r.initial_state, *truth);
    const auto res =
        gauss_newton(*r.initial_state, ms, solver_weights(ds.noise, ms.n_arrays(), ms.n_steps()), cfg.solver);
    r.final_state = res.state;
    r.trace = res.trace;
    r.verdict = res.verdict;
    r.initial_cost = res.initial_cost;
    r.final_cost = res.final_cost;
    if (truth) r.final_errors = error_metrics(res.state, *truth);
    if (res.verdict.verdict == Verdict::kDiverged) {
      code = kDiverged;
      std::cerr << "micarray calibrate: solver diverged, " << res.verdict.to_string()
                << "; try a better --initial-state or check the observability diagnosis\n";
    }
  } catch (const SingularNormalEquationsError& e) {
    r.error = e.code();
    r.error_message = e.message();
    r.normal_equations_rank = e.rank();
    code = kDiverged;
    std::cerr << "micarray calibrate: " << e.what() << "\n";
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kParseError || e.code() == ErrorCode::kSchemaMismatch) throw;
    r.error = e.code();
    r.error_message = e.message();
    code = exit_for(e);
    std::cerr << "micarray calibrate: " << e.what() << "\n";
  }
  const StateVector* est = r.final_state ? &*r.final_state : r.initial_state ? &*r.initial_state : nullptr;
  r.diagnosis = diagnose(ds, est, cfg);
  if (r.diagnosis && r.diagnosis->any_violation() && code != kOk) {
    for (const auto& v : r.diagnosis->violations) std::cerr << "  violated: " << v << "\n";
  }
  if (!a.trace.empty()) write_text_file(a.trace, trace_csv(r.trace));
  emit(a.common.output, to_json(r).dump(2) + "\n");
  return code;
}

struct GeometryArgs {
  Common common;
  std::string dataset;
  std::string scenario;
  std::optional<int> arrays;
  std::optional<int> steps;
};

Geometry geometry_from_args(const GeometryArgs& a) {
  if (!a.dataset.empty() && !a.scenario.empty()) {
    throw Error(ErrorCode::kInvalidSpec, "pass either --dataset or --scenario, not both");
  }
  if (!a.dataset.empty()) {
    Dataset ds = load_dataset(a.dataset);
    if (!ds.ground_truth) {
      throw Error(ErrorCode::kInvalidSpec, "dataset has no ground_truth block; run 'micarray calibrate' first");
    }
    return *ds.ground_truth;
  }
  return scenario_from_flags(a.scenario.empty() ? "observable-case-1" : a.scenario, a.arrays, a.steps, a.common.seed,
                             "table")
      .truth;
}

int run_observability(const GeometryArgs& a) {
  const RunConfig cfg = resolve_config(a.common);
  const Geometry g = geometry_from_args(a);
  const auto d = check_theorem_conditions(g, cfg.diagnosis);
  json j = to_json(d);
  j["software_version"] = software_version();
  j["seed"] = a.common.seed;
  j["config"] = to_json(cfg);
  emit(a.common.output, j.dump(2) + "\n");
  return kOk;
}

int run_ranksweep(const GeometryArgs& a) {
  const RunConfig cfg = resolve_config(a.common);
  const Geometry g = geometry_from_args(a);
  const auto reports = rank_sweep(g, cfg.diagnosis.rank_tolerance, cfg.diagnosis.sound_speed);
  emit(a.common.output, rank_sweep_csv(reports));
  return kOk;
}

struct MonteCarloArgs {
  Common common;
  std::string scenario = "preset";
  std::optional<int> arrays;
  std::optional<int> steps;
  std::vector<std::string> schemes{"ours"};
  int trials = 200;
  int threads = 0;
  std::string log;
};

int run_montecarlo(const MonteCarloArgs& a) {
  const RunConfig cfg = resolve_config(a.common);
  const Scenario sc = scenario_from_flags(a.scenario, a.arrays, a.steps, a.common.seed, "table");
  std::vector<InitScheme> schemes;
  for (const auto& s : a.schemes) {
    if (s == "all") {
      schemes = {InitScheme::kOurs, InitScheme::kGroundTruth, InitScheme::kLv1, InitScheme::kLv2,
                 InitScheme::kLv3,  InitScheme::kLv4,         InitScheme::kRandom};
      break;
    }
    schemes.push_back(init_scheme_from_string(s));
  }
  std::vector<MonteCarloSummary> summaries;
  std::string jsonl;
  for (auto scheme : schemes) {
    MonteCarloConfig mc;
    mc.trials = a.trials;
    mc.scheme = scheme;
    mc.seed = a.common.seed;
    mc.threads = a.threads;
    mc.solver = cfg.solver;
    mc.init = cfg.init;
    mc.perturbation = cfg.perturbation;
    summaries.push_back(run_monte_carlo(sc, mc));
    jsonl += monte_carlo_jsonl(summaries.back());
    std::cerr << to_string(scheme) << ": " << summaries.back().converged << "/" << a.trials << " converged\n";
  }
  if (!a.log.empty()) write_text_file(a.log, jsonl);
  emit(a.common.output, monte_carlo_csv(summaries));
  return kOk;
}

int guarded(const char* name, const std::function<int()>& body) {
  try {
    return body();
  } catch (const Error& e) {
    std::cerr << "micarray " << name << ": " << e.what() << "\n";
    if (e.code() == ErrorCode::kInvalidSpec) std::cerr << "  run 'micarray " << name << " --help' for usage\n";
    return exit_for(e);
  } catch (const std::exception& e) {
    std::cerr << "micarray " << name << ": internal error: " << e.what() << "\n";
    return kInternal;
  }
}

}  // namespace
}  // namespace micarray

int main(int argc, char** argv) {
  using namespace micarray;
  CLI::App app{"Joint calibration of asynchronous microphone arrays and sound source localization"};
  app.set_version_flag("--version", std::string(software_version()));
  app.require_subcommand(1);

  SimulateArgs sim;
  auto* c_sim = app.add_subcommand("simulate", "Write a simulated dataset");
  add_common(c_sim, sim.common);
  c_sim->add_option("--scenario", sim.scenario,
                    "observable-case-1, observable-case-2, collinear-ref, coplanar-ref, collinear-array-2, gimbal, "
                    "preset or random")
      ->capture_default_str();
  c_sim->add_option("--arrays", sim.arrays, "Number of arrays N");
  c_sim->add_option("--steps", sim.steps, "Number of sound events K");
  c_sim->add_option("--noise", sim.noise, "table or none")->capture_default_str();
  c_sim->add_option("--doa-format", sim.doa_format, "vector or angles")
      ->check(CLI::IsMember({"vector", "angles"}))
      ->capture_default_str();

  DatasetArgs ini;
  auto* c_init = app.add_subcommand("init", "Initial guess from measurements");
  add_common(c_init, ini.common);
  c_init->add_option("--dataset", ini.dataset, "Dataset JSON")->required()->check(CLI::ExistingFile);

  DatasetArgs cal;
  auto* c_cal = app.add_subcommand("calibrate", "Initialize and refine with Gauss-Newton");
  add_common(c_cal, cal.common);
  c_cal->add_option("--dataset", cal.dataset, "Dataset JSON")->required()->check(CLI::ExistingFile);
  c_cal->add_option("--initial-state", cal.initial_state, "Report or state JSON to start from")
      ->check(CLI::ExistingFile);
  c_cal->add_option("--trace", cal.trace, "Write the iteration trace as CSV");

  GeometryArgs obs;
  auto* c_obs = app.add_subcommand("observability", "Check the observability conditions of a geometry");
  GeometryArgs rs;
  auto* c_rs = app.add_subcommand("ranksweep", "Rank of F over growing step prefixes (CSV)");
  for (auto [cmd, args] : {std::pair{c_obs, &obs}, std::pair{c_rs, &rs}}) {
    add_common(cmd, args->common);
    auto* ds = cmd->add_option("--dataset", args->dataset, "Dataset JSON with ground truth")->check(CLI::ExistingFile);
    cmd->add_option("--scenario", args->scenario, "Scenario tag (default observable-case-1)")->excludes(ds);
    cmd->add_option("--arrays", args->arrays, "Number of arrays N");
    cmd->add_option("--steps", args->steps, "Number of sound events K");
  }

  MonteCarloArgs mc;
  auto* c_mc = app.add_subcommand("montecarlo", "Monte Carlo campaign over initialization schemes (CSV)");
  add_common(c_mc, mc.common);
  c_mc->add_option("--scenario", mc.scenario, "Scenario tag")->capture_default_str();
  c_mc->add_option("--arrays", mc.arrays, "Number of arrays N");
  c_mc->add_option("--steps", mc.steps, "Number of sound events K");
  c_mc->add_option("--scheme", mc.schemes, "ours, gt, lv1, lv2, lv3, lv4, random or all (repeatable)")
      ->capture_default_str();
  c_mc->add_option("--trials", mc.trials, "Trials per scheme")->check(CLI::PositiveNumber)->capture_default_str();
  c_mc->add_option("--threads", mc.threads, "Worker threads (0 = all cores)")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  c_mc->add_option("--log", mc.log, "Per-trial JSONL log");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kUsage;
  }

  if (c_sim->parsed()) return guarded("simulate", [&] { return run_simulate(sim); });
  if (c_init->parsed()) return guarded("init", [&] { return run_init(ini); });
  if (c_cal->parsed()) return guarded("calibrate", [&] { return run_calibrate(cal); });
  if (c_obs->parsed()) return guarded("observability", [&] { return run_observability(obs); });
  if (c_rs->parsed()) return guarded("ranksweep", [&] { return run_ranksweep(rs); });
  if (c_mc->parsed()) return guarded("montecarlo", [&] { return run_montecarlo(mc); });
  return kUsage;
}
