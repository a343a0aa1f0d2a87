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

#include "micarray/report.hpp"

#include <array>
#include <chrono>
#include <ctime>
#include <iomanip>
#include <sstream>
#include <type_traits>
#include <variant>

#include "micarray/dataset.hpp"

namespace micarray {

using nlohmann::json;

namespace {

[[noreturn]] void bad(std::string_view field, std::string_view msg) {
  throw Error(ErrorCode::kParseError, "field '" + std::string(field) + "': " + std::string(msg));
}

// Angles are stored in degrees; `scale` converts wire units to internal ones.
struct Field {
  std::string_view key;
  std::variant<double*, int*, bool*> target;
  double scale = 1.0;
};

json fields_to_json(std::span<const Field> fields) {
  json j = json::object();
  for (const auto& f : fields) {
    std::visit(
        [&](auto* p) {
          using T = std::remove_pointer_t<decltype(p)>;
          if constexpr (std::is_same_v<T, double>) {
            j[std::string(f.key)] = number_to_json(*p / f.scale);
          } else {
            j[std::string(f.key)] = *p;
          }
        },
        f.target);
  }
  return j;
}

void fields_from_json(const json& j, std::span<const Field> fields, std::string_view section) {
  if (!j.is_object()) bad(section, "expected an object");
  for (const auto& [key, value] : j.items()) {
    const std::string path = std::string(section) + "." + key;
    const Field* f = nullptr;
    for (const auto& cand : fields) {
      if (cand.key == key) f = &cand;
    }
    if (!f) {
      std::string known;
      for (const auto& cand : fields) known += (known.empty() ? "" : ", ") + std::string(cand.key);
      bad(path, "unknown key (known: " + known + ")");
    }
    std::visit(
        [&](auto* p) {
          using T = std::remove_pointer_t<decltype(p)>;
          if constexpr (std::is_same_v<T, double>) {
            *p = number_from_json(value, path) * f->scale;
          } else if constexpr (std::is_same_v<T, int>) {
            if (!value.is_number_integer()) bad(path, "expected an integer");
            *p = value.get<int>();
          } else {
            if (!value.is_boolean()) bad(path, "expected true or false");
            *p = value.get<bool>();
          }
        },
        f->target);
  }
}

std::vector<Field> solver_fields(SolverConfig& s) {
  return {{"max_iterations", &s.max_iterations},         {"step_threshold", &s.step_threshold},
          {"divergence_norm_cap", &s.divergence_norm_cap}, {"oscillation_level", &s.oscillation_level},
          {"oscillation_window", &s.oscillation_window},   {"growth_window", &s.growth_window}};
}

std::vector<Field> init_fields(InitConfig& c) {
  return {{"combos_per_step", &c.combos_per_step},
          {"iqr_multiplier", &c.iqr_multiplier},
          {"z_cut", &c.z_cut},
          {"max_relative_residual", &c.max_relative_residual},
          {"nls_max_iterations", &c.nls.max_iterations},
          {"nls_tolerance", &c.nls.tolerance},
          {"nls_initial_damping", &c.nls.initial_damping}};
}

std::vector<Field> diagnosis_fields(DiagnosisOptions& d) {
  return {{"angular_tolerance_deg", &d.angular_tolerance, kPi / 180.0},
          {"rank_tolerance", &d.rank_tolerance},
          {"compute_ranks", &d.compute_ranks}};
}

std::vector<Field> perturbation_fields(PerturbationBase& p) {
  return {{"position_m", &p.position},
          {"orientation_deg", &p.orientation, kPi / 180.0},
          {"offset_s", &p.offset},
          {"clock", &p.clock},
          {"source_m", &p.source}};
}

json doubles_to_json(std::span<const double> xs) {
  json a = json::array();
  for (double x : xs) a.push_back(number_to_json(x));
  return a;
}

std::vector<double> doubles_from_json(const json& j, std::string_view field) {
  if (!j.is_array()) bad(field, "expected an array");
  std::vector<double> out;
  out.reserve(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(number_from_json(j[i], std::string(field) + "[" + std::to_string(i) + "]"));
  return out;
}

std::vector<int> ints_from_json(const json& j, std::string_view field) {
  if (!j.is_array()) bad(field, "expected an array");
  std::vector<int> out;
  for (const auto& v : j) {
    if (!v.is_number_integer()) bad(field, "expected integers");
    out.push_back(v.get<int>());
  }
  return out;
}

const json& at(const json& j, std::string_view key) {
  if (!j.is_object() || !j.contains(std::string(key))) bad(key, "missing");
  return j.at(std::string(key));
}

template <typename T>
T get(const json& j, std::string_view key) {
  try {
    return at(j, key).get<T>();
  } catch (const json::exception&) {
    bad(key, "wrong type");
  }
}

json verdict_to_json(const VerdictDetail& v) {
  static constexpr std::array<std::string_view, 4> rules{"none", "norm-cap", "oscillation", "growth"};
  return {{"verdict", to_string(v.verdict)}, {"rule", rules[static_cast<int>(v.rule)]}, {"label", v.to_string()}};
}

VerdictDetail verdict_from_json(const json& j) {
  VerdictDetail v;
  const auto verdict = get<std::string>(j, "verdict");
  if (verdict == "Converged") {
    v.verdict = Verdict::kConverged;
  } else if (verdict == "MaxIterations") {
    v.verdict = Verdict::kMaxIterations;
  } else if (verdict == "Diverged") {
    v.verdict = Verdict::kDiverged;
  } else {
    bad("verdict", "unknown value '" + verdict + "'");
  }
  const auto rule = get<std::string>(j, "rule");
  if (rule == "none") {
    v.rule = DivergenceRule::kNone;
  } else if (rule == "norm-cap") {
    v.rule = DivergenceRule::kNormCap;
  } else if (rule == "oscillation") {
    v.rule = DivergenceRule::kOscillation;
  } else if (rule == "growth") {
    v.rule = DivergenceRule::kGrowth;
  } else {
    bad("rule", "unknown value '" + rule + "'");
  }
  return v;
}

std::string csv_number(double x) {
  std::ostringstream ss;
  ss << std::setprecision(10) << x;
  return ss.str();
}

}  // namespace

std::string_view software_version() { return MICARRAY_VERSION_STRING; }

ErrorCode error_code_from_string(std::string_view name) {
  for (int c = 0; c <= static_cast<int>(ErrorCode::kSchemaMismatch); ++c) {
    if (to_string(static_cast<ErrorCode>(c)) == name) return static_cast<ErrorCode>(c);
  }
  bad("error", "unknown error code '" + std::string(name) + "'");
}

json to_json(const RunConfig& config) {
  RunConfig c = config;
  return {{"sound_speed_mps", number_to_json(c.solver.sound_speed)},
          {"solver", fields_to_json(solver_fields(c.solver))},
          {"init", fields_to_json(init_fields(c.init))},
          {"diagnosis", fields_to_json(diagnosis_fields(c.diagnosis))},
          {"perturbation", fields_to_json(perturbation_fields(c.perturbation))}};
}

RunConfig run_config_from_json(const json& j) {
  if (!j.is_object()) bad("<root>", "config must be a JSON object");
  RunConfig c;
  for (const auto& [key, value] : j.items()) {
    if (key == "sound_speed_mps") {
      const double v = number_from_json(value, key);
      c.solver.sound_speed = c.init.sound_speed = c.diagnosis.sound_speed = v;
    } else if (key == "solver") {
      fields_from_json(value, solver_fields(c.solver), key);
    } else if (key == "init") {
      fields_from_json(value, init_fields(c.init), key);
    } else if (key == "diagnosis") {
      fields_from_json(value, diagnosis_fields(c.diagnosis), key);
    } else if (key == "perturbation") {
      fields_from_json(value, perturbation_fields(c.perturbation), key);
    } else {
      bad(key, "unknown section (known: sound_speed_mps, solver, init, diagnosis, perturbation)");
    }
  }
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  try {
    return run_config_from_json(parse_json_text(read_text_file(path), "config"));
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.message());
  }
}

json to_json(const StateVector& x) {
  json arrays = json::array();
  for (int i = 1; i < x.n_arrays(); ++i) {
    const auto a = x.array(i);
    arrays.push_back({{"array", i + 1},
                      {"position_m", doubles_to_json(std::vector<double>{a.position.x(), a.position.y(), a.position.z()})},
                      {"euler_deg", doubles_to_json(std::vector<double>{rad2deg(a.euler.x), rad2deg(a.euler.y),
                                                                        rad2deg(a.euler.z)})},
                      {"tau_s", number_to_json(a.tau)},
                      {"delta", number_to_json(a.delta)}});
  }
  json sources = json::array();
  for (int k = 0; k < x.n_steps(); ++k) {
    const Vec3 s = x.source(k);
    sources.push_back(doubles_to_json(std::vector<double>{s.x(), s.y(), s.z()}));
  }
  const auto& v = x.values();
  return {{"n_arrays", x.n_arrays()},
          {"n_steps", x.n_steps()},
          {"values", doubles_to_json(std::span<const double>(v.data(), static_cast<std::size_t>(v.size())))},
          {"arrays", arrays},
          {"sources_m", sources}};
}

StateVector state_from_json(const json& j) {
  const int n = get<int>(j, "n_arrays");
  const int k = get<int>(j, "n_steps");
  const auto vals = doubles_from_json(at(j, "values"), "values");
  if (n < 2 || k < 1 || static_cast<Eigen::Index>(vals.size()) != StateVector::dimension(n, k)) {
    throw Error(ErrorCode::kSchemaMismatch, "state values do not match n_arrays and n_steps");
  }
  return StateVector(n, k, Eigen::Map<const Eigen::VectorXd>(vals.data(), static_cast<Eigen::Index>(vals.size())));
}

json to_json(const RankReport& r) {
  return {{"matrix", r.matrix_name},
          {"rows", r.rows},
          {"cols", r.cols},
          {"rank", r.numerical_rank},
          {"full_column_rank", r.full_column_rank},
          {"largest_sv", number_to_json(r.largest_sv)},
          {"smallest_retained_sv", number_to_json(r.smallest_retained_sv)},
          {"largest_discarded_sv", number_to_json(r.largest_discarded_sv)},
          {"gap_ratio", number_to_json(r.gap_ratio)},
          {"singular_values", doubles_to_json(r.singular_values)}};
}

RankReport rank_report_from_json(const json& j) {
  RankReport r;
  r.matrix_name = get<std::string>(j, "matrix");
  r.rows = get<Eigen::Index>(j, "rows");
  r.cols = get<Eigen::Index>(j, "cols");
  r.numerical_rank = get<Eigen::Index>(j, "rank");
  r.full_column_rank = get<bool>(j, "full_column_rank");
  r.largest_sv = number_from_json(at(j, "largest_sv"), "largest_sv");
  r.smallest_retained_sv = number_from_json(at(j, "smallest_retained_sv"), "smallest_retained_sv");
  r.largest_discarded_sv = number_from_json(at(j, "largest_discarded_sv"), "largest_discarded_sv");
  r.gap_ratio = number_from_json(at(j, "gap_ratio"), "gap_ratio");
  r.singular_values = doubles_from_json(at(j, "singular_values"), "singular_values");
  return r;
}

json to_json(const TheoremDiagnosis& d) {
  json j = {{"n_arrays", d.n_arrays},
            {"n_steps", d.n_steps},
            {"row_count_bound", d.row_count_bound},
            {"meets_row_count_bound", d.meets_row_count_bound},
            {"meets_five_step_bound", d.meets_five_step_bound},
            {"collinear_with_reference", d.collinear_with_reference},
            {"coplanar_with_reference_axis_plane", d.coplanar_with_reference_axis_plane},
            {"coplanar_family", d.coplanar_family},
            {"coplanar_through_reference_origin", d.coplanar_through_reference_origin},
            {"collinear_with_array", d.collinear_with_array},
            {"gimbal_lock_arrays", d.gimbal_lock_arrays},
            {"ranks_computed", d.ranks_computed},
            {"necessary_ranks_hold", d.necessary_ranks_hold},
            {"sufficient_ranks_hold", d.sufficient_ranks_hold},
            {"violations", d.violations}};
  if (d.ranks_computed) {
    j["f"] = to_json(d.f);
    j["t_bar"] = to_json(d.t_bar);
    json l = json::array();
    for (const auto& r : d.l_bar) l.push_back(to_json(r));
    j["l_bar"] = l;
  }
  return j;
}

TheoremDiagnosis diagnosis_from_json(const json& j) {
  TheoremDiagnosis d;
  d.n_arrays = get<int>(j, "n_arrays");
  d.n_steps = get<int>(j, "n_steps");
  d.row_count_bound = get<int>(j, "row_count_bound");
  d.meets_row_count_bound = get<bool>(j, "meets_row_count_bound");
  d.meets_five_step_bound = get<bool>(j, "meets_five_step_bound");
  d.collinear_with_reference = get<bool>(j, "collinear_with_reference");
  d.coplanar_with_reference_axis_plane = get<bool>(j, "coplanar_with_reference_axis_plane");
  d.coplanar_family = get<std::string>(j, "coplanar_family");
  d.coplanar_through_reference_origin = get<bool>(j, "coplanar_through_reference_origin");
  d.collinear_with_array = ints_from_json(at(j, "collinear_with_array"), "collinear_with_array");
  d.gimbal_lock_arrays = ints_from_json(at(j, "gimbal_lock_arrays"), "gimbal_lock_arrays");
  d.ranks_computed = get<bool>(j, "ranks_computed");
  d.necessary_ranks_hold = get<bool>(j, "necessary_ranks_hold");
  d.sufficient_ranks_hold = get<bool>(j, "sufficient_ranks_hold");
  d.violations = get<std::vector<std::string>>(j, "violations");
  if (d.ranks_computed) {
    d.f = rank_report_from_json(at(j, "f"));
    d.t_bar = rank_report_from_json(at(j, "t_bar"));
    for (const auto& r : at(j, "l_bar")) d.l_bar.push_back(rank_report_from_json(r));
  }
  return d;
}

json to_json(const ParameterErrors& e) {
  return {{"position_m", doubles_to_json(e.position)},
          {"orientation_rad", doubles_to_json(e.orientation)},
          {"offset_s", doubles_to_json(e.offset)},
          {"clock", doubles_to_json(e.clock)},
          {"source_m", doubles_to_json(e.source)}};
}

ParameterErrors parameter_errors_from_json(const json& j) {
  ParameterErrors e;
  e.position = doubles_from_json(at(j, "position_m"), "position_m");
  e.orientation = doubles_from_json(at(j, "orientation_rad"), "orientation_rad");
  e.offset = doubles_from_json(at(j, "offset_s"), "offset_s");
  e.clock = doubles_from_json(at(j, "clock"), "clock");
  e.source = doubles_from_json(at(j, "source_m"), "source_m");
  return e;
}

json to_json(const RmseRow& r) {
  return {{"array_position_m", number_to_json(r.position_m)},
          {"orientation_deg", number_to_json(r.orientation_deg)},
          {"time_offset_ms", number_to_json(r.offset_ms)},
          {"clock_difference_us", number_to_json(r.clock_us)},
          {"source_position_m", number_to_json(r.source_m)}};
}

json to_json(const CalibrationReport& r) {
  json j;
  j["software_version"] = r.software_version;
  j["generated_at"] = r.generated_at;
  j["seed"] = r.seed;
  j["config"] = to_json(r.config);
  j["dataset"] = r.dataset;
  j["emission_times_s"] = doubles_to_json(r.emission_times);
  if (r.initial_state) j["initial_state"] = to_json(*r.initial_state);
  if (r.final_state) j["final_state"] = to_json(*r.final_state);
  if (r.initial_errors) j["initial_errors"] = to_json(*r.initial_errors);
  if (r.final_errors) j["final_errors"] = to_json(*r.final_errors);
  json trace = json::array();
  for (const auto& rec : r.trace.records) {
    trace.push_back({{"iteration", rec.iteration},
                     {"step_norm", number_to_json(rec.step_norm)},
                     {"cost", number_to_json(rec.cost)},
                     {"wall_time_s", number_to_json(rec.wall_time_s)}});
  }
  j["trace"] = trace;
  if (r.verdict) j["verdict"] = verdict_to_json(*r.verdict);
  j["initial_cost"] = number_to_json(r.initial_cost);
  j["final_cost"] = number_to_json(r.final_cost);
  if (r.error) j["error"] = {{"code", to_string(*r.error)}, {"message", r.error_message}};
  if (r.normal_equations_rank) j["normal_equations_rank"] = to_json(*r.normal_equations_rank);
  if (r.diagnosis) j["diagnosis"] = to_json(*r.diagnosis);
  return j;
}

CalibrationReport calibration_report_from_json(const json& j) {
  CalibrationReport r;
  r.software_version = get<std::string>(j, "software_version");
  r.generated_at = get<std::string>(j, "generated_at");
  r.seed = get<std::uint64_t>(j, "seed");
  r.config = run_config_from_json(at(j, "config"));
  r.dataset = get<std::string>(j, "dataset");
  r.emission_times = doubles_from_json(at(j, "emission_times_s"), "emission_times_s");
  if (j.contains("initial_state")) r.initial_state = state_from_json(j["initial_state"]);
  if (j.contains("final_state")) r.final_state = state_from_json(j["final_state"]);
  if (j.contains("initial_errors")) r.initial_errors = parameter_errors_from_json(j["initial_errors"]);
  if (j.contains("final_errors")) r.final_errors = parameter_errors_from_json(j["final_errors"]);
  for (const auto& rec : at(j, "trace")) {
    r.trace.records.push_back({get<int>(rec, "iteration"), number_from_json(at(rec, "step_norm"), "step_norm"),
                               number_from_json(at(rec, "cost"), "cost"),
                               number_from_json(at(rec, "wall_time_s"), "wall_time_s")});
  }
  if (j.contains("verdict")) r.verdict = verdict_from_json(j["verdict"]);
  r.initial_cost = number_from_json(at(j, "initial_cost"), "initial_cost");
  r.final_cost = number_from_json(at(j, "final_cost"), "final_cost");
  if (j.contains("error")) {
    r.error = error_code_from_string(get<std::string>(j["error"], "code"));
    r.error_message = get<std::string>(j["error"], "message");
  }
  if (j.contains("normal_equations_rank")) r.normal_equations_rank = rank_report_from_json(j["normal_equations_rank"]);
  if (j.contains("diagnosis")) r.diagnosis = diagnosis_from_json(j["diagnosis"]);
  return r;
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream ss;
  ss << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return ss.str();
}

std::string trace_csv(const IterationTrace& trace) {
  std::string out = "iteration,step_norm,cost,wall_time_s\n";
  for (const auto& r : trace.records) {
    out += std::to_string(r.iteration) + "," + csv_number(r.step_norm) + "," + csv_number(r.cost) + "," +
           csv_number(r.wall_time_s) + "\n";
  }
  return out;
}

std::string monte_carlo_csv(std::span<const MonteCarloSummary> summaries) {
  std::string out =
      "scenario,init_scheme,trials,converged,convergence_ratio,array_position_rmse_m,array_orientation_rmse_deg,"
      "time_offset_rmse_ms,clock_difference_rmse_us,source_position_rmse_m\n";
  for (const auto& s : summaries) {
    out += s.scenario + "," + std::string(to_string(s.scheme)) + "," + std::to_string(s.trials) + "," +
           std::to_string(s.converged) + "," + csv_number(s.convergence_ratio) + "," + csv_number(s.rmse.position_m) +
           "," + csv_number(s.rmse.orientation_deg) + "," + csv_number(s.rmse.offset_ms) + "," +
           csv_number(s.rmse.clock_us) + "," + csv_number(s.rmse.source_m) + "\n";
  }
  return out;
}

namespace {

json trial_to_json(const MonteCarloSummary& s, const TrialResult& t) {
  json j = {{"scenario", s.scenario},
            {"init_scheme", to_string(s.scheme)},
            {"trial", t.trial},
            {"noise_seed", t.noise_seed},
            {"converged", t.converged},
            {"iterations", t.iterations},
            {"final_cost", number_to_json(t.final_cost)}};
  if (t.error) {
    j["error"] = {{"code", to_string(*t.error)}, {"message", t.error_message}};
  } else {
    j["verdict"] = verdict_to_json(t.verdict);
    j["errors"] = to_json(t.errors);
  }
  return j;
}

}  // namespace

std::string monte_carlo_jsonl(const MonteCarloSummary& summary) {
  std::string out;
  for (const auto& t : summary.trial_results) out += trial_to_json(summary, t).dump() + "\n";
  return out;
}

json to_json(const MonteCarloSummary& summary) {
  json trials = json::array();
  for (const auto& t : summary.trial_results) trials.push_back(trial_to_json(summary, t));
  return {{"scenario", summary.scenario},
          {"init_scheme", to_string(summary.scheme)},
          {"seed", summary.seed},
          {"trials", summary.trials},
          {"converged", summary.converged},
          {"convergence_ratio", number_to_json(summary.convergence_ratio)},
          {"rmse", to_json(summary.rmse)},
          {"trial_results", trials}};
}

std::string rank_sweep_csv(std::span<const RankReport> reports) {
  std::string out = "k,rows,cols,rank,full_column_rank,largest_sv,smallest_retained_sv,largest_discarded_sv,gap_ratio\n";
  for (std::size_t i = 0; i < reports.size(); ++i) {
    const auto& r = reports[i];
    out += std::to_string(i + 1) + "," + std::to_string(r.rows) + "," + std::to_string(r.cols) + "," +
           std::to_string(r.numerical_rank) + "," + (r.full_column_rank ? "1" : "0") + "," + csv_number(r.largest_sv) +
           "," + csv_number(r.smallest_retained_sv) + "," + csv_number(r.largest_discarded_sv) + "," +
           csv_number(r.gap_ratio) + "\n";
  }
  return out;
}

}  // namespace micarray
