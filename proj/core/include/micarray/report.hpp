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

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "micarray/errors.hpp"
#include "micarray/init.hpp"
#include "micarray/metrics.hpp"
#include "micarray/montecarlo.hpp"
#include "micarray/observability.hpp"
#include "micarray/solver.hpp"
#include "micarray/state.hpp"

namespace micarray {

std::string_view software_version();

/// Tunables shared by every subcommand. Config files are JSON objects with
/// optional "solver", "init", "diagnosis" and "perturbation" sections; keys
/// not listed in to_json output are rejected.
struct RunConfig {
  SolverConfig solver;
  InitConfig init;
  DiagnosisOptions diagnosis;
  PerturbationBase perturbation;
};

nlohmann::json to_json(const RunConfig& config);
/// Missing keys keep their defaults. Throws ParseError on unknown keys or
/// wrong types.
RunConfig run_config_from_json(const nlohmann::json& j);
RunConfig load_run_config(const std::filesystem::path& path);

/// Raw values plus a readable per-array view (degrees). Only the raw values
/// are read back.
nlohmann::json to_json(const StateVector& x);
StateVector state_from_json(const nlohmann::json& j);

nlohmann::json to_json(const RankReport& r);
RankReport rank_report_from_json(const nlohmann::json& j);
nlohmann::json to_json(const TheoremDiagnosis& d);
TheoremDiagnosis diagnosis_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ParameterErrors& e);
ParameterErrors parameter_errors_from_json(const nlohmann::json& j);
nlohmann::json to_json(const RmseRow& r);

struct CalibrationReport {
  std::string software_version;
  std::string generated_at;  // UTC, ISO 8601
  std::uint64_t seed = 0;
  RunConfig config;
  std::string dataset;  // input path as given
  std::vector<double> emission_times;
  std::optional<StateVector> initial_state;
  std::optional<StateVector> final_state;
  std::optional<ParameterErrors> initial_errors;  // when ground truth is known
  std::optional<ParameterErrors> final_errors;
  IterationTrace trace;
  std::optional<VerdictDetail> verdict;
  double initial_cost = 0.0;
  double final_cost = 0.0;
  std::optional<ErrorCode> error;
  std::string error_message;
  std::optional<RankReport> normal_equations_rank;  // SingularNormalEquations only
  std::optional<TheoremDiagnosis> diagnosis;
};

nlohmann::json to_json(const CalibrationReport& r);
CalibrationReport calibration_report_from_json(const nlohmann::json& j);

/// Current UTC time as "YYYY-MM-DDTHH:MM:SSZ".
std::string utc_timestamp();

/// iteration,step_norm,cost,wall_time_s
std::string trace_csv(const IterationTrace& trace);

/// One row per summary: scheme, counts, ratio and the five RMSEs.
std::string monte_carlo_csv(std::span<const MonteCarloSummary> summaries);

/// One JSON record per trial.
std::string monte_carlo_jsonl(const MonteCarloSummary& summary);

/// Full summary including every trial, for exact comparisons.
nlohmann::json to_json(const MonteCarloSummary& summary);

/// k,rows,cols,rank,full_column_rank,largest_sv,smallest_retained_sv,largest_discarded_sv,gap_ratio
std::string rank_sweep_csv(std::span<const RankReport> reports);

ErrorCode error_code_from_string(std::string_view name);

}  // namespace micarray
