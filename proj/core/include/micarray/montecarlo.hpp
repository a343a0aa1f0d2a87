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
#include <optional>
#include <string>
#include <vector>

#include <Eigen/SparseCore>

#include "micarray/errors.hpp"
#include "micarray/init.hpp"
#include "micarray/metrics.hpp"
#include "micarray/scenario.hpp"
#include "micarray/solver.hpp"

namespace micarray {

struct MonteCarloConfig {
  int trials = 200;
  InitScheme scheme = InitScheme::kOurs;
  std::uint64_t seed = 0;
  /// Worker threads; 0 uses the hardware concurrency.
  int threads = 0;
  SolverConfig solver;
  InitConfig init;
  PerturbationBase perturbation;
};

struct TrialResult {
  int trial = 0;
  std::uint64_t noise_seed = 0;
  bool converged = false;
  VerdictDetail verdict;
  int iterations = 0;
  double final_cost = 0.0;
  /// Set when initialization or the solver threw.
  std::optional<ErrorCode> error;
  std::string error_message;
  /// Errors of the final estimate; empty when the trial threw.
  ParameterErrors errors;
};

struct MonteCarloSummary {
  std::string scenario;
  InitScheme scheme = InitScheme::kOurs;
  std::uint64_t seed = 0;
  int trials = 0;
  int converged = 0;
  double convergence_ratio = 0.0;
  /// Over converged trials only; NaN when none converged.
  RmseRow rmse;
  std::vector<TrialResult> trial_results;
};

/// Weight matrix used for solving: the model's own W, or the table defaults
/// when the model is noise-free.
Eigen::SparseMatrix<double> solver_weights(const NoiseModel& noise, int n_arrays, int n_steps);

/// One trial: fresh noise from derive_seed(seed, trial), initialization per
/// scheme, Gauss-Newton, verdict. Never throws for per-trial failures.
TrialResult run_trial(const Scenario& scenario, const MonteCarloConfig& config, int trial);

/// Ground truth stays fixed; every trial draws its own noise and initial
/// guess. A trial counts as converged unless it threw or was classified
/// Diverged. Results do not depend on the thread count.
MonteCarloSummary run_monte_carlo(const Scenario& scenario, const MonteCarloConfig& config);

}  // namespace micarray
