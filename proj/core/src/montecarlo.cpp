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

#include "micarray/montecarlo.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <thread>

namespace micarray {

namespace {

enum SeedSalt : std::uint64_t { kNoiseSalt = 1, kInitSalt = 2, kPerturbSalt = 3 };

}  // namespace

Eigen::SparseMatrix<double> solver_weights(const NoiseModel& noise, int n_arrays, int n_steps) {
  if (noise.is_zero()) return weight_matrix(NoiseModel::table_defaults(), n_arrays, n_steps);
  return weight_matrix(noise, n_arrays, n_steps);
}

TrialResult run_trial(const Scenario& scenario, const MonteCarloConfig& config, int trial) {
  TrialResult r;
  r.trial = trial;
  r.noise_seed = derive_seed(config.seed, static_cast<std::uint64_t>(trial), kNoiseSalt);
  const Geometry& g = scenario.truth;
  const double c = config.solver.sound_speed;
  try {
    const StateVector truth = pack_state(g);
    const MeasurementSet ms = add_noise(predict_measurements(g, c), scenario.noise, r.noise_seed);
    StateVector x0;
    if (config.scheme == InitScheme::kOurs) {
      InitConfig ic = config.init;
      ic.seed = derive_seed(config.seed, static_cast<std::uint64_t>(trial), kInitSalt);
      ic.sound_speed = c;
      x0 = initialize(ms, ic).state;
    } else {
      x0 = perturb_ground_truth(truth, config.scheme,
                                derive_seed(config.seed, static_cast<std::uint64_t>(trial), kPerturbSalt),
                                config.perturbation);
    }
    const auto res = gauss_newton(x0, ms, solver_weights(scenario.noise, g.n_arrays(), g.n_steps()), config.solver);
    r.verdict = res.verdict;
    r.iterations = static_cast<int>(res.trace.records.size());
    r.final_cost = res.final_cost;
    r.converged = res.verdict.verdict != Verdict::kDiverged;
    r.errors = error_metrics(res.state, truth);
  } catch (const Error& e) {
    r.error = e.code();
    r.error_message = e.message();
  } catch (const std::exception& e) {
    r.error = ErrorCode::kSolverFailure;
    r.error_message = e.what();
  }
  return r;
}

MonteCarloSummary run_monte_carlo(const Scenario& scenario, const MonteCarloConfig& config) {
  if (config.trials < 1) throw Error(ErrorCode::kInvalidSpec, "trials must be positive");
  if (config.threads < 0) throw Error(ErrorCode::kInvalidSpec, "threads must be non-negative");
  config.solver.validate();
  scenario.truth.validate();

  MonteCarloSummary s;
  s.scenario = scenario.tag();
  s.scheme = config.scheme;
  s.seed = config.seed;
  s.trials = config.trials;
  s.trial_results.resize(config.trials);

  int threads = config.threads > 0 ? config.threads : static_cast<int>(std::thread::hardware_concurrency());
  threads = std::clamp(threads, 1, config.trials);
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int t = next++; t < config.trials; t = next++) s.trial_results[t] = run_trial(scenario, config, t);
  };
  {
    std::vector<std::jthread> pool;
    pool.reserve(threads - 1);
    for (int i = 1; i < threads; ++i) pool.emplace_back(worker);
    worker();
  }

  std::vector<ParameterErrors> ok;
  for (const auto& r : s.trial_results) {
    if (r.converged) ok.push_back(r.errors);
  }
  s.converged = static_cast<int>(ok.size());
  s.convergence_ratio = static_cast<double>(s.converged) / s.trials;
  s.rmse = rmse(ok);
  return s;
}

}  // namespace micarray
