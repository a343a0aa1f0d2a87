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

// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// nonzero if any failed.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Geometry>

#include "fixtures.hpp"
#include "micarray/dataset.hpp"
#include "micarray/distance_nls.hpp"
#include "micarray/errors.hpp"
#include "micarray/init.hpp"
#include "micarray/montecarlo.hpp"
#include "micarray/observability.hpp"
#include "micarray/report.hpp"
#include "micarray/solver.hpp"

namespace micarray {
namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [failed: " << what << "]";
    }
  }
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// Shared by criteria 1 and 2.
const std::vector<Geometry>& jacobian_instances() {
  static const std::vector<Geometry> instances = testing::jacobian_instances(50, 2026);
  return instances;
}

void jacobian_fd(Outcome& out) {
  const auto t0 = Clock::now();
  double worst = 0.0;
  for (const auto& g : jacobian_instances()) {
    const StateVector x = pack_state(g);
    const Eigen::MatrixXd analytic = assemble_full_jacobian(jacobian_blocks(g));
    const Eigen::MatrixXd fd = testing::central_difference(
        [&](const Eigen::VectorXd& v) {
          return testing::observability_model(StateVector(x.n_arrays(), x.n_steps(), v), g.trajectory.emission_times);
        },
        x.values(), 1e-6);
    worst = std::max(worst, testing::max_column_relative_error(analytic, fd));
  }
  const double t = seconds_since(t0);
  out.detail << "max column relative error " << worst << " over " << jacobian_instances().size() << " instances, "
             << t << " s";
  out.require(worst <= 1e-6, "relative error <= 1e-6");
  out.require(t < 10.0, "runtime < 10 s");
}

void jacobian_f_equivalence(Outcome& out) {
  int agree = 0, full = 0;
  for (const auto& g : jacobian_instances()) {
    const auto blocks = jacobian_blocks(g);
    const bool j_full = numerical_rank(assemble_full_jacobian(blocks)).full_column_rank;
    const bool f_full = numerical_rank(reduced_F(blocks)).full_column_rank;
    agree += j_full == f_full ? 1 : 0;
    full += j_full ? 1 : 0;
  }
  const int n = static_cast<int>(jacobian_instances().size());
  out.detail << agree << "/" << n << " verdicts agree (" << full << " full rank)";
  out.require(agree == n, "every verdict agrees");
}

Geometry scenario_truth(ScenarioKind kind, std::uint64_t seed) {
  ScenarioSpec spec;
  spec.kind = kind;
  spec.seed = seed;
  return make_scenario(spec).truth;
}

void rank_sweeps(Outcome& out) {
  const auto t0 = Clock::now();
  const auto obs = rank_sweep(scenario_truth(ScenarioKind::kObservableRandom, 1));
  int first_full = -1;
  bool stays = true;
  for (std::size_t k = 0; k < obs.size(); ++k) {
    if (obs[k].full_column_rank && first_full < 0) first_full = static_cast<int>(k) + 1;
    if (first_full > 0 && !obs[k].full_column_rank) stays = false;
  }
  out.detail << "N=8 observable: " << obs.back().cols << " columns, full from k=" << first_full;
  out.require(obs.back().cols == 59, "59 columns");
  out.require(first_full >= 5 && stays, "full at some k >= 5 and stays full");

  for (auto kind : {ScenarioKind::kCollinearReference, ScenarioKind::kCoplanarReference, ScenarioKind::kCollinearArray,
                    ScenarioKind::kGimbal}) {
    const auto sweep = rank_sweep(scenario_truth(kind, 1));
    double min_gap = std::numeric_limits<double>::infinity();
    bool deficient = true;
    for (const auto& r : sweep) {
      deficient = deficient && !r.full_column_rank;
      min_gap = std::min(min_gap, r.gap_ratio);
    }
    out.detail << "; " << to_string(kind) << ": min gap " << min_gap;
    out.require(deficient && min_gap > 1e6, std::string(to_string(kind)) + " deficient with gap > 1e6 at every k");
  }
  const double t = seconds_since(t0);
  out.detail << "; " << t << " s";
  out.require(t < 30.0, "runtime < 30 s");
}

void step_bound(Outcome& out) {
  int cases = 0, full = 0;
  for (int n = 2; n <= 8; ++n) {
    for (int k : {3, 4}) {
      for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const Geometry g = testing::random_instance(1000 + 100 * n + 10 * k + seed, n, k);
        ++cases;
        full += numerical_rank(reduced_F(jacobian_blocks(g))).full_column_rank ? 1 : 0;
      }
    }
  }
  out.detail << full << " of " << cases << " instances with K in {3,4}, N in 2..8 full rank";
  out.require(full == 0, "none full rank");
}

void noise_free_end_to_end(Outcome& out) {
  const auto t0 = Clock::now();
  ScenarioSpec spec;
  spec.kind = ScenarioKind::kObservableRandom;
  spec.n_arrays = 5;
  spec.n_steps = 24;
  spec.seed = 5;
  const Geometry g = make_scenario(spec).truth;
  const MeasurementSet ms = predict_measurements(g);
  const InitResult init = initialize(ms);
  const SolveResult res = gauss_newton(init.state, ms, solver_weights(NoiseModel{}, 5, 24));
  const double err = testing::max_state_error(res.state, pack_state(g));
  const double t = seconds_since(t0);
  out.detail << "N=5 K=24: max parameter error " << err << " after " << res.trace.records.size()
             << " iterations (" << to_string(res.verdict.verdict) << "), init error "
             << testing::max_state_error(init.state, pack_state(g)) << ", " << t << " s";
  out.require(res.verdict.verdict == Verdict::kConverged, "converged");
  out.require(err <= 1e-5, "every parameter within 1e-5");
  out.require(t < 5.0, "runtime < 5 s");
}

void preset_monte_carlo(Outcome& out) {
  const auto t0 = Clock::now();
  ScenarioSpec spec;
  spec.kind = ScenarioKind::kPreset;
  const Scenario sc = make_scenario(spec);
  MonteCarloConfig cfg;
  cfg.trials = 200;
  cfg.seed = 1;
  std::vector<MonteCarloSummary> rows;
  for (auto scheme : {InitScheme::kOurs, InitScheme::kGroundTruth, InitScheme::kLv1, InitScheme::kLv2,
                      InitScheme::kLv3, InitScheme::kLv4}) {
    cfg.scheme = scheme;
    rows.push_back(run_monte_carlo(sc, cfg));
  }
  const auto& ours = rows[0];
  out.detail << "ratios";
  for (const auto& r : rows) out.detail << " " << to_string(r.scheme) << "=" << r.convergence_ratio;
  out.detail << "; ours RMSE array " << ours.rmse.position_m << " m, source " << ours.rmse.source_m << " m";
  out.require(ours.convergence_ratio >= 0.98 && rows[1].convergence_ratio >= 0.98, "ours and gt ratio >= 0.98");
  out.require(ours.rmse.position_m >= 1e-2 && ours.rmse.position_m <= 6e-2, "ours array RMSE in [1e-2, 6e-2]");
  out.require(ours.rmse.source_m >= 2e-2 && ours.rmse.source_m <= 9e-2, "ours source RMSE in [2e-2, 9e-2]");
  int ties = 0;
  bool ordered = true;
  for (std::size_t i = 1; i + 1 < rows.size(); ++i) {
    ordered = ordered && rows[i].convergence_ratio >= rows[i + 1].convergence_ratio;
    ties += rows[i].convergence_ratio == rows[i + 1].convergence_ratio ? 1 : 0;
  }
  out.require(ordered, "gt >= lv1 >= lv2 >= lv3 >= lv4");
  out.require(ties <= 1, "at most one adjacent tie");
  const double t = seconds_since(t0);
  out.detail << "; " << ties << " tie(s), " << t << " s";
  out.require(t < 300.0, "runtime < 5 min");
}

void init_oracles(Outcome& out) {
  // Tetrahedron distances on exact geometry.
  const std::array<Vec3, 4> pts{Vec3(1.0, 0.2, 0.1), Vec3(-0.3, 1.4, 0.5), Vec3(0.4, -0.8, 1.2),
                                Vec3(-1.1, -0.6, -0.7)};
  std::array<Vec3, 4> doas;
  for (int i = 0; i < 4; ++i) doas[i] = pts[i].normalized();
  const auto tet = solve_tetrahedron(doas, pts);
  double tet_err = 0.0;
  for (int i = 0; i < 4; ++i) tet_err = std::max(tet_err, std::abs(tet.distances[i] - pts[i].norm()));

  // Rigid registration of a random 10-point cloud.
  std::mt19937_64 rng(7);
  std::normal_distribution<double> nd;
  Eigen::Quaterniond q(nd(rng), nd(rng), nd(rng), nd(rng));
  const Mat3 r = q.normalized().toRotationMatrix();
  const Vec3 t(nd(rng), nd(rng), nd(rng));
  std::vector<Vec3> local, ref;
  for (int i = 0; i < 10; ++i) {
    local.emplace_back(nd(rng), nd(rng), nd(rng));
    ref.push_back(r * local.back() + t);
  }
  const auto pose = register_array_pose(ref, local);
  const double icp_err = std::max((pose.rotation - r).cwiseAbs().maxCoeff(), (pose.position - t).cwiseAbs().maxCoeff());

  // Clock model fit, clean and with one 50 ms outlier.
  std::vector<double> tdoa, di, d1, times;
  for (int k = 0; k < 20; ++k) {
    times.push_back(0.8 * k);
    di.push_back(2.0 + std::sin(k));
    d1.push_back(3.0 + std::cos(1.3 * k));
    tdoa.push_back((di.back() - d1.back()) / kDefaultSoundSpeed + 0.1 + 1e-4 * times.back());
  }
  const auto clean = fit_async(tdoa, di, d1, times);
  tdoa[11] += 0.05;
  const auto dirty = fit_async(tdoa, di, d1, times);
  const double clean_err = std::max(std::abs(clean.tau - 0.1), std::abs(clean.delta - 1e-4));
  const double dirty_rel =
      std::max(std::abs(dirty.tau - clean.tau) / std::abs(clean.tau), std::abs(dirty.delta - clean.delta) / std::abs(clean.delta));

  out.detail << "tetrahedron " << tet_err << " m, registration " << icp_err << ", clock fit " << clean_err
             << ", with outlier " << 100.0 * dirty_rel << " %";
  out.require(tet_err <= 1e-6, "tetrahedron within 1e-6");
  out.require(icp_err <= 1e-9, "registration within 1e-9");
  out.require(clean_err <= 1e-12, "exact clock fit");
  out.require(dirty_rel <= 0.01, "outlier fit within 1%");
}

void property_suite(Outcome& out) {
  // FIM rank = J rank under PD weights.
  int fim_agree = 0;
  std::mt19937_64 rng(99);
  std::uniform_int_distribution<int> nd(2, 6), kd(3, 10);
  for (int i = 0; i < 20; ++i) {
    const int n = nd(rng), k = kd(rng);
    const Geometry g = testing::random_instance(rng(), n, k);
    const Eigen::MatrixXd j = assemble_full_jacobian(jacobian_blocks(g));
    const auto w = observability_weight_matrix(NoiseModel::table_defaults(), n, k);
    fim_agree += fim_rank(fim(j, w)).numerical_rank == numerical_rank(j).numerical_rank ? 1 : 0;
  }

  // Block assembly against the dense product.
  const Geometry g = testing::random_instance(12, 4, 8);
  const StateVector x = pack_state(g);
  const auto ms = add_noise(predict_measurements(g), NoiseModel::table_defaults(), 4);
  const auto w = weight_matrix(NoiseModel::table_defaults(), 4, 8);
  const auto ne = assemble_normal_equations(linearize(x, ms), w, x.size());
  const Eigen::MatrixXd jd = Eigen::MatrixXd(residuals_and_jacobian(x, ms).jacobian);
  const Eigen::MatrixXd dense = jd.transpose() * Eigen::MatrixXd(w).ldlt().solve(jd);
  const double h_err = (Eigen::MatrixXd(ne.H) - dense).cwiseAbs().maxCoeff() / dense.cwiseAbs().maxCoeff();

  // Pack/unpack and dataset save/load.
  const bool pack_ok = pack_state(unpack_state(x, g.trajectory.emission_times)) == x;
  Dataset ds;
  ds.measurements = ms;
  ds.noise = NoiseModel::table_defaults();
  ds.ground_truth = g;
  const auto path = std::filesystem::temp_directory_path() / "micarray_acceptance_dataset.json";
  save_dataset(ds, path);
  const Dataset back = load_dataset(path);
  std::filesystem::remove(path);
  const bool meas_ok = stack(back.measurements) == stack(ms) && back.measurements.emission_times == ms.emission_times;
  const double gt_err = (pack_state(*back.ground_truth).values() - x.values()).cwiseAbs().maxCoeff();

  // Monte Carlo summaries under different thread counts.
  ScenarioSpec spec;
  spec.kind = ScenarioKind::kPreset;
  const Scenario sc = make_scenario(spec);
  MonteCarloConfig cfg;
  cfg.trials = 16;
  cfg.seed = 3;
  cfg.scheme = InitScheme::kLv3;
  std::vector<std::string> dumps;
  for (int threads : {1, 2, 4, 7}) {
    cfg.threads = threads;
    dumps.push_back(to_json(run_monte_carlo(sc, cfg)).dump());
  }
  const bool mc_ok = std::all_of(dumps.begin(), dumps.end(), [&](const std::string& d) { return d == dumps[0]; });

  out.detail << "FIM rank agrees " << fim_agree << "/20; H vs dense " << h_err << "; pack "
             << (pack_ok ? "exact" : "differs") << "; dataset measurements " << (meas_ok ? "exact" : "differ")
             << ", ground truth max diff " << gt_err << "; Monte Carlo 1/2/4/7 threads "
             << (mc_ok ? "identical" : "differ");
  out.require(fim_agree == 20, "FIM rank = J rank");
  out.require(h_err <= 1e-12, "H within 1e-12");
  out.require(pack_ok, "pack/unpack lossless");
  out.require(meas_ok && gt_err <= 1e-14, "dataset round trip lossless");
  out.require(mc_ok, "bit-identical Monte Carlo summaries");
}

struct Criterion {
  int id;
  const char* name;
  std::function<void(Outcome&)> run;
};

}  // namespace
}  // namespace micarray

int main() {
  using namespace micarray;
  const std::vector<Criterion> criteria{
      {1, "jacobian-finite-differences", jacobian_fd},
      {2, "jacobian-reduced-f-equivalence", jacobian_f_equivalence},
      {3, "rank-sweeps", rank_sweeps},
      {4, "five-step-bound", step_bound},
      {5, "noise-free-end-to-end", noise_free_end_to_end},
      {6, "preset-monte-carlo", preset_monte_carlo},
      {7, "initialization-oracles", init_oracles},
      {8, "property-suite", property_suite},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    Outcome out;
    try {
      c.run(out);
    } catch (const std::exception& e) {
      out.pass = false;
      out.detail << " [exception: " << e.what() << "]";
    }
    failed += out.pass ? 0 : 1;
    std::printf("%s criterion %d %s: %s\n", out.pass ? "PASS" : "FAIL", c.id, c.name, out.detail.str().c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
