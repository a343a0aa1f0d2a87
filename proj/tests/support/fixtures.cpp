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

#include "fixtures.hpp"

#include <algorithm>
#include <random>

namespace micarray::testing {

Geometry random_instance(std::uint64_t seed, int n_arrays, int n_steps) {
  ScenarioSpec spec;
  spec.kind = ScenarioKind::kObservableRandom;
  spec.n_arrays = n_arrays;
  spec.n_steps = std::max(n_steps, 3);
  spec.seed = seed;
  Geometry g = make_scenario(spec).truth;
  g.trajectory.positions.resize(static_cast<std::size_t>(n_steps));
  g.trajectory.emission_times.resize(static_cast<std::size_t>(n_steps));
  return g;
}

std::vector<Geometry> jacobian_instances(int count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> n_dist(2, 4);
  std::uniform_int_distribution<int> k_dist(5, 10);
  std::vector<Geometry> out;
  for (int i = 0; i < count; ++i) {
    const int n = n_dist(rng);
    const int k = k_dist(rng);
    out.push_back(random_instance(rng(), n, k));
  }
  return out;
}

Eigen::VectorXd observability_model(const StateVector& x, const std::vector<double>& emission_times,
                                    double sound_speed) {
  const Geometry g = unpack_state(x, emission_times);
  const MeasurementSet ms = predict_measurements(g, sound_speed);
  const Eigen::VectorXd full = stack(ms);
  const auto rows = observability_rows(x.n_arrays(), x.n_steps());
  Eigen::VectorXd out(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) out[static_cast<Eigen::Index>(r)] = full[rows[r]];
  return out;
}

Eigen::MatrixXd central_difference(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& f,
                                   const Eigen::VectorXd& x, double h) {
  const Eigen::VectorXd f0 = f(x);
  Eigen::MatrixXd j(f0.size(), x.size());
  for (Eigen::Index c = 0; c < x.size(); ++c) {
    Eigen::VectorXd xp = x, xm = x;
    xp[c] += h;
    xm[c] -= h;
    j.col(c) = (f(xp) - f(xm)) / (2.0 * h);
  }
  return j;
}

double max_column_relative_error(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, double floor) {
  double worst = 0.0;
  for (Eigen::Index c = 0; c < a.cols(); ++c) {
    const double err = (a.col(c) - b.col(c)).norm() / std::max(b.col(c).norm(), floor);
    worst = std::max(worst, err);
  }
  return worst;
}

std::vector<Eigen::Index> observability_rows(int n_arrays, int n_steps) {
  const Eigen::Index acoustic = StepMeasurement::flat_size(n_arrays);
  std::vector<Eigen::Index> rows;
  Eigen::Index base = 0;
  for (int k = 0; k < n_steps; ++k) {
    const Eigen::Index size = acoustic + (k + 1 < n_steps ? 3 : 0);
    for (Eigen::Index r = 3; r < size; ++r) rows.push_back(base + r);
    base += size;
  }
  return rows;
}

double max_state_error(const StateVector& estimate, const StateVector& truth) {
  double worst = 0.0;
  for (int i = 1; i < truth.n_arrays(); ++i) {
    const auto a = estimate.array(i);
    const auto t = truth.array(i);
    worst = std::max(worst, (a.position - t.position).cwiseAbs().maxCoeff());
    const Vec3 de = a.euler.as_vector() - t.euler.as_vector();
    for (int c = 0; c < 3; ++c) worst = std::max(worst, std::abs(wrap_angle(de[c])));
    worst = std::max(worst, std::abs(a.tau - t.tau));
    worst = std::max(worst, std::abs(a.delta - t.delta));
  }
  for (int k = 0; k < truth.n_steps(); ++k) {
    worst = std::max(worst, (estimate.source(k) - truth.source(k)).cwiseAbs().maxCoeff());
  }
  return worst;
}

}  // namespace micarray::testing
