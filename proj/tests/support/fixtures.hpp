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
#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "micarray/measurement.hpp"
#include "micarray/scenario.hpp"
#include "micarray/state.hpp"

namespace micarray::testing {

/// Generic random 3D instance with N arrays and K steps. K < 3 keeps the
/// first K steps of a three-step instance.
Geometry random_instance(std::uint64_t seed, int n_arrays, int n_steps);

/// Instances used by the Jacobian checks: N in {2,3,4}, K in {5..10}.
std::vector<Geometry> jacobian_instances(int count, std::uint64_t seed);

/// Stacked model without the reference DOA rows: per step [T_i; d_i] for
/// i = 2..N followed by that step's displacement. Row order of the
/// observability J.
Eigen::VectorXd observability_model(const StateVector& x, const std::vector<double>& emission_times,
                                    double sound_speed = kDefaultSoundSpeed);

/// Central differences of f at x with step h.
Eigen::MatrixXd central_difference(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& f,
                                   const Eigen::VectorXd& x, double h);

/// Largest column-wise relative error |a_j - b_j| / max(|b_j|, floor).
double max_column_relative_error(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, double floor = 1e-12);

/// Rows of the solver stacking that the observability J keeps.
std::vector<Eigen::Index> observability_rows(int n_arrays, int n_steps);

/// Largest componentwise |estimate - truth| over every state entry, Euler
/// differences wrapped into (-pi, pi].
double max_state_error(const StateVector& estimate, const StateVector& truth);

}  // namespace micarray::testing
