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

#include <array>
#include <functional>

#include <Eigen/Core>

#include "micarray/rotation.hpp"

namespace micarray {

struct BoundedLsqOptions {
  int max_iterations = 100;
  double tolerance = 1e-10;
  double initial_damping = 1e-3;  // relative to max diag(J^T J)
};

struct BoundedLsqResult {
  Eigen::VectorXd x;
  Eigen::VectorXd residual;
  double cost = 0.0;  // 0.5 |r|^2
  int iterations = 0;
  bool converged = false;
};

/// Fills r(x) and, when J is non-null, the Jacobian dr/dx.
using ResidualFunction = std::function<void(const Eigen::VectorXd& x, Eigen::VectorXd& r, Eigen::MatrixXd* J)>;

/// Small dense nonlinear least squares with lower bounds: a trust-region
/// (Levenberg-Marquardt) iteration whose trial points are reflected back
/// into the feasible box. Stops when |r|, |J^T r|_inf or the relative step
/// fall below `tolerance`.
BoundedLsqResult bounded_least_squares(const ResidualFunction& f, Eigen::VectorXd x0,
                                       const Eigen::VectorXd& lower, const BoundedLsqOptions& options = {});

struct TetraSolution {
  std::array<double, 4> distances{};
  double residual_norm = 0.0;
  /// residual_norm / |(L_ab^2)|, scale free.
  double relative_residual = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Distances from one array to four source points, from the four unit DOAs
/// (array frame) and the six chord lengths between the points. Each of the
/// six residuals is d_a^2 + d_b^2 - 2 d_a d_b cos<u_a, u_b> - L_ab^2.
/// Starts every distance at the mean chord length.
TetraSolution solve_tetrahedron(const std::array<Vec3, 4>& doas, const std::array<Vec3, 4>& points,
                                const BoundedLsqOptions& options = {});

}  // namespace micarray
