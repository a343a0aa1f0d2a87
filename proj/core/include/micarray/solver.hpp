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

// Batch Gauss-Newton over the factor graph of source positions (poses) and
// arrays (landmarks). Residuals follow the stacking of stack(): per step the
// reference DOA, then (T_i, d_i) for every other array, then the odometry
// residual to the next step.
//
// The iteration is undamped and takes every step. The reference array is not
// part of the state, so no gauge rows are fixed in H.

#pragma once

#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "micarray/errors.hpp"
#include "micarray/measurement.hpp"
#include "micarray/observability.hpp"
#include "micarray/state.hpp"

namespace micarray {

struct SolverConfig {
  int max_iterations = 50;
  double step_threshold = 1e-5;
  double divergence_norm_cap = 1e8;
  double oscillation_level = 1e3;
  int oscillation_window = 5;
  int growth_window = 5;
  double sound_speed = kDefaultSoundSpeed;

  /// Throws InvalidSpec unless every field is positive.
  void validate() const;
};

enum class FactorKind { kReferenceDoa, kAcoustic, kOdometry };

struct FactorBlock {
  Eigen::Index col = 0;
  Eigen::MatrixXd jacobian;
};

/// One measurement constraint: error e = g(x) - z over `rows` consecutive
/// rows of the stacked vector starting at `row`.
struct Factor {
  FactorKind kind = FactorKind::kAcoustic;
  Eigen::Index row = 0;
  int step = 0;   // 0-based
  int array = 0;  // 0-based, acoustic factors only
  Eigen::VectorXd error;
  std::vector<FactorBlock> blocks;  // A (array or s^k) and B (s^k or s^{k+1})
};

/// Linearizes every constraint at x. Throws DegenerateGeometry when a
/// source coincides with an array.
std::vector<Factor> linearize(const StateVector& x, const MeasurementSet& ms,
                              double sound_speed = kDefaultSoundSpeed);

struct ResidualJacobian {
  Eigen::VectorXd error;
  Eigen::SparseMatrix<double> jacobian;
};

ResidualJacobian residuals_and_jacobian(const StateVector& x, const MeasurementSet& ms,
                                        double sound_speed = kDefaultSoundSpeed);

/// Per-factor inverse weight blocks, extracted once from W. Throws
/// DimensionMismatch when W couples rows of different factors.
struct FactorWeights {
  std::vector<Eigen::MatrixXd> inverse;
};
FactorWeights factor_weights(std::span<const Factor> factors, const Eigen::SparseMatrix<double>& weights);

struct NormalEquations {
  Eigen::SparseMatrix<double> H;
  Eigen::VectorXd b;
  double cost = 0.0;  // e^T W^-1 e
};

/// H = sum A^T W^-1 A etc. over factors, b = sum J^T W^-1 e.
NormalEquations assemble_normal_equations(std::span<const Factor> factors, const FactorWeights& weights,
                                          Eigen::Index dimension);

/// Convenience overload extracting the weights from W.
NormalEquations assemble_normal_equations(std::span<const Factor> factors, const Eigen::SparseMatrix<double>& weights,
                                          Eigen::Index dimension);

/// Raised when H cannot be factorized; carries the numerical rank of H.
class SingularNormalEquationsError : public Error {
 public:
  SingularNormalEquationsError(const std::string& what, RankReport rank)
      : Error(ErrorCode::kSingularNormalEquations, what), rank_(std::move(rank)) {}
  const RankReport& rank() const noexcept { return rank_; }

 private:
  RankReport rank_;
};

/// Solves H dx = -b with a Jacobi-scaled sparse LDL^T. No regularization.
Eigen::VectorXd solve_normal_equations(const NormalEquations& ne);

struct IterationRecord {
  int iteration = 0;  // 1-based
  double step_norm = 0.0;
  double cost = 0.0;  // at the start of the iteration
  double wall_time_s = 0.0;
};

struct IterationTrace {
  std::vector<IterationRecord> records;

  std::vector<double> step_norms() const;
};

enum class Verdict { kConverged, kMaxIterations, kDiverged };

enum class DivergenceRule { kNone, kNormCap, kOscillation, kGrowth };

struct VerdictDetail {
  Verdict verdict = Verdict::kMaxIterations;
  DivergenceRule rule = DivergenceRule::kNone;

  std::string to_string() const;
};

std::string to_string(Verdict v);

/// Converged when the last step is below the threshold. Otherwise:
/// rule 1, a step above the norm cap (or non-finite); rule 2, the last
/// oscillation_window steps all above oscillation_level with a sign change in
/// their differences; rule 3, strictly increasing over the last growth_window
/// steps. Else MaxIterations.
VerdictDetail classify_divergence(std::span<const double> step_norms, const SolverConfig& config);
VerdictDetail classify_divergence(const IterationTrace& trace, const SolverConfig& config);

struct SolveResult {
  StateVector state;
  IterationTrace trace;
  VerdictDetail verdict;
  double initial_cost = 0.0;
  double final_cost = 0.0;
};

/// Gauss-Newton from x0. Stops when |dx| < threshold (that step is not
/// applied), after a step above the norm cap, or at max_iterations.
/// Throws SingularNormalEquationsError, DegenerateGeometry.
SolveResult gauss_newton(const StateVector& x0, const MeasurementSet& ms, const Eigen::SparseMatrix<double>& weights,
                         const SolverConfig& config = {});

/// e^T W^-1 e at x.
double weighted_cost(const StateVector& x, const MeasurementSet& ms, const Eigen::SparseMatrix<double>& weights,
                     double sound_speed = kDefaultSoundSpeed);

}  // namespace micarray
