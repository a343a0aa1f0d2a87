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

// Identifiability analysis of the joint calibration problem.
//
// The Jacobian analysed here is the one of the acoustic model without the
// reference array's own DOA rows: per step it has 4(N-1) rows (T_i, d_i for
// i = 2..N), plus 3 odometry rows between consecutive steps. Its column rank
// equals that of the Fisher information matrix whenever the weights are
// positive definite, and equals that of the much smaller reduced matrix F.

#pragma once

#include <limits>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "micarray/measurement.hpp"
#include "micarray/state.hpp"

namespace micarray {

/// Derivatives of the (T_i^k, d_i^k) rows of one array at one step.
struct ArrayStepBlock {
  Eigen::RowVector3d h;  // dT/dp_i = -(s - p_i)^T / (c d_i)
  Mat3 U;                // dd/dp_i = -R_i^T A
  Mat3 V;                // dd/dtheta_i
  double emission_time = 0.0;

  /// [h 0 1 t; U V 0 0], the 4x8 block of L^k belonging to this array.
  Eigen::Matrix<double, 4, 8> H() const;
};

/// Block of array `a` for a source at `s` emitted at `emission_time`.
/// Throws DegenerateGeometry when s is within 1e-9 m of the array.
ArrayStepBlock array_step_block(const ArrayParams& a, const Vec3& s, double emission_time,
                                double sound_speed = kDefaultSoundSpeed);

struct JacobianBlocks {
  int n_arrays = 0;
  int n_steps = 0;
  /// per_array[k][i - 1] for step k and non-reference array i.
  std::vector<std::vector<ArrayStepBlock>> per_array;
  /// (s^k / (c d_1^k))^T, the reference-distance part of every TDOA row.
  std::vector<Eigen::RowVector3d> reference_rows;
  std::vector<Eigen::MatrixXd> L;  // K blocks, 4(N-1) x 8(N-1)
  std::vector<Eigen::MatrixXd> T;  // K blocks, 4(N-1) x 3
};

/// Analytic blocks at the given geometry. Throws DegenerateGeometry when a
/// source coincides with any array (including the reference origin).
JacobianBlocks jacobian_blocks(const Geometry& geometry, double sound_speed = kDefaultSoundSpeed);

/// J of shape [4(N-1)K + 3(K-1)] x [8(N-1) + 3K]: L^k rows interleaved with
/// (-I, I) odometry rows, T^k in the column block of s^k.
Eigen::MatrixXd assemble_full_jacobian(const JacobianBlocks& blocks);

/// Weight matrix matching assemble_full_jacobian's rows (no reference DOA).
Eigen::SparseMatrix<double> observability_weight_matrix(const NoiseModel& noise, int n_arrays, int n_steps);

/// J^T W^-1 J.
Eigen::MatrixXd fim(const Eigen::MatrixXd& jacobian, const Eigen::SparseMatrix<double>& weights);

/// F = [L^1; ...; L^K | T^1; ...; T^K]. `n_steps` limits F to the first
/// steps (all when negative).
Eigen::MatrixXd reduced_F(const JacobianBlocks& blocks, int n_steps = -1);

/// T_bar = [0_{2x3}; Psi; 0_{3K x 3}], 4K x 3. Throws InsufficientSteps when
/// K < 2 and DegenerateTiming when the first two emission times coincide.
Eigen::MatrixXd reduced_T_bar(const SourceTrajectory& traj, double sound_speed = kDefaultSoundSpeed);

/// L_bar_i = diag(I_2, Phi_i), 4K x 8, for one non-reference array.
Eigen::MatrixXd reduced_L_bar(const ArrayParams& array, const SourceTrajectory& traj,
                              double sound_speed = kDefaultSoundSpeed);

/// F_bar' = [diag(L_bar_2..L_bar_N) | T_bar; ...; T_bar], column-equivalent to F.
Eigen::MatrixXd reduced_F_prime(const Geometry& geometry, double sound_speed = kDefaultSoundSpeed);

/// M_{j_T}: [L_bar_j, T_bar] stacked over N - 2 copies of [-L_bar_j, 0].
/// `j` is the 0-based non-reference array index.
Eigen::MatrixXd sufficient_condition_matrix(const Geometry& geometry, int j,
                                            double sound_speed = kDefaultSoundSpeed);

struct RankReport {
  std::string matrix_name;
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;
  Eigen::Index numerical_rank = 0;
  bool full_column_rank = false;
  double largest_sv = 0.0;
  double smallest_retained_sv = 0.0;
  /// Zero when every discarded singular value is structural (rows < cols).
  double largest_discarded_sv = 0.0;
  /// smallest_retained / largest_discarded; +inf when nothing nonzero was
  /// discarded.
  double gap_ratio = std::numeric_limits<double>::infinity();
  std::vector<double> singular_values;
};

constexpr double kDefaultRankTolerance = 1e-8;

/// Columns are scaled to unit norm first (column rank is unchanged); rank =
/// number of singular values above rel_tol * largest.
RankReport numerical_rank(const Eigen::MatrixXd& m, double rel_tol = kDefaultRankTolerance,
                          std::string name = {});

/// Rank of a symmetric PSD information matrix on the scale of its factor:
/// reported singular values are square roots of the eigenvalues of
/// D^-1/2 F D^-1/2, D = diag(F), so rel_tol compares with numerical_rank of
/// the whitened Jacobian.
RankReport fim_rank(const Eigen::MatrixXd& information, double rel_tol = kDefaultRankTolerance,
                    std::string name = {});

struct DiagnosisOptions {
  double angular_tolerance = 1e-6;  // rad
  double rank_tolerance = kDefaultRankTolerance;
  double sound_speed = kDefaultSoundSpeed;
  bool compute_ranks = true;
};

/// Predicates of the unobservable configurations plus, optionally, the
/// numerical ranks of F, T_bar, L_bar_i and the sufficient-condition
/// matrices. Predicates are diagnostic only: they assume noise-free geometry.
struct TheoremDiagnosis {
  int n_arrays = 0;
  int n_steps = 0;

  int row_count_bound = 0;           // ceil(2 + 3 / (4(N-1)))
  bool meets_row_count_bound = false;
  bool meets_five_step_bound = false;

  bool collinear_with_reference = false;
  bool coplanar_with_reference_axis_plane = false;  // x+ay=0, x+bz=0 or y+cz=0
  std::string coplanar_family;
  /// Any plane through the reference origin; also makes T_bar deficient.
  bool coplanar_through_reference_origin = false;

  std::vector<int> collinear_with_array;  // 1-based array indices
  std::vector<int> gimbal_lock_arrays;    // 1-based array indices

  bool ranks_computed = false;
  RankReport f;
  RankReport t_bar;
  std::vector<RankReport> l_bar;  // arrays 2..N
  bool necessary_ranks_hold = false;   // T_bar and every L_bar full column rank
  bool sufficient_ranks_hold = false;  // some M_{j_T} and the other L_bar full rank

  /// Human-readable names of every violated condition.
  std::vector<std::string> violations;

  bool any_violation() const { return !violations.empty(); }
};

TheoremDiagnosis check_theorem_conditions(const Geometry& geometry, const DiagnosisOptions& options = {});

}  // namespace micarray
