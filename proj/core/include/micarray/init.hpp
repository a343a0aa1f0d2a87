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

// Initial guess of the full state from measurements alone:
//   1. triangulate s^1 from reference DOA pairs and chained displacements,
//      then chain the displacements;
//   2. estimate array-to-source distances from law-of-cosines polyhedra;
//   3. register each array's local source cloud onto the chained trajectory;
//   4. fit the clock offset and drift by linear least squares.

#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "micarray/distance_nls.hpp"
#include "micarray/measurement.hpp"
#include "micarray/state.hpp"

namespace micarray {

struct InitConfig {
  int combos_per_step = 20;
  double iqr_multiplier = 1.5;
  double z_cut = 3.0;
  /// Polyhedron solutions whose relative residual exceeds this are dropped.
  double max_relative_residual = 0.5;
  std::uint64_t seed = 0;
  double sound_speed = kDefaultSoundSpeed;
  BoundedLsqOptions nls;
};

struct Triangulation {
  double distance = 0.0;
  Vec3 position = Vec3::Zero();
};

/// Law-of-sines range of s^1 along doa1, using the reference DOAs at steps 1
/// and 2 and the displacement between them. Throws DegenerateTriangulation
/// when the two DOAs are within 1 degree of parallel (or anti-parallel).
Triangulation triangulate_first_position(const Vec3& doa1, const Vec3& doa2, const Vec3& rel_disp);

/// Range of s^1 as the median of the law-of-sines ranges against every later
/// step j, using the chained displacement s^j - s^1 as the third side. Pairs
/// within 1 degree of parallel are skipped; throws DegenerateTriangulation
/// when all are.
Triangulation triangulate_first_position(std::span<const Vec3> ref_doas, std::span<const Vec3> rel_displacements);

/// s^{k+1} = s^k + displacement^k.
std::vector<Vec3> chain_positions(const Vec3& first, std::span<const Vec3> rel_displacements);

using Combo = std::array<int, 4>;

/// Sorted, duplicate-free 4-subsets of {0..K-1}. Every step is covered by at
/// least min(per_step, C(K-1, 3)) subsets; all subsets containing a step are
/// used when there are at most `per_step` of them. Throws InsufficientSteps
/// when K < 4.
std::vector<Combo> select_combos(int n_steps, int per_step, std::uint64_t seed);

struct DistanceEstimate {
  double value = 0.0;
  int n_samples = 0;  // polyhedra solutions containing this step
  int n_kept = 0;     // after the IQR filter
  double spread = 0.0;  // sample std of the kept estimates
};

struct DistanceStats {
  int combos_solved = 0;
  int combos_rejected = 0;
  int iqr_dropped = 0;
};

/// Fused distances from one array to every source position. `doas` are that
/// array's DOAs, `trajectory` the chained reference-frame estimate. Throws
/// InsufficientSteps when K < 4, SolverFailure when no acceptable polyhedron
/// contains some step.
std::vector<DistanceEstimate> estimate_distances(std::span<const Vec3> doas, std::span<const Vec3> trajectory,
                                                 std::span<const Combo> combos, const InitConfig& config,
                                                 DistanceStats* stats = nullptr);

/// Keeps values inside [Q1 - m IQR, Q3 + m IQR] (linear-interpolated
/// quartiles).
std::vector<double> iqr_filter(std::vector<double> values, double multiplier);

struct PoseEstimate {
  Mat3 rotation = Mat3::Identity();
  Vec3 position = Vec3::Zero();
  Vec3 singular_values = Vec3::Zero();
  bool reflection_corrected = false;
};

/// Rigid (R, p) minimizing sum |ref_k - (R local_k + p)|^2 via the SVD of
/// the cross-covariance. det R = +1 always. Throws DegenerateRegistration
/// for fewer than 3 points or a collinear cloud.
PoseEstimate register_array_pose(std::span<const Vec3> traj_in_ref, std::span<const Vec3> traj_in_array);

struct AsyncFit {
  double tau = 0.0;
  double delta = 0.0;
  std::vector<int> outliers;  // 0-based steps dropped in the second pass
  double residual_std = 0.0;  // first-pass sample std
};

/// Two-pass LLS of T^k - (d_i^k - d_1^k)/c = tau + t_k delta: fit, drop
/// points whose standardized residual exceeds z_cut, refit. Throws
/// InsufficientSteps (fewer than 2 distinct times) or AllOutliers.
AsyncFit fit_async(std::span<const double> tdoas, std::span<const double> dist_i, std::span<const double> dist_1,
                   std::span<const double> emission_times, double sound_speed = kDefaultSoundSpeed,
                   double z_cut = 3.0);

struct ArrayInitLog {
  int array = 0;  // 1-based
  DistanceStats distances;
  std::vector<int> timing_outliers;
  bool reflection_corrected = false;
};

struct InitLog {
  double first_distance = 0.0;
  std::vector<Combo> combos;
  DistanceStats reference_distances;
  std::vector<ArrayInitLog> arrays;
};

struct InitResult {
  StateVector state;
  InitLog log;
  /// distances[i][k] for arrays i = 0..N-1.
  std::vector<std::vector<DistanceEstimate>> distances;
};

/// Runs the four steps for arrays 2..N. Errors keep their code and name the
/// failing array.
InitResult initialize(const MeasurementSet& ms, const InitConfig& config = {});

}  // namespace micarray
