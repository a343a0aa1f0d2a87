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

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "micarray/rotation.hpp"

namespace micarray {

/// Unknowns of one microphone array, expressed in the reference array frame.
struct ArrayParams {
  Vec3 position = Vec3::Zero();  // m
  EulerZYX euler;                // rad; rotation from reference frame to array frame
  double tau = 0.0;              // s, initial time offset
  double delta = 0.0;            // s/s, sampling clock difference

  Mat3 rotation() const { return euler_to_rotation(euler); }

  /// The reference array sits at the origin with identity orientation and a
  /// zero clock model.
  bool is_reference() const;
};

/// Source positions s^1..s^K and their emission times. emission_times[k] is
/// the time elapsed from the start of recording to the k-th event.
struct SourceTrajectory {
  std::vector<Vec3> positions;
  std::vector<double> emission_times;

  std::size_t size() const { return positions.size(); }

  /// Throws DimensionMismatch / DegenerateTiming when K < 1, the two lists
  /// disagree in length, or the times are not strictly increasing.
  void validate() const;
};

/// Arrays (index 0 is the reference) plus the source trajectory.
struct Geometry {
  std::vector<ArrayParams> arrays;
  SourceTrajectory trajectory;

  int n_arrays() const { return static_cast<int>(arrays.size()); }
  int n_steps() const { return static_cast<int>(trajectory.size()); }

  /// Checks N >= 2, K >= 1, a zero reference array, and a valid trajectory.
  void validate() const;
};

/// Flat unknown vector: [arr_2 (p 3, euler 3, tau, delta); ...; arr_N; s^1; ...; s^K].
/// The reference array never appears in it.
class StateVector {
 public:
  static constexpr int kArrayBlock = 8;
  static constexpr int kSourceBlock = 3;

  StateVector() = default;
  StateVector(int n_arrays, int n_steps);
  StateVector(int n_arrays, int n_steps, Eigen::VectorXd values);

  static Eigen::Index dimension(int n_arrays, int n_steps) {
    return static_cast<Eigen::Index>(kArrayBlock) * (n_arrays - 1) +
           static_cast<Eigen::Index>(kSourceBlock) * n_steps;
  }

  /// Offset of array `i` (0-based, i >= 1; array 0 is the reference).
  Eigen::Index array_offset(int i) const { return kArrayBlock * static_cast<Eigen::Index>(i - 1); }
  /// Offset of source position `k` (0-based).
  Eigen::Index source_offset(int k) const {
    return kArrayBlock * static_cast<Eigen::Index>(n_arrays_ - 1) + kSourceBlock * static_cast<Eigen::Index>(k);
  }

  int n_arrays() const { return n_arrays_; }
  int n_steps() const { return n_steps_; }
  Eigen::Index size() const { return values_.size(); }

  const Eigen::VectorXd& values() const { return values_; }
  Eigen::VectorXd& values() { return values_; }

  ArrayParams array(int i) const;
  Vec3 source(int k) const { return values_.segment<3>(source_offset(k)); }

  void set_array(int i, const ArrayParams& a);
  void set_source(int k, const Vec3& s) { values_.segment<3>(source_offset(k)) = s; }

  /// Folds every Euler triple into its canonical range. Does not change the
  /// rotations the state describes.
  void normalize_angles();

  friend bool operator==(const StateVector& a, const StateVector& b) {
    return a.n_arrays_ == b.n_arrays_ && a.n_steps_ == b.n_steps_ && a.values_ == b.values_;
  }

 private:
  int n_arrays_ = 0;
  int n_steps_ = 0;
  Eigen::VectorXd values_;
};

/// `arrays` excludes the reference array (it holds arrays 2..N).
StateVector pack_state(std::span<const ArrayParams> arrays, const SourceTrajectory& traj);

/// Convenience overload dropping geometry.arrays[0].
StateVector pack_state(const Geometry& geometry);

/// Rebuilds the full geometry, prepending the reference array. Throws
/// DimensionMismatch when the vector length disagrees with (N, K) or the
/// number of emission times differs from K.
Geometry unpack_state(const StateVector& v, std::span<const double> emission_times);

}  // namespace micarray
