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
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "micarray/state.hpp"

namespace micarray {

/// Speed of sound in air, m/s.
constexpr double kDefaultSoundSpeed = 346.0;

/// Measurements of one sound event. doas[0] is the reference array's DOA;
/// tdoas[j] belongs to array j + 1 (the reference has no TDOA).
struct StepMeasurement {
  std::vector<Vec3> doas;
  std::vector<double> tdoas;

  int n_arrays() const { return static_cast<int>(doas.size()); }

  /// Length of the flattened [d_1; T_2; d_2; ...; T_N; d_N] vector, 4N - 1.
  static Eigen::Index flat_size(int n_arrays) { return 4 * static_cast<Eigen::Index>(n_arrays) - 1; }
};

struct MeasurementSet {
  std::vector<StepMeasurement> steps;
  std::vector<Vec3> rel_displacements;  // K - 1 entries, s^{k+1} - s^k + noise
  std::vector<double> emission_times;

  int n_arrays() const { return steps.empty() ? 0 : steps.front().n_arrays(); }
  int n_steps() const { return static_cast<int>(steps.size()); }

  /// Length of the stacked vector z: (4N - 1)K + 3(K - 1).
  static Eigen::Index stacked_size(int n_arrays, int n_steps);

  /// Throws DimensionMismatch / DegenerateTiming when counts are inconsistent.
  void validate() const;
};

/// Measurement noise. tdoa_var and the two covariances enter the weight
/// matrix; the angular standard deviations drive DOA noise injection, which
/// perturbs azimuth and elevation rather than the raw 3-vector.
struct NoiseModel {
  double tdoa_var = 0.0;              // s^2
  Mat3 doa_cov = Mat3::Zero();        // unitless^2
  Mat3 rel_cov = Mat3::Zero();        // m^2
  double doa_azimuth_std = 0.0;       // rad
  double doa_elevation_std = 0.0;     // rad

  /// Isotropic model: doa_cov = sigma^2 I with sigma the angular STD in
  /// radians, rel_cov = rel_std^2 I.
  static NoiseModel isotropic(double tdoa_std, double doa_angle_std, double rel_std);

  /// TDOA 0.067 ms, DOA azimuth/elevation 5 deg, displacement 0.03 m.
  static NoiseModel table_defaults();

  /// Throws InvalidSpec unless tdoa_var > 0 and both covariances are SPD.
  void validate_for_weighting() const;

  bool is_zero() const;
};

/// Unit direction of `source` seen from `array`, in the array's frame.
/// Throws DegenerateGeometry when the source is within 1e-9 m of the array.
Vec3 doa(const ArrayParams& array, const Vec3& source);

/// Inter-array TDOA of array i against the reference:
/// |s - p_i| / c - ref_distance / c + tau_i + emission_time * delta_i.
double tdoa(const ArrayParams& array, double ref_distance, const Vec3& source,
            double emission_time, double sound_speed = kDefaultSoundSpeed);

/// Noise-free measurements of a geometry.
MeasurementSet predict_measurements(const Geometry& geometry, double sound_speed = kDefaultSoundSpeed);

/// Adds Gaussian noise. DOAs are perturbed in (azimuth, elevation) and
/// renormalized; TDOAs and displacements get additive noise. Deterministic
/// for a given seed. Components with zero variance are left untouched.
MeasurementSet add_noise(const MeasurementSet& ms, const NoiseModel& noise, std::uint64_t seed);

/// Renormalizes every DOA to unit length (used on ingestion).
void renormalize_doas(MeasurementSet& ms);

/// z = [y^1; s_delta^1; y^2; ...; y^K], each y^k = [d_1; T_2; d_2; ...].
Eigen::VectorXd stack(const MeasurementSet& ms);

/// Per-step covariance P = diag(Lambda, diag_{N-1}(lambda, Lambda)).
Eigen::MatrixXd step_covariance(const NoiseModel& noise, int n_arrays);

/// W = diag(diag_{K-1}(P, Q), P), block order matching stack().
Eigen::SparseMatrix<double> weight_matrix(const NoiseModel& noise, int n_arrays, int n_steps);

}  // namespace micarray
