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

#include <numbers>

#include <Eigen/Core>

namespace micarray {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

constexpr double kPi = std::numbers::pi;

inline constexpr double deg2rad(double deg) { return deg * kPi / 180.0; }
inline constexpr double rad2deg(double rad) { return rad * 180.0 / kPi; }

/// ZYX Euler angles in radians. The rotation they describe is
/// R = Rz(z) * Ry(y) * Rx(x), so that R^T = Rx^T Ry^T Rz^T.
///
/// Ranges after normalization: x, z in [-pi, pi], y in [-pi/2, pi/2].
struct EulerZYX {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  Vec3 as_vector() const { return {x, y, z}; }
  static EulerZYX from_vector(const Vec3& v) { return {v.x(), v.y(), v.z()}; }

  /// Same rotation, angles folded into their canonical ranges.
  EulerZYX normalized() const;

  friend bool operator==(const EulerZYX&, const EulerZYX&) = default;
};

/// Wraps an angle into [-pi, pi].
double wrap_angle(double a);

/// Elementary rotations about the frame axes.
Mat3 rot_x(double angle);
Mat3 rot_y(double angle);
Mat3 rot_z(double angle);

/// Derivatives of the transposed elementary rotations with respect to their
/// angle, used by the analytic DOA Jacobian.
Mat3 d_rot_x_transpose(double angle);
Mat3 d_rot_y_transpose(double angle);
Mat3 d_rot_z_transpose(double angle);

Mat3 euler_to_rotation(const EulerZYX& e);

/// Inverse of euler_to_rotation. Throws NonOrthonormal when r deviates from
/// SO(3) by more than 1e-6. At gimbal lock (cos y == 0) the x angle is set to
/// zero and the remaining rotation is carried by z.
EulerZYX rotation_to_euler(const Mat3& r);

/// Max elementwise |R^T R - I| and |det R - 1|.
double orthonormality_error(const Mat3& r);

}  // namespace micarray
