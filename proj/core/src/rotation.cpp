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

#include "micarray/rotation.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <Eigen/LU>

#include "micarray/errors.hpp"

namespace micarray {

namespace {

// Below this |cos(y)| the x and z axes are treated as aligned.
constexpr double kGimbalCosine = 1e-12;
constexpr double kOrthonormalTolerance = 1e-6;

}  // namespace

double wrap_angle(double a) {
  if (a >= -kPi && a <= kPi) return a;
  a = std::remainder(a, 2.0 * kPi);
  // remainder() returns values in [-pi, pi]; keep +pi stable.
  return a;
}

EulerZYX EulerZYX::normalized() const {
  double nx = wrap_angle(x);
  double ny = wrap_angle(y);
  double nz = wrap_angle(z);
  // (x, y, z) and (x + pi, pi - y, z + pi) describe the same rotation.
  if (ny > kPi / 2) {
    ny = kPi - ny;
    nx = wrap_angle(nx + kPi);
    nz = wrap_angle(nz + kPi);
  } else if (ny < -kPi / 2) {
    ny = -kPi - ny;
    nx = wrap_angle(nx + kPi);
    nz = wrap_angle(nz + kPi);
  }
  return {nx, ny, nz};
}

Mat3 rot_x(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Mat3 r;
  r << 1, 0, 0,
       0, c, -s,
       0, s, c;
  return r;
}

Mat3 rot_y(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Mat3 r;
  r << c, 0, s,
       0, 1, 0,
       -s, 0, c;
  return r;
}

Mat3 rot_z(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Mat3 r;
  r << c, -s, 0,
       s, c, 0,
       0, 0, 1;
  return r;
}

Mat3 d_rot_x_transpose(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Mat3 r;
  r << 0, 0, 0,
       0, -s, c,
       0, -c, -s;
  return r;
}

Mat3 d_rot_y_transpose(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Mat3 r;
  r << -s, 0, -c,
       0, 0, 0,
       c, 0, -s;
  return r;
}

Mat3 d_rot_z_transpose(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Mat3 r;
  r << -s, c, 0,
       -c, -s, 0,
       0, 0, 0;
  return r;
}

Mat3 euler_to_rotation(const EulerZYX& e) {
  return rot_z(e.z) * rot_y(e.y) * rot_x(e.x);
}

double orthonormality_error(const Mat3& r) {
  const double ortho = (r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff();
  return std::max(ortho, std::abs(r.determinant() - 1.0));
}

EulerZYX rotation_to_euler(const Mat3& r) {
  const double err = orthonormality_error(r);
  if (!(err <= kOrthonormalTolerance)) {
    std::ostringstream msg;
    msg << "rotation deviates from SO(3) by " << err;
    throw Error(ErrorCode::kNonOrthonormal, msg.str());
  }
  // R = Rz Ry Rx:
  //   r20 = -sin(y),  r21 = cos(y) sin(x),  r22 = cos(y) cos(x)
  //   r00 = cos(z) cos(y),  r10 = sin(z) cos(y)
  const double cy = std::hypot(r(0, 0), r(1, 0));
  const double y = std::atan2(-r(2, 0), cy);
  double x = 0.0;
  if (cy > kGimbalCosine) {
    x = std::atan2(r(2, 1), r(2, 2));
  }
  // With x fixed, z follows from the upper-right 2x2 block without dividing
  // by cos(y), which keeps the matrix round trip exact near gimbal lock.
  const double sx = std::sin(x), cx = std::cos(x);
  const double sz = sx * r(0, 2) - cx * r(0, 1);
  const double cz = cx * r(1, 1) - sx * r(1, 2);
  const double z = std::atan2(sz, cz);
  return EulerZYX{x, y, z}.normalized();
}

}  // namespace micarray
