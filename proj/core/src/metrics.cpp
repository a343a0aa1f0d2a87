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

#include "micarray/metrics.hpp"

#include <cmath>
#include <limits>

#include <Eigen/Geometry>

#include "micarray/errors.hpp"

namespace micarray {

double orientation_error(const Mat3& estimate, const Mat3& truth) {
  // Angle between R_hat v and R v, same value as the arccos form.
  const Vec3 v = Vec3::Ones();
  const Vec3 a = estimate * v;
  const Vec3 b = truth * v;
  return std::atan2(a.cross(b).norm(), a.dot(b));
}

ParameterErrors error_metrics(const StateVector& estimate, const StateVector& truth) {
  if (estimate.n_arrays() != truth.n_arrays() || estimate.n_steps() != truth.n_steps()) {
    throw Error(ErrorCode::kDimensionMismatch, "estimate and ground truth differ in N or K");
  }
  ParameterErrors e;
  for (int i = 1; i < truth.n_arrays(); ++i) {
    const auto a = estimate.array(i);
    const auto t = truth.array(i);
    e.position.push_back((a.position - t.position).norm());
    e.orientation.push_back(orientation_error(a.rotation(), t.rotation()));
    e.offset.push_back(a.tau - t.tau);
    e.clock.push_back(a.delta - t.delta);
  }
  for (int k = 0; k < truth.n_steps(); ++k) e.source.push_back((estimate.source(k) - truth.source(k)).norm());
  return e;
}

double rmse(std::span<const double> errors) {
  if (errors.empty()) return std::numeric_limits<double>::quiet_NaN();
  double ss = 0.0;
  for (double x : errors) ss += x * x;
  return std::sqrt(ss / static_cast<double>(errors.size()));
}

RmseRow rmse(std::span<const ParameterErrors> trials) {
  std::vector<double> pos, ori, off, clk, src;
  for (const auto& t : trials) {
    pos.insert(pos.end(), t.position.begin(), t.position.end());
    ori.insert(ori.end(), t.orientation.begin(), t.orientation.end());
    off.insert(off.end(), t.offset.begin(), t.offset.end());
    clk.insert(clk.end(), t.clock.begin(), t.clock.end());
    src.insert(src.end(), t.source.begin(), t.source.end());
  }
  RmseRow row;
  row.position_m = rmse(pos);
  row.orientation_deg = rad2deg(rmse(ori));
  row.offset_ms = rmse(off) * 1e3;
  row.clock_us = rmse(clk) * 1e6;
  row.source_m = rmse(src);
  return row;
}

}  // namespace micarray
