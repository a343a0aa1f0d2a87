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

#include "micarray/state.hpp"

#include <sstream>
#include <utility>

#include "micarray/errors.hpp"

namespace micarray {

bool ArrayParams::is_reference() const {
  return position.isZero(0.0) && euler == EulerZYX{} && tau == 0.0 && delta == 0.0;
}

void SourceTrajectory::validate() const {
  if (positions.empty()) {
    throw Error(ErrorCode::kDimensionMismatch, "trajectory needs at least one source position");
  }
  if (positions.size() != emission_times.size()) {
    std::ostringstream msg;
    msg << positions.size() << " source positions but " << emission_times.size()
        << " emission times";
    throw Error(ErrorCode::kDimensionMismatch, msg.str());
  }
  for (std::size_t k = 1; k < emission_times.size(); ++k) {
    if (!(emission_times[k] > emission_times[k - 1])) {
      std::ostringstream msg;
      msg << "emission times must be strictly increasing (step " << k + 1 << ")";
      throw Error(ErrorCode::kDegenerateTiming, msg.str());
    }
  }
}

void Geometry::validate() const {
  if (arrays.size() < 2) {
    throw Error(ErrorCode::kDimensionMismatch, "need at least two arrays");
  }
  if (!arrays.front().is_reference()) {
    throw Error(ErrorCode::kInvalidSpec, "array 1 must be the zero reference array");
  }
  trajectory.validate();
}

StateVector::StateVector(int n_arrays, int n_steps)
    : StateVector(n_arrays, n_steps, Eigen::VectorXd::Zero(dimension(n_arrays, n_steps))) {}

StateVector::StateVector(int n_arrays, int n_steps, Eigen::VectorXd values)
    : n_arrays_(n_arrays), n_steps_(n_steps), values_(std::move(values)) {
  if (n_arrays < 2 || n_steps < 1) {
    throw Error(ErrorCode::kDimensionMismatch, "state needs N >= 2 and K >= 1");
  }
  if (values_.size() != dimension(n_arrays, n_steps)) {
    std::ostringstream msg;
    msg << "state of length " << values_.size() << " does not match 8(N-1)+3K = "
        << dimension(n_arrays, n_steps) << " for N=" << n_arrays << ", K=" << n_steps;
    throw Error(ErrorCode::kDimensionMismatch, msg.str());
  }
}

ArrayParams StateVector::array(int i) const {
  const auto off = array_offset(i);
  ArrayParams a;
  a.position = values_.segment<3>(off);
  a.euler = EulerZYX::from_vector(values_.segment<3>(off + 3));
  a.tau = values_[off + 6];
  a.delta = values_[off + 7];
  return a;
}

void StateVector::set_array(int i, const ArrayParams& a) {
  const auto off = array_offset(i);
  values_.segment<3>(off) = a.position;
  values_.segment<3>(off + 3) = a.euler.as_vector();
  values_[off + 6] = a.tau;
  values_[off + 7] = a.delta;
}

void StateVector::normalize_angles() {
  for (int i = 1; i < n_arrays_; ++i) {
    const auto off = array_offset(i) + 3;
    values_.segment<3>(off) = EulerZYX::from_vector(values_.segment<3>(off)).normalized().as_vector();
  }
}

StateVector pack_state(std::span<const ArrayParams> arrays, const SourceTrajectory& traj) {
  if (traj.positions.empty()) {
    throw Error(ErrorCode::kDimensionMismatch, "trajectory is empty");
  }
  const int n = static_cast<int>(arrays.size()) + 1;
  const int k = static_cast<int>(traj.positions.size());
  StateVector v(n, k);
  for (int i = 1; i < n; ++i) v.set_array(i, arrays[i - 1]);
  for (int j = 0; j < k; ++j) v.set_source(j, traj.positions[j]);
  return v;
}

StateVector pack_state(const Geometry& geometry) {
  if (geometry.arrays.empty()) {
    throw Error(ErrorCode::kDimensionMismatch, "geometry has no arrays");
  }
  return pack_state(std::span(geometry.arrays).subspan(1), geometry.trajectory);
}

Geometry unpack_state(const StateVector& v, std::span<const double> emission_times) {
  if (v.size() != StateVector::dimension(v.n_arrays(), v.n_steps())) {
    throw Error(ErrorCode::kDimensionMismatch, "state length disagrees with N, K");
  }
  if (static_cast<int>(emission_times.size()) != v.n_steps()) {
    std::ostringstream msg;
    msg << "expected " << v.n_steps() << " emission times, got " << emission_times.size();
    throw Error(ErrorCode::kDimensionMismatch, msg.str());
  }
  Geometry g;
  g.arrays.resize(v.n_arrays());
  for (int i = 1; i < v.n_arrays(); ++i) g.arrays[i] = v.array(i);
  g.trajectory.positions.reserve(v.n_steps());
  for (int k = 0; k < v.n_steps(); ++k) g.trajectory.positions.push_back(v.source(k));
  g.trajectory.emission_times.assign(emission_times.begin(), emission_times.end());
  return g;
}

}  // namespace micarray
