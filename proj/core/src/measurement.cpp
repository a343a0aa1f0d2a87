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

#include "micarray/measurement.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include <Eigen/Cholesky>

#include "micarray/errors.hpp"

namespace micarray {

namespace {

constexpr double kMinSourceDistance = 1e-9;

bool is_spd(const Mat3& m) {
  const double asym = (m - m.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-12 * std::max(1.0, m.cwiseAbs().maxCoeff())) return false;
  Eigen::LLT<Mat3> llt(m);
  return llt.info() == Eigen::Success;
}

}  // namespace

Eigen::Index MeasurementSet::stacked_size(int n_arrays, int n_steps) {
  return StepMeasurement::flat_size(n_arrays) * n_steps + 3 * static_cast<Eigen::Index>(n_steps - 1);
}

void MeasurementSet::validate() const {
  if (steps.empty()) throw Error(ErrorCode::kDimensionMismatch, "measurement set has no steps");
  const int n = n_arrays();
  const int k = n_steps();
  if (n < 2) throw Error(ErrorCode::kDimensionMismatch, "need at least two arrays");
  for (int j = 0; j < k; ++j) {
    if (steps[j].n_arrays() != n || static_cast<int>(steps[j].tdoas.size()) != n - 1) {
      std::ostringstream msg;
      msg << "step " << j + 1 << " has " << steps[j].doas.size() << " DOAs and "
          << steps[j].tdoas.size() << " TDOAs; expected " << n << " and " << n - 1;
      throw Error(ErrorCode::kDimensionMismatch, msg.str());
    }
  }
  if (static_cast<int>(rel_displacements.size()) != k - 1) {
    std::ostringstream msg;
    msg << "expected " << k - 1 << " relative displacements, got " << rel_displacements.size();
    throw Error(ErrorCode::kDimensionMismatch, msg.str());
  }
  if (static_cast<int>(emission_times.size()) != k) {
    std::ostringstream msg;
    msg << "expected " << k << " emission times, got " << emission_times.size();
    throw Error(ErrorCode::kDimensionMismatch, msg.str());
  }
  for (int j = 1; j < k; ++j) {
    if (!(emission_times[j] > emission_times[j - 1])) {
      throw Error(ErrorCode::kDegenerateTiming, "emission times must be strictly increasing");
    }
  }
}

NoiseModel NoiseModel::isotropic(double tdoa_std, double doa_angle_std, double rel_std) {
  NoiseModel n;
  n.tdoa_var = tdoa_std * tdoa_std;
  n.doa_cov = Mat3::Identity() * doa_angle_std * doa_angle_std;
  n.rel_cov = Mat3::Identity() * rel_std * rel_std;
  n.doa_azimuth_std = doa_angle_std;
  n.doa_elevation_std = doa_angle_std;
  return n;
}

NoiseModel NoiseModel::table_defaults() {
  return isotropic(0.067e-3, deg2rad(5.0), 0.03);
}

void NoiseModel::validate_for_weighting() const {
  if (!(tdoa_var > 0.0)) throw Error(ErrorCode::kInvalidSpec, "TDOA variance must be positive");
  if (!is_spd(doa_cov)) throw Error(ErrorCode::kInvalidSpec, "DOA covariance must be symmetric positive definite");
  if (!is_spd(rel_cov)) {
    throw Error(ErrorCode::kInvalidSpec, "displacement covariance must be symmetric positive definite");
  }
}

bool NoiseModel::is_zero() const {
  return tdoa_var == 0.0 && rel_cov.isZero(0.0) && doa_azimuth_std == 0.0 && doa_elevation_std == 0.0;
}

Vec3 doa(const ArrayParams& array, const Vec3& source) {
  const Vec3 diff = source - array.position;
  const double dist = diff.norm();
  if (!(dist >= kMinSourceDistance)) {
    throw Error(ErrorCode::kDegenerateGeometry, "source coincides with an array position");
  }
  return array.rotation().transpose() * (diff / dist);
}

double tdoa(const ArrayParams& array, double ref_distance, const Vec3& source, double emission_time,
            double sound_speed) {
  const double dist = (source - array.position).norm();
  return dist / sound_speed - ref_distance / sound_speed + array.tau + emission_time * array.delta;
}

MeasurementSet predict_measurements(const Geometry& geometry, double sound_speed) {
  geometry.validate();
  const int n = geometry.n_arrays();
  const int k = geometry.n_steps();
  const auto& traj = geometry.trajectory;

  MeasurementSet ms;
  ms.emission_times = traj.emission_times;
  ms.steps.resize(k);
  for (int j = 0; j < k; ++j) {
    const Vec3& s = traj.positions[j];
    const double ref_distance = s.norm();
    auto& step = ms.steps[j];
    step.doas.reserve(n);
    step.tdoas.reserve(n - 1);
    for (int i = 0; i < n; ++i) {
      step.doas.push_back(doa(geometry.arrays[i], s));
      if (i > 0) {
        step.tdoas.push_back(tdoa(geometry.arrays[i], ref_distance, s, traj.emission_times[j], sound_speed));
      }
    }
  }
  ms.rel_displacements.reserve(k > 0 ? k - 1 : 0);
  for (int j = 0; j + 1 < k; ++j) {
    ms.rel_displacements.push_back(traj.positions[j + 1] - traj.positions[j]);
  }
  return ms;
}

MeasurementSet add_noise(const MeasurementSet& ms, const NoiseModel& noise, std::uint64_t seed) {
  MeasurementSet out = ms;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  const double tdoa_std = std::sqrt(noise.tdoa_var);
  const bool doa_noise = noise.doa_azimuth_std > 0.0 || noise.doa_elevation_std > 0.0;

  for (auto& step : out.steps) {
    if (doa_noise) {
      for (auto& d : step.doas) {
        const double az = std::atan2(d.y(), d.x()) + noise.doa_azimuth_std * normal(rng);
        const double el = std::atan2(d.z(), std::hypot(d.x(), d.y())) + noise.doa_elevation_std * normal(rng);
        d = Vec3(std::cos(el) * std::cos(az), std::cos(el) * std::sin(az), std::sin(el)).normalized();
      }
    }
    if (tdoa_std > 0.0) {
      for (auto& t : step.tdoas) t += tdoa_std * normal(rng);
    }
  }

  if (!noise.rel_cov.isZero(0.0)) {
    Eigen::LLT<Mat3> llt(noise.rel_cov);
    if (llt.info() != Eigen::Success) {
      throw Error(ErrorCode::kInvalidSpec, "displacement covariance is not positive definite");
    }
    const Mat3 chol = llt.matrixL();
    for (auto& w : out.rel_displacements) {
      const Vec3 n(normal(rng), normal(rng), normal(rng));
      w += chol * n;
    }
  }
  return out;
}

void renormalize_doas(MeasurementSet& ms) {
  for (auto& step : ms.steps) {
    for (auto& d : step.doas) {
      const double norm = d.norm();
      if (!(norm > 0.0)) throw Error(ErrorCode::kParseError, "zero-length DOA vector");
      d /= norm;
    }
  }
}

Eigen::VectorXd stack(const MeasurementSet& ms) {
  ms.validate();
  const int n = ms.n_arrays();
  const int k = ms.n_steps();
  Eigen::VectorXd z(MeasurementSet::stacked_size(n, k));
  Eigen::Index row = 0;
  for (int j = 0; j < k; ++j) {
    const auto& step = ms.steps[j];
    z.segment<3>(row) = step.doas[0];
    row += 3;
    for (int i = 1; i < n; ++i) {
      z[row++] = step.tdoas[i - 1];
      z.segment<3>(row) = step.doas[i];
      row += 3;
    }
    if (j + 1 < k) {
      z.segment<3>(row) = ms.rel_displacements[j];
      row += 3;
    }
  }
  return z;
}

Eigen::MatrixXd step_covariance(const NoiseModel& noise, int n_arrays) {
  const auto dim = StepMeasurement::flat_size(n_arrays);
  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(dim, dim);
  p.block<3, 3>(0, 0) = noise.doa_cov;
  Eigen::Index row = 3;
  for (int i = 1; i < n_arrays; ++i) {
    p(row, row) = noise.tdoa_var;
    p.block<3, 3>(row + 1, row + 1) = noise.doa_cov;
    row += 4;
  }
  return p;
}

Eigen::SparseMatrix<double> weight_matrix(const NoiseModel& noise, int n_arrays, int n_steps) {
  if (n_arrays < 2 || n_steps < 1) {
    throw Error(ErrorCode::kDimensionMismatch, "weight matrix needs N >= 2 and K >= 1");
  }
  const Eigen::MatrixXd p = step_covariance(noise, n_arrays);
  const auto dim = MeasurementSet::stacked_size(n_arrays, n_steps);
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(static_cast<std::size_t>(n_steps) * (16 * n_arrays + 9));
  auto put_block = [&triplets](Eigen::Index offset, const Eigen::MatrixXd& block) {
    for (Eigen::Index r = 0; r < block.rows(); ++r) {
      for (Eigen::Index c = 0; c < block.cols(); ++c) {
        if (block(r, c) != 0.0) triplets.emplace_back(offset + r, offset + c, block(r, c));
      }
    }
  };
  Eigen::Index row = 0;
  for (int j = 0; j < n_steps; ++j) {
    put_block(row, p);
    row += p.rows();
    if (j + 1 < n_steps) {
      put_block(row, noise.rel_cov);
      row += 3;
    }
  }
  Eigen::SparseMatrix<double> w(dim, dim);
  w.setFromTriplets(triplets.begin(), triplets.end());
  return w;
}

}  // namespace micarray
