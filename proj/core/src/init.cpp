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

#include "micarray/init.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include <Eigen/Geometry>
#include <Eigen/SVD>

#include "micarray/errors.hpp"

namespace micarray {

namespace {

double angle_between(const Vec3& a, const Vec3& b) {
  // atan2 form stays accurate near 0 and pi.
  return std::atan2(a.cross(b).norm(), a.dot(b));
}

std::uint64_t binomial(int n, int k) {
  if (k < 0 || k > n) return 0;
  std::uint64_t r = 1;
  for (int j = 1; j <= k; ++j) r = r * static_cast<std::uint64_t>(n - k + j) / static_cast<std::uint64_t>(j);
  return r;
}

double quantile_sorted(const std::vector<double>& v, double p) {
  const double h = (static_cast<double>(v.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

struct LineFit {
  double intercept = 0.0;
  double slope = 0.0;
};

LineFit fit_line(const std::vector<double>& t, const std::vector<double>& y) {
  const double n = static_cast<double>(t.size());
  const double tm = std::accumulate(t.begin(), t.end(), 0.0) / n;
  const double ym = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double stt = 0.0;
  double sty = 0.0;
  for (std::size_t k = 0; k < t.size(); ++k) {
    stt += (t[k] - tm) * (t[k] - tm);
    sty += (t[k] - tm) * (y[k] - ym);
  }
  if (!(stt > 0.0)) throw Error(ErrorCode::kInsufficientSteps, "clock fit needs two distinct emission times");
  LineFit f;
  f.slope = sty / stt;
  f.intercept = ym - f.slope * tm;
  return f;
}

[[noreturn]] void rethrow_for_array(const Error& e, int array) {
  std::ostringstream msg;
  msg << "array " << array << ": " << e.message();
  throw Error(e.code(), msg.str());
}

}  // namespace

Triangulation triangulate_first_position(const Vec3& doa1, const Vec3& doa2, const Vec3& rel_disp) {
  const double n1 = doa1.norm();
  const double n2 = doa2.norm();
  if (!(n1 > 0.0) || !(n2 > 0.0)) {
    throw Error(ErrorCode::kDegenerateTriangulation, "zero-length DOA");
  }
  const double apex = angle_between(doa1, doa2);
  if (std::sin(apex) < std::sin(deg2rad(1.0))) {
    throw Error(ErrorCode::kDegenerateTriangulation, "first two reference DOAs are (anti-)parallel");
  }
  const double len = rel_disp.norm();
  Triangulation t;
  t.distance = len * std::sin(angle_between(doa2, rel_disp)) / std::sin(apex);
  t.position = doa1 / n1 * t.distance;
  return t;
}

Triangulation triangulate_first_position(std::span<const Vec3> ref_doas, std::span<const Vec3> rel_displacements) {
  if (ref_doas.size() < 2 || rel_displacements.size() + 1 != ref_doas.size()) {
    throw Error(ErrorCode::kInsufficientSteps, "triangulation needs K >= 2 DOAs and K - 1 displacements");
  }
  std::vector<double> ranges;
  Vec3 offset = Vec3::Zero();
  for (std::size_t j = 1; j < ref_doas.size(); ++j) {
    offset += rel_displacements[j - 1];
    try {
      ranges.push_back(triangulate_first_position(ref_doas[0], ref_doas[j], offset).distance);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kDegenerateTriangulation) throw;
    }
  }
  if (ranges.empty()) {
    throw Error(ErrorCode::kDegenerateTriangulation, "every reference DOA is (anti-)parallel to the first one");
  }
  const auto mid = ranges.begin() + static_cast<std::ptrdiff_t>(ranges.size() / 2);
  std::nth_element(ranges.begin(), mid, ranges.end());
  double median = *mid;
  if (ranges.size() % 2 == 0) median = 0.5 * (median + *std::max_element(ranges.begin(), mid));
  return {median, ref_doas[0].normalized() * median};
}

std::vector<Vec3> chain_positions(const Vec3& first, std::span<const Vec3> rel_displacements) {
  std::vector<Vec3> out;
  out.reserve(rel_displacements.size() + 1);
  out.push_back(first);
  for (const auto& w : rel_displacements) out.push_back(out.back() + w);
  return out;
}

std::vector<Combo> select_combos(int n_steps, int per_step, std::uint64_t seed) {
  if (n_steps < 4) throw Error(ErrorCode::kInsufficientSteps, "polyhedra need K >= 4");
  std::set<Combo> chosen;
  if (per_step <= 0 || binomial(n_steps - 1, 3) <= static_cast<std::uint64_t>(per_step)) {
    for (int a = 0; a < n_steps; ++a)
      for (int b = a + 1; b < n_steps; ++b)
        for (int c = b + 1; c < n_steps; ++c)
          for (int d = c + 1; d < n_steps; ++d) chosen.insert({a, b, c, d});
    return {chosen.begin(), chosen.end()};
  }

  std::mt19937_64 rng(seed);
  std::vector<int> count(n_steps, 0);
  std::vector<int> others;
  others.reserve(n_steps - 1);
  for (int k = 0; k < n_steps; ++k) {
    others.clear();
    for (int j = 0; j < n_steps; ++j) {
      if (j != k) others.push_back(j);
    }
    while (count[k] < per_step) {
      // Partial Fisher-Yates for three distinct partners.
      for (int j = 0; j < 3; ++j) {
        std::uniform_int_distribution<int> pick(j, static_cast<int>(others.size()) - 1);
        std::swap(others[j], others[pick(rng)]);
      }
      Combo c{k, others[0], others[1], others[2]};
      std::sort(c.begin(), c.end());
      if (chosen.insert(c).second) {
        for (int idx : c) ++count[idx];
      }
    }
  }
  return {chosen.begin(), chosen.end()};
}

std::vector<double> iqr_filter(std::vector<double> values, double multiplier) {
  if (values.size() < 4) {
    std::sort(values.begin(), values.end());
    return values;
  }
  std::sort(values.begin(), values.end());
  const double q1 = quantile_sorted(values, 0.25);
  const double q3 = quantile_sorted(values, 0.75);
  const double lo = q1 - multiplier * (q3 - q1);
  const double hi = q3 + multiplier * (q3 - q1);
  std::vector<double> kept;
  kept.reserve(values.size());
  for (double v : values) {
    if (v >= lo && v <= hi) kept.push_back(v);
  }
  return kept;
}

std::vector<DistanceEstimate> estimate_distances(std::span<const Vec3> doas, std::span<const Vec3> trajectory,
                                                 std::span<const Combo> combos, const InitConfig& config,
                                                 DistanceStats* stats) {
  const int k = static_cast<int>(trajectory.size());
  if (k < 4) throw Error(ErrorCode::kInsufficientSteps, "distance estimation needs K >= 4");
  if (static_cast<int>(doas.size()) != k) {
    throw Error(ErrorCode::kDimensionMismatch, "DOA count differs from trajectory length");
  }

  DistanceStats local;
  std::vector<std::vector<double>> samples(k);
  for (const auto& combo : combos) {
    std::array<Vec3, 4> u;
    std::array<Vec3, 4> pts;
    for (int j = 0; j < 4; ++j) {
      if (combo[j] < 0 || combo[j] >= k) throw Error(ErrorCode::kDimensionMismatch, "combo index out of range");
      u[j] = doas[combo[j]];
      pts[j] = trajectory[combo[j]];
    }
    const auto sol = solve_tetrahedron(u, pts, config.nls);
    const bool finite = std::all_of(sol.distances.begin(), sol.distances.end(),
                                    [](double d) { return std::isfinite(d) && d > 0.0; });
    if (!finite || !(sol.relative_residual <= config.max_relative_residual)) {
      ++local.combos_rejected;
      continue;
    }
    ++local.combos_solved;
    for (int j = 0; j < 4; ++j) samples[combo[j]].push_back(sol.distances[j]);
  }

  std::vector<DistanceEstimate> out(k);
  for (int j = 0; j < k; ++j) {
    if (samples[j].empty()) {
      std::ostringstream msg;
      msg << "no polyhedron containing step " << j + 1 << " met the residual threshold";
      throw Error(ErrorCode::kSolverFailure, msg.str());
    }
    const auto kept = iqr_filter(samples[j], config.iqr_multiplier);
    auto& e = out[j];
    e.n_samples = static_cast<int>(samples[j].size());
    e.n_kept = static_cast<int>(kept.size());
    local.iqr_dropped += e.n_samples - e.n_kept;
    e.value = std::accumulate(kept.begin(), kept.end(), 0.0) / static_cast<double>(kept.size());
    if (kept.size() > 1) {
      double ss = 0.0;
      for (double v : kept) ss += (v - e.value) * (v - e.value);
      e.spread = std::sqrt(ss / static_cast<double>(kept.size() - 1));
    }
  }
  if (stats) *stats = local;
  return out;
}

PoseEstimate register_array_pose(std::span<const Vec3> traj_in_ref, std::span<const Vec3> traj_in_array) {
  if (traj_in_ref.size() != traj_in_array.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "point clouds differ in size");
  }
  if (traj_in_ref.size() < 3) {
    throw Error(ErrorCode::kDegenerateRegistration, "registration needs at least three points");
  }
  const auto n = static_cast<double>(traj_in_ref.size());
  Vec3 p = Vec3::Zero();
  Vec3 q = Vec3::Zero();
  for (std::size_t k = 0; k < traj_in_ref.size(); ++k) {
    p += traj_in_ref[k];
    q += traj_in_array[k];
  }
  p /= n;
  q /= n;
  Mat3 omega = Mat3::Zero();
  for (std::size_t k = 0; k < traj_in_ref.size(); ++k) {
    omega += (traj_in_ref[k] - p) * (traj_in_array[k] - q).transpose();
  }

  Eigen::JacobiSVD<Mat3> svd(omega, Eigen::ComputeFullU | Eigen::ComputeFullV);
  PoseEstimate pose;
  pose.singular_values = svd.singularValues();
  const double s0 = pose.singular_values[0];
  if (!(s0 > 0.0) || pose.singular_values[1] <= 1e-8 * s0) {
    throw Error(ErrorCode::kDegenerateRegistration, "source positions are collinear");
  }
  Mat3 v = svd.matrixV();
  Mat3 r = svd.matrixU() * v.transpose();
  if (r.determinant() < 0.0) {
    v.col(2) *= -1.0;
    r = svd.matrixU() * v.transpose();
    pose.reflection_corrected = true;
  }
  pose.rotation = r;
  pose.position = p - r * q;
  return pose;
}

AsyncFit fit_async(std::span<const double> tdoas, std::span<const double> dist_i, std::span<const double> dist_1,
                   std::span<const double> emission_times, double sound_speed, double z_cut) {
  const std::size_t k = tdoas.size();
  if (dist_i.size() != k || dist_1.size() != k || emission_times.size() != k) {
    throw Error(ErrorCode::kDimensionMismatch, "clock fit inputs differ in length");
  }
  if (k < 2) throw Error(ErrorCode::kInsufficientSteps, "clock fit needs at least two steps");

  std::vector<double> t(emission_times.begin(), emission_times.end());
  std::vector<double> y(k);
  for (std::size_t j = 0; j < k; ++j) y[j] = tdoas[j] - (dist_i[j] / sound_speed - dist_1[j] / sound_speed);

  AsyncFit out;
  const LineFit first = fit_line(t, y);
  std::vector<double> res(k);
  for (std::size_t j = 0; j < k; ++j) res[j] = y[j] - first.intercept - first.slope * t[j];
  const double mean = std::accumulate(res.begin(), res.end(), 0.0) / static_cast<double>(k);
  double ss = 0.0;
  for (double r : res) ss += (r - mean) * (r - mean);
  out.residual_std = k > 1 ? std::sqrt(ss / static_cast<double>(k - 1)) : 0.0;

  std::vector<double> t2;
  std::vector<double> y2;
  for (std::size_t j = 0; j < k; ++j) {
    const bool outlier = out.residual_std > 0.0 && std::abs(res[j] - mean) / out.residual_std > z_cut;
    if (outlier) {
      out.outliers.push_back(static_cast<int>(j));
    } else {
      t2.push_back(t[j]);
      y2.push_back(y[j]);
    }
  }
  if (t2.size() < 2) throw Error(ErrorCode::kAllOutliers, "fewer than two TDOAs survived outlier rejection");
  const LineFit second = out.outliers.empty() ? first : fit_line(t2, y2);
  out.tau = second.intercept;
  out.delta = second.slope;
  return out;
}

InitResult initialize(const MeasurementSet& ms, const InitConfig& config) {
  ms.validate();
  const int n = ms.n_arrays();
  const int k = ms.n_steps();
  if (k < 4) throw Error(ErrorCode::kInsufficientSteps, "initialization needs K >= 4");

  InitResult res;
  std::vector<Vec3> ref_doas(k);
  for (int j = 0; j < k; ++j) ref_doas[j] = ms.steps[j].doas[0];
  const auto tri = triangulate_first_position(ref_doas, ms.rel_displacements);
  res.log.first_distance = tri.distance;
  const auto traj = chain_positions(tri.position, ms.rel_displacements);

  res.log.combos = select_combos(k, config.combos_per_step, config.seed);
  res.distances.resize(n);

  auto doas_of = [&](int i) {
    std::vector<Vec3> d(k);
    for (int j = 0; j < k; ++j) d[j] = ms.steps[j].doas[i].normalized();
    return d;
  };

  try {
    res.distances[0] = estimate_distances(doas_of(0), traj, res.log.combos, config, &res.log.reference_distances);
  } catch (const Error& e) {
    rethrow_for_array(e, 1);
  }
  std::vector<double> d1(k);
  for (int j = 0; j < k; ++j) d1[j] = res.distances[0][j].value;

  std::vector<ArrayParams> arrays(n - 1);
  for (int i = 1; i < n; ++i) {
    ArrayInitLog alog;
    alog.array = i + 1;
    try {
      const auto u = doas_of(i);
      res.distances[i] = estimate_distances(u, traj, res.log.combos, config, &alog.distances);
      std::vector<Vec3> local(k);
      std::vector<double> di(k);
      std::vector<double> tdoas(k);
      for (int j = 0; j < k; ++j) {
        di[j] = res.distances[i][j].value;
        local[j] = u[j] * di[j];
        tdoas[j] = ms.steps[j].tdoas[i - 1];
      }
      const auto pose = register_array_pose(traj, local);
      alog.reflection_corrected = pose.reflection_corrected;
      const auto fit = fit_async(tdoas, di, d1, ms.emission_times, config.sound_speed, config.z_cut);
      alog.timing_outliers = fit.outliers;

      auto& a = arrays[i - 1];
      a.position = pose.position;
      a.euler = rotation_to_euler(pose.rotation);
      a.tau = fit.tau;
      a.delta = fit.delta;
    } catch (const Error& e) {
      rethrow_for_array(e, i + 1);
    }
    res.log.arrays.push_back(std::move(alog));
  }

  SourceTrajectory st;
  st.positions = traj;
  st.emission_times = ms.emission_times;
  res.state = pack_state(arrays, st);
  return res;
}

}  // namespace micarray
