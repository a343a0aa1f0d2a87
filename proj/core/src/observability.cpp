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

#include "micarray/observability.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <Eigen/Geometry>
#include <Eigen/SVD>
#include <Eigen/SparseCholesky>

#include "micarray/errors.hpp"

namespace micarray {

namespace {

constexpr double kMinSourceDistance = 1e-9;

}  // namespace

ArrayStepBlock array_step_block(const ArrayParams& a, const Vec3& s, double emission_time, double c) {
  const Vec3 diff = s - a.position;
  const double d = diff.norm();
  if (!(d >= kMinSourceDistance)) {
    throw Error(ErrorCode::kDegenerateGeometry, "source coincides with an array position");
  }
  ArrayStepBlock b;
  b.h = -diff.transpose() / (c * d);
  const Mat3 A = (Mat3::Identity() * d * d - diff * diff.transpose()) / (d * d * d);
  b.U = -a.rotation().transpose() * A;
  const Mat3 rxt = rot_x(a.euler.x).transpose();
  const Mat3 ryt = rot_y(a.euler.y).transpose();
  const Mat3 rzt = rot_z(a.euler.z).transpose();
  b.V.col(0) = d_rot_x_transpose(a.euler.x) * ryt * rzt * diff / d;
  b.V.col(1) = rxt * d_rot_y_transpose(a.euler.y) * rzt * diff / d;
  b.V.col(2) = rxt * ryt * d_rot_z_transpose(a.euler.z) * diff / d;
  b.emission_time = emission_time;
  return b;
}

namespace {

Eigen::RowVector3d reference_row(const Vec3& s, double c) {
  const double d1 = s.norm();
  if (!(d1 >= kMinSourceDistance)) {
    throw Error(ErrorCode::kDegenerateGeometry, "source coincides with the reference array");
  }
  return s.transpose() / (c * d1);
}

// Ratio (t_k - t_1) / (t_2 - t_1) of the emission-time differences.
std::vector<double> timing_ratios(const SourceTrajectory& traj) {
  const int k = static_cast<int>(traj.size());
  if (k < 2) throw Error(ErrorCode::kInsufficientSteps, "reduced matrices need K >= 2");
  const double base = traj.emission_times[1] - traj.emission_times[0];
  if (base == 0.0) {
    throw Error(ErrorCode::kDegenerateTiming, "first two emission times coincide");
  }
  std::vector<double> r(k);
  for (int j = 0; j < k; ++j) r[j] = (traj.emission_times[j] - traj.emission_times[0]) / base;
  return r;
}

// Unit direction of each point seen from `origin`; empty when a point sits on it.
std::vector<Vec3> directions(const std::vector<Vec3>& pts, const Vec3& origin) {
  std::vector<Vec3> out;
  out.reserve(pts.size());
  for (const auto& p : pts) {
    const Vec3 v = p - origin;
    const double n = v.norm();
    if (n < kMinSourceDistance) return {};
    out.push_back(v / n);
  }
  return out;
}

Eigen::MatrixXd as_rows(const std::vector<Vec3>& dirs) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(dirs.size()), 3);
  for (std::size_t i = 0; i < dirs.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = dirs[i].transpose();
  return m;
}

// All directions lie on one line through the origin, up to `tol` radians.
bool all_collinear(const std::vector<Vec3>& dirs, double tol) {
  if (dirs.size() < 2) return true;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(as_rows(dirs), Eigen::ComputeFullV);
  const Vec3 axis = svd.matrixV().col(0);
  const double lim = std::sin(tol);
  return std::all_of(dirs.begin(), dirs.end(), [&](const Vec3& u) { return u.cross(axis).norm() <= lim; });
}

// True when all directions lie on one plane through the origin within `tol`;
// `normal` receives that plane's unit normal.
bool all_coplanar(const std::vector<Vec3>& dirs, double tol, Vec3& normal) {
  if (dirs.size() < 3) {
    if (dirs.empty()) return false;
    // Two directions always share a plane; pick one containing both.
    const Vec3 a = dirs.front();
    const Vec3 b = dirs.back();
    Vec3 n = a.cross(b);
    if (n.norm() < 1e-12) n = a.unitOrthogonal();
    normal = n.normalized();
    return true;
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(as_rows(dirs), Eigen::ComputeFullV);
  normal = svd.matrixV().col(2);
  const double lim = std::sin(tol);
  return std::all_of(dirs.begin(), dirs.end(), [&](const Vec3& u) { return std::abs(u.dot(normal)) <= lim; });
}

}  // namespace

Eigen::Matrix<double, 4, 8> ArrayStepBlock::H() const {
  Eigen::Matrix<double, 4, 8> m = Eigen::Matrix<double, 4, 8>::Zero();
  m.block<1, 3>(0, 0) = h;
  m(0, 6) = 1.0;
  m(0, 7) = emission_time;
  m.block<3, 3>(1, 0) = U;
  m.block<3, 3>(1, 3) = V;
  return m;
}

JacobianBlocks jacobian_blocks(const Geometry& geometry, double sound_speed) {
  geometry.validate();
  const int n = geometry.n_arrays();
  const int k = geometry.n_steps();
  const auto& traj = geometry.trajectory;
  const Eigen::Index rows = 4 * static_cast<Eigen::Index>(n - 1);

  JacobianBlocks out;
  out.n_arrays = n;
  out.n_steps = k;
  out.per_array.resize(k);
  out.reference_rows.resize(k);
  out.L.resize(k);
  out.T.resize(k);
  for (int j = 0; j < k; ++j) {
    const Vec3& s = traj.positions[j];
    const auto t1 = reference_row(s, sound_speed);
    out.reference_rows[j] = t1;
    auto& L = out.L[j];
    auto& T = out.T[j];
    L = Eigen::MatrixXd::Zero(rows, 8 * static_cast<Eigen::Index>(n - 1));
    T = Eigen::MatrixXd::Zero(rows, 3);
    out.per_array[j].reserve(n - 1);
    for (int i = 1; i < n; ++i) {
      auto b = array_step_block(geometry.arrays[i], s, traj.emission_times[j], sound_speed);
      const Eigen::Index r = 4 * static_cast<Eigen::Index>(i - 1);
      L.block<4, 8>(r, 8 * static_cast<Eigen::Index>(i - 1)) = b.H();
      T.row(r) = -b.h - t1;
      T.block<3, 3>(r + 1, 0) = -b.U;
      out.per_array[j].push_back(std::move(b));
    }
  }
  return out;
}

Eigen::MatrixXd assemble_full_jacobian(const JacobianBlocks& blocks) {
  const int n = blocks.n_arrays;
  const int k = blocks.n_steps;
  if (n < 2 || k < 1 || static_cast<int>(blocks.L.size()) != k || static_cast<int>(blocks.T.size()) != k) {
    throw Error(ErrorCode::kDimensionMismatch, "Jacobian blocks are inconsistent with N, K");
  }
  const Eigen::Index per_step = 4 * static_cast<Eigen::Index>(n - 1);
  const Eigen::Index arr_cols = 8 * static_cast<Eigen::Index>(n - 1);
  const Eigen::Index rows = per_step * k + 3 * static_cast<Eigen::Index>(k - 1);
  const Eigen::Index cols = arr_cols + 3 * static_cast<Eigen::Index>(k);

  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(rows, cols);
  Eigen::Index r = 0;
  for (int j = 0; j < k; ++j) {
    if (blocks.L[j].rows() != per_step || blocks.L[j].cols() != arr_cols || blocks.T[j].rows() != per_step ||
        blocks.T[j].cols() != 3) {
      throw Error(ErrorCode::kDimensionMismatch, "Jacobian block has the wrong shape");
    }
    J.block(r, 0, per_step, arr_cols) = blocks.L[j];
    J.block(r, arr_cols + 3 * j, per_step, 3) = blocks.T[j];
    r += per_step;
    if (j + 1 < k) {
      J.block<3, 3>(r, arr_cols + 3 * j) = -Mat3::Identity();
      J.block<3, 3>(r, arr_cols + 3 * (j + 1)) = Mat3::Identity();
      r += 3;
    }
  }
  return J;
}

Eigen::SparseMatrix<double> observability_weight_matrix(const NoiseModel& noise, int n_arrays, int n_steps) {
  if (n_arrays < 2 || n_steps < 1) {
    throw Error(ErrorCode::kDimensionMismatch, "weight matrix needs N >= 2 and K >= 1");
  }
  std::vector<Eigen::Triplet<double>> triplets;
  auto put3 = [&triplets](Eigen::Index off, const Mat3& m) {
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) {
        if (m(r, c) != 0.0) triplets.emplace_back(off + r, off + c, m(r, c));
      }
    }
  };
  Eigen::Index row = 0;
  for (int j = 0; j < n_steps; ++j) {
    for (int i = 1; i < n_arrays; ++i) {
      triplets.emplace_back(row, row, noise.tdoa_var);
      put3(row + 1, noise.doa_cov);
      row += 4;
    }
    if (j + 1 < n_steps) {
      put3(row, noise.rel_cov);
      row += 3;
    }
  }
  Eigen::SparseMatrix<double> w(row, row);
  w.setFromTriplets(triplets.begin(), triplets.end());
  return w;
}

Eigen::MatrixXd fim(const Eigen::MatrixXd& jacobian, const Eigen::SparseMatrix<double>& weights) {
  if (weights.rows() != jacobian.rows() || weights.cols() != jacobian.rows()) {
    std::ostringstream msg;
    msg << "J has " << jacobian.rows() << " rows but W is " << weights.rows() << "x" << weights.cols();
    throw Error(ErrorCode::kDimensionMismatch, msg.str());
  }
  Eigen::SimplicialLLT<Eigen::SparseMatrix<double>> llt(weights);
  if (llt.info() != Eigen::Success) {
    throw Error(ErrorCode::kInvalidSpec, "weight matrix is not positive definite");
  }
  const Eigen::MatrixXd winv_j = llt.solve(jacobian);
  Eigen::MatrixXd info = jacobian.transpose() * winv_j;
  return 0.5 * (info + info.transpose());
}

Eigen::MatrixXd reduced_F(const JacobianBlocks& blocks, int n_steps) {
  const int k = n_steps < 0 ? blocks.n_steps : std::min(n_steps, blocks.n_steps);
  if (k < 1) throw Error(ErrorCode::kDimensionMismatch, "F needs at least one step");
  const Eigen::Index per_step = 4 * static_cast<Eigen::Index>(blocks.n_arrays - 1);
  const Eigen::Index arr_cols = 8 * static_cast<Eigen::Index>(blocks.n_arrays - 1);
  Eigen::MatrixXd F(per_step * k, arr_cols + 3);
  for (int j = 0; j < k; ++j) {
    F.block(per_step * j, 0, per_step, arr_cols) = blocks.L[j];
    F.block(per_step * j, arr_cols, per_step, 3) = blocks.T[j];
  }
  return F;
}

Eigen::MatrixXd reduced_T_bar(const SourceTrajectory& traj, double sound_speed) {
  traj.validate();
  const auto ratio = timing_ratios(traj);
  const int k = static_cast<int>(traj.size());
  std::vector<Eigen::RowVector3d> t(k);
  for (int j = 0; j < k; ++j) t[j] = reference_row(traj.positions[j], sound_speed);

  Eigen::MatrixXd tb = Eigen::MatrixXd::Zero(4 * static_cast<Eigen::Index>(k), 3);
  for (int j = 2; j < k; ++j) {
    tb.row(j) = (t[0] - t[j]) - ratio[j] * (t[0] - t[1]);
  }
  return tb;
}

Eigen::MatrixXd reduced_L_bar(const ArrayParams& array, const SourceTrajectory& traj, double sound_speed) {
  traj.validate();
  const auto ratio = timing_ratios(traj);
  const int k = static_cast<int>(traj.size());
  std::vector<ArrayStepBlock> b;
  b.reserve(k);
  for (int j = 0; j < k; ++j) {
    b.push_back(array_step_block(array, traj.positions[j], traj.emission_times[j], sound_speed));
  }

  Eigen::MatrixXd lb = Eigen::MatrixXd::Zero(4 * static_cast<Eigen::Index>(k), 8);
  lb(0, 0) = 1.0;
  lb(1, 1) = 1.0;
  for (int j = 2; j < k; ++j) {
    lb.block<1, 3>(j, 2) = (b[j].h - b[0].h) - ratio[j] * (b[1].h - b[0].h);
  }
  for (int j = 0; j < k; ++j) {
    lb.block<3, 3>(k + 3 * j, 2) = b[j].U;
    lb.block<3, 3>(k + 3 * j, 5) = b[j].V;
  }
  return lb;
}

Eigen::MatrixXd reduced_F_prime(const Geometry& geometry, double sound_speed) {
  geometry.validate();
  const int n = geometry.n_arrays();
  const Eigen::MatrixXd tb = reduced_T_bar(geometry.trajectory, sound_speed);
  const Eigen::Index rb = tb.rows();
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(rb * (n - 1), 8 * static_cast<Eigen::Index>(n - 1) + 3);
  for (int i = 1; i < n; ++i) {
    const Eigen::Index r = rb * (i - 1);
    out.block(r, 8 * static_cast<Eigen::Index>(i - 1), rb, 8) =
        reduced_L_bar(geometry.arrays[i], geometry.trajectory, sound_speed);
    out.block(r, out.cols() - 3, rb, 3) = tb;
  }
  return out;
}

Eigen::MatrixXd sufficient_condition_matrix(const Geometry& geometry, int j, double sound_speed) {
  geometry.validate();
  const int n = geometry.n_arrays();
  if (j < 1 || j >= n) {
    std::ostringstream msg;
    msg << "array index " << j << " is not a non-reference array (N=" << n << ")";
    throw Error(ErrorCode::kDimensionMismatch, msg.str());
  }
  const Eigen::MatrixXd tb = reduced_T_bar(geometry.trajectory, sound_speed);
  const Eigen::MatrixXd lb = reduced_L_bar(geometry.arrays[j], geometry.trajectory, sound_speed);
  const Eigen::Index rb = tb.rows();
  const int copies = std::max(n - 2, 0);
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(rb * (1 + copies), 11);
  m.block(0, 0, rb, 8) = lb;
  m.block(0, 8, rb, 3) = tb;
  for (int c = 0; c < copies; ++c) m.block(rb * (c + 1), 0, rb, 8) = -lb;
  return m;
}

namespace {

void fill_rank(RankReport& rep, const Eigen::VectorXd& sv, double rel_tol) {
  rep.singular_values.assign(sv.data(), sv.data() + sv.size());
  rep.largest_sv = sv.size() > 0 ? sv[0] : 0.0;
  const double threshold = rel_tol * rep.largest_sv;
  Eigen::Index rank = 0;
  while (rank < sv.size() && sv[rank] > threshold) ++rank;
  rep.numerical_rank = rank;
  rep.full_column_rank = rank == rep.cols;
  rep.smallest_retained_sv = rank > 0 ? sv[rank - 1] : 0.0;
  rep.largest_discarded_sv = rank < sv.size() ? sv[rank] : 0.0;
  if (rank == 0) {
    rep.gap_ratio = 0.0;
  } else if (rep.largest_discarded_sv > 0.0) {
    rep.gap_ratio = rep.smallest_retained_sv / rep.largest_discarded_sv;
  }
}

}  // namespace

RankReport numerical_rank(const Eigen::MatrixXd& m, double rel_tol, std::string name) {
  RankReport rep;
  rep.matrix_name = std::move(name);
  rep.rows = m.rows();
  rep.cols = m.cols();
  if (m.size() == 0) {
    rep.full_column_rank = true;
    return rep;
  }
  Eigen::MatrixXd scaled = m;
  for (Eigen::Index c = 0; c < scaled.cols(); ++c) {
    const double n = scaled.col(c).norm();
    if (n > 0.0) scaled.col(c) /= n;
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(scaled);
  fill_rank(rep, svd.singularValues(), rel_tol);
  return rep;
}

RankReport fim_rank(const Eigen::MatrixXd& information, double rel_tol, std::string name) {
  if (information.rows() != information.cols()) {
    throw Error(ErrorCode::kDimensionMismatch, "information matrix must be square");
  }
  RankReport rep;
  rep.matrix_name = std::move(name);
  rep.rows = information.rows();
  rep.cols = information.cols();
  if (information.size() == 0) {
    rep.full_column_rank = true;
    return rep;
  }
  Eigen::VectorXd inv_scale(information.rows());
  for (Eigen::Index i = 0; i < information.rows(); ++i) {
    const double d = information(i, i);
    inv_scale[i] = d > 0.0 ? 1.0 / std::sqrt(d) : 0.0;
  }
  const Eigen::MatrixXd scaled = inv_scale.asDiagonal() * information * inv_scale.asDiagonal();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(scaled);
  const Eigen::VectorXd sv = svd.singularValues().cwiseSqrt();
  fill_rank(rep, sv, rel_tol);
  return rep;
}

TheoremDiagnosis check_theorem_conditions(const Geometry& geometry, const DiagnosisOptions& options) {
  geometry.validate();
  TheoremDiagnosis dg;
  dg.n_arrays = geometry.n_arrays();
  dg.n_steps = geometry.n_steps();
  const int n = dg.n_arrays;
  const int k = dg.n_steps;
  const double tol = options.angular_tolerance;
  const auto& pts = geometry.trajectory.positions;

  dg.row_count_bound = static_cast<int>(std::ceil(2.0 + 3.0 / (4.0 * (n - 1))));
  dg.meets_row_count_bound = k >= dg.row_count_bound;
  dg.meets_five_step_bound = k >= 5;
  if (!dg.meets_row_count_bound) dg.violations.push_back("fewer steps than the row-count bound");
  if (!dg.meets_five_step_bound) dg.violations.push_back("fewer than five steps");

  const auto ref_dirs = directions(pts, Vec3::Zero());
  if (!ref_dirs.empty()) {
    dg.collinear_with_reference = all_collinear(ref_dirs, tol);
    Vec3 normal;
    dg.coplanar_through_reference_origin = all_coplanar(ref_dirs, tol, normal);
    if (dg.coplanar_through_reference_origin) {
      const double lim = std::sin(tol);
      if (std::abs(normal.z()) <= lim && std::abs(normal.x()) > lim) {
        dg.coplanar_family = "x+ay=0";
      } else if (std::abs(normal.y()) <= lim && std::abs(normal.x()) > lim) {
        dg.coplanar_family = "x+bz=0";
      } else if (std::abs(normal.x()) <= lim) {
        dg.coplanar_family = "y+cz=0";
      }
      dg.coplanar_with_reference_axis_plane = !dg.coplanar_family.empty();
    }
  }
  if (dg.collinear_with_reference) dg.violations.push_back("source collinear with the reference origin");
  if (dg.coplanar_with_reference_axis_plane) {
    dg.violations.push_back("source on plane " + dg.coplanar_family + " through the reference origin");
  } else if (dg.coplanar_through_reference_origin) {
    dg.violations.push_back("source on a plane through the reference origin");
  }

  for (int i = 1; i < n; ++i) {
    const auto& a = geometry.arrays[i];
    const auto dirs = directions(pts, a.position);
    if (!dirs.empty() && all_collinear(dirs, tol)) {
      dg.collinear_with_array.push_back(i + 1);
      dg.violations.push_back("source collinear with array " + std::to_string(i + 1));
    }
    if (std::abs(std::cos(a.euler.y)) <= std::sin(tol)) {
      dg.gimbal_lock_arrays.push_back(i + 1);
      dg.violations.push_back("array " + std::to_string(i + 1) + " at pitch +-pi/2");
    }
  }

  if (options.compute_ranks) {
    const double c = options.sound_speed;
    const double rt = options.rank_tolerance;
    try {
      dg.f = numerical_rank(reduced_F(jacobian_blocks(geometry, c)), rt, "F");
      if (k >= 2) {
        dg.t_bar = numerical_rank(reduced_T_bar(geometry.trajectory, c), rt, "T_bar");
        bool l_ok = true;
        for (int i = 1; i < n; ++i) {
          dg.l_bar.push_back(numerical_rank(reduced_L_bar(geometry.arrays[i], geometry.trajectory, c), rt,
                                            "L_bar_" + std::to_string(i + 1)));
          l_ok = l_ok && dg.l_bar.back().full_column_rank;
        }
        dg.necessary_ranks_hold = dg.t_bar.full_column_rank && l_ok;
        for (int j = 1; j < n && !dg.sufficient_ranks_hold; ++j) {
          bool others = true;
          for (int i = 1; i < n; ++i) {
            if (i != j) others = others && dg.l_bar[i - 1].full_column_rank;
          }
          if (!others) continue;
          dg.sufficient_ranks_hold =
              numerical_rank(sufficient_condition_matrix(geometry, j, c), rt).full_column_rank;
        }
      }
      dg.ranks_computed = true;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kDegenerateGeometry && e.code() != ErrorCode::kDegenerateTiming) throw;
      dg.violations.push_back(std::string("rank analysis skipped: ") + e.what());
    }
  }
  return dg;
}

}  // namespace micarray
