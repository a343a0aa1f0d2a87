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

#include "micarray/distance_nls.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include <Eigen/Cholesky>

#include "micarray/errors.hpp"

namespace micarray {

namespace {

constexpr int kSweepPoints = 200;
constexpr double kSweepLo = -1.5;  // log10 of d_0 / mean chord
constexpr double kSweepHi = 1.5;
constexpr int kBisections = 20;
constexpr std::size_t kRefinedSeeds = 4;
constexpr std::array<std::array<int, 2>, 6> kEdges{{{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}}};

// Mirror coordinates that crossed the lower bound back inside; anything
// still infeasible (a huge overshoot) is pinned just above the bound.
void reflect_into_bounds(Eigen::VectorXd& x, const Eigen::VectorXd& lower, const Eigen::VectorXd& prev) {
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    if (x[j] < lower[j]) {
      const double mirrored = 2.0 * lower[j] - x[j];
      const double room = prev[j] - lower[j];
      x[j] = mirrored <= prev[j] ? mirrored : lower[j] + 0.5 * room;
    }
  }
}

}  // namespace

BoundedLsqResult bounded_least_squares(const ResidualFunction& f, Eigen::VectorXd x0,
                                       const Eigen::VectorXd& lower, const BoundedLsqOptions& options) {
  if (lower.size() != x0.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "bound vector length differs from x0");
  }
  const double tol = options.tolerance;
  BoundedLsqResult res;
  for (Eigen::Index j = 0; j < x0.size(); ++j) x0[j] = std::max(x0[j], lower[j]);
  res.x = std::move(x0);

  Eigen::VectorXd r;
  Eigen::MatrixXd J;
  f(res.x, r, &J);
  double cost = 0.5 * r.squaredNorm();
  Eigen::MatrixXd JtJ = J.transpose() * J;
  Eigen::VectorXd g = J.transpose() * r;
  double mu = options.initial_damping * std::max(JtJ.diagonal().maxCoeff(), 1e-300);
  double nu = 2.0;

  Eigen::VectorXd r_new;
  Eigen::MatrixXd J_new;
  for (int it = 0; it < options.max_iterations; ++it) {
    res.iterations = it;
    if (r.norm() <= tol || g.lpNorm<Eigen::Infinity>() <= tol * std::max(1.0, r.norm())) {
      res.converged = true;
      break;
    }
    Eigen::MatrixXd A = JtJ;
    A.diagonal().array() += mu;
    const Eigen::VectorXd h = A.ldlt().solve(-g);
    if (!h.allFinite()) break;
    if (h.norm() <= tol * (res.x.norm() + tol)) {
      res.converged = true;
      break;
    }
    Eigen::VectorXd x_new = res.x + h;
    reflect_into_bounds(x_new, lower, res.x);
    const Eigen::VectorXd step = x_new - res.x;

    f(x_new, r_new, &J_new);
    const double cost_new = 0.5 * r_new.squaredNorm();
    const double predicted = -(g.dot(step) + 0.5 * step.dot(JtJ * step));
    const double rho = predicted > 0.0 ? (cost - cost_new) / predicted : -1.0;
    if (std::isfinite(cost_new) && cost_new < cost && rho > 0.0) {
      res.x = std::move(x_new);
      r.swap(r_new);
      J.swap(J_new);
      cost = cost_new;
      JtJ = J.transpose() * J;
      g = J.transpose() * r;
      const double t = 2.0 * rho - 1.0;
      mu *= std::max(1.0 / 3.0, 1.0 - t * t * t);
      nu = 2.0;
    } else {
      mu *= nu;
      nu *= 2.0;
      if (!std::isfinite(mu)) break;
    }
    res.iterations = it + 1;
  }
  res.residual = std::move(r);
  res.cost = cost;
  return res;
}

TetraSolution solve_tetrahedron(const std::array<Vec3, 4>& doas, const std::array<Vec3, 4>& points,
                                const BoundedLsqOptions& options) {
  std::array<double, 6> cosines{};
  Eigen::Matrix<double, 6, 1> chord_sq;
  double mean_chord = 0.0;
  for (std::size_t e = 0; e < kEdges.size(); ++e) {
    const auto [a, b] = kEdges[e];
    cosines[e] = std::clamp(doas[a].dot(doas[b]) / (doas[a].norm() * doas[b].norm()), -1.0, 1.0);
    const double chord = (points[a] - points[b]).norm();
    chord_sq[static_cast<Eigen::Index>(e)] = chord * chord;
    mean_chord += chord / 6.0;
  }
  if (!(mean_chord > 0.0)) {
    throw Error(ErrorCode::kDegenerateGeometry, "four coincident source points");
  }

  const ResidualFunction f = [&](const Eigen::VectorXd& d, Eigen::VectorXd& r, Eigen::MatrixXd* J) {
    r.resize(6);
    if (J) J->setZero(6, 4);
    for (std::size_t e = 0; e < kEdges.size(); ++e) {
      const auto [a, b] = kEdges[e];
      const auto row = static_cast<Eigen::Index>(e);
      r[row] = d[a] * d[a] + d[b] * d[b] - 2.0 * d[a] * d[b] * cosines[e] - chord_sq[row];
      if (J) {
        (*J)(row, a) = 2.0 * d[a] - 2.0 * d[b] * cosines[e];
        (*J)(row, b) = 2.0 * d[b] - 2.0 * d[a] * cosines[e];
      }
    }
  };

  // Seeds: along a log sweep of d_0, each edge (0, b) fixes d_b up to a root
  // choice, giving 8 branches. Candidates are the zero crossings of the
  // residuals of edges (1,2), (1,3) and (2,3) (bisected) and the local minima
  // of the total residual on every branch; the best few are refined.
  const Eigen::VectorXd lower = Eigen::VectorXd::Constant(4, 1e-6 * mean_chord);
  const auto branch_point = [&](double d0, int mask) {
    Eigen::Vector4d d;
    d[0] = d0;
    for (int b = 1; b < 4; ++b) {
      const double c = cosines[static_cast<std::size_t>(b - 1)];
      const double root = std::sqrt(std::max(chord_sq[b - 1] - d0 * d0 * (1.0 - c * c), 0.0));
      d[b] = std::max(d0 * c + (((mask >> (b - 1)) & 1) ? -root : root), lower[0]);
    }
    return d;
  };
  struct Seed {
    double cost;
    Eigen::Vector4d d;
  };
  std::vector<Seed> seeds;
  Eigen::VectorXd r(6);
  const auto cost_of = [&](const Eigen::Vector4d& d) {
    f(d, r, nullptr);
    return r.squaredNorm();
  };
  const auto d0_at = [&](int g) {
    return mean_chord * std::pow(10.0, kSweepLo + (kSweepHi - kSweepLo) * g / (kSweepPoints - 1));
  };
  for (int mask = 0; mask < 8; ++mask) {
    std::vector<double> cost(kSweepPoints);
    std::vector<Eigen::Vector3d> far(kSweepPoints);
    for (int g = 0; g < kSweepPoints; ++g) {
      cost[g] = cost_of(branch_point(d0_at(g), mask));
      far[g] = r.tail<3>();
    }
    for (int g = 0; g < kSweepPoints; ++g) {
      const bool left = g == 0 || cost[g] < cost[g - 1];
      const bool right = g + 1 == kSweepPoints || cost[g] <= cost[g + 1];
      if (left && right) seeds.push_back({cost[g], branch_point(d0_at(g), mask)});
      if (g + 1 == kSweepPoints) continue;
      for (int e = 0; e < 3; ++e) {
        if ((far[g][e] < 0.0) == (far[g + 1][e] < 0.0)) continue;
        double lo = d0_at(g), hi = d0_at(g + 1);
        const bool lo_negative = far[g][e] < 0.0;
        for (int it = 0; it < kBisections; ++it) {
          const double mid = 0.5 * (lo + hi);
          cost_of(branch_point(mid, mask));
          ((r[3 + e] < 0.0) == lo_negative ? lo : hi) = mid;
        }
        const Eigen::Vector4d d = branch_point(0.5 * (lo + hi), mask);
        seeds.push_back({cost_of(d), d});
      }
    }
  }
  std::sort(seeds.begin(), seeds.end(), [](const Seed& a, const Seed& b) { return a.cost < b.cost; });
  if (seeds.size() > kRefinedSeeds) seeds.resize(kRefinedSeeds);
  seeds.push_back({0.0, Eigen::Vector4d::Constant(mean_chord)});

  const double target = options.tolerance * chord_sq.norm();
  BoundedLsqResult sol;
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    auto trial = bounded_least_squares(f, seeds[i].d, lower, options);
    if (i == 0 || trial.residual.norm() < sol.residual.norm()) sol = std::move(trial);
    if (sol.residual.norm() <= target) break;
  }

  TetraSolution out;
  for (int j = 0; j < 4; ++j) out.distances[j] = sol.x[j];
  out.residual_norm = sol.residual.norm();
  out.relative_residual = out.residual_norm / chord_sq.norm();
  out.iterations = sol.iterations;
  out.converged = sol.converged;
  return out;
}

}  // namespace micarray
