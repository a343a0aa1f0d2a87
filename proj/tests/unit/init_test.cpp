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
#include <random>
#include <set>

#include <Eigen/Geometry>
#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "micarray/errors.hpp"

namespace micarray {
namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no micarray::Error thrown";
  return ErrorCode::kInvalidSpec;
}

TEST(Triangulation, RightIsoscelesExample) {
  const auto t = triangulate_first_position(Vec3(1, 0, 0), Vec3(1, 1, 0).normalized(), Vec3(0, 1, 0));
  EXPECT_NEAR(t.distance, 1.0, 1e-12);
  EXPECT_NEAR((t.position - Vec3(1, 0, 0)).norm(), 0.0, 1e-12);
}

TEST(Triangulation, ParallelDoasAreDegenerate) {
  EXPECT_EQ(code_of([] { triangulate_first_position(Vec3::UnitX(), Vec3::UnitX(), Vec3(1, 0, 0)); }),
            ErrorCode::kDegenerateTriangulation);
  const std::vector<Vec3> doas(4, Vec3::UnitZ());
  const std::vector<Vec3> disp(3, Vec3(0, 0, 1));
  EXPECT_EQ(code_of([&] { triangulate_first_position(doas, disp); }), ErrorCode::kDegenerateTriangulation);
}

TEST(Triangulation, ExactOnNoiseFreeData) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Geometry g = testing::random_instance(seed, 3, 8);
    const auto ms = predict_measurements(g);
    std::vector<Vec3> ref;
    for (const auto& s : ms.steps) ref.push_back(s.doas[0]);
    const auto pair = triangulate_first_position(ref[0], ref[1], ms.rel_displacements[0]);
    const auto all = triangulate_first_position(ref, ms.rel_displacements);
    EXPECT_LT((pair.position - g.trajectory.positions[0]).norm(), 1e-9);
    EXPECT_LT((all.position - g.trajectory.positions[0]).norm(), 1e-9);
  }
}

TEST(Chain, ZeroDisplacementsGiveConstantTrajectory) {
  const std::vector<Vec3> disp(4, Vec3::Zero());
  const auto traj = chain_positions(Vec3(1, 2, 3), disp);
  ASSERT_EQ(traj.size(), 5u);
  for (const auto& p : traj) EXPECT_EQ(p, Vec3(1, 2, 3));
}

TEST(Chain, NoiseFreeDataRecoversTrajectory) {
  const Geometry g = testing::random_instance(3, 2, 9);
  const auto ms = predict_measurements(g);
  const auto traj = chain_positions(g.trajectory.positions[0], ms.rel_displacements);
  for (int k = 0; k < 9; ++k) EXPECT_LT((traj[k] - g.trajectory.positions[k]).norm(), 1e-12);
}

TEST(Chain, ErrorVarianceGrowsLinearly) {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> nd(0.0, 0.1);
  const int steps = 8, draws = 20000;
  std::vector<double> var(steps, 0.0);
  for (int d = 0; d < draws; ++d) {
    std::vector<Vec3> disp(steps - 1);
    for (auto& w : disp) w = Vec3(nd(rng), nd(rng), nd(rng));
    const auto traj = chain_positions(Vec3::Zero(), disp);
    for (int k = 0; k < steps; ++k) var[k] += traj[k].x() * traj[k].x() / draws;
  }
  for (int k = 1; k < steps; ++k) EXPECT_NEAR(var[k] / (0.01 * k), 1.0, 0.05) << "step " << k;
}

TEST(Combos, SortedDistinctAndCovering) {
  for (int k : {4, 5, 8, 24}) {
    const auto combos = select_combos(k, 20, 5);
    std::set<Combo> unique(combos.begin(), combos.end());
    EXPECT_EQ(unique.size(), combos.size());
    std::vector<int> cover(k, 0);
    for (const auto& c : combos) {
      EXPECT_TRUE(std::is_sorted(c.begin(), c.end()));
      EXPECT_LT(c[2], c[3]);
      EXPECT_LT(c[0], c[1]);
      EXPECT_LT(c[1], c[2]);
      for (int i : c) ++cover[i];
    }
    const long choose = static_cast<long>(k - 1) * (k - 2) * (k - 3) / 6;
    for (int s = 0; s < k; ++s) EXPECT_GE(cover[s], std::min<long>(20, choose)) << "K=" << k << " step " << s;
  }
  EXPECT_EQ(select_combos(5, 20, 1), select_combos(5, 20, 1));
  EXPECT_EQ(code_of([] { select_combos(3, 20, 0); }), ErrorCode::kInsufficientSteps);
}

TEST(Iqr, DropsGrossOutlier) {
  std::vector<double> v{1.0, 1.01, 0.99, 1.02, 0.98, 1.0, 1.005, 0.995, 10.0};
  const auto kept = iqr_filter(v, 1.5);
  EXPECT_EQ(kept.size(), 8u);
  double mean = 0.0;
  for (double x : kept) mean += x / kept.size();
  EXPECT_NEAR(mean, 1.0, 0.01);
}

TEST(Distances, NoiseFreeTableMatchesTruth) {
  const Geometry g = testing::random_instance(6, 3, 10);
  const auto ms = predict_measurements(g);
  const auto combos = select_combos(10, 20, 0);
  InitConfig cfg;
  for (int i = 0; i < 3; ++i) {
    std::vector<Vec3> doas;
    for (const auto& s : ms.steps) doas.push_back(s.doas[i]);
    const auto est = estimate_distances(doas, g.trajectory.positions, combos, cfg);
    for (int k = 0; k < 10; ++k) {
      EXPECT_NEAR(est[k].value, (g.trajectory.positions[k] - g.arrays[i].position).norm(), 1e-6);
    }
  }
}

TEST(Registration, IdentityCase) {
  std::vector<Vec3> pts{Vec3(1, 0, 0), Vec3(0, 2, 0), Vec3(0, 0, 3), Vec3(1, 1, 1)};
  const auto pose = register_array_pose(pts, pts);
  EXPECT_LT((pose.rotation - Mat3::Identity()).norm(), 1e-12);
  EXPECT_LT(pose.position.norm(), 1e-12);
}

TEST(Registration, RecoversRandomRigidMotion) {
  std::mt19937_64 rng(23);
  std::normal_distribution<double> nd;
  for (int trial = 0; trial < 20; ++trial) {
    const Mat3 r = Eigen::Quaterniond::UnitRandom().toRotationMatrix();
    const Vec3 t(nd(rng), nd(rng), nd(rng));
    std::vector<Vec3> local, ref;
    for (int i = 0; i < 10; ++i) {
      local.emplace_back(nd(rng), nd(rng), nd(rng));
      ref.push_back(r * local.back() + t);
    }
    const auto pose = register_array_pose(ref, local);
    EXPECT_LT((pose.rotation - r).cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_LT((pose.position - t).cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_FALSE(pose.reflection_corrected);
  }
}

TEST(Registration, CollinearCloudIsDegenerate) {
  std::vector<Vec3> pts;
  for (int i = 0; i < 5; ++i) pts.push_back(Vec3(1, 2, 3) + i * Vec3(0.5, -0.1, 0.2));
  EXPECT_EQ(code_of([&] { register_array_pose(pts, pts); }), ErrorCode::kDegenerateRegistration);
}

struct AsyncCase {
  std::vector<double> tdoa, di, d1, t;
};

AsyncCase exact_async(double tau, double delta, int k) {
  AsyncCase c;
  for (int s = 0; s < k; ++s) {
    c.t.push_back(0.7 * s + 0.1 * (s % 3));
    c.di.push_back(2.0 + std::sin(s));
    c.d1.push_back(3.0 + std::cos(1.3 * s));
    c.tdoa.push_back((c.di.back() - c.d1.back()) / kDefaultSoundSpeed + tau + c.t.back() * delta);
  }
  return c;
}

TEST(Async, ExactLineFit) {
  const auto c = exact_async(0.1, 1e-4, 20);
  const auto fit = fit_async(c.tdoa, c.di, c.d1, c.t);
  EXPECT_NEAR(fit.tau, 0.1, 1e-12);
  EXPECT_NEAR(fit.delta, 1e-4, 1e-12);
  EXPECT_TRUE(fit.outliers.empty());
}

TEST(Async, ZeroClockModel) {
  const auto c = exact_async(0.0, 0.0, 10);
  const auto fit = fit_async(c.tdoa, c.di, c.d1, c.t);
  EXPECT_NEAR(fit.tau, 0.0, 1e-13);
  EXPECT_NEAR(fit.delta, 0.0, 1e-13);
}

TEST(Async, SecondPassDropsInjectedOutlier) {
  auto c = exact_async(0.1, 1e-4, 20);
  const auto clean = fit_async(c.tdoa, c.di, c.d1, c.t);
  c.tdoa[7] += 0.05;
  const auto fit = fit_async(c.tdoa, c.di, c.d1, c.t);
  ASSERT_EQ(fit.outliers, std::vector<int>{7});
  EXPECT_NEAR(fit.tau, clean.tau, 0.01 * std::abs(clean.tau));
  EXPECT_NEAR(fit.delta, clean.delta, 0.01 * std::abs(clean.delta));
}

TEST(Async, NeedsTwoDistinctTimes) {
  const std::vector<double> one{0.1};
  EXPECT_EQ(code_of([&] { fit_async(one, one, one, one); }), ErrorCode::kInsufficientSteps);
}

TEST(Initialize, NoiseFreeSceneIsRecovered) {
  const Geometry g = testing::random_instance(31, 3, 10);
  const auto res = initialize(predict_measurements(g));
  EXPECT_LT(testing::max_state_error(res.state, pack_state(g)), 1e-5);
}

TEST(Initialize, NoiseFreePoseWithinMicro) {
  const Geometry g = testing::random_instance(32, 5, 12);
  const auto res = initialize(predict_measurements(g));
  for (int i = 1; i < 5; ++i) {
    const auto a = res.state.array(i);
    EXPECT_LT((a.position - g.arrays[i].position).norm(), 1e-6);
    const double angle = Eigen::AngleAxisd(a.rotation().transpose() * g.arrays[i].rotation()).angle();
    EXPECT_LT(angle, 1e-6);
  }
}

TEST(Initialize, CollinearTrajectoryFailsRegistration) {
  Geometry g = testing::random_instance(33, 3, 8);
  const Vec3 start(1.5, -1.0, 0.8), dir = Vec3(0.3, 0.5, -0.2).normalized();
  for (int k = 0; k < 8; ++k) g.trajectory.positions[k] = start + 0.4 * k * dir;
  EXPECT_EQ(code_of([&] { initialize(predict_measurements(g)); }), ErrorCode::kDegenerateRegistration);
}

}  // namespace
}  // namespace micarray
