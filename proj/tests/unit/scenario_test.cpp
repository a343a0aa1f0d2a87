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

#include "micarray/scenario.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Geometry>

#include <gtest/gtest.h>

#include "micarray/errors.hpp"

namespace micarray {
namespace {

Scenario build(ScenarioKind kind, std::uint64_t seed = 1) {
  ScenarioSpec spec;
  spec.kind = kind;
  spec.seed = seed;
  return make_scenario(spec);
}

TEST(Scenario, TagsRoundTrip) {
  for (auto kind : {ScenarioKind::kObservableRandom, ScenarioKind::kObservablePlanar, ScenarioKind::kCollinearReference,
                    ScenarioKind::kCoplanarReference, ScenarioKind::kCollinearArray, ScenarioKind::kGimbal,
                    ScenarioKind::kPreset, ScenarioKind::kRandom}) {
    EXPECT_EQ(scenario_kind_from_string(to_string(kind)), kind);
  }
  EXPECT_THROW(scenario_kind_from_string("nope"), Error);
}

TEST(Scenario, CollinearRatiosFollowTheHarmonicPattern) {
  const auto sc = build(ScenarioKind::kCollinearReference);
  const auto& s = sc.truth.trajectory.positions;
  for (std::size_t k = 1; k < s.size(); ++k) {
    const double ratio = s[k].norm() / s[k - 1].norm();
    EXPECT_NEAR(ratio, static_cast<double>(k + 1) / static_cast<double>(k), 1e-12);
    EXPECT_LT(s[k].normalized().cross(s[0].normalized()).norm(), 1e-12);
  }
  EXPECT_TRUE(check_theorem_conditions(sc.truth, {.compute_ranks = false}).collinear_with_reference);
}

TEST(Scenario, CoplanarPlaneHoldsExactly) {
  const auto sc = build(ScenarioKind::kCoplanarReference);
  for (const auto& s : sc.truth.trajectory.positions) EXPECT_EQ(s.x(), s.y());
}

TEST(Scenario, CollinearWithArrayTwo) {
  const auto sc = build(ScenarioKind::kCollinearArray);
  const auto d = check_theorem_conditions(sc.truth, {.compute_ranks = false});
  ASSERT_FALSE(d.collinear_with_array.empty());
  EXPECT_EQ(d.collinear_with_array[0], 2);
}

TEST(Scenario, GimbalArrays) {
  const auto sc = build(ScenarioKind::kGimbal);
  EXPECT_EQ(std::abs(sc.truth.arrays[3].euler.y), kPi / 2);
  EXPECT_EQ(std::abs(sc.truth.arrays[6].euler.y), kPi / 2);
  ScenarioSpec small;
  small.kind = ScenarioKind::kGimbal;
  small.n_arrays = 5;
  EXPECT_THROW(make_scenario(small), Error);
}

TEST(Scenario, Defaults) {
  const auto obs = build(ScenarioKind::kObservableRandom);
  EXPECT_EQ(obs.truth.n_arrays(), 8);
  EXPECT_EQ(obs.truth.n_steps(), 10);
  const auto preset = build(ScenarioKind::kPreset);
  EXPECT_EQ(preset.truth.n_arrays(), 5);
  EXPECT_EQ(preset.truth.n_steps(), 24);
  EXPECT_FALSE(check_theorem_conditions(preset.truth).any_violation());
}

TEST(Scenario, SeededBuildsAreReproducible) {
  const auto a = build(ScenarioKind::kRandom, 9);
  const auto b = build(ScenarioKind::kRandom, 9);
  const auto c = build(ScenarioKind::kRandom, 10);
  EXPECT_EQ(pack_state(a.truth), pack_state(b.truth));
  EXPECT_EQ(a.truth.trajectory.emission_times, b.truth.trajectory.emission_times);
  EXPECT_FALSE(pack_state(a.truth) == pack_state(c.truth));
}

TEST(Scenario, RankSweepOfObservableCase) {
  const auto sweep = rank_sweep(build(ScenarioKind::kObservableRandom).truth);
  ASSERT_EQ(sweep.size(), 10u);
  for (int k = 0; k < 4; ++k) EXPECT_FALSE(sweep[k].full_column_rank);
  for (int k = 4; k < 10; ++k) EXPECT_TRUE(sweep[k].full_column_rank) << "k=" << k + 1;
  EXPECT_EQ(sweep.back().cols, 59);
}

TEST(Scenario, RankSweepOfGimbalCaseNeverFull) {
  for (const auto& r : rank_sweep(build(ScenarioKind::kGimbal).truth)) EXPECT_FALSE(r.full_column_rank);
}

TEST(Perturbation, GroundTruthIsUnchanged) {
  const StateVector x = pack_state(build(ScenarioKind::kPreset).truth);
  EXPECT_EQ(perturb_ground_truth(x, InitScheme::kGroundTruth, 4), x);
  EXPECT_THROW(perturb_ground_truth(x, InitScheme::kOurs, 4), Error);
}

TEST(Perturbation, Multipliers) {
  EXPECT_EQ(perturbation_multiplier(InitScheme::kGroundTruth), 0.0);
  EXPECT_EQ(perturbation_multiplier(InitScheme::kLv1), 1.0);
  EXPECT_EQ(perturbation_multiplier(InitScheme::kLv2), 3.0);
  EXPECT_EQ(perturbation_multiplier(InitScheme::kLv3), 6.0);
  EXPECT_EQ(perturbation_multiplier(InitScheme::kLv4), 9.0);
}

struct Spread {
  double position = 0, yaw = 0, tau = 0, delta = 0, source = 0;
};

// 1.4826 * MAD, insensitive to the pi jumps of Euler range folding.
double robust_std(std::vector<double> v) {
  for (double& x : v) x = std::abs(x);
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2), v.end());
  return 1.4826 * v[v.size() / 2];
}

Spread sample_std(InitScheme scheme, int draws) {
  StateVector x(2, 1);
  ArrayParams a;
  a.position = {1, 1, 1};
  x.set_array(1, a);
  x.set_source(0, {2, 0, 0});
  Spread s;
  std::vector<double> yaw;
  for (int i = 0; i < draws; ++i) {
    const StateVector p = perturb_ground_truth(x, scheme, derive_seed(77, static_cast<std::uint64_t>(i), 3));
    const auto b = p.array(1);
    s.position += std::pow(b.position.x() - 1.0, 2);
    yaw.push_back(wrap_angle(b.euler.z));
    s.tau += b.tau * b.tau;
    s.delta += b.delta * b.delta;
    s.source += std::pow(p.source(0).y(), 2);
  }
  for (double* v : {&s.position, &s.tau, &s.delta, &s.source}) *v = std::sqrt(*v / draws);
  s.yaw = robust_std(yaw);
  return s;
}

TEST(Perturbation, LevelTwoIsThreeTimesBase) {
  const PerturbationBase base;
  const Spread s = sample_std(InitScheme::kLv2, 10000);
  EXPECT_NEAR(s.position / (3 * base.position), 1.0, 0.03);
  EXPECT_NEAR(s.yaw / (3 * base.orientation), 1.0, 0.03);
  EXPECT_NEAR(s.tau / (3 * base.offset), 1.0, 0.03);
  EXPECT_NEAR(s.delta / (3 * base.clock), 1.0, 0.03);
  EXPECT_NEAR(s.source / (3 * base.source), 1.0, 0.03);
}

TEST(Perturbation, LevelOneOrientationIsTenDegrees) {
  const Spread s = sample_std(InitScheme::kLv1, 10000);
  EXPECT_NEAR(rad2deg(s.yaw), 10.0, 0.3);
}

TEST(Seeds, DerivedSeedsDifferPerStreamAndSalt) {
  EXPECT_EQ(derive_seed(1, 2, 3), derive_seed(1, 2, 3));
  EXPECT_NE(derive_seed(1, 2, 3), derive_seed(1, 3, 3));
  EXPECT_NE(derive_seed(1, 2, 3), derive_seed(1, 2, 1));
  EXPECT_NE(derive_seed(1, 2, 3), derive_seed(2, 2, 3));
}

}  // namespace
}  // namespace micarray
