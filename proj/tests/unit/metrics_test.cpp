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

#include <Eigen/Geometry>
#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "micarray/errors.hpp"

namespace micarray {
namespace {

TEST(Metrics, IdenticalStatesHaveZeroError) {
  const StateVector x = pack_state(testing::random_instance(1, 4, 6));
  const auto e = error_metrics(x, x);
  ASSERT_EQ(e.position.size(), 3u);
  ASSERT_EQ(e.source.size(), 6u);
  for (const auto* list : {&e.position, &e.orientation, &e.offset, &e.clock, &e.source}) {
    for (double v : *list) EXPECT_EQ(v, 0.0);
  }
}

TEST(Metrics, TenDegreeRotationOrthogonalToProbe) {
  const Vec3 v = Vec3::Ones();
  const Vec3 axis = Vec3(1, -1, 0).normalized();
  const Mat3 r = Eigen::AngleAxisd(deg2rad(10.0), axis).toRotationMatrix();
  const double by_formula = orientation_error(r, Mat3::Identity());
  const Vec3 rv = r * v;
  const double direct = std::atan2(rv.cross(v).norm(), rv.dot(v));
  EXPECT_NEAR(by_formula, direct, 1e-12);
  EXPECT_NEAR(rad2deg(by_formula), 10.0, 1e-9);

  StateVector truth(2, 1), est(2, 1);
  ArrayParams a;
  a.euler = rotation_to_euler(r);
  est.set_array(1, a);
  EXPECT_NEAR(rad2deg(error_metrics(est, truth).orientation[0]), 10.0, 1e-9);
}

TEST(Metrics, ConstantPositionOffsetGivesThatRmse) {
  const StateVector truth = pack_state(testing::random_instance(2, 5, 4));
  StateVector est = truth;
  for (int i = 1; i < 5; ++i) {
    auto a = est.array(i);
    a.position += Vec3(0.0, 0.1, 0.0);
    est.set_array(i, a);
  }
  const std::vector<ParameterErrors> trials{error_metrics(est, truth), error_metrics(est, truth)};
  const RmseRow row = rmse(trials);
  EXPECT_NEAR(row.position_m, 0.1, 1e-12);
  EXPECT_EQ(row.source_m, 0.0);
}

TEST(Metrics, ReportUnits) {
  ParameterErrors e;
  e.position = {0.0};
  e.orientation = {deg2rad(2.0)};
  e.offset = {-3e-3};
  e.clock = {4e-6};
  e.source = {0.0};
  const std::vector<ParameterErrors> one{e};
  const RmseRow row = rmse(one);
  EXPECT_NEAR(row.orientation_deg, 2.0, 1e-12);
  EXPECT_NEAR(row.offset_ms, 3.0, 1e-12);
  EXPECT_NEAR(row.clock_us, 4.0, 1e-12);
}

TEST(Metrics, EmptyListIsNaN) {
  EXPECT_TRUE(std::isnan(rmse(std::span<const double>{})));
}

TEST(Metrics, MismatchedStatesThrow) {
  EXPECT_THROW(error_metrics(StateVector(2, 3), StateVector(3, 3)), Error);
}

}  // namespace
}  // namespace micarray
