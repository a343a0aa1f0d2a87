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

#include "micarray/dataset.hpp"

#include <filesystem>

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

Dataset simulated(std::uint64_t seed, int n, int k) {
  Dataset ds;
  const Geometry g = testing::random_instance(seed, n, k);
  ds.noise = NoiseModel::table_defaults();
  ds.measurements = add_noise(predict_measurements(g), ds.noise, seed);
  ds.ground_truth = g;
  ds.scenario = "observable-case-1";
  ds.seed = seed;
  return ds;
}

std::filesystem::path temp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("micarray_dataset_test_" + name);
}

constexpr const char* kMinimal = R"({
  "format": "micarray-dataset",
  "schema_version": 1,
  "n_arrays": 2,
  "n_steps": 1,
  "emission_times_s": [0.0],
  "steps": [{"doas": [[1, 0, 0], {"azimuth_deg": 90, "elevation_deg": 0}], "tdoas_s": [0.002]}],
  "rel_displacements_m": []
})";

TEST(Dataset, MinimalFileLoads) {
  const Dataset ds = parse_dataset(kMinimal);
  EXPECT_EQ(ds.measurements.n_arrays(), 2);
  EXPECT_EQ(ds.measurements.n_steps(), 1);
  EXPECT_EQ(stack(ds.measurements).size(), 7);
  EXPECT_NEAR((ds.measurements.steps[0].doas[1] - Vec3::UnitY()).norm(), 0.0, 1e-15);
  EXPECT_FALSE(ds.ground_truth.has_value());
}

TEST(Dataset, MissingDisplacementIsSchemaMismatch) {
  const Dataset ds = simulated(1, 2, 3);
  auto j = dataset_to_json(ds);
  j["rel_displacements_m"].erase(1);
  EXPECT_EQ(code_of([&] { dataset_from_json(j); }), ErrorCode::kSchemaMismatch);
}

TEST(Dataset, WrongFieldTypeNamesTheField) {
  auto j = dataset_to_json(simulated(1, 2, 3));
  j["steps"][1]["tdoas_s"][0] = "fast";
  try {
    dataset_from_json(j);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kParseError);
    EXPECT_NE(e.message().find("steps[1].tdoas_s[0]"), std::string::npos) << e.message();
  }
}

TEST(Dataset, MalformedJsonReportsPosition) {
  try {
    parse_dataset("{\n  \"format\": ,\n}");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kParseError);
    EXPECT_NE(e.message().find("line 2"), std::string::npos) << e.message();
  }
}

TEST(Dataset, UnknownSchemaVersionIsRejected) {
  auto j = dataset_to_json(simulated(1, 2, 3));
  j["schema_version"] = 99;
  EXPECT_EQ(code_of([&] { dataset_from_json(j); }), ErrorCode::kSchemaMismatch);
}

TEST(Dataset, SaveLoadRoundTripIsLossless) {
  const Dataset ds = simulated(4, 4, 9);
  const auto path = temp_file("roundtrip.json");
  save_dataset(ds, path);
  const Dataset back = load_dataset(path);
  std::filesystem::remove(path);

  EXPECT_EQ(stack(back.measurements), stack(ds.measurements));
  EXPECT_EQ(back.measurements.emission_times, ds.measurements.emission_times);
  EXPECT_EQ(back.noise.tdoa_var, ds.noise.tdoa_var);
  EXPECT_EQ(back.noise.rel_cov, ds.noise.rel_cov);
  EXPECT_EQ(back.scenario, ds.scenario);
  EXPECT_EQ(back.seed, ds.seed);
  ASSERT_TRUE(back.ground_truth.has_value());
  const StateVector a = pack_state(*back.ground_truth), b = pack_state(*ds.ground_truth);
  // Euler angles travel in degrees; everything else is bit-exact.
  EXPECT_LT((a.values() - b.values()).cwiseAbs().maxCoeff(), 1e-15 * 10);
  for (int i = 1; i < 4; ++i) {
    EXPECT_EQ(a.array(i).position, b.array(i).position);
    EXPECT_EQ(a.array(i).tau, b.array(i).tau);
    EXPECT_EQ(a.array(i).delta, b.array(i).delta);
  }
}

TEST(Dataset, AngleEncodingRoundTripsWithinFloatPrecision) {
  const Dataset ds = simulated(5, 3, 6);
  const Dataset back = dataset_from_json(dataset_to_json(ds, DoaEncoding::kAzimuthElevation));
  EXPECT_LT((stack(back.measurements) - stack(ds.measurements)).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Dataset, AngleConversions) {
  const Vec3 d = doa_from_angles(deg2rad(30.0), deg2rad(-20.0));
  EXPECT_NEAR(d.norm(), 1.0, 1e-15);
  const auto [az, el] = angles_from_doa(d);
  EXPECT_NEAR(rad2deg(az), 30.0, 1e-12);
  EXPECT_NEAR(rad2deg(el), -20.0, 1e-12);
}

TEST(Dataset, NonFiniteNumbersSurvive) {
  EXPECT_TRUE(std::isinf(number_from_json(number_to_json(-std::numeric_limits<double>::infinity()), "x")));
  EXPECT_TRUE(std::isnan(number_from_json(number_to_json(std::nan("")), "x")));
  EXPECT_EQ(number_from_json(number_to_json(0.1), "x"), 0.1);
}

TEST(Dataset, MissingFileIsAnError) {
  EXPECT_THROW(load_dataset(temp_file("does_not_exist.json")), Error);
}

}  // namespace
}  // namespace micarray
