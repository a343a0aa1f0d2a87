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

// JSON dataset files. Units on the wire: seconds, meters, degrees. A DOA is
// either a unit vector [x, y, z] or {"azimuth_deg": a, "elevation_deg": e}
// with azimuth measured from +x toward +y in [-180, 180] and elevation from
// the x-y plane in [-90, 90].

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "micarray/measurement.hpp"
#include "micarray/state.hpp"

namespace micarray {

inline constexpr int kDatasetSchemaVersion = 1;
inline constexpr std::string_view kDatasetFormat = "micarray-dataset";

enum class DoaEncoding { kUnitVector, kAzimuthElevation };

struct Dataset {
  MeasurementSet measurements;
  NoiseModel noise;
  double sound_speed = kDefaultSoundSpeed;
  std::optional<Geometry> ground_truth;
  /// Provenance of simulated files; empty for recorded data.
  std::string scenario;
  std::optional<std::uint64_t> seed;
};

/// Unit vector of an (azimuth, elevation) pair in radians.
Vec3 doa_from_angles(double azimuth, double elevation);
/// Inverse of doa_from_angles for a unit vector.
std::pair<double, double> angles_from_doa(const Vec3& doa);

nlohmann::json dataset_to_json(const Dataset& ds, DoaEncoding encoding = DoaEncoding::kUnitVector);

/// Validates counts against the declared N and K (SchemaMismatch) and field
/// types (ParseError naming the field). DOAs are renormalized.
Dataset dataset_from_json(const nlohmann::json& j);

/// Parses text; syntax errors become ParseError with line and column.
Dataset parse_dataset(std::string_view text);

void save_dataset(const Dataset& ds, const std::filesystem::path& path,
                  DoaEncoding encoding = DoaEncoding::kUnitVector);
Dataset load_dataset(const std::filesystem::path& path);

/// Reads a whole text file. Throws ParseError when it cannot be opened.
std::string read_text_file(const std::filesystem::path& path);
/// Writes `text`, creating parent directories. Throws ParseError on failure.
void write_text_file(const std::filesystem::path& path, std::string_view text);

/// Parses JSON text, mapping syntax errors to ParseError with line and column.
nlohmann::json parse_json_text(std::string_view text, std::string_view what);

/// Non-finite doubles are written as the strings "inf", "-inf" and "nan".
nlohmann::json number_to_json(double x);
double number_from_json(const nlohmann::json& j, std::string_view field);

}  // namespace micarray
