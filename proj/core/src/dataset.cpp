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

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "micarray/errors.hpp"

namespace micarray {

using nlohmann::json;

namespace {

[[noreturn]] void parse_fail(std::string_view field, std::string_view msg) {
  throw Error(ErrorCode::kParseError, "field '" + std::string(field) + "': " + std::string(msg));
}

[[noreturn]] void count_fail(std::string_view field, std::size_t got, std::size_t want) {
  throw Error(ErrorCode::kSchemaMismatch, "field '" + std::string(field) + "' has " + std::to_string(got) +
                                              " entries, expected " + std::to_string(want));
}

const json& member(const json& obj, std::string_view key, const std::string& path) {
  if (!obj.is_object()) parse_fail(path, "expected an object");
  const auto it = obj.find(std::string(key));
  if (it == obj.end()) parse_fail(path.empty() ? std::string(key) : path + "." + std::string(key), "missing");
  return *it;
}

std::string join(const std::string& path, std::string_view key) {
  return path.empty() ? std::string(key) : path + "." + std::string(key);
}

std::string index(const std::string& path, std::size_t i) { return path + "[" + std::to_string(i) + "]"; }

const json& array_of(const json& j, const std::string& path, std::optional<std::size_t> want = std::nullopt) {
  if (!j.is_array()) parse_fail(path, "expected an array");
  if (want && j.size() != *want) count_fail(path, j.size(), *want);
  return j;
}

double number(const json& obj, std::string_view key, const std::string& path) {
  return number_from_json(member(obj, key, path), join(path, key));
}

Vec3 vec3_from_json(const json& j, const std::string& path) {
  if (!j.is_array() || j.size() != 3) parse_fail(path, "expected [x, y, z]");
  return {number_from_json(j[0], index(path, 0)), number_from_json(j[1], index(path, 1)),
          number_from_json(j[2], index(path, 2))};
}

json vec3_to_json(const Vec3& v) { return json::array({number_to_json(v.x()), number_to_json(v.y()), number_to_json(v.z())}); }

json mat3_to_json(const Mat3& m) {
  json rows = json::array();
  for (int r = 0; r < 3; ++r) rows.push_back(vec3_to_json(m.row(r).transpose()));
  return rows;
}

Mat3 mat3_from_json(const json& j, const std::string& path) {
  if (!j.is_array() || j.size() != 3) parse_fail(path, "expected a 3x3 array of rows");
  Mat3 m;
  for (int r = 0; r < 3; ++r) m.row(r) = vec3_from_json(j[r], index(path, r)).transpose();
  return m;
}

json noise_to_json(const NoiseModel& n) {
  return {{"tdoa_var_s2", number_to_json(n.tdoa_var)},
          {"doa_cov", mat3_to_json(n.doa_cov)},
          {"rel_cov_m2", mat3_to_json(n.rel_cov)},
          {"doa_azimuth_std_deg", number_to_json(rad2deg(n.doa_azimuth_std))},
          {"doa_elevation_std_deg", number_to_json(rad2deg(n.doa_elevation_std))}};
}

NoiseModel noise_from_json(const json& j, const std::string& path) {
  NoiseModel n;
  n.tdoa_var = number(j, "tdoa_var_s2", path);
  n.doa_cov = mat3_from_json(member(j, "doa_cov", path), join(path, "doa_cov"));
  n.rel_cov = mat3_from_json(member(j, "rel_cov_m2", path), join(path, "rel_cov_m2"));
  n.doa_azimuth_std = deg2rad(number(j, "doa_azimuth_std_deg", path));
  n.doa_elevation_std = deg2rad(number(j, "doa_elevation_std_deg", path));
  return n;
}

json doa_to_json(const Vec3& d, DoaEncoding enc) {
  if (enc == DoaEncoding::kUnitVector) return vec3_to_json(d);
  const auto [az, el] = angles_from_doa(d);
  return {{"azimuth_deg", number_to_json(rad2deg(az))}, {"elevation_deg", number_to_json(rad2deg(el))}};
}

Vec3 doa_from_json(const json& j, const std::string& path) {
  Vec3 d;
  if (j.is_object()) {
    const double az = number(j, "azimuth_deg", path);
    const double el = number(j, "elevation_deg", path);
    if (az < -180.0 || az > 180.0) parse_fail(join(path, "azimuth_deg"), "must lie in [-180, 180]");
    if (el < -90.0 || el > 90.0) parse_fail(join(path, "elevation_deg"), "must lie in [-90, 90]");
    d = doa_from_angles(deg2rad(az), deg2rad(el));
  } else {
    d = vec3_from_json(j, path);
  }
  if (!d.allFinite() || d.norm() < 1e-12) parse_fail(path, "DOA must be a finite nonzero direction");
  return d.normalized();
}

void line_column(std::string_view text, std::size_t byte, std::size_t& line, std::size_t& col) {
  line = 1;
  col = 1;
  for (std::size_t i = 0; i + 1 < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
}

}  // namespace

json number_to_json(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  return x;
}

double number_from_json(const json& j, std::string_view field) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const auto& s = j.get_ref<const std::string&>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  }
  parse_fail(field, "expected a number");
}

Vec3 doa_from_angles(double azimuth, double elevation) {
  return {std::cos(elevation) * std::cos(azimuth), std::cos(elevation) * std::sin(azimuth), std::sin(elevation)};
}

std::pair<double, double> angles_from_doa(const Vec3& d) {
  return {std::atan2(d.y(), d.x()), std::atan2(d.z(), std::hypot(d.x(), d.y()))};
}

json dataset_to_json(const Dataset& ds, DoaEncoding encoding) {
  const auto& ms = ds.measurements;
  ms.validate();
  json j;
  j["format"] = kDatasetFormat;
  j["schema_version"] = kDatasetSchemaVersion;
  j["n_arrays"] = ms.n_arrays();
  j["n_steps"] = ms.n_steps();
  j["sound_speed_mps"] = number_to_json(ds.sound_speed);
  if (!ds.scenario.empty()) j["scenario"] = ds.scenario;
  if (ds.seed) j["seed"] = *ds.seed;
  j["emission_times_s"] = ms.emission_times;
  json steps = json::array();
  for (const auto& st : ms.steps) {
    json doas = json::array();
    for (const auto& d : st.doas) doas.push_back(doa_to_json(d, encoding));
    json tdoas = json::array();
    for (double t : st.tdoas) tdoas.push_back(number_to_json(t));
    steps.push_back({{"doas", doas}, {"tdoas_s", tdoas}});
  }
  j["steps"] = steps;
  json disp = json::array();
  for (const auto& d : ms.rel_displacements) disp.push_back(vec3_to_json(d));
  j["rel_displacements_m"] = disp;
  j["noise"] = noise_to_json(ds.noise);
  if (ds.ground_truth) {
    const auto& g = *ds.ground_truth;
    json arrays = json::array();
    for (const auto& a : g.arrays) {
      arrays.push_back({{"position_m", vec3_to_json(a.position)},
                        {"euler_deg", vec3_to_json(Vec3(rad2deg(a.euler.x), rad2deg(a.euler.y), rad2deg(a.euler.z)))},
                        {"tau_s", number_to_json(a.tau)},
                        {"delta", number_to_json(a.delta)}});
    }
    json sources = json::array();
    for (const auto& s : g.trajectory.positions) sources.push_back(vec3_to_json(s));
    j["ground_truth"] = {{"arrays", arrays}, {"sources_m", sources}};
  }
  return j;
}

Dataset dataset_from_json(const json& j) {
  if (!j.is_object()) parse_fail("<root>", "expected an object");
  if (const auto it = j.find("format"); it != j.end() && *it != kDatasetFormat) {
    throw Error(ErrorCode::kSchemaMismatch, "not a micarray dataset (format '" + it->dump() + "')");
  }
  const json& ver = member(j, "schema_version", "");
  if (!ver.is_number_integer()) parse_fail("schema_version", "expected an integer");
  if (ver.get<int>() != kDatasetSchemaVersion) {
    throw Error(ErrorCode::kSchemaMismatch, "unsupported schema_version " + ver.dump() + " (this build reads " +
                                                std::to_string(kDatasetSchemaVersion) + ")");
  }
  auto count = [&](std::string_view key) {
    const json& v = member(j, key, "");
    if (!v.is_number_integer() || v.get<long long>() < 1) parse_fail(key, "expected a positive integer");
    return static_cast<std::size_t>(v.get<long long>());
  };
  const std::size_t n = count("n_arrays");
  const std::size_t k = count("n_steps");
  if (n < 2) throw Error(ErrorCode::kSchemaMismatch, "n_arrays must be at least 2");

  Dataset ds;
  if (j.contains("sound_speed_mps")) ds.sound_speed = number(j, "sound_speed_mps", "");
  if (j.contains("scenario")) {
    if (!j["scenario"].is_string()) parse_fail("scenario", "expected a string");
    ds.scenario = j["scenario"].get<std::string>();
  }
  if (j.contains("seed")) {
    if (!j["seed"].is_number_unsigned()) parse_fail("seed", "expected a non-negative integer");
    ds.seed = j["seed"].get<std::uint64_t>();
  }

  auto& ms = ds.measurements;
  const json& times = array_of(member(j, "emission_times_s", ""), "emission_times_s", k);
  for (std::size_t i = 0; i < k; ++i) ms.emission_times.push_back(number_from_json(times[i], index("emission_times_s", i)));

  const json& steps = array_of(member(j, "steps", ""), "steps", k);
  for (std::size_t s = 0; s < k; ++s) {
    const std::string sp = index("steps", s);
    StepMeasurement st;
    const json& doas = array_of(member(steps[s], "doas", sp), join(sp, "doas"), n);
    for (std::size_t a = 0; a < n; ++a) st.doas.push_back(doa_from_json(doas[a], index(join(sp, "doas"), a)));
    const json& tdoas = array_of(member(steps[s], "tdoas_s", sp), join(sp, "tdoas_s"), n - 1);
    for (std::size_t a = 0; a + 1 < n; ++a) st.tdoas.push_back(number_from_json(tdoas[a], index(join(sp, "tdoas_s"), a)));
    ms.steps.push_back(std::move(st));
  }
  const json& disp = array_of(member(j, "rel_displacements_m", ""), "rel_displacements_m", k - 1);
  for (std::size_t i = 0; i + 1 < k; ++i) ms.rel_displacements.push_back(vec3_from_json(disp[i], index("rel_displacements_m", i)));

  ds.noise = j.contains("noise") ? noise_from_json(j["noise"], "noise") : NoiseModel::table_defaults();

  if (j.contains("ground_truth")) {
    const json& gt = j["ground_truth"];
    Geometry g;
    const json& arrays = array_of(member(gt, "arrays", "ground_truth"), "ground_truth.arrays", n);
    for (std::size_t a = 0; a < n; ++a) {
      const std::string ap = index("ground_truth.arrays", a);
      ArrayParams p;
      p.position = vec3_from_json(member(arrays[a], "position_m", ap), join(ap, "position_m"));
      const Vec3 e = vec3_from_json(member(arrays[a], "euler_deg", ap), join(ap, "euler_deg"));
      p.euler = {deg2rad(e.x()), deg2rad(e.y()), deg2rad(e.z())};
      p.tau = number(arrays[a], "tau_s", ap);
      p.delta = number(arrays[a], "delta", ap);
      g.arrays.push_back(p);
    }
    const json& src = array_of(member(gt, "sources_m", "ground_truth"), "ground_truth.sources_m", k);
    for (std::size_t s = 0; s < k; ++s) g.trajectory.positions.push_back(vec3_from_json(src[s], index("ground_truth.sources_m", s)));
    g.trajectory.emission_times = ms.emission_times;
    g.validate();
    ds.ground_truth = std::move(g);
  }
  ms.validate();
  return ds;
}

json parse_json_text(std::string_view text, std::string_view what) {
  try {
    return json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    std::size_t line = 0;
    std::size_t col = 0;
    line_column(text, e.byte, line, col);
    std::ostringstream msg;
    msg << what << ": invalid JSON at line " << line << ", column " << col;
    throw Error(ErrorCode::kParseError, msg.str());
  }
}

Dataset parse_dataset(std::string_view text) { return dataset_from_json(parse_json_text(text, "dataset")); }

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kParseError, "cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kParseError, "cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw Error(ErrorCode::kParseError, "write to '" + path.string() + "' failed");
}

void save_dataset(const Dataset& ds, const std::filesystem::path& path, DoaEncoding encoding) {
  write_text_file(path, dataset_to_json(ds, encoding).dump(2) + "\n");
}

Dataset load_dataset(const std::filesystem::path& path) {
  const std::string text = read_text_file(path);
  try {
    return parse_dataset(text);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kParseError && e.code() != ErrorCode::kSchemaMismatch) throw;
    throw Error(e.code(), path.string() + ": " + e.message());
  }
}

}  // namespace micarray
