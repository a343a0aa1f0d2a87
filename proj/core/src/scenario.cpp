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
#include <array>
#include <cmath>
#include <random>

#include "micarray/errors.hpp"

namespace micarray {

namespace {

constexpr double kMinClearance = 0.5;  // m between a source and any array

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

class Sampler {
 public:
  explicit Sampler(std::uint64_t seed) : rng_(seed) {}

  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
  double normal() { return std::normal_distribution<double>(0.0, 1.0)(rng_); }
  Vec3 uniform_box(const Vec3& lo, const Vec3& hi) {
    return {uniform(lo.x(), hi.x()), uniform(lo.y(), hi.y()), uniform(lo.z(), hi.z())};
  }
  Vec3 unit_vector() {
    for (;;) {
      const Vec3 v = uniform_box(Vec3::Constant(-1.0), Vec3::Constant(1.0));
      const double n = v.norm();
      if (n > 0.1 && n <= 1.0) return v / n;
    }
  }

 private:
  std::mt19937_64 rng_;
};

bool clear_of_arrays(const Vec3& s, const std::vector<ArrayParams>& arrays) {
  return std::all_of(arrays.begin(), arrays.end(),
                     [&](const ArrayParams& a) { return (s - a.position).norm() >= kMinClearance; });
}

std::vector<ArrayParams> random_arrays(Sampler& rng, int n, double half) {
  std::vector<ArrayParams> arrays(n);
  for (int i = 1; i < n; ++i) {
    auto& a = arrays[i];
    do {
      a.position = rng.uniform_box(Vec3::Constant(-half), Vec3::Constant(half));
    } while (a.position.norm() < 1.0);
    a.euler = {rng.uniform(-kPi, kPi), rng.uniform(-kPi / 2 + 0.3, kPi / 2 - 0.3), rng.uniform(-kPi, kPi)};
    a.tau = rng.uniform(-0.1, 0.1);
    a.delta = rng.uniform(-1e-4, 1e-4);
  }
  return arrays;
}

std::vector<Vec3> random_cloud(Sampler& rng, int k, double half, const std::vector<ArrayParams>& arrays) {
  std::vector<Vec3> pts;
  pts.reserve(k);
  while (static_cast<int>(pts.size()) < k) {
    const Vec3 s = rng.uniform_box(Vec3::Constant(-half), Vec3::Constant(half));
    if (clear_of_arrays(s, arrays)) pts.push_back(s);
  }
  return pts;
}

std::vector<Vec3> random_walk(Sampler& rng, int k, double half, const std::vector<ArrayParams>& arrays) {
  std::vector<Vec3> pts;
  pts.reserve(k);
  Vec3 s;
  do {
    s = rng.uniform_box(Vec3::Constant(-half), Vec3::Constant(half));
  } while (!clear_of_arrays(s, arrays));
  pts.push_back(s);
  while (static_cast<int>(pts.size()) < k) {
    const Vec3 next = pts.back() + rng.unit_vector() * rng.uniform(0.3, 1.0);
    if (next.cwiseAbs().maxCoeff() <= half && clear_of_arrays(next, arrays)) pts.push_back(next);
  }
  return pts;
}

std::vector<double> emission_times(Sampler& rng, int k, double lo, double hi) {
  std::vector<double> t(k);
  double acc = 0.0;
  for (int j = 0; j < k; ++j) {
    acc += rng.uniform(lo, hi);
    t[j] = acc;
  }
  return t;
}

// Desk-scale layout used for the initialization-scheme comparison: four
// arrays on a 1.1 m ring around the reference, the source looping inside it.
Geometry preset_geometry(int n_steps, Sampler& rng, double lo, double hi) {
  Geometry g;
  g.arrays.resize(5);
  const std::array<double, 4> azimuth{20.0, 110.0, 200.0, 290.0};
  const std::array<double, 4> height{0.55, -0.4, 0.35, -0.3};
  const std::array<EulerZYX, 4> rot{EulerZYX{deg2rad(10.0), deg2rad(-15.0), deg2rad(150.0)},
                                    EulerZYX{deg2rad(-20.0), deg2rad(25.0), deg2rad(-120.0)},
                                    EulerZYX{deg2rad(5.0), deg2rad(10.0), deg2rad(-45.0)},
                                    EulerZYX{deg2rad(170.0), deg2rad(-5.0), deg2rad(60.0)}};
  const std::array<double, 4> tau{0.05, -0.08, 0.1, -0.03};
  const std::array<double, 4> delta{8e-5, -5e-5, 2e-5, -1e-4};
  for (int i = 0; i < 4; ++i) {
    const double az = deg2rad(azimuth[i]);
    g.arrays[i + 1] = {Vec3(1.1 * std::cos(az), 1.1 * std::sin(az), height[i]), rot[i], tau[i], delta[i]};
  }
  g.trajectory.positions.reserve(n_steps);
  for (int k = 0; k < n_steps; ++k) {
    const double th = 2.0 * kPi * k / n_steps;
    g.trajectory.positions.emplace_back(0.7 * std::cos(th), 0.7 * std::sin(th), 0.7 * std::sin(2.0 * th));
  }
  g.trajectory.emission_times = emission_times(rng, n_steps, lo, hi);
  return g;
}

void require(bool ok, const char* what) {
  if (!ok) throw Error(ErrorCode::kInvalidSpec, what);
}

}  // namespace

std::string_view to_string(ScenarioKind kind) {
  switch (kind) {
    case ScenarioKind::kObservableRandom: return "observable-case-1";
    case ScenarioKind::kObservablePlanar: return "observable-case-2";
    case ScenarioKind::kCollinearReference: return "collinear-ref";
    case ScenarioKind::kCoplanarReference: return "coplanar-ref";
    case ScenarioKind::kCollinearArray: return "collinear-array-2";
    case ScenarioKind::kGimbal: return "gimbal";
    case ScenarioKind::kPreset: return "preset";
    case ScenarioKind::kRandom: return "random";
  }
  return "unknown";
}

ScenarioKind scenario_kind_from_string(std::string_view tag) {
  for (auto k : {ScenarioKind::kObservableRandom, ScenarioKind::kObservablePlanar, ScenarioKind::kCollinearReference,
                 ScenarioKind::kCoplanarReference, ScenarioKind::kCollinearArray, ScenarioKind::kGimbal,
                 ScenarioKind::kPreset, ScenarioKind::kRandom}) {
    if (to_string(k) == tag) return k;
  }
  throw Error(ErrorCode::kInvalidSpec,
              "unknown scenario '" + std::string(tag) +
                  "' (expected observable-case-1, observable-case-2, collinear-ref, coplanar-ref, collinear-array-2, "
                  "gimbal, preset or random)");
}

Scenario make_scenario(const ScenarioSpec& spec) {
  const bool preset = spec.kind == ScenarioKind::kPreset;
  const bool random = spec.kind == ScenarioKind::kRandom;
  const int n = spec.n_arrays.value_or(preset || random ? 5 : 8);
  const int k = spec.n_steps.value_or(preset ? 24 : random ? 80 : 10);
  require(n >= 2, "scenario needs at least two arrays");
  require(k >= 1, "scenario needs at least one step");
  require(spec.room_half_extent > 1.0, "room half extent must exceed 1 m");
  require(spec.min_interval > 0.0 && spec.max_interval >= spec.min_interval, "emission intervals must be positive");
  require(!preset || n == 5, "the preset scenario has exactly five arrays");
  require(spec.kind != ScenarioKind::kGimbal || n >= 7, "the gimbal scenario needs N >= 7");
  require(k >= 3 || !(spec.kind == ScenarioKind::kObservableRandom || spec.kind == ScenarioKind::kObservablePlanar ||
                      spec.kind == ScenarioKind::kRandom),
          "observable scenarios need at least three steps");

  Sampler rng(spec.seed);
  const double half = spec.room_half_extent;
  Scenario sc;
  sc.kind = spec.kind;
  sc.noise = spec.noise;
  auto& g = sc.truth;

  if (preset) {
    g = preset_geometry(k, rng, spec.min_interval, spec.max_interval);
  } else {
    g.arrays = random_arrays(rng, n, half);
    auto& pts = g.trajectory.positions;
    switch (spec.kind) {
      case ScenarioKind::kObservableRandom:
      case ScenarioKind::kGimbal:
        pts = random_cloud(rng, k, half, g.arrays);
        break;
      case ScenarioKind::kObservablePlanar: {
        const double h = 0.4 * half;
        while (static_cast<int>(pts.size()) < k) {
          const Vec3 s(rng.uniform(-half, half), rng.uniform(-half, half), h);
          if (clear_of_arrays(s, g.arrays)) pts.push_back(s);
        }
        break;
      }
      case ScenarioKind::kCollinearReference: {
        // s^k = lambda_{k-1} s^{k-1} with lambda_j = (j + 1) / j, i.e. s^k = k s^1.
        Vec3 s1;
        do {
          s1 = rng.unit_vector() * rng.uniform(0.5, 1.0);
        } while (!std::all_of(g.arrays.begin() + 1, g.arrays.end(), [&](const ArrayParams& a) {
          for (int j = 1; j <= k; ++j) {
            if ((s1 * j - a.position).norm() < kMinClearance) return false;
          }
          return true;
        }));
        for (int j = 1; j <= k; ++j) pts.push_back(s1 * j);
        break;
      }
      case ScenarioKind::kCoplanarReference:
        while (static_cast<int>(pts.size()) < k) {
          const double a = rng.uniform(-half, half);
          const Vec3 s(a, a, rng.uniform(-half, half));
          if (s.norm() >= kMinClearance && clear_of_arrays(s, g.arrays)) pts.push_back(s);
        }
        break;
      case ScenarioKind::kCollinearArray: {
        const Vec3 p2 = g.arrays[1].position;
        Vec3 u;
        bool ok = false;
        while (!ok) {
          u = rng.unit_vector() * rng.uniform(0.5, 1.0);
          ok = true;
          for (int j = 1; j <= k && ok; ++j) {
            const Vec3 s = p2 + u * j;
            ok = s.norm() >= kMinClearance &&
                 std::all_of(g.arrays.begin() + 2, g.arrays.end(),
                             [&](const ArrayParams& a) { return (s - a.position).norm() >= kMinClearance; });
          }
        }
        for (int j = 1; j <= k; ++j) pts.push_back(p2 + u * j);
        break;
      }
      case ScenarioKind::kRandom:
        pts = random_walk(rng, k, half, g.arrays);
        break;
      case ScenarioKind::kPreset:
        break;
    }
    if (spec.kind == ScenarioKind::kGimbal) {
      g.arrays[3].euler.y = kPi / 2;
      g.arrays[6].euler.y = kPi / 2;
    }
    g.trajectory.emission_times = emission_times(rng, k, spec.min_interval, spec.max_interval);
  }
  g.validate();

  DiagnosisOptions opts;
  opts.compute_ranks = false;
  const auto dg = check_theorem_conditions(g, opts);
  auto has = [](const std::vector<int>& v, int x) { return std::find(v.begin(), v.end(), x) != v.end(); };
  switch (spec.kind) {
    case ScenarioKind::kCollinearReference:
      require(dg.collinear_with_reference, "collinear scenario failed its predicate");
      break;
    case ScenarioKind::kCoplanarReference:
      require(dg.coplanar_with_reference_axis_plane, "coplanar scenario failed its predicate");
      break;
    case ScenarioKind::kCollinearArray:
      require(has(dg.collinear_with_array, 2), "array-collinear scenario failed its predicate");
      break;
    case ScenarioKind::kGimbal:
      require(has(dg.gimbal_lock_arrays, 4) && has(dg.gimbal_lock_arrays, 7), "gimbal scenario failed its predicate");
      break;
    default:
      require(!dg.collinear_with_reference && !dg.coplanar_through_reference_origin &&
                  dg.collinear_with_array.empty() && dg.gimbal_lock_arrays.empty(),
              "generated observable scenario is degenerate; try another seed");
      break;
  }
  return sc;
}

std::vector<RankReport> rank_sweep(const Geometry& geometry, double rel_tol, double sound_speed) {
  const auto blocks = jacobian_blocks(geometry, sound_speed);
  std::vector<RankReport> out;
  out.reserve(geometry.n_steps());
  for (int k = 1; k <= geometry.n_steps(); ++k) {
    out.push_back(numerical_rank(reduced_F(blocks, k), rel_tol, "F[1:" + std::to_string(k) + "]"));
  }
  return out;
}

std::string_view to_string(InitScheme scheme) {
  switch (scheme) {
    case InitScheme::kOurs: return "ours";
    case InitScheme::kGroundTruth: return "gt";
    case InitScheme::kLv1: return "lv1";
    case InitScheme::kLv2: return "lv2";
    case InitScheme::kLv3: return "lv3";
    case InitScheme::kLv4: return "lv4";
    case InitScheme::kRandom: return "random";
  }
  return "unknown";
}

InitScheme init_scheme_from_string(std::string_view tag) {
  for (auto s : {InitScheme::kOurs, InitScheme::kGroundTruth, InitScheme::kLv1, InitScheme::kLv2, InitScheme::kLv3,
                 InitScheme::kLv4, InitScheme::kRandom}) {
    if (to_string(s) == tag) return s;
  }
  throw Error(ErrorCode::kInvalidSpec,
              "unknown scheme '" + std::string(tag) + "' (expected ours, gt, lv1, lv2, lv3, lv4 or random)");
}

double perturbation_multiplier(InitScheme scheme) {
  switch (scheme) {
    case InitScheme::kGroundTruth: return 0.0;
    case InitScheme::kLv1: return 1.0;
    case InitScheme::kLv2: return 3.0;
    case InitScheme::kLv3: return 6.0;
    case InitScheme::kLv4: return 9.0;
    default: break;
  }
  throw Error(ErrorCode::kInvalidSpec, "scheme has no perturbation multiplier");
}

StateVector perturb_ground_truth(const StateVector& truth, InitScheme scheme, std::uint64_t seed,
                                 const PerturbationBase& base) {
  if (scheme == InitScheme::kOurs) {
    throw Error(ErrorCode::kInvalidSpec, "the 'ours' scheme initializes from measurements");
  }
  StateVector x = truth;
  if (scheme == InitScheme::kGroundTruth) return x;
  Sampler rng(seed);

  if (scheme == InitScheme::kRandom) {
    Vec3 lo = Vec3::Zero();
    Vec3 hi = Vec3::Zero();
    for (int i = 1; i < truth.n_arrays(); ++i) {
      lo = lo.cwiseMin(truth.array(i).position);
      hi = hi.cwiseMax(truth.array(i).position);
    }
    for (int k = 0; k < truth.n_steps(); ++k) {
      lo = lo.cwiseMin(truth.source(k));
      hi = hi.cwiseMax(truth.source(k));
    }
    const Vec3 c = 0.5 * (lo + hi);
    const Vec3 h = hi - lo;  // twice the half extent
    for (int i = 1; i < truth.n_arrays(); ++i) {
      ArrayParams a;
      a.position = rng.uniform_box(c - h, c + h);
      a.euler = {rng.uniform(-kPi, kPi), rng.uniform(-kPi / 2, kPi / 2), rng.uniform(-kPi, kPi)};
      a.tau = rng.uniform(-0.2, 0.2);
      a.delta = rng.uniform(-2e-4, 2e-4);
      x.set_array(i, a);
    }
    for (int k = 0; k < truth.n_steps(); ++k) x.set_source(k, rng.uniform_box(c - h, c + h));
    x.normalize_angles();
    return x;
  }

  const double m = perturbation_multiplier(scheme);
  for (int i = 1; i < truth.n_arrays(); ++i) {
    ArrayParams a = truth.array(i);
    for (int j = 0; j < 3; ++j) a.position[j] += m * base.position * rng.normal();
    a.euler.x += m * base.orientation * rng.normal();
    a.euler.y += m * base.orientation * rng.normal();
    a.euler.z += m * base.orientation * rng.normal();
    a.tau += m * base.offset * rng.normal();
    a.delta += m * base.clock * rng.normal();
    x.set_array(i, a);
  }
  for (int k = 0; k < truth.n_steps(); ++k) {
    Vec3 s = truth.source(k);
    for (int j = 0; j < 3; ++j) s[j] += m * base.source * rng.normal();
    x.set_source(k, s);
  }
  x.normalize_angles();
  return x;
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream, std::uint64_t salt) {
  return splitmix64(splitmix64(splitmix64(master) ^ stream) ^ salt);
}

}  // namespace micarray
