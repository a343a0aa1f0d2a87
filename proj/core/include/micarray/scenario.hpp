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

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "micarray/measurement.hpp"
#include "micarray/observability.hpp"
#include "micarray/state.hpp"

namespace micarray {

enum class ScenarioKind {
  kObservableRandom,    // random 3D trajectory
  kObservablePlanar,    // plane z = const, away from the reference origin
  kCollinearReference,  // s^k = k s^1
  kCoplanarReference,   // plane x - y = 0
  kCollinearArray,      // s^k - p_2 = k (s^1 - p_2)
  kGimbal,              // arrays 4 and 7 at pitch pi/2, random trajectory
  kPreset,              // fixed room-scale layout, N = 5, K = 24
  kRandom,              // random arrays and random-walk trajectory
};

std::string_view to_string(ScenarioKind kind);
/// Accepts the tags printed by to_string. Throws InvalidSpec otherwise.
ScenarioKind scenario_kind_from_string(std::string_view tag);

struct ScenarioSpec {
  ScenarioKind kind = ScenarioKind::kObservableRandom;
  /// Unset means the kind's default (8 arrays / 10 steps; preset 5 / 24).
  std::optional<int> n_arrays;
  std::optional<int> n_steps;
  std::uint64_t seed = 0;
  double room_half_extent = 5.0;  // m, random layouts
  double min_interval = 0.5;      // s
  double max_interval = 2.0;      // s
  NoiseModel noise = NoiseModel::table_defaults();
};

struct Scenario {
  ScenarioKind kind = ScenarioKind::kObservableRandom;
  Geometry truth;
  NoiseModel noise;

  std::string tag() const { return std::string(to_string(kind)); }
};

/// Builds the scenario and checks that the tagged unobservable predicate
/// holds exactly. Throws InvalidSpec for unsupported sizes.
Scenario make_scenario(const ScenarioSpec& spec);

/// Rank of F built from the first k steps, for k = 1..K.
std::vector<RankReport> rank_sweep(const Geometry& geometry, double rel_tol = kDefaultRankTolerance,
                                   double sound_speed = kDefaultSoundSpeed);

enum class InitScheme { kOurs, kGroundTruth, kLv1, kLv2, kLv3, kLv4, kRandom };

std::string_view to_string(InitScheme scheme);
InitScheme init_scheme_from_string(std::string_view tag);

/// Multiplier of the base perturbation STD: GT 0, Lv1..Lv4 1/3/6/9.
/// Throws InvalidSpec for Ours and Random.
double perturbation_multiplier(InitScheme scheme);

/// Base perturbation STDs of the GT-noise schemes.
struct PerturbationBase {
  double position = 0.2;                 // m
  double orientation = deg2rad(10.0);    // rad
  double offset = 1e-2;                  // s
  double clock = 1e-5;                   // s/s
  double source = 0.2;                   // m
};

/// Initial guess for a GT-based or Random scheme. GT returns `truth`
/// unchanged. Random draws positions uniformly in the scene bounding box
/// scaled 2x about its center, Euler angles over their full ranges, tau in
/// [-0.2, 0.2] s and delta in [-2e-4, 2e-4].
StateVector perturb_ground_truth(const StateVector& truth, InitScheme scheme, std::uint64_t seed,
                                 const PerturbationBase& base = {});

/// Deterministic 64-bit mix of a master seed and a stream index.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream, std::uint64_t salt = 0);

}  // namespace micarray
