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

#include <span>
#include <vector>

#include "micarray/state.hpp"

namespace micarray {

/// Per-parameter errors of one estimate against ground truth. One entry per
/// non-reference array (first four) or per source position (last).
struct ParameterErrors {
  std::vector<double> position;     // |p_hat - p|, m
  std::vector<double> orientation;  // arccos((R_hat v . R v) / |v|^2), v = (1,1,1), rad
  std::vector<double> offset;       // tau_hat - tau, s
  std::vector<double> clock;        // delta_hat - delta, s/s
  std::vector<double> source;       // |s_hat - s|, m
};

/// Throws DimensionMismatch when the two states differ in (N, K).
ParameterErrors error_metrics(const StateVector& estimate, const StateVector& truth);

/// Orientation error of one rotation pair with v = (1,1,1).
double orientation_error(const Mat3& estimate, const Mat3& truth);

/// sqrt(mean(e^2)); NaN for an empty list.
double rmse(std::span<const double> errors);

/// RMSE in report units: m, degrees, ms, microseconds (per second), m.
struct RmseRow {
  double position_m = 0.0;
  double orientation_deg = 0.0;
  double offset_ms = 0.0;
  double clock_us = 0.0;
  double source_m = 0.0;
};

/// Pools every parameter over all given trials before taking the RMSE.
RmseRow rmse(std::span<const ParameterErrors> trials);

}  // namespace micarray
