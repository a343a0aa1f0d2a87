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

#include "micarray/solver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <sstream>

#include <Eigen/Cholesky>
#include <Eigen/SparseCholesky>

namespace micarray {

namespace {

constexpr double kPivotTolerance = 1e-12;

void check_dimensions(const StateVector& x, const MeasurementSet& ms) {
  if (x.n_arrays() != ms.n_arrays() || x.n_steps() != ms.n_steps()) {
    std::ostringstream msg;
    msg << "state is for N=" << x.n_arrays() << ", K=" << x.n_steps() << " but measurements have N="
        << ms.n_arrays() << ", K=" << ms.n_steps();
    throw Error(ErrorCode::kDimensionMismatch, msg.str());
  }
}

}  // namespace

void SolverConfig::validate() const {
  if (max_iterations <= 0 || !(step_threshold > 0.0) || !(divergence_norm_cap > 0.0) ||
      !(oscillation_level > 0.0) || oscillation_window < 2 || growth_window < 2 || !(sound_speed > 0.0)) {
    throw Error(ErrorCode::kInvalidSpec, "solver settings must be positive (windows >= 2)");
  }
}

std::vector<Factor> linearize(const StateVector& x, const MeasurementSet& ms, double sound_speed) {
  ms.validate();
  check_dimensions(x, ms);
  const int n = ms.n_arrays();
  const int k = ms.n_steps();

  std::vector<ArrayParams> arrays(n);
  for (int i = 1; i < n; ++i) arrays[i] = x.array(i);

  std::vector<Factor> factors;
  factors.reserve(static_cast<std::size_t>(k) * (n + 1));
  Eigen::Index row = 0;
  for (int j = 0; j < k; ++j) {
    const Vec3 s = x.source(j);
    const double d1 = s.norm();
    if (!(d1 >= 1e-9)) throw Error(ErrorCode::kDegenerateGeometry, "source coincides with the reference array");
    const auto& step = ms.steps[j];
    const Eigen::Index scol = x.source_offset(j);

    Factor ref;
    ref.kind = FactorKind::kReferenceDoa;
    ref.row = row;
    ref.step = j;
    ref.error = s / d1 - step.doas[0];
    ref.blocks.push_back({scol, (Mat3::Identity() * d1 * d1 - s * s.transpose()) / (d1 * d1 * d1)});
    factors.push_back(std::move(ref));
    row += 3;

    const Eigen::RowVector3d t1 = s.transpose() / (sound_speed * d1);
    for (int i = 1; i < n; ++i) {
      const auto& a = arrays[i];
      const auto b = array_step_block(a, s, ms.emission_times[j], sound_speed);
      Factor f;
      f.kind = FactorKind::kAcoustic;
      f.row = row;
      f.step = j;
      f.array = i;
      f.error.resize(4);
      f.error[0] = tdoa(a, d1, s, ms.emission_times[j], sound_speed) - step.tdoas[i - 1];
      f.error.tail<3>() = doa(a, s) - step.doas[i];
      Eigen::MatrixXd jb(4, 3);
      jb.row(0) = -b.h - t1;
      jb.bottomRows<3>() = -b.U;
      f.blocks.push_back({x.array_offset(i), b.H()});
      f.blocks.push_back({scol, std::move(jb)});
      factors.push_back(std::move(f));
      row += 4;
    }

    if (j + 1 < k) {
      Factor o;
      o.kind = FactorKind::kOdometry;
      o.row = row;
      o.step = j;
      o.error = x.source(j + 1) - s - ms.rel_displacements[j];
      o.blocks.push_back({scol, -Mat3::Identity()});
      o.blocks.push_back({x.source_offset(j + 1), Mat3::Identity()});
      factors.push_back(std::move(o));
      row += 3;
    }
  }
  return factors;
}

ResidualJacobian residuals_and_jacobian(const StateVector& x, const MeasurementSet& ms, double sound_speed) {
  const auto factors = linearize(x, ms, sound_speed);
  const auto rows = MeasurementSet::stacked_size(ms.n_arrays(), ms.n_steps());
  ResidualJacobian out;
  out.error.resize(rows);
  std::vector<Eigen::Triplet<double>> triplets;
  for (const auto& f : factors) {
    out.error.segment(f.row, f.error.size()) = f.error;
    for (const auto& blk : f.blocks) {
      for (Eigen::Index r = 0; r < blk.jacobian.rows(); ++r) {
        for (Eigen::Index c = 0; c < blk.jacobian.cols(); ++c) {
          if (blk.jacobian(r, c) != 0.0) triplets.emplace_back(f.row + r, blk.col + c, blk.jacobian(r, c));
        }
      }
    }
  }
  out.jacobian.resize(rows, x.size());
  out.jacobian.setFromTriplets(triplets.begin(), triplets.end());
  return out;
}

FactorWeights factor_weights(std::span<const Factor> factors, const Eigen::SparseMatrix<double>& weights) {
  Eigen::Index rows = 0;
  for (const auto& f : factors) rows = std::max(rows, f.row + f.error.size());
  if (weights.rows() != rows || weights.cols() != rows) {
    std::ostringstream msg;
    msg << "weight matrix is " << weights.rows() << "x" << weights.cols() << ", expected " << rows << "x" << rows;
    throw Error(ErrorCode::kDimensionMismatch, msg.str());
  }
  std::vector<int> owner(static_cast<std::size_t>(rows), -1);
  for (std::size_t fi = 0; fi < factors.size(); ++fi) {
    for (Eigen::Index r = 0; r < factors[fi].error.size(); ++r) owner[factors[fi].row + r] = static_cast<int>(fi);
  }

  std::vector<Eigen::MatrixXd> blocks(factors.size());
  for (std::size_t fi = 0; fi < factors.size(); ++fi) {
    const auto m = factors[fi].error.size();
    blocks[fi] = Eigen::MatrixXd::Zero(m, m);
  }
  for (Eigen::Index c = 0; c < weights.outerSize(); ++c) {
    for (Eigen::SparseMatrix<double>::InnerIterator it(weights, c); it; ++it) {
      const int fr = owner[it.row()];
      const int fc = owner[it.col()];
      if (fr != fc || fr < 0) {
        if (it.value() == 0.0) continue;
        throw Error(ErrorCode::kDimensionMismatch, "weight matrix couples different constraints");
      }
      const auto& f = factors[fr];
      blocks[fr](it.row() - f.row, it.col() - f.row) = it.value();
    }
  }

  FactorWeights out;
  out.inverse.reserve(blocks.size());
  for (auto& b : blocks) {
    Eigen::LLT<Eigen::MatrixXd> llt(b);
    if (llt.info() != Eigen::Success) {
      throw Error(ErrorCode::kInvalidSpec, "a weight block is not positive definite");
    }
    out.inverse.push_back(llt.solve(Eigen::MatrixXd::Identity(b.rows(), b.cols())));
  }
  return out;
}

NormalEquations assemble_normal_equations(std::span<const Factor> factors, const FactorWeights& weights,
                                          Eigen::Index dimension) {
  if (weights.inverse.size() != factors.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "one weight block per factor expected");
  }
  NormalEquations ne;
  ne.b = Eigen::VectorXd::Zero(dimension);
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(factors.size() * 121);
  for (std::size_t fi = 0; fi < factors.size(); ++fi) {
    const auto& f = factors[fi];
    const auto& winv = weights.inverse[fi];
    const Eigen::VectorXd we = winv * f.error;
    ne.cost += f.error.dot(we);
    for (const auto& p : f.blocks) {
      ne.b.segment(p.col, p.jacobian.cols()) += p.jacobian.transpose() * we;
      const Eigen::MatrixXd pw = p.jacobian.transpose() * winv;
      for (const auto& q : f.blocks) {
        const Eigen::MatrixXd hpq = pw * q.jacobian;
        for (Eigen::Index r = 0; r < hpq.rows(); ++r) {
          for (Eigen::Index c = 0; c < hpq.cols(); ++c) {
            if (hpq(r, c) != 0.0) triplets.emplace_back(p.col + r, q.col + c, hpq(r, c));
          }
        }
      }
    }
  }
  ne.H.resize(dimension, dimension);
  ne.H.setFromTriplets(triplets.begin(), triplets.end());
  return ne;
}

NormalEquations assemble_normal_equations(std::span<const Factor> factors, const Eigen::SparseMatrix<double>& weights,
                                          Eigen::Index dimension) {
  return assemble_normal_equations(factors, factor_weights(factors, weights), dimension);
}

Eigen::VectorXd solve_normal_equations(const NormalEquations& ne) {
  const Eigen::Index n = ne.H.rows();
  auto singular = [&](const std::string& why) -> SingularNormalEquationsError {
    const auto rank = numerical_rank(Eigen::MatrixXd(ne.H), kDefaultRankTolerance, "H");
    std::ostringstream msg;
    msg << why << "; numerical rank " << rank.numerical_rank << " of " << n << ", gap ratio " << rank.gap_ratio;
    return SingularNormalEquationsError(msg.str(), rank);
  };

  const Eigen::VectorXd diag = ne.H.diagonal();
  if (!diag.allFinite() || !ne.b.allFinite()) throw singular("normal equations contain non-finite values");
  Eigen::VectorXd scale(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    if (!(diag[j] > 0.0)) throw singular("H has a non-positive diagonal entry");
    scale[j] = 1.0 / std::sqrt(diag[j]);
  }
  const Eigen::SparseMatrix<double> hs = scale.asDiagonal() * ne.H * scale.asDiagonal();
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(hs);
  if (ldlt.info() != Eigen::Success) throw singular("LDL^T factorization of H failed");
  const Eigen::VectorXd d = ldlt.vectorD();
  const double dmax = d.cwiseAbs().maxCoeff();
  if (!(d.minCoeff() > kPivotTolerance * dmax)) throw singular("H is not positive definite");
  const Eigen::VectorXd y = ldlt.solve(-(scale.asDiagonal() * ne.b));
  return scale.asDiagonal() * y;
}

std::vector<double> IterationTrace::step_norms() const {
  std::vector<double> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(r.step_norm);
  return out;
}

std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::kConverged: return "Converged";
    case Verdict::kMaxIterations: return "MaxIterations";
    case Verdict::kDiverged: return "Diverged";
  }
  return "Unknown";
}

std::string VerdictDetail::to_string() const {
  std::string s = micarray::to_string(verdict);
  switch (rule) {
    case DivergenceRule::kNone: break;
    case DivergenceRule::kNormCap: s += "(rule 1: norm cap)"; break;
    case DivergenceRule::kOscillation: s += "(rule 2: oscillation)"; break;
    case DivergenceRule::kGrowth: s += "(rule 3: growth)"; break;
  }
  return s;
}

VerdictDetail classify_divergence(std::span<const double> steps, const SolverConfig& config) {
  VerdictDetail v;
  if (steps.empty()) return v;
  for (double s : steps) {
    if (!std::isfinite(s) || s > config.divergence_norm_cap) {
      v.verdict = Verdict::kDiverged;
      v.rule = DivergenceRule::kNormCap;
      return v;
    }
  }
  if (steps.back() < config.step_threshold) {
    v.verdict = Verdict::kConverged;
    return v;
  }
  const auto n = steps.size();
  const auto wo = static_cast<std::size_t>(config.oscillation_window);
  if (n >= wo) {
    const auto tail = steps.subspan(n - wo);
    const bool high = std::all_of(tail.begin(), tail.end(), [&](double s) { return s > config.oscillation_level; });
    bool up = false;
    bool down = false;
    for (std::size_t j = 1; j < tail.size(); ++j) {
      up = up || tail[j] > tail[j - 1];
      down = down || tail[j] < tail[j - 1];
    }
    if (high && up && down) {
      v.verdict = Verdict::kDiverged;
      v.rule = DivergenceRule::kOscillation;
      return v;
    }
  }
  const auto wg = static_cast<std::size_t>(config.growth_window);
  if (n >= wg) {
    const auto tail = steps.subspan(n - wg);
    bool growing = true;
    for (std::size_t j = 1; j < tail.size(); ++j) growing = growing && tail[j] > tail[j - 1];
    if (growing) {
      v.verdict = Verdict::kDiverged;
      v.rule = DivergenceRule::kGrowth;
      return v;
    }
  }
  return v;
}

VerdictDetail classify_divergence(const IterationTrace& trace, const SolverConfig& config) {
  const auto steps = trace.step_norms();
  return classify_divergence(std::span<const double>(steps), config);
}

SolveResult gauss_newton(const StateVector& x0, const MeasurementSet& ms, const Eigen::SparseMatrix<double>& weights,
                         const SolverConfig& config) {
  config.validate();
  ms.validate();
  check_dimensions(x0, ms);

  SolveResult res;
  res.state = x0;
  auto& x = res.state;
  x.normalize_angles();
  FactorWeights fw;
  using Clock = std::chrono::steady_clock;
  for (int it = 1; it <= config.max_iterations; ++it) {
    const auto t0 = Clock::now();
    const auto factors = linearize(x, ms, config.sound_speed);
    if (it == 1) fw = factor_weights(factors, weights);
    const auto ne = assemble_normal_equations(factors, fw, x.size());
    if (it == 1) res.initial_cost = ne.cost;
    const Eigen::VectorXd dx = solve_normal_equations(ne);
    const double step = dx.norm();

    IterationRecord rec;
    rec.iteration = it;
    rec.step_norm = std::isfinite(step) ? step : std::numeric_limits<double>::infinity();
    rec.cost = ne.cost;
    rec.wall_time_s = std::chrono::duration<double>(Clock::now() - t0).count();
    res.trace.records.push_back(rec);

    if (!std::isfinite(step) || step > config.divergence_norm_cap) break;
    if (step < config.step_threshold) break;
    x.values() += dx;
    x.normalize_angles();
  }
  res.verdict = classify_divergence(res.trace, config);
  try {
    res.final_cost = weighted_cost(x, ms, weights, config.sound_speed);
  } catch (const Error&) {
    res.final_cost = std::numeric_limits<double>::infinity();
  }
  return res;
}

double weighted_cost(const StateVector& x, const MeasurementSet& ms, const Eigen::SparseMatrix<double>& weights,
                     double sound_speed) {
  const auto factors = linearize(x, ms, sound_speed);
  const auto fw = factor_weights(factors, weights);
  double cost = 0.0;
  for (std::size_t fi = 0; fi < factors.size(); ++fi) {
    cost += factors[fi].error.dot(fw.inverse[fi] * factors[fi].error);
  }
  return cost;
}

}  // namespace micarray
