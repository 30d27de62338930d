#pragma once

#include "pso/losses.hpp"

#include <vector>

namespace pso {

struct GaussianSpec {
  Eigen::Vector2d center{0.5, 0.5};
  double amplitude = 1.0;
  double bandwidth = 0.1;
};

/// Two tall (1.0) and two short (0.3) bumps of bandwidth 0.08, one per
/// quadrant of the unit square.
std::vector<GaussianSpec> four_gaussians_preset();

/// Vertex i*width + j sits at (j/(width-1), i/(height-1)); a single row or
/// column maps to coordinate 0.
Eigen::Vector2d grid_position(std::size_t vertex, int width, int height);

ScalarField gaussian_mixture_field(const Graph& grid, int width, int height,
                                   const std::vector<GaussianSpec>& specs);

enum class ValueLoss { Pso, Diagram };

struct ValueOptOptions {
  Direction direction = Direction::Superlevel;
  ValueLoss loss = ValueLoss::Pso;
  double epsilon = 0.5;
  int steps = 50;
  double learning_rate = 0.1;
  double anti_squash_lambda = 0.0;
  // Steps (besides the last) whose field is kept in the report.
  std::vector<int> snapshot_steps;
};

struct ValueOptReport {
  ScalarField final_field;
  std::vector<double> losses;  // steps + 1 entries, initial first
  Vineyard vineyard;           // one row per step, 0..steps
  std::vector<std::pair<int, VectorXd>> snapshots;
  std::vector<std::uint32_t> target_changed;  // PSO mode only
  VectorXd target_values;                     // PSO mode only
};

/// Plain gradient descent on vertex values. PSO mode computes the target once;
/// diagram mode recomputes persistence every step.
ValueOptReport optimize_values(const ScalarField& field, const ValueOptOptions& options);

}  // namespace pso
