#include "pso/optim_values.hpp"

#include <algorithm>
#include <cmath>

namespace pso {

std::vector<GaussianSpec> four_gaussians_preset() {
  return {
      {{0.25, 0.25}, 1.0, 0.08},
      {{0.75, 0.75}, 1.0, 0.08},
      {{0.75, 0.25}, 0.3, 0.08},
      {{0.25, 0.75}, 0.3, 0.08},
  };
}

Eigen::Vector2d grid_position(std::size_t vertex, int width, int height) {
  const auto i = static_cast<double>(vertex / width);
  const auto j = static_cast<double>(vertex % width);
  return {width > 1 ? j / (width - 1) : 0.0, height > 1 ? i / (height - 1) : 0.0};
}

ScalarField gaussian_mixture_field(const Graph& grid, int width, int height,
                                   const std::vector<GaussianSpec>& specs) {
  if (width < 1 || height < 1 || grid.vertex_count() != static_cast<std::size_t>(width) * height)
    throw InvalidParameter("gaussian_mixture_field: grid dimensions do not match the graph");
  for (const auto& s : specs)
    if (!(s.bandwidth > 0)) throw InvalidParameter("gaussian_mixture_field: bandwidth must be positive");

  VectorXd values = VectorXd::Zero(grid.vertex_count());
  for (std::size_t v = 0; v < grid.vertex_count(); ++v) {
    const auto x = grid_position(v, width, height);
    for (const auto& s : specs)
      values[v] += s.amplitude * std::exp(-(x - s.center).squaredNorm() / (2.0 * s.bandwidth * s.bandwidth));
  }
  return ScalarField(grid, std::move(values));
}

ValueOptReport optimize_values(const ScalarField& field, const ValueOptOptions& options) {
  if (!(options.epsilon >= 0)) throw InvalidParameter("optimize_values: epsilon must be nonnegative");
  if (options.steps < 0) throw InvalidParameter("optimize_values: steps must be nonnegative");
  if (!(options.learning_rate > 0)) throw InvalidParameter("optimize_values: learning rate must be positive");

  ValueOptReport report;
  ScalarField current = field;
  auto wants_snapshot = [&](int step) {
    return std::find(options.snapshot_steps.begin(), options.snapshot_steps.end(), step) !=
           options.snapshot_steps.end();
  };

  SimplificationTarget target;
  if (options.loss == ValueLoss::Pso) {
    target = simplify(compute_merge_tree(field, options.direction), field, options.epsilon);
    report.target_changed = target.changed;
    report.target_values = target.values;
  }
  auto evaluate = [&](const ScalarField& f) {
    return options.loss == ValueLoss::Pso
               ? pso_loss_grad(f.values, target)
               : diagram_loss_grad(f, options.direction, options.epsilon, options.anti_squash_lambda);
  };

  for (int step = 0;; ++step) {
    const auto lg = evaluate(current);
    if (!std::isfinite(lg.loss)) throw NumericError("optimize_values: loss is not finite at step " + std::to_string(step));
    report.losses.push_back(lg.loss);
    report.vineyard = record_vineyard(std::move(report.vineyard), step,
                                      persistence_diagram(current, options.direction));
    if (wants_snapshot(step)) report.snapshots.emplace_back(step, current.values);
    if (step == options.steps) break;
    current.values -= options.learning_rate * lg.grad;
  }
  report.final_field = std::move(current);
  return report;
}

}  // namespace pso
