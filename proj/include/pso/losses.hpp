#pragma once

#include "pso/simplify.hpp"

namespace pso {

struct LossGrad {
  double loss = 0;
  VectorXd grad;
};

/// sum_v (f(v) - g(v))^2 against a fixed simplification target.
LossGrad pso_loss_grad(const Eigen::Ref<const VectorXd>& f, const SimplificationTarget& target);

/// Diagram loss over finite pairs with persistence <= epsilon, minus
/// anti_squash_lambda times the same sum over finite pairs above epsilon.
/// Gradients land only on the birth and death vertices of those pairs.
LossGrad diagram_loss_grad(const ScalarField& field, Direction direction, double epsilon,
                           double anti_squash_lambda = 0.0);

/// Appends the diagram's persistences as the row for `step`, which must
/// exceed every step already recorded.
Vineyard record_vineyard(Vineyard vineyard, long step, const PersistenceDiagram& diagram);

}  // namespace pso
