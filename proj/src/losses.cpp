#include "pso/losses.hpp"

namespace pso {

LossGrad pso_loss_grad(const Eigen::Ref<const VectorXd>& f, const SimplificationTarget& target) {
  if (f.size() != target.values.size()) throw InvalidParameter("pso_loss_grad: length mismatch");
  const VectorXd diff = f - target.values;
  return {diff.squaredNorm(), 2.0 * diff};
}

LossGrad diagram_loss_grad(const ScalarField& field, Direction direction, double epsilon,
                           double anti_squash_lambda) {
  if (anti_squash_lambda < 0) throw InvalidParameter("diagram_loss_grad: lambda must be nonnegative");
  LossGrad out{0.0, VectorXd::Zero(field.values.size())};
  const auto dgm = persistence_diagram(field, direction);
  for (const auto& p : dgm.points) {
    if (!p.finite()) continue;
    const double gap = p.death - p.birth;
    const double weight = p.persistence() <= epsilon ? 1.0 : -anti_squash_lambda;
    if (weight == 0.0) continue;
    out.loss += weight * gap * gap;
    out.grad[p.death_vertex] += weight * 2.0 * gap;
    out.grad[p.birth_vertex] -= weight * 2.0 * gap;
  }
  return out;
}

Vineyard record_vineyard(Vineyard vineyard, long step, const PersistenceDiagram& diagram) {
  if (!vineyard.samples.empty() && step <= vineyard.samples.back().step)
    throw InvalidParameter("record_vineyard: steps must be strictly increasing");
  vineyard.samples.push_back({step, diagram.persistences()});
  return vineyard;
}

}  // namespace pso
