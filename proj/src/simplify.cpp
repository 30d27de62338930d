#include "pso/simplify.hpp"

#include <algorithm>
#include <functional>
#include <limits>
#include <optional>

namespace pso {

namespace {

void check_epsilon(double epsilon) {
  if (!(epsilon >= 0)) throw InvalidParameter("simplify: epsilon must be nonnegative");
}

// Anchor rule shared by plain and confidence simplification. When
// `root_death` is set, undying branches are treated as dying at that value
// and, if they are not persistent, their whole component is flattened to it.
SimplificationTarget simplify_impl(const MergeTree& tree, const VectorXd& values, double epsilon,
                                   std::optional<double> root_death) {
  check_epsilon(epsilon);
  if (static_cast<std::size_t>(values.size()) != tree.size())
    throw InvalidParameter("simplify: tree and field sizes differ");

  const auto& branches = tree.branches;
  auto persistence = [&](const Branch& b) {
    if (b.finite()) return b.persistence();
    return root_death ? std::abs(b.birth_value - *root_death) : std::numeric_limits<double>::infinity();
  };

  // A branch's parent branch is created before it, so one pass in id order
  // resolves every anchor.
  std::vector<char> low(branches.size());
  std::vector<double> anchor(branches.size(), 0.0);
  for (std::size_t id = 0; id < branches.size(); ++id) {
    const auto& b = branches[id];
    low[id] = persistence(b) <= epsilon;
    if (!low[id]) continue;
    if (!b.finite()) {
      anchor[id] = *root_death;
      continue;
    }
    const auto host = tree.branch_of[b.death_vertex];
    anchor[id] = low[host] ? anchor[host] : values[b.death_vertex];
  }

  SimplificationTarget target;
  target.epsilon = epsilon;
  target.values = values;
  for (std::uint32_t v = 0; v < tree.size(); ++v) {
    const auto id = tree.branch_of[v];
    if (!low[id]) continue;
    target.values[v] = anchor[id];
    if (target.values[v] != values[v]) target.changed.push_back(v);
  }
  return target;
}

}  // namespace

SimplificationTarget simplify(const MergeTree& tree, const ScalarField& field, double epsilon) {
  return simplify_impl(tree, field.values, epsilon, std::nullopt);
}

double epsilon_top_j(const PersistenceDiagram& diagram, int j) {
  if (j < 1) throw InvalidParameter("epsilon_top_j: j must be positive");
  auto pers = diagram.persistences();
  if (pers.size() < static_cast<std::size_t>(j) + 1) return 0.0;
  std::sort(pers.begin(), pers.end(), std::greater<>());
  const double pj = pers[j - 1], pj1 = pers[j];
  if (std::isfinite(pj)) return 0.5 * (pj + pj1);
  if (std::isfinite(pj1)) return pj1;
  // More than j essential points: drop every finite point.
  const auto first_finite = std::find_if(pers.begin(), pers.end(), [](double p) { return std::isfinite(p); });
  return first_finite == pers.end() ? 0.0 : *first_finite;
}

double epsilon_largest_gap(const PersistenceDiagram& diagram) {
  std::vector<double> pers;
  for (const auto& p : diagram.points)
    if (p.finite()) pers.push_back(p.persistence());
  if (pers.size() < 2) return 0.0;
  std::sort(pers.begin(), pers.end(), std::greater<>());
  std::size_t best = 0;
  for (std::size_t i = 1; i + 1 < pers.size(); ++i)
    if (pers[i] - pers[i + 1] > pers[best] - pers[best + 1]) best = i;
  return 0.5 * (pers[best] + pers[best + 1]);
}

std::pair<int, int> top_two(const Eigen::Ref<const Eigen::RowVectorXd>& logits) {
  int top = 0;
  for (int c = 1; c < logits.size(); ++c)
    if (logits[c] > logits[top]) top = c;
  int second = top == 0 ? 1 : 0;
  for (int c = 0; c < logits.size(); ++c)
    if (c != top && logits[c] > logits[second]) second = c;
  return {top, second};
}

ConfidenceField confidence_field(const MatrixXd& logits, const Graph& graph) {
  if (logits.cols() < 2) throw InvalidParameter("confidence_field: need at least two classes");
  if (static_cast<std::size_t>(logits.rows()) != graph.vertex_count())
    throw InvalidParameter("confidence_field: logit rows do not match vertex count");

  const auto n = logits.rows();
  VectorXd conf(n);
  std::vector<int> cls(n);
  for (Eigen::Index v = 0; v < n; ++v) {
    const auto [top, second] = top_two(logits.row(v));
    cls[v] = top;
    conf[v] = logits(v, top) - logits(v, second);
  }
  Graph pruned = graph.without_edges([&](std::uint32_t a, std::uint32_t b) { return cls[a] != cls[b]; });
  return ConfidenceField{ScalarField(graph, std::move(conf)), std::move(cls), std::move(pruned)};
}

SimplificationTarget simplify_confidence(const ConfidenceField& cf, double epsilon) {
  check_epsilon(epsilon);
  const ScalarField on_pruned(cf.pruned_graph, cf.field.values);
  const auto tree = compute_merge_tree(on_pruned, Direction::Superlevel);
  return simplify_impl(tree, cf.field.values, epsilon, 0.0);
}

PersistenceDiagram confidence_diagram(const ConfidenceField& cf) {
  auto dgm = persistence_diagram(ScalarField(cf.pruned_graph, cf.field.values), Direction::Superlevel);
  for (auto& p : dgm.points)
    if (!p.finite()) p.death = 0.0;
  return dgm;
}

}  // namespace pso
