#pragma once

#include "pso/merge_tree.hpp"

#include <vector>

namespace pso {

/// An epsilon-simplification g of a field f: ||f - g||_inf <= epsilon and
/// Dgm(g) keeps exactly the points of Dgm(f) with persistence > epsilon.
struct SimplificationTarget {
  VectorXd values;
  double epsilon = 0;
  std::vector<std::uint32_t> changed;  // ascending
};

/// Flattens every branch of persistence <= epsilon onto the value of its
/// first persistent ancestor's merge vertex. Undying branches are kept.
SimplificationTarget simplify(const MergeTree& tree, const ScalarField& field, double epsilon);

/// Midpoint between the j-th and (j+1)-th largest persistences, infinite
/// points ranked first. Returns 0 when the diagram has fewer than j+1 points.
double epsilon_top_j(const PersistenceDiagram& diagram, int j);

/// Midpoint of the largest gap between consecutive finite persistences
/// (sorted descending); the first such gap wins ties. 0 with < 2 finite points.
double epsilon_largest_gap(const PersistenceDiagram& diagram);

struct ConfidenceField {
  ScalarField field;                 // conf(x) over the original graph
  std::vector<int> predicted_class;  // argmax channel, lowest index on ties
  Graph pruned_graph;                // cross-class edges removed
};

/// `logits` holds one row per vertex, one column per class.
ConfidenceField confidence_field(const MatrixXd& logits, const Graph& graph);

/// Superlevel simplification of conf on the pruned graph, where every
/// component's undying branch is treated as dying at 0; components whose
/// peak persistence is <= epsilon are flattened to 0.
SimplificationTarget simplify_confidence(const ConfidenceField& cf, double epsilon);

/// Superlevel diagram of conf on the pruned graph with essential points
/// moved to die at 0.
PersistenceDiagram confidence_diagram(const ConfidenceField& cf);

/// Top channel and runner-up channel of a logit row.
std::pair<int, int> top_two(const Eigen::Ref<const Eigen::RowVectorXd>& logits);

}  // namespace pso
