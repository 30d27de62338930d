#pragma once

#include "pso/field.hpp"

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

namespace pso {

inline constexpr std::uint32_t kNoVertex = std::numeric_limits<std::uint32_t>::max();

/// A maximal path from an extremum to the vertex where its component merged
/// into an older one. Undying branches carry death_value = +inf (sublevel)
/// or -inf (superlevel) and no death vertex.
struct Branch {
  std::uint32_t extremum = kNoVertex;
  std::uint32_t death_vertex = kNoVertex;
  double birth_value = 0;
  double death_value = 0;

  bool finite() const { return death_vertex != kNoVertex; }
  double persistence() const { return std::abs(death_value - birth_value); }
};

/// Merge tree (forest) of a vertex-valued graph filtration.
///
/// The tree edges are {(v, parent[v])}; `order` lists vertices in filtration
/// order, which is (value, index) ascending for sublevel sets and
/// (-value, index) ascending for superlevel sets.
struct MergeTree {
  Direction direction = Direction::Sublevel;
  std::vector<std::uint32_t> order;
  std::vector<std::uint32_t> rank;  // inverse of order
  std::vector<std::uint32_t> parent;
  std::vector<std::uint32_t> branch_of;
  std::vector<Branch> branches;

  std::optional<std::uint32_t> parent_of(std::uint32_t v) const {
    return parent[v] == kNoVertex ? std::nullopt : std::optional<std::uint32_t>(parent[v]);
  }
  std::size_t size() const { return order.size(); }
};

struct PersistencePoint {
  double birth = 0;
  double death = 0;  // +-inf for essential classes
  std::uint32_t birth_vertex = kNoVertex;
  std::uint32_t death_vertex = kNoVertex;

  bool finite() const { return std::isfinite(death); }
  double persistence() const { return std::abs(death - birth); }
};

struct PersistenceDiagram {
  Direction direction = Direction::Sublevel;
  std::vector<PersistencePoint> points;

  std::size_t infinite_count() const;
  std::vector<double> persistences() const;
};

/// Per-step persistences of a family of diagrams. Infinite persistences are
/// kept as +inf.
struct Vineyard {
  struct Sample {
    long step = 0;
    std::vector<double> persistences;
  };
  std::vector<Sample> samples;
};

/// Sweep with union-find (union by size, path compression). Runs in
/// O(n log n + m alpha(m)).
MergeTree compute_merge_tree(const ScalarField& field, Direction direction);

PersistenceDiagram diagram_of(const MergeTree& tree);

/// Same result as diagram_of(compute_merge_tree(...)) without building the
/// tree: vertices descend to their earliest neighbor, and union-find runs only
/// over the minima, joined at vertices that touch more than one basin.
PersistenceDiagram persistence_diagram(const ScalarField& field, Direction direction);

/// Vertices sorted by filtration order for the given direction.
std::vector<std::uint32_t> filtration_order(const VectorXd& values, Direction direction);

}  // namespace pso
