#include "pso/simplify.hpp"
#include "support/oracle.hpp"

#include <doctest.h>

using namespace pso;
using namespace pso::testing;

namespace {

const double kInf = std::numeric_limits<double>::infinity();

ScalarField path_field(std::vector<double> values) {
  std::vector<Edge> edges;
  for (std::uint32_t i = 0; i + 1 < values.size(); ++i) edges.emplace_back(i, i + 1);
  return ScalarField(Graph(values.size(), edges), Eigen::Map<VectorXd>(values.data(), values.size()));
}

PersistenceDiagram diagram_with(std::vector<double> persistences) {
  PersistenceDiagram d;
  for (double p : persistences) d.points.push_back({0.0, p, 0, std::isfinite(p) ? 0u : kNoVertex});
  return d;
}

bool same_pairs(const PersistenceDiagram& a, const PersistenceDiagram& b, double tol) {
  const auto pa = value_pairs(a), pb = value_pairs(b);
  if (pa.size() != pb.size()) return false;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    if (std::abs(pa[i].first - pb[i].first) > tol) return false;
    const bool inf_a = !std::isfinite(pa[i].second), inf_b = !std::isfinite(pb[i].second);
    if (inf_a != inf_b || (!inf_a && std::abs(pa[i].second - pb[i].second) > tol)) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("simplifying the five-vertex path") {
  const auto f = path_field({2, 0, 3, 1, 4});
  const auto tree = compute_merge_tree(f, Direction::Sublevel);

  const auto g = simplify(tree, f, 2.5);
  CHECK(g.epsilon == 2.5);
  CHECK(g.values == (VectorXd(5) << 2, 0, 3, 3, 4).finished());
  CHECK(g.changed == std::vector<std::uint32_t>{3});

  const auto same = simplify(tree, f, 0.0);
  CHECK(same.values == f.values);
  CHECK(same.changed.empty());

  // Below the pair's persistence nothing moves.
  CHECK(simplify(tree, f, 1.999).changed.empty());
  CHECK_THROWS_AS(simplify(tree, f, -1.0), InvalidParameter);
}

TEST_CASE("nested low branches share the first persistent anchor") {
  // Minima 0 (v0), 1 (v2), 1.5 (v4); v4 merges into v2's branch at 2,
  // which then merges into v0's at 3.
  const auto f = path_field({0, 3, 1, 2, 1.5});
  const auto tree = compute_merge_tree(f, Direction::Sublevel);
  const auto g = simplify(tree, f, 2.5);
  CHECK(g.values == (VectorXd(5) << 0, 3, 3, 3, 3).finished());
  CHECK(g.changed == std::vector<std::uint32_t>{2, 3, 4});
  // With only the inner pair low, it flattens to its own merge value.
  const auto h = simplify(tree, f, 0.6);
  CHECK(h.values == (VectorXd(5) << 0, 3, 1, 2, 2).finished());
}

TEST_CASE("epsilon from the top persistences") {
  const auto d = diagram_with({kInf, 4, 3.5, 0.9, 0.2});
  CHECK(epsilon_top_j(d, 2) == doctest::Approx(3.75));
  CHECK(epsilon_top_j(d, 3) == doctest::Approx(2.2));
  CHECK(epsilon_top_j(d, 1) == doctest::Approx(4.0));
  CHECK(epsilon_top_j(d, 5) == 0.0);
  CHECK(epsilon_top_j(diagram_with({kInf, kInf, 2, 1}), 2) == doctest::Approx(2.0));
  CHECK(epsilon_top_j(diagram_with({kInf, kInf, kInf, 2, 1}), 2) == doctest::Approx(2.0));
  CHECK_THROWS_AS(epsilon_top_j(d, 0), InvalidParameter);
}

TEST_CASE("epsilon from the largest gap") {
  CHECK(epsilon_largest_gap(diagram_with({kInf, 4, 3.5, 0.9, 0.2})) == doctest::Approx(2.2));
  CHECK(epsilon_largest_gap(diagram_with({1, 1, 1})) == doctest::Approx(1.0));
  CHECK(epsilon_largest_gap(diagram_with({3, 2, 1})) == doctest::Approx(2.5));
  CHECK(epsilon_largest_gap(diagram_with({kInf, 5})) == 0.0);
}

TEST_CASE("confidence field") {
  MatrixXd logits(2, 2);
  logits << 2, 1, 0, 3;
  const auto cf = confidence_field(logits, Graph(2, {{0, 1}}));
  CHECK(cf.field.values == (VectorXd(2) << 1, 3).finished());
  CHECK(cf.predicted_class == std::vector<int>{0, 1});
  CHECK(cf.pruned_graph.edge_count() == 0);
  CHECK(cf.field.graph.edge_count() == 1);

  SUBCASE("ties pick the lower channel") {
    MatrixXd tied(1, 3);
    tied << 2, 2, 1;
    const auto t = confidence_field(tied, Graph(1, {}));
    CHECK(t.predicted_class[0] == 0);
    CHECK(t.field.values[0] == 0.0);
    CHECK(top_two(tied.row(0)) == std::pair{0, 1});
  }
  SUBCASE("shape errors") {
    CHECK_THROWS_AS(confidence_field(MatrixXd::Zero(2, 1), Graph(2, {})), InvalidParameter);
    CHECK_THROWS_AS(confidence_field(MatrixXd::Zero(3, 2), Graph(2, {})), InvalidParameter);
  }
}

TEST_CASE("confidence simplification flattens weak components to zero") {
  // Path 0-1-2-3, classes 0,0,1,1; peaks 2 (v0) and 0.5 (v3).
  MatrixXd logits(4, 2);
  logits << 2, 0, 1, 0, 0, 0.25, 0, 0.5;
  const auto cf = confidence_field(logits, Graph(4, {{0, 1}, {1, 2}, {2, 3}}));
  CHECK(cf.pruned_graph.edge_count() == 2);

  const auto dgm = confidence_diagram(cf);
  CHECK(value_pairs(dgm) == std::vector<std::pair<double, double>>{{0.5, 0.0}, {2.0, 0.0}});

  const auto g = simplify_confidence(cf, 1.0);
  CHECK(g.values == (VectorXd(4) << 2, 1, 0, 0).finished());
  CHECK(g.changed == std::vector<std::uint32_t>{2, 3});
  CHECK(simplify_confidence(cf, 0.4).changed.empty());
}

TEST_CASE("simplification contract on random graphs") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + trial % 60;
    const ScalarField f(random_graph(n, 0.05 + 0.2 * unit(rng), rng), random_values(n, trial % 4 == 0, rng));
    const double eps = 0.6 * unit(rng);
    for (auto dir : {Direction::Sublevel, Direction::Superlevel}) {
      const auto tree = compute_merge_tree(f, dir);
      const auto g = simplify(tree, f, eps);
      CHECK((g.values - f.values).cwiseAbs().maxCoeff() <= eps + 1e-15);
      const ScalarField gf(f.graph, g.values);
      const auto dg = persistence_diagram(gf, dir);
      CHECK(same_pairs(off_diagonal(dg), filtered(persistence_diagram(f, dir), eps), 1e-12));

      for (std::uint32_t v = 0; v < n; ++v)
        CHECK((g.values[v] != f.values[v]) == std::binary_search(g.changed.begin(), g.changed.end(), v));

      // Simplifying again at the same level changes nothing.
      CHECK(simplify(compute_merge_tree(gf, dir), gf, eps).values == g.values);
    }
  }
}

TEST_CASE("coarser simplification keeps fewer points") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 40; ++trial) {
    const ScalarField f(random_graph(50, 0.08, rng), random_values(50, false, rng));
    const auto tree = compute_merge_tree(f, Direction::Sublevel);
    std::size_t previous = f.values.size() + 1;
    for (double eps : {0.0, 0.05, 0.1, 0.2, 0.4, 0.8}) {
      const auto g = simplify(tree, f, eps);
      const auto kept = off_diagonal(persistence_diagram(ScalarField(f.graph, g.values), Direction::Sublevel)).points.size();
      CHECK(kept <= previous);
      previous = kept;
    }
  }
}

TEST_CASE("confidence simplification contract") {
  std::mt19937_64 rng(21);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 40;
    const auto g = random_graph(n, 0.1, rng);
    MatrixXd logits(n, 3);
    for (Eigen::Index i = 0; i < logits.size(); ++i) logits.data()[i] = normal(rng);
    const auto cf = confidence_field(logits, g);
    CHECK(cf.field.values.minCoeff() >= 0);
    const double eps = 0.5;
    const auto target = simplify_confidence(cf, eps);
    CHECK((target.values - cf.field.values).cwiseAbs().maxCoeff() <= eps + 1e-15);
    CHECK(target.values.minCoeff() >= 0);
    ConfidenceField simplified{ScalarField(g, target.values), cf.predicted_class, cf.pruned_graph};
    CHECK(same_pairs(off_diagonal(confidence_diagram(simplified)), filtered(confidence_diagram(cf), eps), 1e-12));
  }
}
