#include "pso/merge_tree.hpp"

#include <algorithm>
#include <bit>
#include <numeric>
#include <utility>

namespace pso {

namespace {

// Order-preserving map from doubles to unsigned integers; -0.0 maps to 0.0.
std::uint64_t sortable_bits(double x) {
  const auto b = std::bit_cast<std::uint64_t>(x + 0.0);
  return (b >> 63) ? ~b : b | (std::uint64_t{1} << 63);
}

}  // namespace

// Stable LSD radix sort on the value keys, starting from index order, so ties
// stay in index order.
std::vector<std::uint32_t> filtration_order(const VectorXd& values, Direction direction) {
  constexpr int kDigitBits = 11;
  constexpr int kPasses = (64 + kDigitBits - 1) / kDigitBits;
  constexpr std::size_t kBuckets = std::size_t{1} << kDigitBits;
  const auto n = static_cast<std::size_t>(values.size());
  const double sign = direction == Direction::Sublevel ? 1.0 : -1.0;

  std::vector<std::uint64_t> keys(n), keys_next(n);
  std::vector<std::uint32_t> order(n), order_next(n);
  std::vector<std::size_t> counts(kPasses * kBuckets, 0);
  for (std::size_t i = 0; i < n; ++i) {
    keys[i] = sortable_bits(sign * values[static_cast<Eigen::Index>(i)]);
    order[i] = static_cast<std::uint32_t>(i);
    for (int p = 0; p < kPasses; ++p) ++counts[p * kBuckets + ((keys[i] >> (p * kDigitBits)) & (kBuckets - 1))];
  }
  for (int p = 0; p < kPasses; ++p) {
    std::size_t* count = counts.data() + p * kBuckets;
    const int shift = p * kDigitBits;
    if (n == 0 || count[(keys[0] >> shift) & (kBuckets - 1)] == n) continue;
    std::size_t offset = 0;
    for (std::size_t b = 0; b < kBuckets; ++b) offset += std::exchange(count[b], offset);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t slot = count[(keys[i] >> shift) & (kBuckets - 1)]++;
      keys_next[slot] = keys[i];
      order_next[slot] = order[i];
    }
    keys.swap(keys_next);
    order.swap(order_next);
  }
  return order;
}

namespace {

// Disjoint sets over vertices. Each root carries the component's extremum,
// its most recently added vertex, and the branch born at the extremum; all of
// it shares one cache line with the link.
class ComponentSets {
 public:
  struct Node {
    std::uint32_t link;
    std::uint32_t size;
    std::uint32_t extremum;
    std::uint32_t top;
    std::uint32_t branch;
  };

  explicit ComponentSets(std::size_t n) : nodes_(n) {
    for (std::uint32_t v = 0; v < n; ++v) nodes_[v] = Node{v, 1, v, v, kNoVertex};
  }

  std::uint32_t find(std::uint32_t v) {
    while (nodes_[v].link != v) {
      nodes_[v].link = nodes_[nodes_[v].link].link;
      v = nodes_[v].link;
    }
    return v;
  }

  // Links two roots; the caller decides the merged component's data.
  std::uint32_t unite(std::uint32_t a, std::uint32_t b) {
    if (nodes_[a].size < nodes_[b].size) std::swap(a, b);
    nodes_[b].link = a;
    nodes_[a].size += nodes_[b].size;
    return a;
  }

  Node& operator[](std::uint32_t root) { return nodes_[root]; }
  const Node* data() const { return nodes_.data(); }

 private:
  std::vector<Node> nodes_;
};

inline void prefetch(const void* p) {
#if defined(__GNUC__)
  __builtin_prefetch(p);
#else
  (void)p;
#endif
}

}  // namespace

MergeTree compute_merge_tree(const ScalarField& field, Direction direction) {
  const auto n = field.size();
  const auto& values = field.values;
  const auto& graph = field.graph;
  const double undying = direction == Direction::Sublevel ? std::numeric_limits<double>::infinity()
                                                          : -std::numeric_limits<double>::infinity();

  MergeTree tree;
  tree.direction = direction;
  tree.order = filtration_order(values, direction);
  tree.rank.resize(n);
  for (std::uint32_t i = 0; i < n; ++i) tree.rank[tree.order[i]] = i;
  tree.parent.assign(n, kNoVertex);
  tree.branch_of.assign(n, kNoVertex);

  // The sweep visits vertices in random memory order on large inputs, so the
  // adjacency and set data of upcoming vertices are requested in advance.
  constexpr std::size_t kAhead = 32;
  ComponentSets sets(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (i + 2 * kAhead < n) prefetch(graph.neighbors(tree.order[i + 2 * kAhead]).data());
    if (i + kAhead < n)
      for (const auto u : graph.neighbors(tree.order[i + kAhead])) {
        prefetch(&tree.rank[u]);
        prefetch(sets.data() + u);
      }

    const auto w = tree.order[i];
    bool joined = false;
    for (const auto u : graph.neighbors(w)) {
      if (tree.rank[u] > i) continue;
      const auto ru = sets.find(u);
      const auto rw = sets.find(w);
      if (ru == rw) continue;

      tree.parent[sets[ru].top] = w;
      const auto ext_u = sets[ru].extremum;
      const auto branch_u = sets[ru].branch;
      if (!joined) {
        const auto root = sets.unite(ru, rw);
        sets[root].extremum = ext_u;
        sets[root].branch = branch_u;
        sets[root].top = w;
        joined = true;
        continue;
      }

      // w already belongs to a component: two components merge at w and the
      // one with the later extremum dies here.
      const auto ext_w = sets[rw].extremum;
      const auto branch_w = sets[rw].branch;
      const bool u_survives = tree.rank[ext_u] < tree.rank[ext_w];
      auto& dying = tree.branches[u_survives ? branch_w : branch_u];
      dying.death_vertex = w;
      dying.death_value = values[w];

      const auto root = sets.unite(ru, rw);
      sets[root].extremum = u_survives ? ext_u : ext_w;
      sets[root].branch = u_survives ? branch_u : branch_w;
      sets[root].top = w;
    }

    if (!joined) {
      const auto id = static_cast<std::uint32_t>(tree.branches.size());
      tree.branches.push_back(Branch{w, kNoVertex, values[w], undying});
      sets[w].branch = id;
    }
    tree.branch_of[w] = sets[sets.find(w)].branch;
  }
  return tree;
}

PersistenceDiagram persistence_diagram(const ScalarField& field, Direction direction) {
  const auto n = static_cast<std::uint32_t>(field.size());
  const auto& graph = field.graph;
  const double sign = direction == Direction::Sublevel ? 1.0 : -1.0;
  const double undying = sign * std::numeric_limits<double>::infinity();

  std::vector<std::uint64_t> key(n);
  for (std::uint32_t v = 0; v < n; ++v) key[v] = sortable_bits(sign * field.values[v]);
  const auto earlier = [&](std::uint32_t a, std::uint32_t b) {
    return key[a] < key[b] || (key[a] == key[b] && a < b);
  };

  // basin[v] first holds the earliest neighbor of v (or v for a minimum),
  // then the index of the minimum that pointer chain ends at.
  std::vector<std::uint32_t> basin(n);
  std::vector<std::uint32_t> minima;
  for (std::uint32_t v = 0; v < n; ++v) {
    std::uint32_t low = v;
    for (const auto u : graph.neighbors(v))
      if (earlier(u, low)) low = u;
    basin[v] = low;
    if (low == v) minima.push_back(v);
  }
  for (std::uint32_t v = 0; v < n; ++v) {
    std::uint32_t root = v;
    while (basin[root] != root) root = basin[root];
    for (std::uint32_t x = v; basin[x] != root;) x = std::exchange(basin[x], root);
  }
  // Basins are numbered in birth order, so the older of two is the smaller.
  std::sort(minima.begin(), minima.end(), earlier);
  {
    std::vector<std::uint32_t> slot(n);
    for (std::uint32_t i = 0; i < minima.size(); ++i) slot[minima[i]] = i;
    for (std::uint32_t v = 0; v < n; ++v) basin[v] = slot[basin[v]];
  }

  // A vertex whose earlier neighbors lie in other basins may merge them.
  struct Merge {
    std::uint64_t key;
    std::uint32_t vertex;
    std::uint32_t a;
    std::uint32_t b;
  };
  // Only the earliest edge between two basins can join them. A small cache of
  // recently seen basin pairs keeps one record for most repeated pairs; the
  // duplicates it misses are harmless.
  constexpr int kCacheBits = 12;
  constexpr auto kEmpty = std::numeric_limits<std::size_t>::max();
  std::vector<std::size_t> recent(std::size_t{1} << kCacheBits, kEmpty);
  std::vector<Merge> merges;
  merges.reserve(n / 2);
  for (std::uint32_t w = 0; w < n; ++w) {
    for (const auto u : graph.neighbors(w)) {
      if (basin[u] == basin[w] || !earlier(u, w)) continue;
      const auto [lo, hi] = std::minmax(basin[w], basin[u]);
      auto& slot = recent[(lo * 0x9E3779B1u ^ hi * 0x85EBCA6Bu) >> (32 - kCacheBits)];
      if (slot != kEmpty && merges[slot].a == lo && merges[slot].b == hi) {
        if (earlier(w, merges[slot].vertex)) merges[slot] = Merge{key[w], w, lo, hi};
        continue;
      }
      slot = merges.size();
      merges.push_back(Merge{key[w], w, lo, hi});
    }
  }
  std::sort(merges.begin(), merges.end(), [](const Merge& x, const Merge& y) {
    return x.key != y.key ? x.key < y.key : x.vertex != y.vertex ? x.vertex < y.vertex : x.b < y.b;
  });

  // Linking the younger root under the older keeps every root the oldest
  // basin of its component.
  const auto m = static_cast<std::uint32_t>(minima.size());
  std::vector<std::uint32_t> link(m), death(m, kNoVertex);
  std::iota(link.begin(), link.end(), 0u);
  const auto find = [&](std::uint32_t x) {
    while (link[x] != x) x = link[x] = link[link[x]];
    return x;
  };
  for (const auto& e : merges) {
    const auto ra = find(e.a), rb = find(e.b);
    if (ra == rb) continue;
    const auto [older, younger] = std::minmax(ra, rb);
    link[younger] = older;
    death[younger] = e.vertex;
  }

  PersistenceDiagram dgm;
  dgm.direction = direction;
  dgm.points.reserve(m);
  for (std::uint32_t i = 0; i < m; ++i) {
    const double d = death[i] == kNoVertex ? undying : field.values[death[i]];
    dgm.points.push_back(PersistencePoint{field.values[minima[i]], d, minima[i], death[i]});
  }
  return dgm;
}

PersistenceDiagram diagram_of(const MergeTree& tree) {
  PersistenceDiagram dgm;
  dgm.direction = tree.direction;
  dgm.points.reserve(tree.branches.size());
  for (const auto& b : tree.branches)
    dgm.points.push_back(PersistencePoint{b.birth_value, b.death_value, b.extremum, b.death_vertex});
  return dgm;
}

std::size_t PersistenceDiagram::infinite_count() const {
  return std::count_if(points.begin(), points.end(), [](const auto& p) { return !p.finite(); });
}

std::vector<double> PersistenceDiagram::persistences() const {
  std::vector<double> out;
  out.reserve(points.size());
  for (const auto& p : points) out.push_back(p.persistence());
  return out;
}

}  // namespace pso
