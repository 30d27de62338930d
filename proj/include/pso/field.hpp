#pragma once

#include "pso/common.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

namespace pso {

/// N points of dimension d stored row-wise, with optional per-point labels
/// (regression targets or class indices stored as reals).
struct PointCloud {
  MatrixXd points;
  std::optional<VectorXd> labels;

  PointCloud() = default;
  explicit PointCloud(MatrixXd pts, std::optional<VectorXd> lbls = std::nullopt);

  Eigen::Index size() const { return points.rows(); }
  Eigen::Index dim() const { return points.cols(); }
};

using Edge = std::pair<std::uint32_t, std::uint32_t>;

/// Undirected simple graph. Edges are stored canonically as (min, max),
/// sorted, together with a CSR adjacency built once at construction.
class Graph {
 public:
  Graph() = default;
  /// Throws InvalidParameter on self-loops, duplicate edges, or endpoints
  /// out of range.
  Graph(std::size_t vertex_count, std::vector<Edge> edges);

  std::size_t vertex_count() const { return vertex_count_; }
  std::size_t edge_count() const { return edges_.size(); }
  const std::vector<Edge>& edges() const { return edges_; }

  std::span<const std::uint32_t> neighbors(std::size_t v) const {
    return {adjacency_.data() + offsets_[v], adjacency_.data() + offsets_[v + 1]};
  }

  /// Copy of this graph without the edges for which `drop(u, v)` is true.
  template <typename Pred>
  Graph without_edges(Pred drop) const {
    std::vector<Edge> kept;
    kept.reserve(edges_.size());
    for (const auto& e : edges_)
      if (!drop(e.first, e.second)) kept.push_back(e);
    return Graph(vertex_count_, std::move(kept));
  }

  std::size_t component_count() const;

  friend bool operator==(const Graph& a, const Graph& b) {
    return a.vertex_count_ == b.vertex_count_ && a.edges_ == b.edges_;
  }

 private:
  std::size_t vertex_count_ = 0;
  std::vector<Edge> edges_;
  std::vector<std::size_t> offsets_{0};
  std::vector<std::uint32_t> adjacency_;
};

/// A graph with one real value per vertex.
struct ScalarField {
  Graph graph;
  VectorXd values;

  ScalarField() = default;
  ScalarField(Graph g, VectorXd vals);

  std::size_t size() const { return graph.vertex_count(); }
};

struct DatasetSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
  std::vector<std::size_t> test;
};

/// Symmetric k-nearest-neighbor graph: (u, v) is an edge iff either endpoint
/// is among the k nearest of the other. Exact, brute force; distance ties
/// resolve toward the smaller vertex index.
Graph build_knn_graph(const PointCloud& cloud, int k);

/// Directed k-NN lists (row u holds the k nearest neighbors of u in order).
std::vector<std::vector<std::uint32_t>> knn_lists(const MatrixXd& points, int k);

/// Appends n isotropic Gaussian samples (std sigma) around every point. The
/// originals keep their indices; samples for point i occupy rows
/// N + i*n .. N + (i+1)*n - 1. Labels are dropped when n > 0.
PointCloud augment_cloud(const PointCloud& cloud, int n, double sigma, std::uint64_t seed);

/// Principal axes of a point cloud, computed from the explicit covariance.
struct PcaBasis {
  VectorXd mean;
  MatrixXd components;  // d x dims, orthonormal columns
  VectorXd variances;   // all d eigenvalues, descending
};

PcaBasis fit_pca(const MatrixXd& points, int dims);
MatrixXd apply_pca(const PcaBasis& basis, const MatrixXd& points);
PointCloud pca_project(const PointCloud& cloud, int dims);

/// width*height vertices in row-major order, 4-connected.
Graph build_grid_graph(int width, int height);

/// Per-feature affine map to zero mean / unit population std.
struct Standardizer {
  VectorXd mean;
  VectorXd scale;  // 0 for constant features

  static Standardizer fit(const MatrixXd& points);
  MatrixXd apply(const MatrixXd& points) const;
};

PointCloud standardize(const PointCloud& cloud);

/// Shuffles 0..N-1 and splits 75/25 into (rest, test), then rest 75/25 into
/// (train, validation).
DatasetSplit split_dataset(std::size_t n, std::uint64_t seed);

/// Rows of `m` selected by `idx`.
MatrixXd select_rows(const MatrixXd& m, std::span<const std::size_t> idx);
VectorXd select_rows(const VectorXd& v, std::span<const std::size_t> idx);

}  // namespace pso
