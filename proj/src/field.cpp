#include "pso/field.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace pso {

Direction parse_direction(const std::string& s) {
  if (s == "sublevel" || s == "sub" || s == "min") return Direction::Sublevel;
  if (s == "superlevel" || s == "super" || s == "max") return Direction::Superlevel;
  throw InvalidParameter("unknown direction '" + s + "' (expected sublevel|superlevel)");
}

PointCloud::PointCloud(MatrixXd pts, std::optional<VectorXd> lbls)
    : points(std::move(pts)), labels(std::move(lbls)) {
  if (labels && labels->size() != points.rows())
    throw InvalidParameter("label count does not match point count");
}

Graph::Graph(std::size_t vertex_count, std::vector<Edge> edges) : vertex_count_(vertex_count) {
  for (auto& e : edges) {
    if (e.first == e.second) throw InvalidParameter("graph: self-loop at vertex " + std::to_string(e.first));
    if (e.first >= vertex_count || e.second >= vertex_count)
      throw InvalidParameter("graph: edge endpoint out of range");
    if (e.first > e.second) std::swap(e.first, e.second);
  }
  std::sort(edges.begin(), edges.end());
  if (std::adjacent_find(edges.begin(), edges.end()) != edges.end())
    throw InvalidParameter("graph: duplicate edge");
  edges_ = std::move(edges);

  offsets_.assign(vertex_count_ + 1, 0);
  for (const auto& [u, v] : edges_) {
    ++offsets_[u + 1];
    ++offsets_[v + 1];
  }
  std::partial_sum(offsets_.begin(), offsets_.end(), offsets_.begin());
  adjacency_.resize(2 * edges_.size());
  std::vector<std::size_t> cursor(offsets_.begin(), offsets_.end() - 1);
  for (const auto& [u, v] : edges_) {
    adjacency_[cursor[u]++] = v;
    adjacency_[cursor[v]++] = u;
  }
}

std::size_t Graph::component_count() const {
  std::vector<char> seen(vertex_count_, 0);
  std::vector<std::uint32_t> stack;
  std::size_t count = 0;
  for (std::size_t s = 0; s < vertex_count_; ++s) {
    if (seen[s]) continue;
    ++count;
    seen[s] = 1;
    stack.push_back(static_cast<std::uint32_t>(s));
    while (!stack.empty()) {
      auto u = stack.back();
      stack.pop_back();
      for (auto w : neighbors(u))
        if (!seen[w]) {
          seen[w] = 1;
          stack.push_back(w);
        }
    }
  }
  return count;
}

ScalarField::ScalarField(Graph g, VectorXd vals) : graph(std::move(g)), values(std::move(vals)) {
  if (static_cast<std::size_t>(values.size()) != graph.vertex_count())
    throw InvalidParameter("scalar field: value count does not match vertex count");
}

std::vector<std::vector<std::uint32_t>> knn_lists(const MatrixXd& points, int k) {
  const auto n = static_cast<std::size_t>(points.rows());
  if (n == 0) throw InvalidParameter("knn: empty point cloud");
  if (k < 1 || static_cast<std::size_t>(k) >= n)
    throw InvalidParameter("knn: k must satisfy 1 <= k < N");

  const MatrixXd cols = points.transpose();
  std::vector<std::vector<std::uint32_t>> out(n);
  std::vector<std::pair<double, std::uint32_t>> cand(n - 1);
  for (std::size_t u = 0; u < n; ++u) {
    std::size_t c = 0;
    for (std::size_t v = 0; v < n; ++v) {
      if (v == u) continue;
      cand[c++] = {(cols.col(u) - cols.col(v)).squaredNorm(), static_cast<std::uint32_t>(v)};
    }
    std::partial_sort(cand.begin(), cand.begin() + k, cand.end());
    out[u].reserve(k);
    for (int i = 0; i < k; ++i) out[u].push_back(cand[i].second);
  }
  return out;
}

Graph build_knn_graph(const PointCloud& cloud, int k) {
  const auto lists = knn_lists(cloud.points, k);
  std::vector<Edge> edges;
  edges.reserve(lists.size() * k);
  for (std::uint32_t u = 0; u < lists.size(); ++u)
    for (auto v : lists[u]) edges.emplace_back(std::min(u, v), std::max(u, v));
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  return Graph(lists.size(), std::move(edges));
}

PointCloud augment_cloud(const PointCloud& cloud, int n, double sigma, std::uint64_t seed) {
  if (n < 0) throw InvalidParameter("augment: n must be nonnegative");
  if (n == 0) return cloud;
  if (!(sigma > 0)) throw InvalidParameter("augment: sigma must be positive");

  const auto N = cloud.size();
  const auto d = cloud.dim();
  MatrixXd out(N * (n + 1), d);
  out.topRows(N) = cloud.points;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, sigma);
  for (Eigen::Index i = 0; i < N; ++i)
    for (int s = 0; s < n; ++s) {
      const auto row = N + i * n + s;
      for (Eigen::Index j = 0; j < d; ++j) out(row, j) = cloud.points(i, j) + noise(rng);
    }
  return PointCloud(std::move(out));
}

PcaBasis fit_pca(const MatrixXd& points, int dims) {
  const auto d = points.cols();
  if (dims < 1 || dims > d) throw InvalidParameter("pca: dims must be in [1, d]");
  if (points.rows() < 1) throw InvalidParameter("pca: empty point cloud");

  PcaBasis basis;
  basis.mean = points.colwise().mean().transpose();
  const MatrixXd centered = points.rowwise() - basis.mean.transpose();
  const MatrixXd cov = centered.transpose() * centered / static_cast<double>(points.rows());

  // Eigenvalues come back ascending; reverse to descending.
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(cov);
  basis.variances = eig.eigenvalues().reverse();
  basis.components = eig.eigenvectors().rowwise().reverse().leftCols(dims);
  for (int c = 0; c < dims; ++c) {
    Eigen::Index arg;
    basis.components.col(c).cwiseAbs().maxCoeff(&arg);
    if (basis.components(arg, c) < 0) basis.components.col(c) *= -1.0;
  }
  return basis;
}

MatrixXd apply_pca(const PcaBasis& basis, const MatrixXd& points) {
  return (points.rowwise() - basis.mean.transpose()) * basis.components;
}

PointCloud pca_project(const PointCloud& cloud, int dims) {
  const auto basis = fit_pca(cloud.points, dims);
  return PointCloud(apply_pca(basis, cloud.points), cloud.labels);
}

Graph build_grid_graph(int width, int height) {
  if (width < 1 || height < 1) throw InvalidParameter("grid: width and height must be positive");
  std::vector<Edge> edges;
  edges.reserve(2 * static_cast<std::size_t>(width) * height);
  for (int i = 0; i < height; ++i)
    for (int j = 0; j < width; ++j) {
      const auto v = static_cast<std::uint32_t>(i * width + j);
      if (j + 1 < width) edges.emplace_back(v, v + 1);
      if (i + 1 < height) edges.emplace_back(v, v + width);
    }
  return Graph(static_cast<std::size_t>(width) * height, std::move(edges));
}

Standardizer Standardizer::fit(const MatrixXd& points) {
  if (points.rows() < 2) throw InvalidParameter("standardize: need at least two points");
  Standardizer s;
  s.mean = points.colwise().mean().transpose();
  const MatrixXd centered = points.rowwise() - s.mean.transpose();
  const VectorXd sd = (centered.colwise().squaredNorm() / static_cast<double>(points.rows())).cwiseSqrt().transpose();
  s.scale = sd.unaryExpr([](double x) { return x > 0 ? 1.0 / x : 0.0; });
  return s;
}

MatrixXd Standardizer::apply(const MatrixXd& points) const {
  return (points.rowwise() - mean.transpose()) * scale.asDiagonal();
}

PointCloud standardize(const PointCloud& cloud) {
  return PointCloud(Standardizer::fit(cloud.points).apply(cloud.points), cloud.labels);
}

DatasetSplit split_dataset(std::size_t n, std::uint64_t seed) {
  if (n < 4) throw InvalidParameter("split: need at least four samples");
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(perm.begin(), perm.end(), rng);

  const auto n_test = std::max<std::size_t>(1, std::lround(0.25 * static_cast<double>(n)));
  const auto n_rest = n - n_test;
  const auto n_val = std::max<std::size_t>(1, std::lround(0.25 * static_cast<double>(n_rest)));
  const auto n_train = n_rest - n_val;

  DatasetSplit split;
  split.train.assign(perm.begin(), perm.begin() + n_train);
  split.validation.assign(perm.begin() + n_train, perm.begin() + n_rest);
  split.test.assign(perm.begin() + n_rest, perm.end());
  return split;
}

MatrixXd select_rows(const MatrixXd& m, std::span<const std::size_t> idx) {
  MatrixXd out(idx.size(), m.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) out.row(i) = m.row(idx[i]);
  return out;
}

VectorXd select_rows(const VectorXd& v, std::span<const std::size_t> idx) {
  VectorXd out(idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) out[i] = v[idx[i]];
  return out;
}

}  // namespace pso
