#pragma once

#include "pso/losses.hpp"

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace pso {

template <typename Scalar>
struct DenseLayer {
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> weight;  // out x in
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> bias;
};

/// Parameters, gradients and optimizer moments all share this layout.
template <typename Scalar>
using MlpParams = std::vector<DenseLayer<Scalar>>;

/// Fully connected network with rectifier hidden units and a linear output.
/// Samples are columns: inputs are d x B, outputs are out x B.
template <typename Scalar>
struct Mlp {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

  std::vector<int> widths;
  MlpParams<Scalar> layers;

  Mlp() = default;

  /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weights and biases.
  Mlp(std::vector<int> layer_widths, std::uint64_t seed) : widths(std::move(layer_widths)) {
    if (widths.size() < 2) throw InvalidParameter("mlp: need at least input and output widths");
    for (int w : widths)
      if (w < 1) throw InvalidParameter("mlp: widths must be positive");
    std::mt19937_64 rng(seed);
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
      const Scalar bound = Scalar(1) / std::sqrt(static_cast<Scalar>(widths[l]));
      std::uniform_real_distribution<Scalar> init(-bound, bound);
      DenseLayer<Scalar> layer;
      layer.weight.resize(widths[l + 1], widths[l]);
      layer.bias.resize(widths[l + 1]);
      for (Eigen::Index c = 0; c < layer.weight.cols(); ++c)
        for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) layer.weight(r, c) = init(rng);
      for (Eigen::Index r = 0; r < layer.bias.size(); ++r) layer.bias[r] = init(rng);
      layers.push_back(std::move(layer));
    }
  }

  static Mlp zeros(std::vector<int> layer_widths) {
    Mlp m(std::move(layer_widths), 0);
    for (auto& l : m.layers) {
      l.weight.setZero();
      l.bias.setZero();
    }
    return m;
  }

  int input_dim() const { return widths.front(); }
  int output_dim() const { return widths.back(); }
};

/// Pre-activations per layer plus the inputs to every layer.
template <typename Scalar>
struct ForwardCache {
  std::vector<typename Mlp<Scalar>::Matrix> inputs;  // inputs[l] feeds layer l
  std::vector<typename Mlp<Scalar>::Matrix> preactivations;
};

template <typename Scalar>
typename Mlp<Scalar>::Matrix mlp_forward(const Mlp<Scalar>& model,
                                         const typename Mlp<Scalar>::Matrix& inputs,
                                         ForwardCache<Scalar>* cache = nullptr) {
  if (inputs.rows() != model.input_dim())
    throw InvalidParameter("mlp_forward: input dimension " + std::to_string(inputs.rows()) +
                           " does not match model input " + std::to_string(model.input_dim()));
  if (cache) {
    cache->inputs.clear();
    cache->preactivations.clear();
  }
  typename Mlp<Scalar>::Matrix a = inputs;
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    const auto& layer = model.layers[l];
    typename Mlp<Scalar>::Matrix z = layer.weight * a;
    z.colwise() += layer.bias;
    if (cache) {
      cache->inputs.push_back(std::move(a));
      cache->preactivations.push_back(z);
    }
    a = l + 1 < model.layers.size() ? typename Mlp<Scalar>::Matrix(z.cwiseMax(Scalar(0))) : std::move(z);
  }
  return a;
}

/// Reverse-mode gradients of sum(output_grad .* outputs) w.r.t. every
/// parameter, given the cache of the matching forward pass.
template <typename Scalar>
MlpParams<Scalar> mlp_backward(const Mlp<Scalar>& model, const ForwardCache<Scalar>& cache,
                               const typename Mlp<Scalar>::Matrix& output_grad) {
  const auto depth = model.layers.size();
  if (cache.inputs.size() != depth) throw InvalidParameter("mlp_backward: cache does not match model");
  MlpParams<Scalar> grads(depth);
  typename Mlp<Scalar>::Matrix delta = output_grad;
  for (std::size_t l = depth; l-- > 0;) {
    if (l + 1 < depth)
      delta = delta.cwiseProduct(
          cache.preactivations[l].unaryExpr([](Scalar z) { return z > Scalar(0) ? Scalar(1) : Scalar(0); }));
    grads[l].weight = delta * cache.inputs[l].transpose();
    grads[l].bias = delta.rowwise().sum();
    if (l > 0) delta = model.layers[l].weight.transpose() * delta;
  }
  return grads;
}

template <typename Scalar>
MlpParams<Scalar> zeros_like(const MlpParams<Scalar>& p) {
  MlpParams<Scalar> out(p.size());
  for (std::size_t l = 0; l < p.size(); ++l) {
    out[l].weight.setZero(p[l].weight.rows(), p[l].weight.cols());
    out[l].bias.setZero(p[l].bias.size());
  }
  return out;
}

template <typename Scalar>
Scalar params_norm(const MlpParams<Scalar>& p) {
  Scalar sq = 0;
  for (const auto& l : p) sq += l.weight.squaredNorm() + l.bias.squaredNorm();
  return std::sqrt(sq);
}

template <typename Scalar>
bool params_finite(const MlpParams<Scalar>& p) {
  for (const auto& l : p)
    if (!l.weight.allFinite() || !l.bias.allFinite()) return false;
  return true;
}

template <typename Scalar>
struct AdamState {
  MlpParams<Scalar> first_moment;
  MlpParams<Scalar> second_moment;
  long step = 0;
  Scalar learning_rate = Scalar(1e-3);
  Scalar beta1 = Scalar(0.9);
  Scalar beta2 = Scalar(0.999);
  Scalar epsilon = Scalar(1e-8);

  static AdamState for_params(const MlpParams<Scalar>& params, Scalar lr = Scalar(1e-3)) {
    AdamState s;
    s.first_moment = zeros_like(params);
    s.second_moment = zeros_like(params);
    s.learning_rate = lr;
    return s;
  }
};

/// One bias-corrected Adam update of `params` in place.
template <typename Scalar>
void adam_step(AdamState<Scalar>& state, MlpParams<Scalar>& params, const MlpParams<Scalar>& grads) {
  if (grads.size() != params.size() || state.first_moment.size() != params.size())
    throw InvalidParameter("adam_step: shape mismatch");
  for (std::size_t l = 0; l < params.size(); ++l)
    if (grads[l].weight.rows() != params[l].weight.rows() || grads[l].weight.cols() != params[l].weight.cols() ||
        grads[l].bias.size() != params[l].bias.size() ||
        state.first_moment[l].weight.size() != params[l].weight.size())
      throw InvalidParameter("adam_step: shape mismatch");
  ++state.step;
  const Scalar c1 = Scalar(1) - std::pow(state.beta1, static_cast<Scalar>(state.step));
  const Scalar c2 = Scalar(1) - std::pow(state.beta2, static_cast<Scalar>(state.step));
  const Scalar b1 = state.beta1, b2 = state.beta2, eps = state.epsilon, lr = state.learning_rate;
  auto update = [&](auto& p, auto& m, auto& v, const auto& g) {
    m = b1 * m + (Scalar(1) - b1) * g;
    v = b2 * v + (Scalar(1) - b2) * g.cwiseAbs2();
    p.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
  };
  for (std::size_t l = 0; l < params.size(); ++l) {
    update(params[l].weight, state.first_moment[l].weight, state.second_moment[l].weight, grads[l].weight);
    update(params[l].bias, state.first_moment[l].bias, state.second_moment[l].bias, grads[l].bias);
  }
}

using Model = Mlp<double>;
using Adam = AdamState<double>;

// ---------------------------------------------------------------------------
// Training protocol

enum class Task { Regression, Classification };

struct EpsilonPolicy {
  enum class Kind { ValidationLoss, TopJ, LargestGap, Fixed };
  Kind kind = Kind::ValidationLoss;
  int j = 3;
  double value = 0.0;

  static EpsilonPolicy parse(const std::string& s);
  std::string to_string() const;
};

enum class SimplifyDirections { Both, Sublevel, Superlevel };

/// How the second optimizer's learning rate is chosen at the start of a
/// topological phase.
enum class TopoLrRule {
  GradientNormRatio,  // base lr * |last training grad| / |first topo grad|
  Base,               // base lr
};

struct TrainConfig {
  Task task = Task::Regression;
  int epochs = 100;
  int batch_size = 64;
  double learning_rate = 1e-3;
  int hidden_layers = 5;
  int hidden_width = 100;
  double l2 = 0.0;

  bool topo = true;
  double trigger_threshold = 1e-3;
  // When set, a phase runs after every epoch from this one on and the
  // validation trigger is ignored.
  std::optional<int> topo_start_epoch;
  int topo_steps = 10;
  TopoLrRule topo_lr_rule = TopoLrRule::Base;
  int k = 15;
  int augment_n = 0;
  double sigma = 1e-3;
  std::optional<int> pca_dims;
  EpsilonPolicy epsilon;
  SimplifyDirections directions = SimplifyDirections::Both;
  bool record_vineyard = true;

  std::uint64_t seed = 0;

  void validate() const;
};

struct PhaseRecord {
  int epoch = 0;
  double epsilon = 0;
  std::size_t changed = 0;
  double learning_rate = 0;
  double loss_before = 0;
  double loss_after = 0;
};

struct TrainReport {
  std::vector<double> train_loss;
  std::vector<double> validation_loss;
  std::vector<double> validation_accuracy;  // classification only
  double test_loss = 0;                     // MSE (standardized targets) or cross-entropy
  double test_rmsd = 0;                     // regression only, in label units
  double test_accuracy = 0;                 // classification only
  Vineyard vineyard;
  std::vector<PhaseRecord> phases;
  std::size_t domain_vertices = 0;
  std::size_t domain_edges = 0;
};

/// Vertices of the topological domain: standardized training points plus
/// their augmentation, connected by a k-NN graph.
struct Domain {
  MatrixXd inputs;  // one row per vertex, network input space
  Graph graph;
};

Domain build_domain(const MatrixXd& train_inputs, const TrainConfig& config);

/// A topological phase: fixes the simplification target of the current model
/// at `epsilon` and takes config.topo_steps steps of `adam` on ||f - g||^2.
/// `reference_grad_norm` is the norm of the last ordinary-training gradient.
PhaseRecord topo_phase(Model& model, const Domain& domain, const TrainConfig& config, double epsilon,
                       Adam& adam, double reference_grad_norm);

/// The function analyzed on the domain: scalar output for regression,
/// confidence for classification.
std::vector<PersistenceDiagram> domain_diagrams(const Model& model, const Domain& domain, const TrainConfig& config);

/// When `trained` is given it receives the final model.
TrainReport train(const TrainConfig& config, const PointCloud& data, Model* trained = nullptr);

/// Three 2-D Gaussian classes with `per_class` points each; a `noise`
/// fraction of labels is permuted among themselves.
PointCloud make_blobs(int per_class, double noise, std::uint64_t seed);

/// Settings for the three-blob demonstration.
TrainConfig blobs_preset();

/// Class labels as indices 0..m-1 (sorted distinct values).
VectorXd encode_classes(const VectorXd& labels, int* class_count = nullptr);

}  // namespace pso
