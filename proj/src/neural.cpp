#include "pso/neural.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <sstream>

namespace pso {

namespace {

// Independent RNG streams so that e.g. enabling augmentation does not
// perturb weight initialization or batch order.
std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream)};
  std::uint32_t words[2];
  seq.generate(words, words + 2);
  return (static_cast<std::uint64_t>(words[0]) << 32) | words[1];
}

enum Stream : std::uint64_t { kSplit = 1, kInit, kShuffle, kAugment };

struct LossEval {
  double loss = 0;
  double accuracy = 0;
  MatrixXd output_grad;  // d loss / d outputs
};

// Mean squared error or mean softmax cross-entropy over the columns.
LossEval evaluate_loss(Task task, const MatrixXd& outputs, const VectorXd& targets, bool want_grad) {
  const auto b = outputs.cols();
  LossEval out;
  if (task == Task::Regression) {
    const Eigen::RowVectorXd diff = outputs.row(0) - targets.transpose();
    out.loss = diff.squaredNorm() / b;
    if (want_grad) out.output_grad = 2.0 * diff / b;
    return out;
  }
  if (want_grad) out.output_grad.resize(outputs.rows(), b);
  std::size_t correct = 0;
  for (Eigen::Index c = 0; c < b; ++c) {
    const auto col = outputs.col(c);
    const double mx = col.maxCoeff();
    const VectorXd e = (col.array() - mx).exp();
    const double z = e.sum();
    const auto label = static_cast<Eigen::Index>(targets[c]);
    out.loss += -(col[label] - mx - std::log(z));
    Eigen::Index arg;
    col.maxCoeff(&arg);
    correct += arg == label;
    if (want_grad) {
      out.output_grad.col(c) = e / z;
      out.output_grad(label, c) -= 1.0;
    }
  }
  out.loss /= b;
  out.accuracy = static_cast<double>(correct) / b;
  if (want_grad) out.output_grad /= static_cast<double>(b);
  return out;
}

void add_weight_decay(const Model& model, double l2, MlpParams<double>& grads) {
  if (l2 <= 0) return;
  for (std::size_t l = 0; l < grads.size(); ++l) grads[l].weight += 2.0 * l2 * model.layers[l].weight;
}

std::vector<Direction> regression_directions(SimplifyDirections d) {
  switch (d) {
    case SimplifyDirections::Sublevel: return {Direction::Sublevel};
    case SimplifyDirections::Superlevel: return {Direction::Superlevel};
    default: return {Direction::Sublevel, Direction::Superlevel};
  }
}

void check_finite(double x, const char* what, int epoch) {
  if (!std::isfinite(x))
    throw NumericError(std::string("train: ") + what + " is not finite at epoch " + std::to_string(epoch));
}

}  // namespace

EpsilonPolicy EpsilonPolicy::parse(const std::string& s) {
  EpsilonPolicy p;
  if (s == "validation" || s == "validation-loss") {
    p.kind = Kind::ValidationLoss;
  } else if (s == "largest-gap") {
    p.kind = Kind::LargestGap;
  } else if (s.rfind("top-", 0) == 0) {
    p.kind = Kind::TopJ;
    p.j = std::stoi(s.substr(4));
    if (p.j < 1) throw InvalidParameter("epsilon policy: top-j needs j >= 1");
  } else if (s.rfind("fixed:", 0) == 0) {
    p.kind = Kind::Fixed;
    p.value = std::stod(s.substr(6));
    if (!(p.value >= 0)) throw InvalidParameter("epsilon policy: fixed value must be nonnegative");
  } else {
    throw InvalidParameter("unknown epsilon policy '" + s + "' (validation|top-J|largest-gap|fixed:V)");
  }
  return p;
}

std::string EpsilonPolicy::to_string() const {
  switch (kind) {
    case Kind::ValidationLoss: return "validation";
    case Kind::LargestGap: return "largest-gap";
    case Kind::TopJ: return "top-" + std::to_string(j);
    case Kind::Fixed: {
      std::ostringstream os;
      os.precision(17);
      os << "fixed:" << value;
      return os.str();
    }
  }
  return {};
}

void TrainConfig::validate() const {
  if (epochs < 0) throw InvalidParameter("config: epochs must be nonnegative");
  if (batch_size < 1) throw InvalidParameter("config: batch size must be positive");
  if (!(learning_rate > 0)) throw InvalidParameter("config: learning rate must be positive");
  if (hidden_layers < 0 || hidden_width < 1) throw InvalidParameter("config: invalid architecture");
  if (l2 < 0) throw InvalidParameter("config: l2 must be nonnegative");
  if (topo_steps < 1 || topo_steps > 50) throw InvalidParameter("config: topo steps must be in [1, 50]");
  if (k < 1) throw InvalidParameter("config: k must be positive");
  if (augment_n < 0) throw InvalidParameter("config: n must be nonnegative");
  if (augment_n > 0 && !(sigma > 0)) throw InvalidParameter("config: sigma must be positive");
  if (pca_dims && *pca_dims < 1) throw InvalidParameter("config: pca dims must be positive");
  if (std::isnan(trigger_threshold)) throw InvalidParameter("config: trigger threshold is NaN");
}

VectorXd encode_classes(const VectorXd& labels, int* class_count) {
  std::map<double, int> ids;
  for (Eigen::Index i = 0; i < labels.size(); ++i) ids.emplace(labels[i], 0);
  int next = 0;
  for (auto& [value, id] : ids) id = next++;
  VectorXd out(labels.size());
  for (Eigen::Index i = 0; i < labels.size(); ++i) out[i] = ids.at(labels[i]);
  if (class_count) *class_count = next;
  return out;
}

Domain build_domain(const MatrixXd& train_inputs, const TrainConfig& config) {
  Domain domain;
  const auto cloud = augment_cloud(PointCloud(train_inputs), config.augment_n, config.sigma,
                                   stream_seed(config.seed, kAugment));
  domain.inputs = cloud.points;
  const auto neighbors = static_cast<int>(std::min<Eigen::Index>(config.k, cloud.size() - 1));
  if (config.pca_dims) {
    const int dims = std::min<int>(*config.pca_dims, static_cast<int>(cloud.dim()));
    domain.graph = build_knn_graph(pca_project(cloud, dims), neighbors);
  } else {
    domain.graph = build_knn_graph(cloud, neighbors);
  }
  return domain;
}

std::vector<PersistenceDiagram> domain_diagrams(const Model& model, const Domain& domain,
                                                const TrainConfig& config) {
  const MatrixXd out = mlp_forward(model, MatrixXd(domain.inputs.transpose()));
  std::vector<PersistenceDiagram> dgms;
  if (config.task == Task::Classification) {
    dgms.push_back(confidence_diagram(confidence_field(out.transpose(), domain.graph)));
  } else {
    const ScalarField f(domain.graph, out.row(0).transpose());
    for (auto dir : regression_directions(config.directions)) dgms.push_back(persistence_diagram(f, dir));
  }
  return dgms;
}

PhaseRecord topo_phase(Model& model, const Domain& domain, const TrainConfig& config, double epsilon,
                       Adam& adam, double reference_grad_norm) {
  PhaseRecord record;
  record.epsilon = epsilon;
  const MatrixXd inputs = domain.inputs.transpose();
  const MatrixXd start = mlp_forward(model, inputs);

  // Targets are fixed for the whole phase.
  std::vector<SimplificationTarget> targets;
  if (config.task == Task::Classification) {
    targets.push_back(simplify_confidence(confidence_field(start.transpose(), domain.graph), epsilon));
  } else {
    const ScalarField f(domain.graph, start.row(0).transpose());
    for (auto dir : regression_directions(config.directions))
      targets.push_back(simplify(compute_merge_tree(f, dir), f, epsilon));
  }
  for (const auto& t : targets) record.changed += t.changed.size();
  if (record.changed == 0) return record;

  // Loss and output gradient of sum_t ||f - g_t||^2 at the given outputs.
  auto objective = [&](const MatrixXd& out, MatrixXd* grad) {
    double loss = 0;
    if (grad) grad->setZero(out.rows(), out.cols());
    if (config.task == Task::Regression) {
      for (const auto& t : targets) {
        const auto lg = pso_loss_grad(out.row(0).transpose(), t);
        loss += lg.loss;
        if (grad) grad->row(0) += lg.grad.transpose();
      }
      return loss;
    }
    const auto& g = targets.front().values;
    for (Eigen::Index v = 0; v < out.cols(); ++v) {
      const auto [top, second] = top_two(out.col(v).transpose());
      const double diff = out(top, v) - out(second, v) - g[v];
      loss += diff * diff;
      if (grad) {
        (*grad)(top, v) += 2.0 * diff;
        (*grad)(second, v) -= 2.0 * diff;
      }
    }
    return loss;
  };

  ForwardCache<double> cache;
  MatrixXd out_grad;
  for (int step = 0; step < config.topo_steps; ++step) {
    const MatrixXd out = mlp_forward(model, inputs, &cache);
    const double loss = objective(out, &out_grad);
    if (step == 0) record.loss_before = loss;
    const auto grads = mlp_backward(model, cache, out_grad);
    if (step == 0) {
      const double norm = params_norm(grads);
      if (!(norm > 0)) break;
      double lr = config.learning_rate;
      if (config.topo_lr_rule == TopoLrRule::GradientNormRatio)
        lr = std::clamp(config.learning_rate * reference_grad_norm / norm, 1e-6, 1e2);
      adam.learning_rate = lr;
      record.learning_rate = lr;
    }
    adam_step(adam, model.layers, grads);
  }
  record.loss_after = objective(mlp_forward(model, inputs), nullptr);
  return record;
}

TrainReport train(const TrainConfig& config, const PointCloud& data, Model* trained) {
  config.validate();
  if (!data.labels) throw InvalidParameter("train: data has no labels");
  const auto n = static_cast<std::size_t>(data.size());
  if (n < 4) throw InvalidParameter("train: need at least four samples");

  const auto split = split_dataset(n, stream_seed(config.seed, kSplit));
  const auto scaler = Standardizer::fit(select_rows(data.points, split.train));
  auto inputs_of = [&](const std::vector<std::size_t>& idx) {
    return MatrixXd(scaler.apply(select_rows(data.points, idx)).transpose());
  };
  const MatrixXd x_train = inputs_of(split.train);
  const MatrixXd x_val = inputs_of(split.validation);
  const MatrixXd x_test = inputs_of(split.test);

  int outputs = 1;
  VectorXd labels = *data.labels;
  double target_mean = 0, target_scale = 1;
  if (config.task == Task::Classification) {
    labels = encode_classes(labels, &outputs);
    if (outputs < 2) throw InvalidParameter("train: classification needs at least two classes");
  } else {
    const VectorXd y = select_rows(labels, split.train);
    target_mean = y.mean();
    const double sd = std::sqrt((y.array() - target_mean).square().mean());
    target_scale = sd > 0 ? 1.0 / sd : 0.0;
    labels = (labels.array() - target_mean) * target_scale;
  }
  const VectorXd y_train = select_rows(labels, split.train);
  const VectorXd y_val = select_rows(labels, split.validation);
  const VectorXd y_test = select_rows(labels, split.test);

  std::vector<int> widths{static_cast<int>(data.dim())};
  for (int l = 0; l < config.hidden_layers; ++l) widths.push_back(config.hidden_width);
  widths.push_back(outputs);
  Model model(widths, stream_seed(config.seed, kInit));
  Adam training_adam = Adam::for_params(model.layers, config.learning_rate);
  Adam topo_adam = Adam::for_params(model.layers, config.learning_rate);

  TrainReport report;
  std::optional<Domain> domain;
  if (config.topo || config.record_vineyard) {
    domain = build_domain(MatrixXd(x_train.transpose()), config);
    report.domain_vertices = domain->graph.vertex_count();
    report.domain_edges = domain->graph.edge_count();
  }

  std::mt19937_64 shuffle_rng(stream_seed(config.seed, kShuffle));
  std::vector<std::size_t> order(split.train.size());
  std::iota(order.begin(), order.end(), 0);
  ForwardCache<double> cache;
  double last_grad_norm = 0;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double loss_sum = 0;
    std::size_t batches = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += config.batch_size) {
      const auto end = std::min(order.size(), begin + config.batch_size);
      MatrixXd xb(x_train.rows(), end - begin);
      VectorXd yb(end - begin);
      for (std::size_t i = begin; i < end; ++i) {
        xb.col(i - begin) = x_train.col(order[i]);
        yb[i - begin] = y_train[order[i]];
      }
      const MatrixXd out = mlp_forward(model, xb, &cache);
      const auto eval = evaluate_loss(config.task, out, yb, true);
      auto grads = mlp_backward(model, cache, eval.output_grad);
      add_weight_decay(model, config.l2, grads);
      last_grad_norm = params_norm(grads);
      adam_step(training_adam, model.layers, grads);
      loss_sum += eval.loss;
      ++batches;
    }
    const double train_loss = batches ? loss_sum / batches : 0.0;
    check_finite(train_loss, "training loss", epoch);
    report.train_loss.push_back(train_loss);

    const auto val = evaluate_loss(config.task, mlp_forward(model, x_val), y_val, false);
    check_finite(val.loss, "validation loss", epoch);
    report.validation_loss.push_back(val.loss);
    if (config.task == Task::Classification) report.validation_accuracy.push_back(val.accuracy);

    bool fire = false;
    if (config.topo) {
      if (config.topo_start_epoch)
        fire = epoch >= *config.topo_start_epoch;
      else
        fire = epoch > 0 && val.loss - report.validation_loss[epoch - 1] > config.trigger_threshold;
    }
    if (fire) {
      std::vector<double> eps;
      using Kind = EpsilonPolicy::Kind;
      if (config.epsilon.kind == Kind::ValidationLoss || config.epsilon.kind == Kind::Fixed) {
        eps.push_back(config.epsilon.kind == Kind::Fixed ? config.epsilon.value : val.loss);
      } else {
        for (const auto& d : domain_diagrams(model, *domain, config))
          eps.push_back(config.epsilon.kind == Kind::TopJ ? epsilon_top_j(d, config.epsilon.j)
                                                          : epsilon_largest_gap(d));
      }
      // Per-direction epsilons only arise for regression with both directions;
      // the phase uses the smaller one so neither direction over-simplifies.
      auto phase = topo_phase(model, *domain, config, *std::min_element(eps.begin(), eps.end()), topo_adam,
                              last_grad_norm);
      phase.epoch = epoch;
      if (!params_finite(model.layers)) throw NumericError("train: parameters diverged in topological phase");
      report.phases.push_back(phase);
    }

    if (config.record_vineyard && domain) {
      PersistenceDiagram merged;
      for (const auto& d : domain_diagrams(model, *domain, config))
        merged.points.insert(merged.points.end(), d.points.begin(), d.points.end());
      report.vineyard = record_vineyard(std::move(report.vineyard), epoch, merged);
    }
  }

  const auto test = evaluate_loss(config.task, mlp_forward(model, x_test), y_test, false);
  check_finite(test.loss, "test loss", config.epochs);
  report.test_loss = test.loss;
  if (config.task == Task::Regression)
    report.test_rmsd = target_scale > 0 ? std::sqrt(test.loss) / target_scale : 0.0;
  else
    report.test_accuracy = test.accuracy;
  if (trained) *trained = std::move(model);
  return report;
}

PointCloud make_blobs(int per_class, double noise, std::uint64_t seed) {
  if (per_class < 1) throw InvalidParameter("blobs: per_class must be positive");
  if (noise < 0 || noise > 1) throw InvalidParameter("blobs: noise must be in [0, 1]");
  const Eigen::Vector2d centers[3] = {{0.0, 0.0}, {3.0, 0.0}, {1.5, 2.6}};
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const auto n = static_cast<Eigen::Index>(3 * per_class);
  MatrixXd pts(n, 2);
  VectorXd labels(n);
  for (int c = 0; c < 3; ++c)
    for (int i = 0; i < per_class; ++i) {
      const auto r = c * per_class + i;
      pts(r, 0) = centers[c].x() + gauss(rng);
      pts(r, 1) = centers[c].y() + gauss(rng);
      labels[r] = c;
    }
  std::vector<Eigen::Index> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::shuffle(idx.begin(), idx.end(), rng);
  idx.resize(static_cast<std::size_t>(std::lround(noise * n)));
  std::vector<double> picked;
  for (auto i : idx) picked.push_back(labels[i]);
  std::shuffle(picked.begin(), picked.end(), rng);
  for (std::size_t i = 0; i < idx.size(); ++i) labels[idx[i]] = picked[i];
  return PointCloud(std::move(pts), std::move(labels));
}

TrainConfig blobs_preset() {
  TrainConfig c;
  c.task = Task::Classification;
  c.epochs = 500;
  c.topo_start_epoch = 450;
  c.topo_steps = 10;
  c.epsilon.kind = EpsilonPolicy::Kind::TopJ;
  c.epsilon.j = 3;
  c.k = 15;
  c.augment_n = 0;
  return c;
}

}  // namespace pso
