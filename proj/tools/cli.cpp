#include "pso/cli.hpp"

#include "pso/io.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

namespace pso {

namespace fs = std::filesystem;

const std::map<std::string, HyperGrid>& builtin_grids() {
  static const std::map<std::string, HyperGrid> grids = [] {
    const std::vector<double> sigmas{0.001, 0.01, 0.1, 0.2};
    const std::vector<int> n5{0, 3, 6, 9, 12};
    const std::vector<double> t_class{0.0001, 0.001, 0.01, 0.1};
    auto reg = [&](std::vector<int> k, std::vector<double> t, std::vector<int> n, int bk, double bt, int bn,
                   double bs) {
      return HyperGrid{Task::Regression, std::move(k), std::move(t), std::move(n), sigmas, bk, bt, bn, bs, {}};
    };
    auto cls = [&](std::vector<int> k, std::vector<double> t, std::vector<int> n, int bk, double bt, int bn,
                   double bs) {
      return HyperGrid{Task::Classification, std::move(k), std::move(t), std::move(n), sigmas, bk, bt, bn, bs, {}};
    };
    std::map<std::string, HyperGrid> g;
    g["wine"] = reg({10, 15, 20}, {0.001, 0.01, 0.05, 0.1, 0.5}, n5, 15, 0.001, 6, 0.001);
    g["iran-housing"] = reg({10, 15, 20}, {0.001, 0.01, 0.05, 0.1}, n5, 10, 0.01, 9, 0.001);
    g["boston"] = reg({10, 15, 20}, {0.001, 0.01, 0.05, 0.1}, n5, 20, 0.001, 9, 0.001);
    g["concrete"] = reg({10, 15, 20}, {0.001, 0.01, 0.05, 0.1, 0.5}, n5, 15, 0.01, 3, 0.001);
    g["ct-slices"] = reg({20, 40, 60, 80}, {0.0001, 0.001}, {0, 1}, 60, 0.0001, 1, 0.001);
    g["ct-slices"].pca_dims = 10;
    g["protein"] = reg({20, 40, 60, 80}, {0.001, 0.01, 0.1}, {0, 3, 6}, 20, 0.001, 6, 0.001);

    g["wisconsin-cancer"] = cls({10, 15, 20}, t_class, n5, 15, 0.0001, 3, 0.2);
    g["wine-classification"] = cls({10, 15, 20}, t_class, n5, 15, 0.0001, 0, 0.001);
    g["semeion"] = cls({10, 15, 20}, t_class, n5, 20, 0.0001, 9, 0.2);
    g["vertebral"] = cls({10, 15, 20}, t_class, n5, 15, 0.0001, 9, 0.1);
    g["wireless"] = cls({10, 15, 20, 25}, t_class, n5, 25, 0.0001, 6, 0.2);
    g["spect"] = cls({10, 15, 20}, t_class, {0, 3, 6, 9, 12, 15}, 10, 0.0001, 15, 0.01);
    g["letter-recognition"] = cls({10, 20, 30, 40, 50}, {0.0001, 0.001, 0.01}, {0, 3, 6, 9, 12, 15}, 20, 0.01, 3, 0.2);
    return g;
  }();
  return grids;
}

std::vector<double> l2_grid() { return {1e-5, 1e-4, 1e-3, 1e-2, 1e-1, 1.0, 10.0}; }

std::vector<TrainConfig> expand_grid(const TrainConfig& base, const HyperGrid& grid) {
  std::vector<TrainConfig> out;
  for (int k : grid.k)
    for (double t : grid.t)
      for (int n : grid.n)
        for (double s : grid.sigma) {
          TrainConfig c = base;
          c.k = k;
          c.trigger_threshold = t;
          c.augment_n = n;
          c.sigma = s;
          out.push_back(c);
        }
  return out;
}

double validation_drop(const std::vector<double>& val, int start, int window) {
  if (start < 1 || window < 1 || static_cast<std::size_t>(start) + 1 >= val.size())
    throw InvalidParameter("validation_drop: start epoch outside the recorded range");
  const auto last = std::min(val.size(), static_cast<std::size_t>(start) + window + 1);
  const double before = val[start - 1];
  const double lowest = *std::min_element(val.begin() + start + 1, val.begin() + last);
  return (before - lowest) / before;
}

namespace {

std::string pretty(const Json& j) { return j.dump(2) + "\n"; }

fs::path output_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create output directory " + dir + ": " + ec.message());
  return fs::path(dir);
}

std::string format_number(double x) {
  std::ostringstream os;
  os.precision(17);
  os << x;
  return os.str();
}

std::string grid_csv(const VectorXd& values, int width, int height) {
  std::ostringstream os;
  os.precision(17);
  os << "i,j,value\n";
  for (int i = 0; i < height; ++i)
    for (int j = 0; j < width; ++j) os << i << ',' << j << ',' << values[static_cast<Eigen::Index>(i) * width + j] << '\n';
  return os.str();
}

std::string vineyard_csv(const Vineyard& v) {
  std::ostringstream os;
  write_vineyard_csv(os, v);
  return os.str();
}

double median(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const auto m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

double mean(const std::vector<double>& v) {
  return v.empty() ? std::numeric_limits<double>::quiet_NaN()
                   : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

// Values given in the config file fill options that were not set on the
// command line; flags therefore always win.
void apply_config_value(CLI::Option* opt, const Json& value) {
  if (opt->count() > 0) return;
  auto add = [&](const Json& x) { opt->add_result(x.is_string() ? x.get<std::string>() : x.dump()); };
  if (value.is_array())
    for (const auto& x : value) add(x);
  else
    add(value);
  opt->run_callback();
}

CLI::Option* find_option(CLI::App* app, const std::string& key) {
  return app->get_option_no_throw(key.size() == 1 ? "-" + key : "--" + key);
}

void apply_config(CLI::App& app, CLI::App* command, const Json& cfg) {
  if (!cfg.is_object()) throw DataError("config file must hold a JSON object");
  const auto commands = app.get_subcommands({});
  auto is_command = [&](const std::string& key) {
    return std::any_of(commands.begin(), commands.end(), [&](const CLI::App* c) { return c->get_name() == key; });
  };
  for (const auto& [key, value] : cfg.items()) {
    if (is_command(key)) {
      if (!command || key != command->get_name()) continue;
      if (!value.is_object()) throw DataError("config section '" + key + "' must be an object");
      for (const auto& [sub_key, sub_value] : value.items()) {
        auto* opt = find_option(command, sub_key);
        if (!opt) throw InvalidParameter("config: unknown option '" + sub_key + "' for " + key);
        apply_config_value(opt, sub_value);
      }
      continue;
    }
    if (key == "config") continue;
    CLI::Option* opt = command ? find_option(command, key) : nullptr;
    if (!opt) opt = find_option(&app, key);
    if (!opt) throw InvalidParameter("config: unknown option '" + key + "'");
    apply_config_value(opt, value);
  }
}

struct Globals {
  std::uint64_t seed = 0;
  std::string out = "results";
  std::string config;
  CLI::Option* out_option = nullptr;

  bool out_given() const { return out_option->count() > 0; }
};

struct CsvArgs {
  bool header = false;
  std::string delimiter;
  std::string label = "-1";

  CsvOptions options() const {
    CsvOptions o;
    o.header = header;
    if (delimiter == "tab")
      o.delimiter = '\t';
    else if (delimiter.size() == 1)
      o.delimiter = delimiter[0];
    else if (!delimiter.empty())
      throw InvalidParameter("delimiter must be a single character or 'tab'");
    o.label_column = label;
    return o;
  }
};

void add_csv_options(CLI::App* cmd, CsvArgs& a, const std::string& label_help) {
  cmd->add_flag("--header", a.header, "CSV has a header row");
  cmd->add_option("--delimiter", a.delimiter, "CSV delimiter (one character or 'tab'; empty detects , ; or tab)");
  cmd->add_option("--label", a.label, label_help);
}

const std::vector<std::string> kDirections{"sublevel", "superlevel"};

// ---------------------------------------------------------------------------
// persistence / simplify

struct FieldArgs {
  std::string input;
  std::string direction = "sublevel";
  int k = 15;
  CsvArgs csv;
};

void add_field_options(CLI::App* cmd, FieldArgs& a) {
  cmd->add_option("input", a.input, "Field JSON ({vertex_count, edges, values}) or CSV of coordinates plus a value column")
      ->required();
  cmd->add_option("--direction", a.direction, "Filtration direction")->check(CLI::IsMember(kDirections));
  cmd->add_option("-k,--neighbors", a.k, "Neighbors for the k-NN graph built from CSV input")
      ->check(CLI::PositiveNumber);
  add_csv_options(cmd, a.csv, "CSV column holding the vertex value (index, negative from the end, or header name)");
}

ScalarField load_field(const FieldArgs& a) {
  ScalarField field;
  if (fs::path(a.input).extension() == ".csv") {
    const auto cloud = read_csv(a.input, a.csv.options());
    if (!cloud.labels) throw DataError(a.input + ": CSV input needs a value column");
    if (cloud.size() < 2) throw DataError(a.input + ": need at least two points");
    const int k = std::min<int>(a.k, static_cast<int>(cloud.size()) - 1);
    field = ScalarField(build_knn_graph(cloud, k), *cloud.labels);
  } else {
    field = field_from_json(read_json_file(a.input));
  }
  if (field.size() == 0) throw DataError(a.input + ": field has no vertices");
  if (!field.values.allFinite()) throw DataError(a.input + ": field values must be finite");
  return field;
}

int cmd_persistence(const FieldArgs& a, const Globals& g, std::ostream& out) {
  const auto field = load_field(a);
  const auto text = pretty(to_json(persistence_diagram(field, parse_direction(a.direction))));
  if (g.out_given()) write_text_file((output_dir(g.out) / "diagram.json").string(), text);
  out << text;
  return 0;
}

struct SimplifyArgs {
  FieldArgs field;
  std::string epsilon = "0";
};

double resolve_epsilon(const std::string& spec, const PersistenceDiagram& dgm) {
  if (spec == "largest-gap") return epsilon_largest_gap(dgm);
  if (spec.rfind("top-", 0) == 0) return epsilon_top_j(dgm, EpsilonPolicy::parse(spec).j);
  std::size_t used = 0;
  double eps = 0;
  try {
    eps = std::stod(spec, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != spec.size() || !(eps >= 0))
    throw InvalidParameter("epsilon must be a nonnegative number, top-J, or largest-gap");
  return eps;
}

int cmd_simplify(const SimplifyArgs& a, const Globals& g, std::ostream& out) {
  const auto field = load_field(a.field);
  const auto dir = parse_direction(a.field.direction);
  const auto tree = compute_merge_tree(field, dir);
  const double eps = resolve_epsilon(a.epsilon, diagram_of(tree));
  const auto target = simplify(tree, field, eps);
  const auto text = pretty(to_json(target));
  if (g.out_given()) {
    const auto dir_path = output_dir(g.out);
    write_text_file((dir_path / "target.json").string(), text);
    write_text_file((dir_path / "diagram.json").string(),
                    pretty(to_json(persistence_diagram(ScalarField(field.graph, target.values), dir))));
  }
  out << text;
  return 0;
}

// ---------------------------------------------------------------------------
// optimize-values

struct ValueArgs {
  std::string preset = "four-gaussians";
  std::string spec;
  int width = 100;
  int height = 100;
  std::string mode = "both";
  std::string direction = "superlevel";
  double epsilon = 0.5;
  int steps = 50;
  double lr = 0.1;
  double lambda = 0.0;
  std::vector<int> snapshots{0, 10, 25};
};

std::vector<GaussianSpec> load_specs(const std::string& path) {
  const auto j = read_json_file(path);
  std::vector<GaussianSpec> specs;
  try {
    for (const auto& s : j) {
      GaussianSpec g;
      const auto& c = s.at("center");
      if (!c.is_array() || c.size() != 2) throw DataError(path + ": center must be [x, y]");
      g.center = {c[0].get<double>(), c[1].get<double>()};
      g.amplitude = s.at("amplitude").get<double>();
      g.bandwidth = s.at("bandwidth").get<double>();
      if (!(g.bandwidth > 0)) throw DataError(path + ": bandwidth must be positive");
      specs.push_back(g);
    }
  } catch (const Json::exception& ex) {
    throw DataError(path + ": " + ex.what());
  }
  if (!j.is_array()) throw DataError(path + ": expected an array of Gaussians");
  return specs;
}

int cmd_optimize_values(const ValueArgs& a, const Globals& g, std::ostream& out) {
  const auto specs = a.spec.empty() ? four_gaussians_preset() : load_specs(a.spec);
  const auto grid = build_grid_graph(a.width, a.height);
  const auto field = gaussian_mixture_field(grid, a.width, a.height, specs);
  const auto dir = output_dir(g.out);

  ValueOptOptions opt;
  opt.direction = parse_direction(a.direction);
  opt.epsilon = a.epsilon;
  opt.steps = a.steps;
  opt.learning_rate = a.lr;
  opt.anti_squash_lambda = a.lambda;
  opt.snapshot_steps = a.snapshots;
  opt.snapshot_steps.push_back(a.steps);

  std::vector<std::pair<std::string, ValueLoss>> modes;
  if (a.mode != "diagram") modes.emplace_back("pso", ValueLoss::Pso);
  if (a.mode != "pso") modes.emplace_back("diagram", ValueLoss::Diagram);

  for (const auto& [name, loss] : modes) {
    opt.loss = loss;
    const auto report = optimize_values(field, opt);
    Json j{{"mode", name},
           {"direction", to_string(opt.direction)},
           {"epsilon", opt.epsilon},
           {"steps", opt.steps},
           {"learning_rate", opt.learning_rate},
           {"width", a.width},
           {"height", a.height}};
    if (loss == ValueLoss::Diagram) j["anti_squash_lambda"] = opt.anti_squash_lambda;
    j["initial_diagram"] = to_json(persistence_diagram(field, opt.direction));
    j["final_diagram"] = to_json(persistence_diagram(report.final_field, opt.direction));
    const Json body = to_json(report);
    for (const auto& [key, value] : body.items()) j[key] = value;
    write_text_file((dir / ("values-" + name + ".json")).string(), pretty(j));
    write_text_file((dir / ("vineyard-" + name + ".csv")).string(), vineyard_csv(report.vineyard));
    for (const auto& [step, values] : report.snapshots)
      write_text_file((dir / ("grid-" + name + "-step" + std::to_string(step) + ".csv")).string(),
                      grid_csv(values, a.width, a.height));
    out << name << ": loss " << format_number(report.losses.front()) << " -> " << format_number(report.losses.back())
        << '\n';
  }
  return 0;
}

// ---------------------------------------------------------------------------
// train / blobs / sweep

struct TrainArgs {
  TrainConfig config;
  std::string task = "regression";
  std::string policy = "validation";
  std::string topo_lr = "base";
  std::string directions = "both";
  bool no_topo = false;
  bool no_vineyard = false;
  int topo_start = -1;
  int pca = 0;
  std::string preset;
  std::map<std::string, CLI::Option*> options;

  bool given(const std::string& name) const {
    const auto it = options.find(name);
    return it != options.end() && it->second->count() > 0;
  }
};

void add_train_options(CLI::App* cmd, TrainArgs& a, bool with_task) {
  auto& c = a.config;
  auto& o = a.options;
  if (with_task)
    o["task"] = cmd->add_option("--task", a.task, "Learning task")
                    ->check(CLI::IsMember({"regression", "classification"}));
  o["epochs"] = cmd->add_option("--epochs", c.epochs, "Training epochs")->check(CLI::NonNegativeNumber);
  cmd->add_option("--batch-size", c.batch_size, "Minibatch size")->check(CLI::PositiveNumber);
  cmd->add_option("--lr", c.learning_rate, "Adam learning rate (both optimizers)")->check(CLI::PositiveNumber);
  cmd->add_option("--hidden-layers", c.hidden_layers, "Hidden layers")->check(CLI::NonNegativeNumber);
  cmd->add_option("--hidden-width", c.hidden_width, "Units per hidden layer")->check(CLI::PositiveNumber);
  cmd->add_option("--l2", c.l2, "Weight-decay factor lambda on squared weights")->check(CLI::NonNegativeNumber);
  cmd->add_flag("--no-topo", a.no_topo, "Disable topological simplification phases");
  o["t"] = cmd->add_option("-t,--threshold", c.trigger_threshold,
                           "Run a phase when validation loss rises by more than this over the previous epoch");
  o["topo_start"] = cmd->add_option("--topo-start", a.topo_start,
                                    "Run a phase after every epoch from this one on, ignoring the trigger (-1: off)");
  cmd->add_option("--topo-steps", c.topo_steps, "Optimizer steps per phase")->check(CLI::Range(1, 50));
  cmd->add_option("--topo-lr", a.topo_lr, "Phase learning rate: base lr, or base lr scaled by the gradient-norm ratio")
      ->check(CLI::IsMember({"base", "grad-norm"}));
  o["k"] = cmd->add_option("-k,--neighbors", c.k, "Neighbors in the k-NN domain graph")->check(CLI::PositiveNumber);
  o["n"] = cmd->add_option("-n,--augment", c.augment_n, "Gaussian samples added per training point")
               ->check(CLI::NonNegativeNumber);
  o["sigma"] = cmd->add_option("--sigma", c.sigma, "Standard deviation of augmentation samples")
                   ->check(CLI::PositiveNumber);
  o["pca"] = cmd->add_option("--pca", a.pca, "Project the domain onto this many principal components (0: off)")
                 ->check(CLI::NonNegativeNumber);
  o["policy"] = cmd->add_option("--epsilon-policy", a.policy,
                                "Simplification level: validation, top-J, largest-gap, or fixed:V");
  cmd->add_option("--directions", a.directions, "Regression simplification directions")
      ->check(CLI::IsMember({"both", "sublevel", "superlevel"}));
  cmd->add_flag("--no-vineyard", a.no_vineyard, "Skip per-epoch diagrams of the model");
}

TrainConfig finalize(const TrainArgs& a, const Globals& g) {
  TrainConfig c = a.config;
  c.task = a.task == "classification" ? Task::Classification : Task::Regression;
  c.epsilon = EpsilonPolicy::parse(a.policy);
  c.topo_lr_rule = a.topo_lr == "grad-norm" ? TopoLrRule::GradientNormRatio : TopoLrRule::Base;
  c.directions = a.directions == "sublevel"     ? SimplifyDirections::Sublevel
                 : a.directions == "superlevel" ? SimplifyDirections::Superlevel
                                                : SimplifyDirections::Both;
  c.topo = !a.no_topo;
  c.record_vineyard = !a.no_vineyard;
  if (a.topo_start >= 0) c.topo_start_epoch = a.topo_start;
  if (a.pca > 0) c.pca_dims = a.pca;
  c.seed = g.seed;

  // A preset supplies the best known hyperparameters for options left unset.
  if (!a.preset.empty()) {
    const auto& grid = builtin_grids().at(a.preset);
    if (!a.given("task")) c.task = grid.task;
    if (!a.given("k")) c.k = grid.best_k;
    if (!a.given("t")) c.trigger_threshold = grid.best_t;
    if (!a.given("n")) c.augment_n = grid.best_n;
    if (!a.given("sigma")) c.sigma = grid.best_sigma;
    if (!a.given("pca") && grid.pca_dims) c.pca_dims = grid.pca_dims;
  }
  c.validate();
  return c;
}

std::vector<std::string> grid_names() {
  std::vector<std::string> names;
  for (const auto& [name, grid] : builtin_grids()) names.push_back(name);
  return names;
}

struct GridArgs {
  std::string grid;
  std::vector<int> k;
  std::vector<double> t;
  std::vector<int> n;
  std::vector<double> sigma;
};

void add_grid_options(CLI::App* cmd, GridArgs& a) {
  cmd->add_option("--grid", a.grid, "Built-in hyperparameter grid (default: the --preset grid, else wine)")
      ->check(CLI::IsMember(grid_names()));
  cmd->add_option("--grid-k", a.k, "Override the grid's k values");
  cmd->add_option("--grid-t", a.t, "Override the grid's t values");
  cmd->add_option("--grid-n", a.n, "Override the grid's n values");
  cmd->add_option("--grid-sigma", a.sigma, "Override the grid's sigma values");
}

HyperGrid resolve_grid(const GridArgs& a, const std::string& preset) {
  HyperGrid grid = builtin_grids().at(!a.grid.empty() ? a.grid : !preset.empty() ? preset : "wine");
  if (!a.k.empty()) grid.k = a.k;
  if (!a.t.empty()) grid.t = a.t;
  if (!a.n.empty()) grid.n = a.n;
  if (!a.sigma.empty()) grid.sigma = a.sigma;
  return grid;
}

Json run_json(const TrainConfig& c, const TrainReport& r) { return Json{{"config", to_json(c)}, {"report", to_json(r)}}; }

double test_metric(const TrainConfig& c, const TrainReport& r) {
  return c.task == Task::Regression ? r.test_rmsd : r.test_loss;
}

const char* metric_name(const TrainConfig& c) { return c.task == Task::Regression ? "test_rmsd" : "test_cross_entropy"; }

struct TrainCommand {
  std::string data;
  CsvArgs csv;
  TrainArgs train;
  GridArgs grid;
  bool sweep = false;
  bool save_model = false;
};

PointCloud load_dataset(const std::string& path, const CsvArgs& csv) {
  auto cloud = read_csv(path, csv.options());
  if (!cloud.labels) throw DataError(path + ": no label column");
  return cloud;
}

std::string sweep_row(const TrainConfig& c, const TrainReport& r) {
  std::ostringstream os;
  os << c.k << ',' << format_number(c.trigger_threshold) << ',' << c.augment_n << ',' << format_number(c.sigma) << ','
     << format_number(r.validation_loss.empty() ? 0.0 : r.validation_loss.back()) << ','
     << format_number(r.test_loss) << ',' << format_number(test_metric(c, r)) << ',' << r.phases.size() << '\n';
  return os.str();
}

int cmd_train(const TrainCommand& a, const Globals& g, std::ostream& out) {
  const auto data = load_dataset(a.data, a.csv);
  const auto base = finalize(a.train, g);
  const auto dir = output_dir(g.out);

  if (!a.sweep) {
    Model model;
    const auto report = train(base, data, &model);
    write_text_file((dir / "report.json").string(), pretty(run_json(base, report)));
    if (a.save_model) write_text_file((dir / "model.json").string(), pretty(to_json(model)));
    if (base.record_vineyard) write_text_file((dir / "vineyard.csv").string(), vineyard_csv(report.vineyard));
    out << metric_name(base) << ' ' << format_number(test_metric(base, report)) << '\n';
    return 0;
  }

  const auto grid = resolve_grid(a.grid, a.train.preset);
  auto configs = expand_grid(base, grid);
  std::string table = "k,t,n,sigma,validation_loss,test_loss," + std::string(metric_name(base)) + ",phases\n";
  std::optional<std::size_t> best;
  Json best_json;
  double best_val = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < configs.size(); ++i) {
    const auto report = train(configs[i], data);
    table += sweep_row(configs[i], report);
    const double val = report.validation_loss.empty() ? 0.0 : report.validation_loss.back();
    if (!best || val < best_val) {
      best = i;
      best_val = val;
      best_json = run_json(configs[i], report);
    }
  }
  write_text_file((dir / "sweep.csv").string(), table);
  write_text_file((dir / "sweep-best.json").string(), pretty(best_json));
  out << "configurations " << configs.size() << ", best k=" << configs[*best].k
      << " t=" << format_number(configs[*best].trigger_threshold) << " n=" << configs[*best].augment_n
      << " sigma=" << format_number(configs[*best].sigma) << " validation_loss " << format_number(best_val) << '\n';
  return 0;
}

struct BlobsCommand {
  TrainArgs train;
  int per_class = 1000;
  double noise = 0.2;
  int seeds = 5;
  int window = 20;
};

int cmd_blobs(const BlobsCommand& a, const Globals& g, std::ostream& out) {
  if (a.seeds < 1) throw InvalidParameter("blobs: need at least one seed");
  const auto dir = output_dir(g.out);
  std::vector<double> drops;
  Json runs = Json::array();
  for (int s = 0; s < a.seeds; ++s) {
    Globals gs = g;
    gs.seed = g.seed + static_cast<std::uint64_t>(s);
    const auto config = finalize(a.train, gs);
    const auto data = make_blobs(a.per_class, a.noise, gs.seed);
    const auto report = train(config, data);
    const auto tag = "seed" + std::to_string(gs.seed);
    write_text_file((dir / ("blobs-" + tag + ".json")).string(), pretty(run_json(config, report)));
    if (config.record_vineyard)
      write_text_file((dir / ("vineyard-" + tag + ".csv")).string(), vineyard_csv(report.vineyard));
    Json run{{"seed", gs.seed}, {"test_accuracy", report.test_accuracy}};
    if (config.topo_start_epoch && *config.topo_start_epoch + 1 < config.epochs) {
      const double drop = validation_drop(report.validation_loss, *config.topo_start_epoch, a.window);
      drops.push_back(drop);
      run["validation_drop"] = drop;
    }
    runs.push_back(run);
    out << tag << ": test accuracy " << format_number(report.test_accuracy);
    if (run.contains("validation_drop")) out << ", validation drop " << format_number(run["validation_drop"]);
    out << '\n';
  }
  Json summary{{"per_class", a.per_class}, {"noise", a.noise}, {"window", a.window}, {"runs", runs}};
  summary["median_validation_drop"] = drops.empty() ? Json(nullptr) : Json(median(drops));
  write_text_file((dir / "blobs-summary.json").string(), pretty(summary));
  if (!drops.empty()) out << "median validation drop " << format_number(median(drops)) << '\n';
  return 0;
}

struct SweepCommand {
  std::string data;
  CsvArgs csv;
  TrainArgs train;
  GridArgs grid;
  int seeds = 5;
  std::vector<std::string> modes{"none", "l2", "pso"};
};

// Runs every setting for every seed, picks the setting with the lowest mean
// final validation loss and reports its test metric across seeds.
int cmd_sweep(const SweepCommand& a, const Globals& g, std::ostream& out) {
  if (a.seeds < 1) throw InvalidParameter("sweep: need at least one seed");
  const auto data = load_dataset(a.data, a.csv);
  const auto base = finalize(a.train, g);
  const auto dir = output_dir(g.out);

  std::string table = "mode,setting,seed,validation_loss," + std::string(metric_name(base)) + "\n";
  Json summary = Json::object();
  std::string summary_csv = "mode,setting,mean_validation_loss,median_" + std::string(metric_name(base)) + ",mean_" +
                            metric_name(base) + "\n";

  for (const auto& mode : a.modes) {
    std::vector<std::pair<std::string, TrainConfig>> settings;
    if (mode == "none") {
      TrainConfig c = base;
      c.topo = false;
      c.l2 = 0;
      settings.emplace_back("-", c);
    } else if (mode == "l2") {
      for (double l2 : l2_grid()) {
        TrainConfig c = base;
        c.topo = false;
        c.l2 = l2;
        settings.emplace_back("l2=" + format_number(l2), c);
      }
    } else {
      TrainConfig c = base;
      c.topo = true;
      c.l2 = 0;
      for (const auto& cfg : expand_grid(c, resolve_grid(a.grid, a.train.preset))) {
        std::ostringstream name;
        name << "k=" << cfg.k << " t=" << format_number(cfg.trigger_threshold) << " n=" << cfg.augment_n
             << " sigma=" << format_number(cfg.sigma);
        settings.emplace_back(name.str(), cfg);
      }
    }

    double best_val = std::numeric_limits<double>::infinity();
    Json best;
    for (auto& [name, cfg] : settings) {
      // Skip vineyards unless phases need the domain; they do not affect metrics.
      cfg.record_vineyard = false;
      std::vector<double> vals, metrics;
      for (int s = 0; s < a.seeds; ++s) {
        cfg.seed = g.seed + static_cast<std::uint64_t>(s);
        const auto r = train(cfg, data);
        vals.push_back(r.validation_loss.empty() ? 0.0 : r.validation_loss.back());
        metrics.push_back(test_metric(cfg, r));
        table += mode + ",\"" + name + "\"," + std::to_string(cfg.seed) + ',' + format_number(vals.back()) + ',' +
                 format_number(metrics.back()) + '\n';
      }
      const double mv = mean(vals);
      if (best.is_null() || mv < best_val) {
        best_val = mv;
        best = Json{{"setting", name},
                    {"mean_validation_loss", mv},
                    {std::string("median_") + metric_name(base), median(metrics)},
                    {std::string("mean_") + metric_name(base), mean(metrics)},
                    {"per_seed", metrics}};
      }
    }
    summary[mode] = best;
    summary_csv += mode + ",\"" + best["setting"].get<std::string>() + "\"," + format_number(best_val) + ',' +
                   format_number(best[std::string("median_") + metric_name(base)].get<double>()) + ',' +
                   format_number(best[std::string("mean_") + metric_name(base)].get<double>()) + '\n';
    out << mode << ": " << best["setting"].get<std::string>() << ", median " << metric_name(base) << ' '
        << format_number(best[std::string("median_") + metric_name(base)].get<double>()) << '\n';
  }
  write_text_file((dir / "sweep-runs.csv").string(), table);
  write_text_file((dir / "sweep-summary.csv").string(), summary_csv);
  write_text_file((dir / "sweep-summary.json").string(), pretty(summary));
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Persistence-sensitive simplification of graph functions and neural networks"};
  app.option_defaults()->always_capture_default();
  app.require_subcommand(1);

  Globals g;
  app.add_option("--seed", g.seed, "Random seed")->capture_default_str();
  g.out_option = app.add_option("--out", g.out,
                                "Output directory (persistence and simplify print to stdout and write here only when given)");
  app.add_option("--config", g.config,
                 "JSON config: top-level keys and per-command sections set options; flags override it");

  FieldArgs persistence_args;
  auto* persistence_cmd = app.add_subcommand("persistence", "0-dimensional persistence diagram of a graph field");
  add_field_options(persistence_cmd, persistence_args);

  SimplifyArgs simplify_args;
  auto* simplify_cmd = app.add_subcommand("simplify", "Epsilon-simplification target of a graph field");
  add_field_options(simplify_cmd, simplify_args.field);
  simplify_cmd->add_option("--epsilon", simplify_args.epsilon, "Level: a number, top-J, or largest-gap");

  ValueArgs value_args;
  auto* values_cmd = app.add_subcommand("optimize-values", "Gradient descent on the values of a gridded Gaussian mixture");
  values_cmd->add_option("--preset", value_args.preset, "Built-in mixture")->check(CLI::IsMember({"four-gaussians"}));
  values_cmd->add_option("--spec", value_args.spec, "JSON array of {center: [x, y], amplitude, bandwidth}; replaces the preset");
  values_cmd->add_option("--width", value_args.width, "Grid width")->check(CLI::PositiveNumber);
  values_cmd->add_option("--height", value_args.height, "Grid height")->check(CLI::PositiveNumber);
  values_cmd->add_option("--mode", value_args.mode, "Loss to optimize")->check(CLI::IsMember({"pso", "diagram", "both"}));
  values_cmd->add_option("--direction", value_args.direction, "Filtration direction")->check(CLI::IsMember(kDirections));
  values_cmd->add_option("--epsilon", value_args.epsilon, "Simplification level")->check(CLI::NonNegativeNumber);
  values_cmd->add_option("--steps", value_args.steps, "Gradient steps")->check(CLI::NonNegativeNumber);
  values_cmd->add_option("--lr", value_args.lr, "Step size")->check(CLI::PositiveNumber);
  values_cmd->add_option("--lambda", value_args.lambda, "Anti-squash weight for the diagram loss")
      ->check(CLI::NonNegativeNumber);
  values_cmd->add_option("--snapshots", value_args.snapshots, "Steps whose grid values are written (the last always is)");

  TrainCommand train_args;
  auto* train_cmd = app.add_subcommand("train", "Train a network on a labeled CSV, optionally sweeping k, t, n, sigma");
  train_cmd->add_option("data", train_args.data, "Labeled CSV")->required();
  add_csv_options(train_cmd, train_args.csv, "Label column (index, negative from the end, or header name)");
  add_train_options(train_cmd, train_args.train, true);
  train_cmd->add_option("--preset", train_args.train.preset, "Use a dataset's best known task, k, t, n, sigma")
      ->check(CLI::IsMember(grid_names()));
  train_cmd->add_flag("--sweep", train_args.sweep, "Train every (k, t, n, sigma) in the grid; keep the best by validation");
  add_grid_options(train_cmd, train_args.grid);
  train_cmd->add_flag("--save-model", train_args.save_model, "Write model.json with the trained weights (not with --sweep)");

  BlobsCommand blobs_args;
  {
    auto& c = blobs_args.train.config;
    c = blobs_preset();
    blobs_args.train.task = "classification";
    blobs_args.train.policy = c.epsilon.to_string();
    blobs_args.train.topo_start = *c.topo_start_epoch;
    c.topo_start_epoch.reset();
  }
  auto* blobs_cmd = app.add_subcommand("blobs", "Three noisy Gaussian classes with simplification late in training");
  blobs_cmd->add_option("--per-class", blobs_args.per_class, "Points per class")->check(CLI::PositiveNumber);
  blobs_cmd->add_option("--noise", blobs_args.noise, "Fraction of labels permuted")->check(CLI::Range(0.0, 1.0));
  blobs_cmd->add_option("--seeds", blobs_args.seeds, "Runs, with seeds --seed, --seed+1, ...")->check(CLI::PositiveNumber);
  blobs_cmd->add_option("--window", blobs_args.window, "Epochs after activation searched for the validation drop")
      ->check(CLI::PositiveNumber);
  add_train_options(blobs_cmd, blobs_args.train, false);

  SweepCommand sweep_args;
  auto* sweep_cmd = app.add_subcommand("sweep", "Compare no regularization, weight decay, and simplification over seeds");
  sweep_cmd->add_option("data", sweep_args.data, "Labeled CSV")->required();
  add_csv_options(sweep_cmd, sweep_args.csv, "Label column (index, negative from the end, or header name)");
  add_train_options(sweep_cmd, sweep_args.train, true);
  sweep_cmd->add_option("--preset", sweep_args.train.preset, "Dataset whose task and grid to use")
      ->check(CLI::IsMember(grid_names()));
  add_grid_options(sweep_cmd, sweep_args.grid);
  sweep_cmd->add_option("--seeds", sweep_args.seeds, "Seeds per setting")->check(CLI::PositiveNumber);
  sweep_cmd->add_option("--modes", sweep_args.modes, "Regularization modes")
      ->check(CLI::IsMember({"none", "l2", "pso"}));

  for (auto* cmd : app.get_subcommands({})) {
    cmd->fallthrough();
    cmd->footer(
        "Global options (before or after the command):\n"
        "  --seed UINT [0]          Random seed\n"
        "  --out DIR [results]      Output directory\n"
        "  --config FILE            JSON config; flags override it");
  }

  try {
    app.parse(argc, argv);
    CLI::App* command = app.get_subcommands().empty() ? nullptr : app.get_subcommands().front();
    if (!g.config.empty()) apply_config(app, command, read_json_file(g.config));

    if (command == persistence_cmd) return cmd_persistence(persistence_args, g, out);
    if (command == simplify_cmd) return cmd_simplify(simplify_args, g, out);
    if (command == values_cmd) return cmd_optimize_values(value_args, g, out);
    if (command == train_cmd) return cmd_train(train_args, g, out);
    if (command == blobs_cmd) return cmd_blobs(blobs_args, g, out);
    if (command == sweep_cmd) return cmd_sweep(sweep_args, g, out);
    return 1;
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 1;
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << '\n';
    return 3;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return 2;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::out_of_range& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }
}

}  // namespace pso
