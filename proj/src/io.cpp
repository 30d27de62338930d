#include "pso/io.hpp"

#include <cerrno>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace pso {

namespace {

Json finite_or_null(double x) { return std::isfinite(x) ? Json(x) : Json(nullptr); }

Json vertex_or_null(std::uint32_t v) { return v == kNoVertex ? Json(nullptr) : Json(v); }

template <typename Vec>
Json array_of(const Vec& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\"'");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\"'");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_line(const std::string& line, char delim) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, delim)) out.push_back(trim(cell));
  if (!line.empty() && line.back() == delim) out.emplace_back();
  return out;
}

double parse_real(const std::string& s, std::size_t line) {
  errno = 0;
  char* end = nullptr;
  const double x = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size() || errno == ERANGE)
    throw DataError("csv line " + std::to_string(line) + ": cannot parse '" + s + "' as a number");
  return x;
}

}  // namespace

Json to_json(const Graph& graph) {
  Json edges = Json::array();
  for (const auto& [u, v] : graph.edges()) edges.push_back({u, v});
  return Json{{"vertex_count", graph.vertex_count()}, {"edges", std::move(edges)}};
}

Json to_json(const ScalarField& field) {
  Json j = to_json(field.graph);
  j["values"] = array_of(field.values);
  return j;
}

Json to_json(const PointCloud& cloud) {
  Json pts = Json::array();
  for (Eigen::Index r = 0; r < cloud.size(); ++r) pts.push_back(array_of(cloud.points.row(r)));
  Json j{{"dimension", cloud.dim()}, {"points", std::move(pts)}};
  if (cloud.labels) j["labels"] = array_of(*cloud.labels);
  return j;
}

Json to_json(const PersistenceDiagram& diagram) {
  Json pts = Json::array();
  for (const auto& p : diagram.points)
    pts.push_back({{"birth", p.birth},
                   {"death", finite_or_null(p.death)},
                   {"birth_vertex", vertex_or_null(p.birth_vertex)},
                   {"death_vertex", vertex_or_null(p.death_vertex)}});
  return Json{{"direction", to_string(diagram.direction)}, {"points", std::move(pts)}};
}

Json to_json(const SimplificationTarget& target) {
  return Json{{"epsilon", target.epsilon}, {"values", array_of(target.values)}, {"changed", target.changed}};
}

Json to_json(const Model& model) {
  Json layers = Json::array();
  for (const auto& l : model.layers) {
    Json w = Json::array();
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r)
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c) w.push_back(l.weight(r, c));
    layers.push_back({{"shape", {l.weight.rows(), l.weight.cols()}}, {"weight", std::move(w)}, {"bias", array_of(l.bias)}});
  }
  return Json{{"format", "pso-mlp-v1"}, {"widths", model.widths}, {"activation", "relu"}, {"layers", std::move(layers)}};
}

Json to_json(const TrainConfig& c) {
  Json j{{"task", c.task == Task::Regression ? "regression" : "classification"},
         {"epochs", c.epochs},
         {"batch_size", c.batch_size},
         {"learning_rate", c.learning_rate},
         {"hidden_layers", c.hidden_layers},
         {"hidden_width", c.hidden_width},
         {"l2", c.l2},
         {"topo", c.topo},
         {"t", finite_or_null(c.trigger_threshold)},
         {"topo_start_epoch", c.topo_start_epoch ? Json(*c.topo_start_epoch) : Json(nullptr)},
         {"topo_steps", c.topo_steps},
         {"topo_lr_rule", c.topo_lr_rule == TopoLrRule::Base ? "base" : "grad-norm"},
         {"k", c.k},
         {"n", c.augment_n},
         {"sigma", c.sigma},
         {"pca_dims", c.pca_dims ? Json(*c.pca_dims) : Json(nullptr)},
         {"epsilon", c.epsilon.to_string()},
         {"seed", c.seed}};
  const char* dirs[] = {"both", "sublevel", "superlevel"};
  j["directions"] = dirs[static_cast<int>(c.directions)];
  return j;
}

Json to_json(const TrainReport& r) {
  Json phases = Json::array();
  for (const auto& p : r.phases)
    phases.push_back({{"epoch", p.epoch},
                      {"epsilon", p.epsilon},
                      {"changed", p.changed},
                      {"learning_rate", p.learning_rate},
                      {"loss_before", p.loss_before},
                      {"loss_after", p.loss_after}});
  Json j{{"train_loss", r.train_loss}, {"validation_loss", r.validation_loss}};
  if (!r.validation_accuracy.empty()) j["validation_accuracy"] = r.validation_accuracy;
  Json test{{"loss", r.test_loss}};
  if (r.validation_accuracy.empty())
    test["rmsd"] = r.test_rmsd;
  else
    test["accuracy"] = r.test_accuracy;
  j["test"] = std::move(test);
  j["phases"] = std::move(phases);
  j["domain"] = {{"vertices", r.domain_vertices}, {"edges", r.domain_edges}};
  j["vineyard_rows"] = r.vineyard.samples.size();
  return j;
}

Json to_json(const ValueOptReport& r) {
  Json j{{"losses", r.losses}, {"final_values", array_of(r.final_field.values)}};
  if (r.target_values.size() > 0) j["target"] = {{"values", array_of(r.target_values)}, {"changed", r.target_changed}};
  return j;
}

Graph graph_from_json(const Json& j) {
  try {
    const auto n = j.at("vertex_count").get<std::size_t>();
    std::vector<Edge> edges;
    for (const auto& e : j.at("edges")) {
      if (!e.is_array() || e.size() != 2) throw DataError("edge must be a two-element array");
      edges.emplace_back(e[0].get<std::uint32_t>(), e[1].get<std::uint32_t>());
    }
    return Graph(n, std::move(edges));
  } catch (const Json::exception& ex) {
    throw DataError(std::string("graph JSON: ") + ex.what());
  } catch (const InvalidParameter& ex) {
    throw DataError(ex.what());
  }
}

ScalarField field_from_json(const Json& j) {
  auto graph = graph_from_json(j);
  try {
    const auto& vals = j.at("values");
    VectorXd values(vals.size());
    for (std::size_t i = 0; i < vals.size(); ++i) values[i] = vals[i].get<double>();
    return ScalarField(std::move(graph), std::move(values));
  } catch (const Json::exception& ex) {
    throw DataError(std::string("field JSON: ") + ex.what());
  } catch (const InvalidParameter& ex) {
    throw DataError(ex.what());
  }
}

Model model_from_json(const Json& j) {
  try {
    if (j.at("format").get<std::string>() != "pso-mlp-v1") throw DataError("model JSON: unknown format");
    Model m = Model::zeros(j.at("widths").get<std::vector<int>>());
    const auto& layers = j.at("layers");
    if (layers.size() != m.layers.size()) throw DataError("model JSON: layer count does not match widths");
    for (std::size_t l = 0; l < layers.size(); ++l) {
      auto& layer = m.layers[l];
      const auto& w = layers[l].at("weight");
      const auto& b = layers[l].at("bias");
      if (w.size() != static_cast<std::size_t>(layer.weight.size()) || b.size() != static_cast<std::size_t>(layer.bias.size()))
        throw DataError("model JSON: parameter count does not match shape");
      std::size_t k = 0;
      for (Eigen::Index r = 0; r < layer.weight.rows(); ++r)
        for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) layer.weight(r, c) = w[k++].get<double>();
      for (Eigen::Index r = 0; r < layer.bias.size(); ++r) layer.bias[r] = b[r].get<double>();
    }
    return m;
  } catch (const Json::exception& ex) {
    throw DataError(std::string("model JSON: ") + ex.what());
  }
}

Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& ex) {
    throw DataError(path + ": " + ex.what());
  }
}

PointCloud read_csv(const std::string& path, const CsvOptions& options) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);)
    if (!trim(line).empty()) lines.push_back(line);
  if (lines.empty()) throw DataError(path + ": empty CSV");

  char delim = options.delimiter;
  if (!delim) {
    const auto& first = lines.front();
    delim = first.find(';') != std::string::npos ? ';' : first.find('\t') != std::string::npos ? '\t' : ',';
  }

  std::size_t first_row = 0;
  std::vector<std::string> header;
  if (options.header) {
    header = split_line(lines.front(), delim);
    first_row = 1;
  }
  if (first_row >= lines.size()) throw DataError(path + ": no data rows");
  const auto columns = split_line(lines[first_row], delim).size();

  std::optional<std::size_t> label;
  if (!options.label_column.empty()) {
    const auto& spec = options.label_column;
    const bool numeric = spec.find_first_not_of("-0123456789") == std::string::npos;
    if (numeric) {
      const long idx = std::stol(spec);
      const long resolved = idx < 0 ? static_cast<long>(columns) + idx : idx;
      if (resolved < 0 || resolved >= static_cast<long>(columns))
        throw DataError(path + ": label column " + spec + " out of range");
      label = static_cast<std::size_t>(resolved);
    } else {
      const auto it = std::find(header.begin(), header.end(), spec);
      if (it == header.end()) throw DataError(path + ": no column named '" + spec + "'");
      label = static_cast<std::size_t>(it - header.begin());
    }
  }

  const auto features = columns - (label ? 1 : 0);
  if (features < 1) throw DataError(path + ": no feature columns");
  const auto rows = lines.size() - first_row;
  MatrixXd pts(rows, features);
  VectorXd labels(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const auto cells = split_line(lines[first_row + r], delim);
    const auto line_no = first_row + r + 1;
    if (cells.size() != columns)
      throw DataError(path + ": line " + std::to_string(line_no) + " has " + std::to_string(cells.size()) +
                      " columns, expected " + std::to_string(columns));
    std::size_t f = 0;
    for (std::size_t c = 0; c < columns; ++c) {
      const double x = parse_real(cells[c], line_no);
      if (label && c == *label)
        labels[r] = x;
      else
        pts(r, f++) = x;
    }
  }
  return label ? PointCloud(std::move(pts), std::move(labels)) : PointCloud(std::move(pts));
}

void write_vineyard_csv(std::ostream& out, const Vineyard& vineyard) {
  out << "step,persistence\n";
  const auto old = out.precision(17);
  for (const auto& s : vineyard.samples)
    for (double p : s.persistences) {
      out << s.step << ',';
      if (std::isfinite(p))
        out << p;
      else
        out << "null";
      out << '\n';
    }
  out.precision(old);
}

void write_text_file(const std::string& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  out << contents;
}

}  // namespace pso
