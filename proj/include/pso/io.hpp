#pragma once

#include "pso/neural.hpp"
#include "pso/optim_values.hpp"

#include <json.hpp>

#include <iosfwd>
#include <optional>
#include <string>

namespace pso {

using Json = nlohmann::ordered_json;

// JSON forms:
//   graph:   {"vertex_count": n, "edges": [[u, v], ...]}
//   field:   graph members plus "values": [...]
//   cloud:   {"dimension": d, "points": [[...], ...], "labels": [...]?}
//   diagram: {"direction": "sublevel", "points": [{"birth", "death" (null when
//            infinite), "birth_vertex", "death_vertex" (null when infinite)}]}
//   target:  {"epsilon", "values": [...], "changed": [...]}
//   model:   {"format": "pso-mlp-v1", "widths": [...], "activation": "relu",
//             "layers": [{"shape": [out, in], "weight": row-major, "bias"}]}
Json to_json(const Graph& graph);
Json to_json(const ScalarField& field);
Json to_json(const PointCloud& cloud);
Json to_json(const PersistenceDiagram& diagram);
Json to_json(const SimplificationTarget& target);
Json to_json(const Model& model);
Json to_json(const TrainConfig& config);
Json to_json(const TrainReport& report);
Json to_json(const ValueOptReport& report);

Graph graph_from_json(const Json& j);
ScalarField field_from_json(const Json& j);
Model model_from_json(const Json& j);

/// Parses a JSON document, raising DataError on failure.
Json read_json_file(const std::string& path);

struct CsvOptions {
  bool header = false;
  char delimiter = 0;  // 0: detect from the first line (',' ';' or tab)
  // Label column: index (negative counts from the end) or, with a header,
  // a column name. Empty means no label column.
  std::string label_column = "-1";
};

/// Every non-label column is parsed as a real feature.
PointCloud read_csv(const std::string& path, const CsvOptions& options);

/// Tidy "step,persistence" rows; infinite persistence is written as null.
void write_vineyard_csv(std::ostream& out, const Vineyard& vineyard);

void write_text_file(const std::string& path, const std::string& contents);

}  // namespace pso
