#include "pso/cli.hpp"
#include "pso/io.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <unistd.h>

using namespace pso;
namespace fs = std::filesystem;

namespace {

struct Sandbox {
  fs::path root;
  Sandbox() {
    static int counter = 0;
    root = fs::temp_directory_path() / ("pso_cli_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::create_directories(root);
  }
  ~Sandbox() { fs::remove_all(root); }

  std::string file(const std::string& name, const std::string& text) const {
    const auto p = (root / name).string();
    write_text_file(p, text);
    return p;
  }
  std::string path(const std::string& name) const { return (root / name).string(); }
};

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  args.insert(args.begin(), "pso");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const char* kPath = R"({"vertex_count": 5, "edges": [[0,1],[1,2],[2,3],[3,4]], "values": [2,0,3,1,4]})";

// 60 noisy samples of a linear target, three features plus the label.
std::string linear_csv() {
  std::ostringstream os;
  os.precision(17);
  std::mt19937_64 rng(1);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int i = 0; i < 60; ++i) {
    const double a = normal(rng), b = normal(rng), c = normal(rng);
    os << a << ',' << b << ',' << c << ',' << (a - 2 * b + 0.5 * c + 0.1 * normal(rng)) << '\n';
  }
  return os.str();
}

const std::vector<std::string> kSmallNet{"--epochs", "6", "--hidden-layers", "1", "--hidden-width", "8", "-k", "4"};

std::vector<std::string> concat(std::vector<std::string> a, const std::vector<std::string>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

}  // namespace

TEST_CASE("persistence command") {
  Sandbox box;
  const auto r = run({"persistence", box.file("path.json", kPath)});
  REQUIRE(r.code == 0);
  const auto j = Json::parse(r.out);
  CHECK(j["direction"] == "sublevel");
  REQUIRE(j["points"].size() == 2);
  CHECK(j["points"][0]["birth"] == 0.0);
  CHECK(j["points"][0]["death"].is_null());
  CHECK(j["points"][1]["birth"] == 1.0);
  CHECK(j["points"][1]["death"] == 3.0);

  SUBCASE("two components") {
    const auto two = run({"persistence", box.file("two.json", R"({"vertex_count": 4, "edges": [[0,1],[2,3]], "values": [0,1,2,3]})")});
    REQUIRE(two.code == 0);
    int infinite = 0;
    const auto dgm = Json::parse(two.out);
    for (const auto& p : dgm["points"]) infinite += p["death"].is_null();
    CHECK(infinite == 2);
  }
  SUBCASE("superlevel") {
    const auto up = run({"persistence", box.path("path.json"), "--direction", "superlevel"});
    // Maxima at v0, v2 and v4.
    CHECK(Json::parse(up.out)["points"].size() == 3);
  }
  SUBCASE("CSV input becomes a k-NN field") {
    const auto csv = run({"persistence", box.file("pts.csv", "0,0,1\n1,0,0\n2,0,1\n3,0,0.5\n"), "-k", "1"});
    REQUIRE(csv.code == 0);
    CHECK(Json::parse(csv.out)["points"].size() == 2);
  }
  SUBCASE("written to --out when given") {
    const auto outdir = box.path("o");
    CHECK(run({"persistence", box.path("path.json"), "--out", outdir}).code == 0);
    CHECK(Json::parse(slurp(outdir + "/diagram.json")) == j);
  }
  SUBCASE("errors") {
    CHECK(run({"persistence", box.file("empty.json", "")}).code == 2);
    CHECK(run({"persistence", box.file("zero.json", R"({"vertex_count": 0, "edges": [], "values": []})")}).code == 2);
    CHECK(run({"persistence", box.path("missing.json")}).code == 2);
    CHECK(run({"persistence", box.path("path.json"), "--direction", "sideways"}).code == 1);
    CHECK(run({"persistence"}).code == 1);
    CHECK(run({}).code == 1);
    CHECK(run({"frobnicate"}).code == 1);
  }
}

TEST_CASE("simplify command") {
  Sandbox box;
  const auto field = box.file("path.json", kPath);
  const auto r = run({"simplify", field, "--epsilon", "2.5"});
  REQUIRE(r.code == 0);
  const auto j = Json::parse(r.out);
  CHECK(j["epsilon"] == 2.5);
  CHECK(j["values"] == Json::array({2.0, 0.0, 3.0, 3.0, 4.0}));
  CHECK(j["changed"] == Json::array({3}));
  CHECK(Json::parse(run({"simplify", field, "--epsilon", "top-1"}).out)["epsilon"] == 2.0);
  CHECK(run({"simplify", field, "--epsilon", "lots"}).code == 1);
}

TEST_CASE("help documents options and defaults") {
  const auto top = run({"--help"});
  CHECK(top.code == 0);
  CHECK(top.out.find("--seed UINT [0]") != std::string::npos);
  for (const char* cmd : {"persistence", "simplify", "optimize-values", "train", "blobs", "sweep"}) {
    const auto h = run({cmd, "--help"});
    CHECK(h.code == 0);
    CHECK(h.out.find("Global options") != std::string::npos);
  }
  const auto train = run({"train", "--help"}).out;
  for (const char* s : {"--epochs INT:NONNEGATIVE [100]", "--lr FLOAT:POSITIVE [0.001]", "--no-topo", "--l2", "--sweep",
                        "-k,--neighbors INT:POSITIVE [15]", "-t,--threshold FLOAT [0.001]", "--sigma FLOAT:POSITIVE [0.001]"})
    CHECK_MESSAGE(train.find(s) != std::string::npos, s);
  const auto blobs = run({"blobs", "--help"}).out;
  CHECK(blobs.find("--per-class INT:POSITIVE [1000]") != std::string::npos);
  CHECK(blobs.find("--topo-start INT [450]") != std::string::npos);
  CHECK(blobs.find("--epsilon-policy TEXT [top-3]") != std::string::npos);
}

TEST_CASE("optimize-values command") {
  Sandbox box;
  const auto dir = box.path("ov");
  SUBCASE("zero steps writes the initial state only") {
    const auto r = run({"optimize-values", "--out", dir, "--width", "30", "--height", "30", "--steps", "0", "--mode", "pso"});
    REQUIRE(r.code == 0);
    CHECK(fs::exists(dir + "/values-pso.json"));
    CHECK_FALSE(fs::exists(dir + "/values-diagram.json"));
    CHECK(fs::exists(dir + "/grid-pso-step0.csv"));
    CHECK_FALSE(fs::exists(dir + "/grid-pso-step10.csv"));
    const auto j = Json::parse(slurp(dir + "/values-pso.json"));
    CHECK(j["losses"].size() == 1);
    const auto grid = slurp(dir + "/grid-pso-step0.csv");
    CHECK(grid.rfind("i,j,value\n0,0,", 0) == 0);
    CHECK(std::count(grid.begin(), grid.end(), '\n') == 901);
    const auto vy = slurp(dir + "/vineyard-pso.csv");
    CHECK(vy.rfind("step,persistence\n0,null\n", 0) == 0);
    CHECK(std::count(vy.begin(), vy.end(), '\n') == 5);
  }
  SUBCASE("both modes are reproducible") {
    const std::vector<std::string> args{"optimize-values", "--out", dir, "--width", "30", "--height", "30", "--steps", "5"};
    REQUIRE(run(args).code == 0);
    const auto first = slurp(dir + "/values-diagram.json") + slurp(dir + "/vineyard-pso.csv");
    REQUIRE(run(args).code == 0);
    CHECK(first == slurp(dir + "/values-diagram.json") + slurp(dir + "/vineyard-pso.csv"));
  }
  SUBCASE("custom specification") {
    const auto spec = box.file("spec.json", R"([{"center": [0.5, 0.5], "amplitude": 1, "bandwidth": 0.2}])");
    CHECK(run({"optimize-values", "--out", dir, "--spec", spec, "--width", "11", "--height", "11", "--steps", "1"}).code == 0);
    CHECK(run({"optimize-values", "--out", dir, "--spec", box.file("bad.json", R"([{"center": [0.5]}])")}).code == 2);
  }
}

TEST_CASE("train command") {
  Sandbox box;
  const auto data = box.file("lin.csv", linear_csv());
  const auto dir = box.path("tr");

  SUBCASE("writes a report, vineyard and model") {
    const auto r = run(concat({"train", data, "--out", dir, "--save-model", "--seed", "2"}, kSmallNet));
    REQUIRE(r.code == 0);
    const auto report = Json::parse(slurp(dir + "/report.json"));
    CHECK(report["config"]["seed"] == 2);
    CHECK(report["report"]["train_loss"].size() == 6);
    CHECK(report["report"]["test"].contains("rmsd"));
    const auto model = model_from_json(Json::parse(slurp(dir + "/model.json")));
    CHECK(model.widths == std::vector<int>{3, 8, 1});
    CHECK(slurp(dir + "/vineyard.csv").rfind("step,persistence\n0,", 0) == 0);

    const auto again = slurp(dir + "/report.json") + slurp(dir + "/model.json");
    REQUIRE(run(concat({"train", data, "--out", dir, "--save-model", "--seed", "2"}, kSmallNet)).code == 0);
    CHECK(again == slurp(dir + "/report.json") + slurp(dir + "/model.json"));
  }
  SUBCASE("baselines") {
    REQUIRE(run(concat({"train", data, "--out", dir, "--no-topo", "--l2", "0.01"}, kSmallNet)).code == 0);
    const auto report = Json::parse(slurp(dir + "/report.json"));
    CHECK(report["config"]["topo"] == false);
    CHECK(report["config"]["l2"] == 0.01);
    CHECK(report["report"]["phases"].empty());
  }
  SUBCASE("config file sits between defaults and flags") {
    const auto cfg = box.file("cfg.json", R"({"seed": 5, "hidden-width": 8, "train": {"epochs": 3, "t": 0.5}})");
    REQUIRE(run({"train", data, "--out", dir, "--config", cfg, "--hidden-layers", "1", "--epochs", "4"}).code == 0);
    auto c = Json::parse(slurp(dir + "/report.json"))["config"];
    CHECK(c["epochs"] == 4);
    CHECK(c["seed"] == 5);
    CHECK(c["t"] == 0.5);
    CHECK(c["hidden_width"] == 8);
    CHECK(c["batch_size"] == 64);
    REQUIRE(run({"train", data, "--out", dir, "--config", cfg, "--hidden-layers", "1"}).code == 0);
    CHECK(Json::parse(slurp(dir + "/report.json"))["config"]["epochs"] == 3);
    CHECK(run({"train", data, "--config", box.file("bad.json", R"({"epoch": 3})")}).code == 1);
    CHECK(run({"train", data, "--config", box.file("broken.json", "{")}).code == 2);
  }
  SUBCASE("preset supplies hyperparameters unless overridden") {
    REQUIRE(run(concat({"train", data, "--out", dir, "--preset", "wine", "-n", "1"}, kSmallNet)).code == 0);
    auto c = Json::parse(slurp(dir + "/report.json"))["config"];
    CHECK(c["k"] == 4);
    CHECK(c["n"] == 1);
    CHECK(c["t"] == 0.001);
    CHECK(c["sigma"] == 0.001);
  }
  SUBCASE("sweep over a small grid") {
    const auto r = run(concat({"train", data, "--out", dir, "--sweep", "--grid-k", "3", "4", "--grid-t", "0.01", "--grid-n",
                               "0", "--grid-sigma", "0.01"},
                              {"--epochs", "4", "--hidden-layers", "1", "--hidden-width", "8"}));
    REQUIRE(r.code == 0);
    const auto table = slurp(dir + "/sweep.csv");
    CHECK(std::count(table.begin(), table.end(), '\n') == 3);
    CHECK(Json::parse(slurp(dir + "/sweep-best.json"))["config"]["t"] == 0.01);
  }
  SUBCASE("data errors") {
    CHECK(run({"train", box.file("bad.csv", "1,2\n3\n")}).code == 2);
    CHECK(run({"train", box.path("none.csv")}).code == 2);
    CHECK(run(concat({"train", box.file("nan.csv", "1,2,3\nnan,1,2\n2,3,4\n5,1,0\n4,4,4\n1,1,1\n"), "--out", dir}, kSmallNet))
              .code == 3);
  }
}

TEST_CASE("blobs command") {
  Sandbox box;
  const auto dir = box.path("b");
  const auto r = run({"blobs", "--out", dir, "--per-class", "20", "--epochs", "6", "--topo-start", "3", "--seeds", "2",
                      "--hidden-layers", "1", "--hidden-width", "8", "--window", "2", "--seed", "7"});
  REQUIRE(r.code == 0);
  CHECK(fs::exists(dir + "/blobs-seed7.json"));
  CHECK(fs::exists(dir + "/vineyard-seed8.csv"));
  const auto summary = Json::parse(slurp(dir + "/blobs-summary.json"));
  CHECK(summary["runs"].size() == 2);
  CHECK(summary["median_validation_drop"].is_number());
  const auto run7 = Json::parse(slurp(dir + "/blobs-seed7.json"));
  CHECK(run7["report"]["phases"].size() == 3);
  CHECK(run7["config"]["epsilon"] == "top-3");
}

TEST_CASE("sweep command") {
  Sandbox box;
  const auto data = box.file("lin.csv", linear_csv());
  const auto dir = box.path("sw");
  const auto r = run({"sweep", data, "--out", dir, "--seeds", "2", "--modes", "none", "pso", "--grid-k", "4", "--grid-t",
                      "0.001", "--grid-n", "0", "--grid-sigma", "0.001", "--epochs", "3", "--hidden-layers", "1",
                      "--hidden-width", "8"});
  REQUIRE(r.code == 0);
  const auto summary = Json::parse(slurp(dir + "/sweep-summary.json"));
  CHECK(summary.contains("none"));
  CHECK(summary.contains("pso"));
  CHECK_FALSE(summary.contains("l2"));
  CHECK(summary["pso"]["per_seed"].size() == 2);
  const auto runs = slurp(dir + "/sweep-runs.csv");
  CHECK(std::count(runs.begin(), runs.end(), '\n') == 5);
}

TEST_CASE("validation drop") {
  const std::vector<double> val{1.0, 1.0, 0.9, 0.7, 0.8};
  CHECK(validation_drop(val, 1, 2) == doctest::Approx(0.3));
  CHECK(validation_drop(val, 1, 1) == doctest::Approx(0.1));
  CHECK(validation_drop(val, 2, 1) == doctest::Approx(0.3));
  CHECK_THROWS_AS(validation_drop(val, 4, 2), InvalidParameter);
}

TEST_CASE("built-in grids") {
  const auto& grids = builtin_grids();
  CHECK(grids.size() == 13);
  const auto& wine = grids.at("wine");
  CHECK(wine.best_k == 15);
  CHECK(wine.best_n == 6);
  CHECK(expand_grid(TrainConfig{}, wine).size() == 3 * 5 * 5 * 4);
  CHECK(grids.at("ct-slices").pca_dims == 10);
  CHECK(grids.at("spect").task == Task::Classification);
  CHECK(l2_grid().front() == 1e-5);
  CHECK(l2_grid().back() == 10.0);
}
