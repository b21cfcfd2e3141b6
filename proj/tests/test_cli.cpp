#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "cfattr/cli.hpp"

using namespace cfattr;
namespace fs = std::filesystem;

namespace {

struct temp_dir {
  fs::path path;
  temp_dir() {
    path = fs::temp_directory_path() /
           ("cfattr_test_" + std::to_string(std::random_device{}()));
    fs::create_directories(path);
  }
  ~temp_dir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
};

void write_file(const fs::path& p, const std::string& content) {
  std::ofstream out(p);
  out << content;
}

const char* kToyModelJson = R"({
  "kind": "boolean-formula",
  "features": 6,
  "threshold": 0.5,
  "formula": {
    "op": "and",
    "args": [
      {"feature": 0, "op": ">", "constant": 0.5},
      {"op": "or", "args": [
        {"feature": 1, "op": ">", "constant": 0.5},
        {"op": "and", "args": [
          {"feature": 2, "op": ">", "constant": 0.5},
          {"feature": 3, "op": ">", "constant": 0.5}
        ]}
      ]}
    ]
  }
})";

const char* kToyDataCsv = "f0,f1,f2,f3,f4,f5\n1,1,1,1,1,1\n0,0,0,0,0,1\n";

cli::run_config toy_config(const temp_dir& dir, const std::string& out_name) {
  write_file(dir.path / "model.json", kToyModelJson);
  write_file(dir.path / "data.csv", kToyDataCsv);
  cli::run_config cfg;
  cfg.model_path = (dir.path / "model.json").string();
  cfg.data_path = (dir.path / "data.csv").string();
  cfg.out_dir = (dir.path / out_name).string();
  return cfg;
}

nlohmann::json read_json(const fs::path& p) {
  std::ifstream in(p);
  REQUIRE(in.good());
  nlohmann::json j;
  in >> j;
  return j;
}

// Synthetic integer-valued fixture large enough for the metrics pipeline.
void write_synthetic(const fs::path& dir, int rows, int features, std::uint64_t seed) {
  auto rng = make_rng(seed);
  std::ostringstream csv;
  for (int f = 0; f < features; ++f) csv << (f ? "," : "") << "f" << f;
  csv << "\n";
  for (int r = 0; r < rows; ++r) {
    for (int f = 0; f < features; ++f) csv << (f ? "," : "") << uniform_int(rng, 0, 9);
    csv << "\n";
  }
  write_file(dir / "data.csv", csv.str());

  auto tree = [&](int feature, double threshold, double lo, double hi) {
    nlohmann::json t;
    t["nodes"] = nlohmann::json::array();
    t["nodes"].push_back({{"feature", feature}, {"threshold", threshold}, {"left", 1}, {"right", 2}});
    t["nodes"].push_back({{"value", lo}});
    t["nodes"].push_back({{"value", hi}});
    return t;
  };
  nlohmann::json doc;
  doc["kind"] = "tree-ensemble";
  doc["features"] = features;
  doc["threshold"] = 0.5;
  doc["trees"] = nlohmann::json::array();
  doc["trees"].push_back(tree(0, 4.5, 0.0, 0.6));
  doc["trees"].push_back(tree(1, 6.5, 0.1, 0.5));
  doc["trees"].push_back(tree(2, 2.5, -0.2, 0.4));
  write_file(dir / "model.json", doc.dump());
}

}  // namespace

TEST_CASE("explain writes the golden toy vectors") {
  temp_dir dir;
  auto cfg = toy_config(dir, "out");
  cfg.methods = {"bin-cf-shap", "norm-cf-freq"};
  REQUIRE(cli::cmd_explain(cfg) == cli::kExitOk);

  auto bin = read_json(fs::path(cfg.out_dir) / "explanations/bin-cf-shap/instance_00000.json");
  REQUIRE(bin["values"].get<attribution_vector>() ==
          attribution_vector{7.0 / 12, 3.0 / 12, 1.0 / 12, 1.0 / 12, 0, 0});
  auto freq = read_json(fs::path(cfg.out_dir) / "explanations/norm-cf-freq/instance_00000.json");
  REQUIRE(freq["values"].get<attribution_vector>() ==
          attribution_vector{0.2, 0.2, 0.2, 0.2, 0.2, 0});
  // The opposite-class row is explained too (its counterfactual is row 0).
  REQUIRE(fs::exists(fs::path(cfg.out_dir) / "explanations/bin-cf-shap/instance_00001.json"));
  // Manifest pins every output.
  auto manifest = read_json(fs::path(cfg.out_dir) / "manifest.json");
  REQUIRE(manifest["outputs"].size() == 4);
  REQUIRE(manifest["config"]["seed"] == 0);
}

TEST_CASE("explain with max-sparse makes the two methods identical") {
  temp_dir dir;
  auto cfg = toy_config(dir, "out");
  cfg.methods = {"bin-cf-shap", "norm-cf-freq"};
  cfg.max_sparse = true;
  REQUIRE(cli::cmd_explain(cfg) == cli::kExitOk);
  auto bin = read_json(fs::path(cfg.out_dir) / "explanations/bin-cf-shap/instance_00000.json");
  auto freq = read_json(fs::path(cfg.out_dir) / "explanations/norm-cf-freq/instance_00000.json");
  REQUIRE(bin["values"] == freq["values"]);
}

TEST_CASE("gen-cf serializes validated counterfactual sets") {
  temp_dir dir;
  auto cfg = toy_config(dir, "out");
  REQUIRE(cli::cmd_gen_cf(cfg) == cli::kExitOk);
  auto doc = read_json(fs::path(cfg.out_dir) / "counterfactuals/instance_00000.json");
  REQUIRE(doc["query"].get<instance>() == instance{1, 1, 1, 1, 1, 1});
  REQUIRE(doc["counterfactuals"].size() == 1);
  REQUIRE(doc["counterfactuals"][0]["valid"] == true);
  REQUIRE(doc["counterfactuals"][0]["changed"].get<std::vector<int>>() ==
          std::vector<int>{0, 1, 2, 3, 4});
  REQUIRE(doc["counterfactuals"][0]["maximally_sparse"] == false);
  REQUIRE(doc["truncated"] == true);  // k=100 against one opposite row
}

TEST_CASE("max-sparse command reports before and after with cost deltas") {
  temp_dir dir;
  auto cfg = toy_config(dir, "out");
  cfg.cost = "uniform";
  REQUIRE(cli::cmd_max_sparse(cfg) == cli::kExitOk);
  auto doc = read_json(fs::path(cfg.out_dir) / "maxsparse/instance_00000.json");
  REQUIRE(doc["before"]["counterfactuals"][0]["maximally_sparse"] == false);
  REQUIRE(doc["after"]["counterfactuals"][0]["maximally_sparse"] == true);
  REQUIRE(doc["after"]["counterfactuals"][0]["changed"].get<std::vector<int>>() ==
          std::vector<int>{0});
  REQUIRE(doc["cost_deltas"][0]["cost_before"] == 5.0);
  REQUIRE(doc["cost_deltas"][0]["cost_after"] == 1.0);
}

TEST_CASE("quantile and uniform costs can pick different sparse sets") {
  temp_dir dir;
  // Data where feature 0 sits far away in quantile space: restoring features
  // 1 and 2 is cheaper than the single feature 0 under the quantile cost.
  std::ostringstream csv;
  csv << "f0,f1,f2,f3,f4,f5\n";
  csv << "1,1,1,1,1,1\n";
  csv << "0,0,0,0,0,1\n";
  // Stretch feature 0's column so its 0-to-1 move spans many ranks, and push
  // the mass of features 1 and 2 above 1 so their 0-to-1 moves are one rank.
  for (int i = 0; i < 20; ++i)
    csv << (0.02 + 0.05 * i) << ",5,5,5,5,5\n";
  write_file(dir.path / "model.json", kToyModelJson);
  write_file(dir.path / "data.csv", csv.str());

  auto data = load_csv_file((dir.path / "data.csv").string());
  auto mdl = load_model_file((dir.path / "model.json").string());
  auto qm = fit_quantile_map(data);
  const instance x{1, 1, 1, 1, 1, 1};
  const instance xp{0, 0, 0, 0, 0, 1};
  auto uniform_pick = max_sparse(mdl, x, xp, uniform_cost());
  auto quantile_pick = max_sparse(mdl, x, xp, quantile_shift_cost(qm));
  REQUIRE(uniform_pick.changed == coalition::of({0}, 6));
  REQUIRE(quantile_pick.changed == coalition::of({1, 2}, 6));
}

TEST_CASE("metrics command is deterministic and self-consistent") {
  temp_dir dir;
  write_synthetic(dir.path, 120, 6, 17);
  cli::run_config cfg;
  cfg.model_path = (dir.path / "model.json").string();
  cfg.data_path = (dir.path / "data.csv").string();
  cfg.methods = {"bin-cf-shap", "cf-freq", "norm-cf-freq"};
  cfg.k = 8;
  cfg.topk = {1, 3};
  cfg.seed = 3;

  cfg.out_dir = (dir.path / "out1").string();
  REQUIRE(cli::cmd_metrics(cfg) == cli::kExitOk);
  cfg.out_dir = (dir.path / "out2").string();
  REQUIRE(cli::cmd_metrics(cfg) == cli::kExitOk);

  auto csv1 = read_file((dir.path / "out1/metrics.csv").string());
  auto csv2 = read_file((dir.path / "out2/metrics.csv").string());
  REQUIRE(csv1 == csv2);
  auto json1 = read_file((dir.path / "out1/metrics.json").string());
  auto json2 = read_file((dir.path / "out2/metrics.json").string());
  REQUIRE(json1 == json2);

  // Diagonals of correlation matrices are 1; self-improvement rates are 0.5.
  auto jm = read_json(dir.path / "out1/metrics.json");
  for (const auto& mat : jm["matrices"]) {
    if (mat["metric"] == "kendall-tau" || mat["metric"] == "spearman" || mat["metric"] == "rbo") {
      for (std::size_t i = 0; i < mat["methods"].size(); ++i)
        REQUIRE(mat["mean"][i][i].get<double>() == 1.0);
    }
  }
  bool saw_self_rate = false;
  for (const auto& rate : jm["rates"]) {
    if (rate["metric"] == "counterfactual-ability" &&
        rate["method"] == rate["baseline"]) {
      REQUIRE(rate["value"].get<double>() == 0.5);
      saw_self_rate = true;
    }
  }
  REQUIRE(saw_self_rate);
}

TEST_CASE("parallel jobs do not change output bytes") {
  temp_dir dir;
  write_synthetic(dir.path, 60, 6, 29);
  cli::run_config cfg;
  cfg.model_path = (dir.path / "model.json").string();
  cfg.data_path = (dir.path / "data.csv").string();
  cfg.methods = {"bin-cf-shap", "norm-cf-freq"};
  cfg.k = 6;
  cfg.max_sparse = true;

  cfg.jobs = 1;
  cfg.out_dir = (dir.path / "seq").string();
  REQUIRE(cli::cmd_explain(cfg) == cli::kExitOk);
  cfg.jobs = 4;
  cfg.out_dir = (dir.path / "par").string();
  REQUIRE(cli::cmd_explain(cfg) == cli::kExitOk);

  auto m1 = read_json(dir.path / "seq/manifest.json");
  auto m2 = read_json(dir.path / "par/manifest.json");
  REQUIRE(m1["outputs"] == m2["outputs"]);
}

TEST_CASE("binary exit codes") {
  temp_dir dir;
  auto cfg = toy_config(dir, "out");
  const std::string cli = CFATTR_CLI_PATH;
  const std::string quiet = " > /dev/null 2>&1";

  SECTION("success") {
    const std::string cmd = cli + " explain --data " + cfg.data_path + " --model " +
                            cfg.model_path + " --out " + cfg.out_dir + quiet;
    REQUIRE(WEXITSTATUS(std::system(cmd.c_str())) == 0);
  }
  SECTION("missing model file exits 2 and names the path") {
    const std::string missing = (dir.path / "nope.json").string();
    const std::string cmd = cli + " explain --data " + cfg.data_path + " --model " + missing +
                            " --out " + cfg.out_dir + " 2> " + (dir.path / "err.txt").string();
    REQUIRE(WEXITSTATUS(std::system(cmd.c_str())) == 2);
    REQUIRE(read_file((dir.path / "err.txt").string()).find("nope.json") != std::string::npos);
  }
  SECTION("verify reports pass") {
    const std::string cmd =
        cli + " verify --suite oracles --trials 10 --seed 0" + quiet;
    REQUIRE(WEXITSTATUS(std::system(cmd.c_str())) == 0);
  }
  SECTION("bad csv cell exits 2") {
    write_file(dir.path / "bad.csv", "f0,f1,f2,f3,f4,f5\n1,abc,1,1,1,1\n");
    const std::string cmd = cli + " explain --data " + (dir.path / "bad.csv").string() +
                            " --model " + cfg.model_path + " --out " + cfg.out_dir + quiet;
    REQUIRE(WEXITSTATUS(std::system(cmd.c_str())) == 2);
  }
}

TEST_CASE("verification suites notice a corrupted implementation") {
  // Mutation check: replace the count normalization of norm-cf-freq with an
  // L2 norm and confirm the theorem checker flags the difference.
  auto rng = make_rng(991);
  bool caught = false;
  for (int attempt = 0; attempt < 200 && !caught; ++attempt) {
    const int nf = uniform_int(rng, 3, 6);
    auto m = random_tree_ensemble(nf, 3, 3, rng, 0.0);
    auto data = random_dataset(nf, 80, rng);
    auto qm = fit_quantile_map(data);
    instance x = data.rows[0];
    try {
      auto knn = knn_counterfactuals(m, data, qm, x, 4);
      auto sparse = max_sparse_set(m, knn.set, quantile_shift_cost(qm));
      auto bin = bin_cf_shap(m, x, sparse);
      // Corrupted variant: indicator / sqrt(c) instead of indicator / c.
      attribution_vector corrupted(nf, 0.0);
      for (const auto& item : sparse.items) {
        const double c = item.changed.cardinality();
        for (int i : item.changed.members()) corrupted[i] += 1.0 / std::sqrt(c);
      }
      for (auto& v : corrupted) v /= static_cast<double>(sparse.size());
      bool multi_feature = false;
      for (const auto& item : sparse.items)
        if (item.changed.cardinality() >= 2) multi_feature = true;
      if (!multi_feature) continue;
      double diff = 0.0;
      for (int i = 0; i < nf; ++i) diff = std::max(diff, std::abs(bin.values[i] - corrupted[i]));
      if (diff > 1e-9) caught = true;  // the 4.2 check would report this trial
    } catch (const domain_error&) {
      continue;
    }
  }
  REQUIRE(caught);
}

TEST_CASE("explanation json round trip") {
  explanation e;
  e.method = "bin-cf-shap";
  e.query_index = 7;
  e.values = {0.5, 0.25, 0.25};
  e.background_size = 3;
  e.meta["seed"] = "42";
  auto j = explanation_to_json(e);
  auto back = explanation_from_json(j);
  REQUIRE(back.method == e.method);
  REQUIRE(back.query_index == 7);
  REQUIRE(back.values == e.values);
  REQUIRE(back.background_size == 3);
  REQUIRE(back.meta.at("seed") == "42");
}

TEST_CASE("dividend table exposes a coalition map") {
  game g{2, [](std::uint32_t mask) { return mask == 3 ? 1.0 : 0.0; }};
  auto table = harsanyi_dividends(g);
  REQUIRE(table.complete());
  auto map = table.as_map();
  REQUIRE(map.size() == 3);
  REQUIRE(map.at(coalition::of({0, 1}, 2)) == 1.0);
  REQUIRE(map.at(coalition::of({0}, 2)) == 0.0);
}

TEST_CASE("verify command output format") {
  std::ostringstream os;
  int rc = cli::cmd_verify({"oracles", "sparsity-hierarchy"}, 5, 0, os);
  REQUIRE(rc == cli::kExitOk);
  const std::string text = os.str();
  REQUIRE(text.find("PASS oracles") != std::string::npos);
  REQUIRE(text.find("PASS sparsity-hierarchy") != std::string::npos);
}
