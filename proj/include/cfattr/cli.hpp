#pragma once

#include <algorithm>
#include <atomic>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "cfattr/attribution.hpp"
#include "cfattr/metrics.hpp"
#include "cfattr/serialize.hpp"
#include "cfattr/sparsity.hpp"
#include "cfattr/verify.hpp"
#include "cfattr/version.hpp"

namespace cfattr::cli {

// Exit codes: 0 success, 1 verification failure, 2 input error.
inline constexpr int kExitOk = 0;
inline constexpr int kExitVerifyFailed = 1;
inline constexpr int kExitInputError = 2;

struct run_config {
  std::string data_path;
  std::string model_path;
  std::string out_dir = "out";
  std::vector<std::string> methods{"shap", "cf-shap", "bin-cf-shap", "cf-freq", "norm-cf-freq"};
  std::size_t k = 100;                  // K-NN neighborhood
  std::vector<int> topk{1, 3, 5, 10};   // depth grid for the agreement/quality metrics
  bool max_sparse = false;
  std::string query_fn = "F";           // f | F
  std::string concept_tag = "shapley";  // for the generic method
  std::string cost = "quantile";        // quantile | uniform
  std::string action = "random";        // random | proportional
  std::uint64_t seed = 0;
  int jobs = 1;
};

inline nlohmann::json config_echo(const run_config& cfg) {
  nlohmann::json j;
  j["data"] = cfg.data_path;
  j["model"] = cfg.model_path;
  j["out"] = cfg.out_dir;
  j["methods"] = cfg.methods;
  j["k"] = cfg.k;
  j["topk"] = cfg.topk;
  j["max_sparse"] = cfg.max_sparse;
  j["query_fn"] = cfg.query_fn;
  j["concept"] = cfg.concept_tag;
  j["cost"] = cfg.cost;
  j["action"] = cfg.action;
  j["seed"] = cfg.seed;
  j["jobs"] = cfg.jobs;
  return j;
}

namespace detail {

inline solution_concept parse_concept(const std::string& s) {
  if (s == "shapley") return solution_concept::shapley;
  if (s == "banzhaf") return solution_concept::banzhaf;
  if (s == "deegan-packel") return solution_concept::deegan_packel;
  if (s == "holler-packel") return solution_concept::holler_packel;
  throw contract_error("unknown solution concept '" + s + "'");
}

inline recourse_action parse_action(const std::string& s) {
  if (s == "random") return recourse_action::random;
  if (s == "proportional") return recourse_action::proportional;
  throw contract_error("unknown action '" + s + "'");
}

inline std::string zero_pad(std::size_t value, int width = 5) {
  std::string s = std::to_string(value);
  while (static_cast<int>(s.size()) < width) s.insert(s.begin(), '0');
  return s;
}

inline std::string path_safe(const std::string& tag) {
  std::string out;
  for (char c : tag)
    if (c == '(')
      out += '-';
    else if (c != ')')
      out += c;
  return out;
}

// Ordered by instance index regardless of thread scheduling; the first
// worker exception is rethrown after the pool drains.
template <typename Fn>
void parallel_for(std::size_t n, int jobs, Fn&& fn) {
  if (jobs <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  const int threads = std::min<int>(jobs, static_cast<int>(n));
  pool.reserve(threads);
  for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

// Writes one output file and tracks its digest for the manifest.
struct output_tracker {
  std::filesystem::path root;
  std::map<std::string, std::string> digests;

  void write(const std::string& relpath, const std::string& bytes) {
    const auto full = root / relpath;
    std::filesystem::create_directories(full.parent_path());
    std::ofstream out(full, std::ios::binary);
    if (!out) throw parse_error("cannot write output file: " + full.string());
    out << bytes;
    digests[relpath] = digest_hex(bytes);
  }

  void write_manifest(const run_config& cfg, nlohmann::json extra = {}) {
    nlohmann::json j;
    j["version"] = kVersion;
    j["config"] = config_echo(cfg);
    j["outputs"] = digests;
    if (!extra.is_null()) j["run"] = extra;
    const auto full = root / "manifest.json";
    std::filesystem::create_directories(root);
    std::ofstream out(full, std::ios::binary);
    out << j.dump(2) << "\n";
  }
};

struct loaded_inputs {
  model mdl;
  dataset data;
  quantile_map qm;
};

inline loaded_inputs load_inputs(const run_config& cfg) {
  loaded_inputs in{load_model_file(cfg.model_path), load_csv_file(cfg.data_path), {}};
  in.data.validate();
  if (in.data.features() != in.mdl.features())
    throw contract_error("dataset has " + std::to_string(in.data.features()) +
                         " features but the model expects " +
                         std::to_string(in.mdl.features()));
  in.qm = fit_quantile_map(in.data);
  return in;
}

inline cost_fn make_cost(const run_config& cfg, const quantile_map& qm) {
  if (cfg.cost == "uniform") return uniform_cost();
  if (cfg.cost == "quantile") return quantile_shift_cost(qm);
  throw contract_error("unknown cost '" + cfg.cost + "'");
}

// Seeded background sample for the plain-SHAP method (capped so exact
// enumeration stays desk-scale); indices ascending for determinism.
inline dataset shap_background(const dataset& data, std::uint64_t seed,
                               std::size_t cap = 128) {
  if (data.size() <= cap) return data;
  auto rng = make_rng(seed, 0x5a3b17ULL);
  std::vector<std::size_t> idx(data.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t i = 0; i < cap; ++i) {
    const std::size_t j = i + rng() % (idx.size() - i);
    std::swap(idx[i], idx[j]);
  }
  idx.resize(cap);
  std::sort(idx.begin(), idx.end());
  dataset out;
  out.feature_names = data.feature_names;
  for (auto i : idx) out.rows.push_back(data.rows[i]);
  return out;
}

struct method_request {
  std::string tag;        // name used in files and reports
  std::string base;       // shap | cf-shap | bin-cf-shap | cf-freq | norm-cf-freq | generic
  bool on_sparse = false;
};

// "generic" expands to its concept-qualified name; other tags pass through.
inline method_request make_request(const std::string& tag, const run_config& cfg,
                                   bool on_sparse) {
  method_request req{tag, tag, on_sparse};
  if (tag.rfind("generic", 0) == 0) {
    req.base = "generic";
    req.tag = "generic(" + cfg.concept_tag + ")";
  }
  if (on_sparse) req.tag += "@ms";
  return req;
}

inline explanation compute_method(const method_request& req, const run_config& cfg,
                                  const loaded_inputs& in, const dataset& shap_bg,
                                  const instance& x, const counterfactual_set& raw,
                                  const std::optional<counterfactual_set>& sparse) {
  const counterfactual_set& cfs = req.on_sparse && sparse ? *sparse : raw;
  explanation e;
  if (req.base == "shap") {
    e = shap(in.mdl, x, shap_bg);
  } else if (req.base == "cf-shap") {
    e = cf_shap(in.mdl, x, cfs);
  } else if (req.base == "bin-cf-shap") {
    e = bin_cf_shap(in.mdl, x, cfs);
  } else if (req.base == "cf-freq") {
    e = cf_freq(x, cfs);
  } else if (req.base == "norm-cf-freq") {
    e = norm_cf_freq(x, cfs);
  } else if (req.base == "generic") {
    e = game_attribution(in.mdl, x, cfs, parse_concept(cfg.concept_tag),
                         cfg.query_fn == "f" ? query_function::output
                                             : query_function::decision);
  } else {
    throw contract_error("unknown method '" + req.base + "'");
  }
  e.method = req.tag;
  e.meta["k"] = std::to_string(cfg.k);
  e.meta["seed"] = std::to_string(cfg.seed);
  e.meta["max_sparse"] = req.on_sparse ? "on" : "off";
  return e;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// explain: one explanation file per instance per method
// ---------------------------------------------------------------------------

inline int cmd_explain(const run_config& cfg) {
  auto in = detail::load_inputs(cfg);
  auto bg = detail::shap_background(in.data, cfg.seed);
  auto cost = detail::make_cost(cfg, in.qm);

  std::vector<detail::method_request> requests;
  for (const auto& tag : cfg.methods) {
    // With --max-sparse the explain command computes each method on the
    // induced sets (plain SHAP keeps its dataset background either way), but
    // the file tag stays the method name.
    auto req = detail::make_request(tag, cfg, false);
    req.on_sparse = cfg.max_sparse && tag != "shap";
    requests.push_back(req);
  }

  const std::size_t n = in.data.size();
  struct row_output {
    bool skipped = false;
    std::vector<std::pair<std::string, std::string>> files;  // relpath, bytes
  };
  std::vector<row_output> rows(n);

  detail::parallel_for(n, cfg.jobs, [&](std::size_t i) {
    const instance& x = in.data.rows[i];
    knn_result knn{counterfactual_set{}, false};
    try {
      knn = knn_counterfactuals(in.mdl, in.data, in.qm, x, cfg.k);
    } catch (const domain_error&) {
      rows[i].skipped = true;
      return;
    }
    std::optional<counterfactual_set> sparse;
    if (cfg.max_sparse) sparse = max_sparse_set(in.mdl, knn.set, cost);
    for (const auto& req : requests) {
      explanation e = detail::compute_method(req, cfg, in, bg, x, knn.set, sparse);
      e.query_index = static_cast<int>(i);
      if (knn.truncated) e.meta["truncated"] = "true";
      const std::string rel = "explanations/" + detail::path_safe(req.tag) + "/instance_" +
                              detail::zero_pad(i) + ".json";
      rows[i].files.emplace_back(rel, explanation_to_json(e).dump(2) + "\n");
    }
  });

  detail::output_tracker out{cfg.out_dir, {}};
  nlohmann::json skipped = nlohmann::json::array();
  for (std::size_t i = 0; i < n; ++i) {
    if (rows[i].skipped) {
      std::cerr << "warning: instance " << i << " has no opposite-prediction row, skipped\n";
      skipped.push_back(i);
      continue;
    }
    for (const auto& [rel, bytes] : rows[i].files) out.write(rel, bytes);
  }
  out.write_manifest(cfg, nlohmann::json{{"command", "explain"}, {"skipped", skipped}});
  return kExitOk;
}

// ---------------------------------------------------------------------------
// gen-cf: per-instance K-NN counterfactual sets
// ---------------------------------------------------------------------------

inline int cmd_gen_cf(const run_config& cfg) {
  auto in = detail::load_inputs(cfg);
  const std::size_t n = in.data.size();
  std::vector<std::string> bytes(n);
  std::vector<char> skipped_flags(n, 0);

  detail::parallel_for(n, cfg.jobs, [&](std::size_t i) {
    try {
      auto knn = knn_counterfactuals(in.mdl, in.data, in.qm, in.data.rows[i], cfg.k);
      auto doc = counterfactual_set_to_json(knn.set, in.mdl);
      doc["truncated"] = knn.truncated;
      bytes[i] = doc.dump(2) + "\n";
    } catch (const domain_error&) {
      skipped_flags[i] = 1;
    }
  });

  detail::output_tracker out{cfg.out_dir, {}};
  nlohmann::json skipped = nlohmann::json::array();
  for (std::size_t i = 0; i < n; ++i) {
    if (skipped_flags[i]) {
      std::cerr << "warning: instance " << i << " has no opposite-prediction row, skipped\n";
      skipped.push_back(i);
      continue;
    }
    out.write("counterfactuals/instance_" + detail::zero_pad(i) + ".json", bytes[i]);
  }
  out.write_manifest(cfg, nlohmann::json{{"command", "gen-cf"}, {"skipped", skipped}});
  return kExitOk;
}

// ---------------------------------------------------------------------------
// max-sparse: before/after counterfactual sets with cost deltas
// ---------------------------------------------------------------------------

inline int cmd_max_sparse(const run_config& cfg) {
  auto in = detail::load_inputs(cfg);
  auto cost = detail::make_cost(cfg, in.qm);
  const std::size_t n = in.data.size();
  std::vector<std::string> bytes(n);
  std::vector<char> skipped_flags(n, 0);

  detail::parallel_for(n, cfg.jobs, [&](std::size_t i) {
    try {
      auto knn = knn_counterfactuals(in.mdl, in.data, in.qm, in.data.rows[i], cfg.k);
      auto sparse = max_sparse_set(in.mdl, knn.set, cost);
      nlohmann::json doc;
      doc["query"] = knn.set.query;
      doc["before"] = counterfactual_set_to_json(knn.set, in.mdl);
      doc["after"] = counterfactual_set_to_json(sparse, in.mdl);
      nlohmann::json deltas = nlohmann::json::array();
      for (std::size_t j = 0; j < knn.set.items.size(); ++j) {
        const double before = cost(knn.set.query, knn.set.items[j].point);
        const double after = cost(knn.set.query, sparse.items[j].point);
        deltas.push_back({{"cost_before", before}, {"cost_after", after}});
      }
      doc["cost_deltas"] = deltas;
      bytes[i] = doc.dump(2) + "\n";
    } catch (const domain_error&) {
      skipped_flags[i] = 1;
    }
  });

  detail::output_tracker out{cfg.out_dir, {}};
  nlohmann::json skipped = nlohmann::json::array();
  for (std::size_t i = 0; i < n; ++i) {
    if (skipped_flags[i]) {
      std::cerr << "warning: instance " << i << " has no opposite-prediction row, skipped\n";
      skipped.push_back(i);
      continue;
    }
    out.write("maxsparse/instance_" + detail::zero_pad(i) + ".json", bytes[i]);
  }
  out.write_manifest(cfg, nlohmann::json{{"command", "max-sparse"}, {"skipped", skipped}});
  return kExitOk;
}

// ---------------------------------------------------------------------------
// metrics: pairwise matrices plus quality rates, CSV and JSON
// ---------------------------------------------------------------------------

inline int cmd_metrics(const run_config& cfg) {
  auto in = detail::load_inputs(cfg);
  auto bg = detail::shap_background(in.data, cfg.seed);
  auto cost = detail::make_cost(cfg, in.qm);

  // Method set: the requested tags, plus a "@ms" variant of every
  // counterfactual-based method when --max-sparse is on.
  std::vector<detail::method_request> requests;
  for (const auto& tag : cfg.methods) requests.push_back(detail::make_request(tag, cfg, false));
  if (cfg.max_sparse)
    for (const auto& tag : cfg.methods)
      if (tag != "shap") requests.push_back(detail::make_request(tag, cfg, true));

  const std::size_t n = in.data.size();
  struct per_instance {
    bool ok = false;
    counterfactual_set cfs;
    std::vector<explanation> expls;
  };
  std::vector<per_instance> results(n);

  detail::parallel_for(n, cfg.jobs, [&](std::size_t i) {
    const instance& x = in.data.rows[i];
    knn_result knn{counterfactual_set{}, false};
    try {
      knn = knn_counterfactuals(in.mdl, in.data, in.qm, x, cfg.k);
    } catch (const domain_error&) {
      return;
    }
    std::optional<counterfactual_set> sparse;
    if (cfg.max_sparse) sparse = max_sparse_set(in.mdl, knn.set, cost);
    per_instance& out = results[i];
    out.cfs = knn.set;
    for (const auto& req : requests) {
      explanation e = detail::compute_method(req, cfg, in, bg, x, knn.set, sparse);
      e.query_index = static_cast<int>(i);
      out.expls.push_back(std::move(e));
    }
    out.ok = true;
  });

  // Assemble aligned batches over the eligible instances.
  std::vector<std::string> method_names;
  for (const auto& req : requests) method_names.push_back(req.tag);
  std::vector<instance> queries;
  std::vector<counterfactual_set> sets;
  std::vector<std::vector<explanation>> batches(requests.size());
  for (std::size_t i = 0; i < n; ++i) {
    if (!results[i].ok) continue;
    queries.push_back(in.data.rows[i]);
    sets.push_back(results[i].cfs);
    for (std::size_t mth = 0; mth < requests.size(); ++mth)
      batches[mth].push_back(results[i].expls[mth]);
  }
  if (queries.empty()) throw domain_error("metrics: no instance has an opposite-prediction row");

  const int nf = in.data.features();
  std::vector<int> depths;
  for (int k : cfg.topk)
    if (k >= 1 && k <= nf) depths.push_back(k);

  std::vector<metric_report> reports;
  reports.push_back(pairwise_matrix(method_names, batches, "kendall-tau"));
  reports.push_back(pairwise_matrix(method_names, batches, "spearman"));
  reports.push_back(pairwise_matrix(method_names, batches, "rbo"));
  for (int k : depths) {
    reports.push_back(pairwise_matrix(method_names, batches, "feature-agreement", k));
    reports.push_back(pairwise_matrix(method_names, batches, "rank-agreement", k));
  }

  // Quality rates. All methods are evaluated against the raw K-NN sets; the
  // explanation under test only contributes its ranking.
  const std::string baseline =
      std::find(method_names.begin(), method_names.end(), "shap") != method_names.end()
          ? "shap"
          : method_names.front();
  const std::size_t baseline_idx = static_cast<std::size_t>(
      std::find(method_names.begin(), method_names.end(), baseline) - method_names.begin());
  const auto action = detail::parse_action(cfg.action);

  struct rate_row {
    std::string method_a;
    std::string method_b;
    std::string metric;
    int k;
    double value;
  };
  std::vector<rate_row> rates;
  for (std::size_t mth = 0; mth < requests.size(); ++mth) {
    for (int k : depths) {
      double nec = 0.0, suf = 0.0;
      for (std::size_t q = 0; q < queries.size(); ++q) {
        nec += necessity(in.mdl, queries[q], batches[mth][q], sets[q], k) ? 1.0 : 0.0;
        suf += sufficiency(in.mdl, queries[q], batches[mth][q], sets[q], k) ? 1.0 : 0.0;
      }
      rates.push_back({method_names[mth], "", "necessity", k, nec / queries.size()});
      rates.push_back({method_names[mth], "", "sufficiency", k, suf / queries.size()});
      rates.push_back({method_names[mth], baseline, "counterfactual-ability", k,
                       counterfactual_ability_improvement(in.mdl, in.data, in.qm, queries, sets,
                                                          batches[mth], batches[baseline_idx], k,
                                                          action, cfg.seed)});
      rates.push_back({method_names[mth], baseline, "plausibility", k,
                       plausibility_improvement(in.mdl, in.data, in.qm, queries, sets,
                                                batches[mth], batches[baseline_idx], k, action,
                                                cfg.seed)});
    }
  }

  // CSV, long format: method_a, method_b, metric, k, value.
  std::ostringstream csv;
  csv << "method_a,method_b,metric,k,value\n";
  char buf[64];
  auto put = [&](const std::string& a, const std::string& b, const std::string& metric, int k,
                 double v) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    csv << a << "," << b << "," << metric << "," << (k > 0 ? std::to_string(k) : "") << ","
        << buf << "\n";
  };
  for (const auto& rep : reports)
    for (std::size_t a = 0; a < rep.methods.size(); ++a)
      for (std::size_t b = a; b < rep.methods.size(); ++b)
        put(rep.methods[a], rep.methods[b], rep.metric, rep.k, rep.matrix[a][b]);
  for (const auto& r : rates) put(r.method_a, r.method_b, r.metric, r.k, r.value);

  nlohmann::json jm;
  jm["instances"] = queries.size();
  jm["methods"] = method_names;
  jm["matrices"] = nlohmann::json::array();
  for (const auto& rep : reports) {
    nlohmann::json rj;
    rj["metric"] = rep.metric;
    rj["k"] = rep.k;
    rj["methods"] = rep.methods;
    rj["mean"] = rep.matrix;
    rj["stddev"] = rep.stddev;
    jm["matrices"].push_back(std::move(rj));
  }
  jm["rates"] = nlohmann::json::array();
  for (const auto& r : rates)
    jm["rates"].push_back({{"method", r.method_a},
                           {"baseline", r.method_b},
                           {"metric", r.metric},
                           {"k", r.k},
                           {"value", r.value}});

  detail::output_tracker out{cfg.out_dir, {}};
  out.write("metrics.csv", csv.str());
  out.write("metrics.json", jm.dump(2) + "\n");
  out.write_manifest(cfg, nlohmann::json{{"command", "metrics"}});
  return kExitOk;
}

// ---------------------------------------------------------------------------
// verify: randomized-property suites with counterexample dumps
// ---------------------------------------------------------------------------

inline int cmd_verify(const std::vector<std::string>& suites, int trials, std::uint64_t seed,
                      std::ostream& os = std::cout) {
  const auto& names = suites.empty() ? all_verify_suites() : suites;
  bool all_passed = true;
  for (const auto& name : names) {
    int n = trials;
    if (n <= 0) {
      if (name == "theorem-4.2") n = 500;
      else if (name == "theorem-4.3") n = 50;
      else if (name == "corollary-5.2") n = 200;
      else if (name == "sparsity-hierarchy") n = 60;
      else if (name == "efficiency") n = 200;
      else n = 100;
    }
    auto report = run_verify_suite(name, n, seed);
    os << (report.passed() ? "PASS" : "FAIL") << " " << report.suite
       << " (trials=" << report.trials << " failures=" << report.failures << ")\n";
    if (!report.passed()) {
      all_passed = false;
      for (const auto& ce : report.counterexamples)
        os << "counterexample: " << ce.dump() << "\n";
    }
  }
  return all_passed ? kExitOk : kExitVerifyFailed;
}

}  // namespace cfattr::cli
