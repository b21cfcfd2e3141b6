#pragma once

#include <cmath>
#include <string>
#include <vector>

#include <json.hpp>

#include "cfattr/attribution.hpp"
#include "cfattr/metrics.hpp"
#include "cfattr/random.hpp"
#include "cfattr/serialize.hpp"
#include "cfattr/sparsity.hpp"

namespace cfattr {

// Randomized-property suites for the equivalence results. Each suite runs a
// number of trials and reports failures with a reproducible counterexample
// dump (model document, query, counterfactual, both vectors).

struct verify_report {
  std::string suite;
  int trials = 0;
  int failures = 0;
  std::vector<nlohmann::json> counterexamples;  // capped at a handful

  bool passed() const { return failures == 0 && trials > 0; }

  void record_failure(nlohmann::json dump) {
    ++failures;
    if (counterexamples.size() < 3) counterexamples.push_back(std::move(dump));
  }
};

namespace detail {

struct trial_fixture {
  model mdl;
  dataset data;
  quantile_map qm;
  instance query;
  counterfactual_set cfs;
};

// Random tree-ensemble fixture with a K-NN counterfactual set. Streams are
// derived from (seed, attempt) so fixtures are reproducible; attempts whose
// dataset has a single predicted class are skipped by the caller.
inline bool make_tree_fixture(std::uint64_t seed, std::uint64_t attempt, int max_features,
                              std::size_t knn_k, trial_fixture& out) {
  auto rng = make_rng(seed, attempt);
  const int nf = uniform_int(rng, 2, max_features);
  out.mdl = random_tree_ensemble(nf, 3, 3, rng, 0.0);
  out.data = random_dataset(nf, 150, rng);
  out.qm = fit_quantile_map(out.data);
  out.query = out.data.rows[static_cast<std::size_t>(uniform_int(rng, 0, 149))];
  try {
    out.cfs = knn_counterfactuals(out.mdl, out.data, out.qm, out.query, knn_k).set;
  } catch (const domain_error&) {
    return false;
  }
  return true;
}

inline nlohmann::json dump_pair(const model& m, const instance& x, const instance& xp,
                                const attribution_vector& a, const std::string& a_name,
                                const attribution_vector& b, const std::string& b_name) {
  nlohmann::json j;
  j["model"] = save_model(m);
  j["query"] = x;
  j["counterfactual"] = xp;
  j[a_name] = a;
  j[b_name] = b;
  return j;
}

inline double max_abs_diff(const attribution_vector& a, const attribution_vector& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

}  // namespace detail

// Maximally sparse counterfactual sets make Bin-CF-SHAP and Norm-CF-Freq the
// same explanation (within 1e-9 on the double view; the underlying values are
// exact fractions).
inline verify_report verify_theorem_4_2(int trials, std::uint64_t seed) {
  verify_report report;
  report.suite = "theorem-4.2";
  std::uint64_t attempt = 0;
  while (report.trials < trials && attempt < static_cast<std::uint64_t>(trials) * 20) {
    detail::trial_fixture fx;
    if (!detail::make_tree_fixture(seed, attempt++, 10, 5, fx)) continue;
    ++report.trials;
    auto sparse = max_sparse_set(fx.mdl, fx.cfs, quantile_shift_cost(fx.qm));
    auto bin = bin_cf_shap(fx.mdl, fx.query, sparse);
    auto freq = norm_cf_freq(fx.query, sparse);
    if (detail::max_abs_diff(bin.values, freq.values) > 1e-9)
      report.record_failure(detail::dump_pair(fx.mdl, fx.query, sparse.items[0].point, bin.values,
                                              "bin_cf_shap", freq.values, "norm_cf_freq"));
    rational sum(0);
    for (const auto& r : bin.exact) sum += r;
    if (sum != rational(1))
      report.record_failure(detail::dump_pair(fx.mdl, fx.query, sparse.items[0].point, bin.values,
                                              "bin_cf_shap_not_efficient", freq.values,
                                              "norm_cf_freq"));
  }
  return report;
}

// Equal maximal sparsity holds exactly when the single-counterfactual
// Bin-CF-SHAP values are uniform on the changed set and zero elsewhere
// (exhaustive over the binary cube of each random boolean model). Sets of
// equally maximally sparse counterfactuals then reproduce Norm-CF-Freq.
inline verify_report verify_theorem_4_3(int num_models, std::uint64_t seed) {
  verify_report report;
  report.suite = "theorem-4.3";
  for (int t = 0; t < num_models; ++t) {
    auto rng = make_rng(seed, static_cast<std::uint64_t>(t));
    const int nf = uniform_int(rng, 2, 5);
    auto m = random_boolean_model(nf, rng);
    ++report.trials;
    bool model_ok = true;
    std::vector<instance> ems_points;
    instance ems_query;
    for (std::uint32_t qa = 0; qa < (1u << nf) && model_ok; ++qa) {
      instance x(nf);
      for (int i = 0; i < nf; ++i) x[i] = double((qa >> i) & 1u);
      std::vector<instance> ems_here;
      for (std::uint32_t cb = 0; cb < (1u << nf); ++cb) {
        if (cb == qa) continue;
        instance xp(nf);
        for (int i = 0; i < nf; ++i) xp[i] = double((cb >> i) & 1u);
        if (!is_valid(m, x, xp)) continue;
        auto set = counterfactual_set::build(m, x, {xp});
        auto phi = bin_cf_shap(m, x, set);
        const coalition c = changed_set(x, xp);
        const rational uniform(1, c.cardinality());
        bool is_uniform = true;
        for (int i = 0; i < nf; ++i)
          if (phi.exact[i] != (c.contains(i) ? uniform : rational(0))) is_uniform = false;
        const bool ems = is_equally_maximally_sparse(m, x, xp);
        rational sum(0);
        for (const auto& r : phi.exact) sum += r;
        if (ems != is_uniform || sum != rational(1)) {
          report.record_failure(detail::dump_pair(m, x, xp, phi.values, "bin_cf_shap",
                                                  norm_cf_freq(x, set).values, "norm_cf_freq"));
          model_ok = false;
          break;
        }
        if (ems) ems_here.push_back(xp);
      }
      if (ems_here.size() >= 2 && ems_points.empty()) {
        ems_points = ems_here;
        ems_query = x;
      }
    }
    // Corollary: a set of equally maximally sparse counterfactuals keeps the
    // two explanations identical.
    if (model_ok && !ems_points.empty()) {
      auto set = counterfactual_set::build(m, ems_query, ems_points);
      auto bin = bin_cf_shap(m, ems_query, set);
      auto freq = norm_cf_freq(ems_query, set);
      if (bin.exact != freq.exact)
        report.record_failure(detail::dump_pair(m, ems_query, ems_points[0], bin.values,
                                                "bin_cf_shap", freq.values, "norm_cf_freq"));
    }
  }
  return report;
}

// Every dictators-symmetric concept collapses onto Norm-CF-Freq once the
// counterfactuals are maximally sparse.
inline verify_report verify_corollary_5_2(int trials, std::uint64_t seed) {
  verify_report report;
  report.suite = "corollary-5.2";
  std::uint64_t attempt = 0;
  while (report.trials < trials && attempt < static_cast<std::uint64_t>(trials) * 20) {
    detail::trial_fixture fx;
    if (!detail::make_tree_fixture(seed, attempt++, 8, 4, fx)) continue;
    ++report.trials;
    auto sparse = max_sparse_set(fx.mdl, fx.cfs, quantile_shift_cost(fx.qm));
    auto freq = norm_cf_freq(fx.query, sparse);
    for (auto sc : {solution_concept::shapley, solution_concept::banzhaf,
                    solution_concept::deegan_packel, solution_concept::holler_packel}) {
      auto got = game_attribution(fx.mdl, fx.query, sparse, sc);
      rational sum(0);
      for (const auto& r : got.exact) sum += r;
      if (detail::max_abs_diff(got.values, freq.values) > 1e-9 || sum != rational(1)) {
        auto dump = detail::dump_pair(fx.mdl, fx.query, sparse.items[0].point, got.values,
                                      "game_attribution", freq.values, "norm_cf_freq");
        dump["concept"] = concept_name(sc);
        report.record_failure(std::move(dump));
      }
    }
  }
  return report;
}

// Maximal sparsity implies equal maximal sparsity implies weak maximal
// sparsity, exhaustively over the binary cube of random boolean models.
inline verify_report verify_sparsity_hierarchy(int num_models, std::uint64_t seed) {
  verify_report report;
  report.suite = "sparsity-hierarchy";
  for (int t = 0; t < num_models; ++t) {
    auto rng = make_rng(seed, static_cast<std::uint64_t>(t));
    const int nf = uniform_int(rng, 2, 6);
    auto m = random_boolean_model(nf, rng);
    ++report.trials;
    for (std::uint32_t qa = 0; qa < (1u << nf); ++qa) {
      instance x(nf);
      for (int i = 0; i < nf; ++i) x[i] = double((qa >> i) & 1u);
      for (std::uint32_t cb = 0; cb < (1u << nf); ++cb) {
        if (cb == qa) continue;
        instance xp(nf);
        for (int i = 0; i < nf; ++i) xp[i] = double((cb >> i) & 1u);
        if (!is_valid(m, x, xp)) continue;
        const bool ms = is_maximally_sparse(m, x, xp);
        const bool ems = is_equally_maximally_sparse(m, x, xp);
        const bool wms = is_weakly_maximally_sparse(m, x, xp);
        if ((ms && !ems) || (ems && !wms)) {
          nlohmann::json dump;
          dump["model"] = save_model(m);
          dump["query"] = x;
          dump["counterfactual"] = xp;
          dump["ms"] = ms;
          dump["ems"] = ems;
          dump["wms"] = wms;
          report.record_failure(std::move(dump));
        }
      }
    }
  }
  return report;
}

// Efficiency: Bin-CF-SHAP sums to exactly 1 (exact fractions) and SHAP sums
// to f(x) minus the mean background output within 1e-9.
inline verify_report verify_efficiency(int trials, std::uint64_t seed) {
  verify_report report;
  report.suite = "efficiency";
  std::uint64_t attempt = 0;
  while (report.trials < trials && attempt < static_cast<std::uint64_t>(trials) * 20) {
    detail::trial_fixture fx;
    if (!detail::make_tree_fixture(seed, attempt++, 8, 4, fx)) continue;
    ++report.trials;

    auto bin = bin_cf_shap(fx.mdl, fx.query, fx.cfs);
    rational bin_sum(0);
    for (const auto& r : bin.exact) bin_sum += r;
    bool ok = bin_sum == rational(1);

    dataset background;
    background.feature_names = fx.data.feature_names;
    for (std::size_t r = 0; r < 20 && r < fx.data.size(); ++r)
      background.rows.push_back(fx.data.rows[r]);
    auto sh = shap(fx.mdl, fx.query, background);
    double sum = 0.0;
    for (double v : sh.values) sum += v;
    double mean_bg = 0.0;
    for (const auto& row : background.rows) mean_bg += fx.mdl.output(row);
    mean_bg /= static_cast<double>(background.size());
    ok = ok && std::abs(sum - (fx.mdl.output(fx.query) - mean_bg)) <= 1e-9;

    if (!ok)
      report.record_failure(detail::dump_pair(fx.mdl, fx.query, fx.cfs.items[0].point, bin.values,
                                              "bin_cf_shap", sh.values, "shap"));
  }
  return report;
}

// The three Shapley routes (subset sum, permutation average, dividend shares)
// agree to 1e-12 on random games.
inline verify_report verify_oracles(int trials, std::uint64_t seed) {
  verify_report report;
  report.suite = "oracles";
  for (int t = 0; t < trials; ++t) {
    auto rng = make_rng(seed, static_cast<std::uint64_t>(t));
    const int m = uniform_int(rng, 1, 8);
    game g = (t % 2 == 0) ? random_binary_game(m, rng) : random_real_game(m, rng);
    ++report.trials;
    auto direct = shapley(g);
    auto perm = shapley_permutation_oracle(g);
    auto divid = shapley_from_dividends(harsanyi_dividends(g));
    if (detail::max_abs_diff(direct, perm) > 1e-12 ||
        detail::max_abs_diff(direct, divid) > 1e-12) {
      nlohmann::json dump;
      dump["players"] = m;
      dump["subset_sum"] = direct;
      dump["permutation_oracle"] = perm;
      dump["dividend_shares"] = divid;
      report.record_failure(std::move(dump));
    }
  }
  return report;
}

inline verify_report run_verify_suite(const std::string& suite, int trials, std::uint64_t seed) {
  if (suite == "theorem-4.2") return verify_theorem_4_2(trials, seed);
  if (suite == "theorem-4.3") return verify_theorem_4_3(trials, seed);
  if (suite == "corollary-5.2") return verify_corollary_5_2(trials, seed);
  if (suite == "sparsity-hierarchy") return verify_sparsity_hierarchy(trials, seed);
  if (suite == "efficiency") return verify_efficiency(trials, seed);
  if (suite == "oracles") return verify_oracles(trials, seed);
  throw contract_error("unknown verification suite '" + suite + "'");
}

inline const std::vector<std::string>& all_verify_suites() {
  static const std::vector<std::string> suites{"theorem-4.2",        "theorem-4.3",
                                               "corollary-5.2",      "sparsity-hierarchy",
                                               "efficiency",         "oracles"};
  return suites;
}

}  // namespace cfattr
