#pragma once

#include <map>
#include <string>
#include <vector>

#include "cfattr/counterfactual.hpp"
#include "cfattr/game.hpp"
#include "cfattr/power_indices.hpp"
#include "cfattr/rational.hpp"

namespace cfattr {

// Per-feature attribution with provenance. Methods whose games are binary (or
// pure frequencies) also carry their values as exact fractions; `values` is
// always the double view.
struct explanation {
  std::string method;
  attribution_vector values;
  std::vector<rational> exact;  // empty for continuous-payoff methods
  int query_index = -1;
  std::size_t background_size = 0;
  std::map<std::string, std::string> meta;

  int features() const { return static_cast<int>(values.size()); }
};

enum class solution_concept { shapley, banzhaf, deegan_packel, holler_packel };
enum class query_function { output, decision };

inline std::string concept_name(solution_concept c) {
  switch (c) {
    case solution_concept::shapley: return "shapley";
    case solution_concept::banzhaf: return "banzhaf";
    case solution_concept::deegan_packel: return "deegan-packel";
    case solution_concept::holler_packel: return "holler-packel";
  }
  return "?";
}

namespace detail {

inline std::vector<rational> average_exact(std::vector<std::vector<rational>> per_reference,
                                           int m) {
  std::vector<rational> sum(m, rational(0));
  for (const auto& ref : per_reference)
    for (int i = 0; i < m; ++i) sum[i] += ref[i];
  const rational n(static_cast<std::int64_t>(per_reference.size()));
  for (auto& r : sum) r = r / n;
  return sum;
}

inline attribution_vector to_doubles(const std::vector<rational>& exact) {
  attribution_vector out(exact.size());
  for (std::size_t i = 0; i < exact.size(); ++i) out[i] = exact[i].to_double();
  return out;
}

inline void scatter(const std::vector<rational>& local, const std::vector<int>& members,
                    std::vector<rational>& global) {
  for (std::size_t j = 0; j < members.size(); ++j) global[members[j]] += local[j];
}

// Per-reference exact values of a dictators-symmetric concept on the
// restricted voting game, scattered back to full feature space.
inline std::vector<rational> concept_on_reference(const model& m, const instance& x,
                                                  const instance& xp, solution_concept sc) {
  auto rg = restricted_decision_game(m, x, xp);
  std::vector<rational> local;
  switch (sc) {
    case solution_concept::shapley: local = shapley_exact(rg.g); break;
    case solution_concept::banzhaf: local = banzhaf_normalized_exact(rg.g); break;
    case solution_concept::deegan_packel: local = deegan_packel_exact(rg.g); break;
    case solution_concept::holler_packel: local = holler_packel_normalized_exact(rg.g); break;
  }
  std::vector<rational> global(x.size(), rational(0));
  scatter(local, rg.members, global);
  return global;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// SHAP family (interventional semantics, exact enumeration per reference)
// ---------------------------------------------------------------------------

// SHAP values with respect to an arbitrary background dataset, as the mean of
// exact single-reference Shapley values of the output games. Only the changed
// features of each reference enter the enumeration; the rest are null.
inline constexpr int kReferenceCap = 25;  // changed features per reference

inline explanation shap(const model& m, const instance& x, const dataset& background) {
  if (background.empty()) throw domain_error("shap: empty background dataset");
  const int nf = static_cast<int>(x.size());
  attribution_vector sums(nf, 0.0);
  for (const auto& ref : background.rows) {
    const coalition c = changed_set(x, ref);
    if (c.cardinality() > kReferenceCap)
      throw capacity_error("shap: reference changes too many features for exact enumeration");
    if (c.is_empty()) continue;  // identical point, all marginals vanish
    auto rg = restricted_output_game(m, x, ref);
    auto local = shapley(rg.g);
    for (std::size_t j = 0; j < rg.members.size(); ++j) sums[rg.members[j]] += local[j];
  }
  explanation out;
  out.method = "shap";
  out.background_size = background.size();
  out.values.resize(nf);
  for (int i = 0; i < nf; ++i) out.values[i] = sums[i] / static_cast<double>(background.size());
  return out;
}

// SHAP with a counterfactual set as background.
inline explanation cf_shap(const model& m, const instance& x, const counterfactual_set& cfs) {
  dataset background;
  background.feature_names.resize(x.size());
  for (const auto& item : cfs.items) background.rows.push_back(item.point);
  explanation out = shap(m, x, background);
  out.method = "cf-shap";
  return out;
}

// Binary CF-SHAP: the characteristic function maps hybrids through the
// decision function, so the explanation only reacts to changes that move the
// prediction. Exact fractions end to end.
inline explanation bin_cf_shap(const model& m, const instance& x, const counterfactual_set& cfs) {
  std::vector<std::vector<rational>> per_ref;
  per_ref.reserve(cfs.items.size());
  for (const auto& item : cfs.items)
    per_ref.push_back(detail::concept_on_reference(m, x, item.point, solution_concept::shapley));
  explanation out;
  out.method = "bin-cf-shap";
  out.background_size = cfs.size();
  out.exact = detail::average_exact(std::move(per_ref), static_cast<int>(x.size()));
  out.values = detail::to_doubles(out.exact);
  return out;
}

// ---------------------------------------------------------------------------
// Frequency family
// ---------------------------------------------------------------------------

// Fraction of counterfactuals in which each feature is modified.
inline explanation cf_freq(const instance& x, const counterfactual_set& cfs) {
  const int nf = static_cast<int>(x.size());
  std::vector<std::int64_t> counts(nf, 0);
  for (const auto& item : cfs.items)
    for (int i : item.changed.members()) ++counts[i];
  explanation out;
  out.method = "cf-freq";
  out.background_size = cfs.size();
  out.exact.resize(nf);
  for (int i = 0; i < nf; ++i)
    out.exact[i] = rational(counts[i], static_cast<std::int64_t>(cfs.size()));
  out.values = detail::to_doubles(out.exact);
  return out;
}

// Efficient variant: each counterfactual distributes a unit of importance
// equally over its changed features, so the explanation always sums to 1.
inline explanation norm_cf_freq(const instance& x, const counterfactual_set& cfs) {
  const int nf = static_cast<int>(x.size());
  std::vector<std::vector<rational>> per_ref;
  per_ref.reserve(cfs.items.size());
  for (const auto& item : cfs.items) {
    const int c = item.changed.cardinality();
    if (c == 0) throw domain_error("norm_cf_freq: member with empty change set");
    std::vector<rational> ref(nf, rational(0));
    for (int i : item.changed.members()) ref[i] = rational(1, c);
    per_ref.push_back(std::move(ref));
  }
  explanation out;
  out.method = "norm-cf-freq";
  out.background_size = cfs.size();
  out.exact = detail::average_exact(std::move(per_ref), nf);
  out.values = detail::to_doubles(out.exact);
  return out;
}

// ---------------------------------------------------------------------------
// Generic solution-concept attribution over single-reference games
// ---------------------------------------------------------------------------

inline explanation game_attribution(const model& m, const instance& x,
                                    const counterfactual_set& cfs, solution_concept sc,
                                    query_function qf = query_function::decision) {
  if (qf == query_function::output && sc != solution_concept::shapley)
    throw domain_error("game_attribution: " + concept_name(sc) +
                       " needs a binary game; use the decision query function");
  explanation out;
  if (qf == query_function::output) {
    out = cf_shap(m, x, cfs);
  } else {
    std::vector<std::vector<rational>> per_ref;
    per_ref.reserve(cfs.items.size());
    for (const auto& item : cfs.items)
      per_ref.push_back(detail::concept_on_reference(m, x, item.point, sc));
    out.exact = detail::average_exact(std::move(per_ref), static_cast<int>(x.size()));
    out.values = detail::to_doubles(out.exact);
    out.background_size = cfs.size();
  }
  out.method = "generic(" + concept_name(sc) + ")";
  out.meta["query_fn"] = qf == query_function::output ? "f" : "F";
  return out;
}

}  // namespace cfattr
