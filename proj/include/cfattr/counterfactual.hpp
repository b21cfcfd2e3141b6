#pragma once

#include <algorithm>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "cfattr/coalition.hpp"
#include "cfattr/errors.hpp"
#include "cfattr/game.hpp"
#include "cfattr/model.hpp"
#include "cfattr/quantile.hpp"

namespace cfattr {

// Set of features whose values differ between query and candidate. Exact
// comparison: data passes through unmodified, so no representational noise
// leaks into the change set.
inline coalition changed_set(const instance& x, const instance& xp) {
  if (x.size() != xp.size()) throw contract_error("changed_set: dimension mismatch");
  std::uint32_t bits = 0;
  for (std::size_t i = 0; i < x.size(); ++i)
    if (x[i] != xp[i]) bits |= (1u << i);
  return coalition(bits, static_cast<int>(x.size()));
}

inline bool is_valid(const model& m, const instance& x, const instance& xp) {
  return m.decide(x) != m.decide(xp);
}

struct counterfactual {
  instance point;
  coalition changed;
  bool valid = false;
};

// Validated counterfactual points for one query instance. Construction
// rejects any member whose prediction matches the query's; downstream
// attribution code can therefore assume validity.
struct counterfactual_set {
  instance query;
  std::vector<counterfactual> items;

  static counterfactual_set build(const model& m, instance query,
                                  const std::vector<instance>& points) {
    counterfactual_set out;
    out.query = std::move(query);
    for (const auto& p : points) {
      counterfactual cf;
      cf.changed = changed_set(out.query, p);
      cf.valid = is_valid(m, out.query, p);
      cf.point = p;
      if (!cf.valid)
        throw domain_error("counterfactual_set: point does not change the prediction");
      out.items.push_back(std::move(cf));
    }
    if (out.items.empty()) throw domain_error("counterfactual_set: no counterfactuals");
    return out;
  }

  std::size_t size() const { return items.size(); }
};

// ---------------------------------------------------------------------------
// K-NN counterfactual generation in quantile space
// ---------------------------------------------------------------------------

struct knn_result {
  counterfactual_set set;
  bool truncated = false;  // fewer than k opposite-class rows available
};

// The k nearest opposite-prediction rows under the quantile-space Manhattan
// distance. Candidates are restricted to opposite-prediction rows (validity is
// a hard requirement); ties break by ascending row index.
inline knn_result knn_counterfactuals(const model& m, const dataset& data, const quantile_map& qm,
                                      const instance& x, std::size_t k) {
  if (k == 0) throw contract_error("knn_counterfactuals: k must be positive");
  const int own = m.decide(x);
  std::vector<std::pair<double, std::size_t>> candidates;
  for (std::size_t r = 0; r < data.rows.size(); ++r)
    if (m.decide(data.rows[r]) != own) candidates.emplace_back(qm.manhattan(x, data.rows[r]), r);
  if (candidates.empty())
    throw domain_error("knn_counterfactuals: no opposite-prediction row in the dataset");
  std::sort(candidates.begin(), candidates.end());
  const std::size_t take = std::min(k, candidates.size());
  std::vector<instance> points;
  points.reserve(take);
  for (std::size_t i = 0; i < take; ++i) points.push_back(data.rows[candidates[i].second]);
  knn_result out{counterfactual_set::build(m, x, points), take < k};
  return out;
}

// ---------------------------------------------------------------------------
// Single-reference games
// ---------------------------------------------------------------------------

// The voting game of one (query, counterfactual) pair over the full feature
// set: a coalition S wins when the hybrid <x_S, xp_rest> keeps the query's
// prediction. Using prediction agreement instead of the raw class keeps the
// payoff at 1 for the grand coalition whichever class the query has.
inline game single_reference_decision_game(const model& m, instance x, instance xp) {
  const int players = static_cast<int>(x.size());
  const int own = m.decide(x);
  return game{players, [&m, x = std::move(x), xp = std::move(xp), own](std::uint32_t mask) {
                instance h(x.size());
                for (std::size_t i = 0; i < x.size(); ++i)
                  h[i] = (mask >> i) & 1u ? x[i] : xp[i];
                return m.decide(h) == own ? 1.0 : 0.0;
              }};
}

// Same pair, continuous payoff: v(S) = f(<x_S, xp_rest>).
inline game single_reference_output_game(const model& m, instance x, instance xp) {
  const int players = static_cast<int>(x.size());
  return game{players, [&m, x = std::move(x), xp = std::move(xp)](std::uint32_t mask) {
                instance h(x.size());
                for (std::size_t i = 0; i < x.size(); ++i)
                  h[i] = (mask >> i) & 1u ? x[i] : xp[i];
                return m.output(h);
              }};
}

// Restriction of a single-reference game to the changed features: everything
// outside C is a null player, so exact attribution only needs this subgame.
struct restricted_game {
  game g;                    // players renumbered 0..|C|-1
  std::vector<int> members;  // local player -> original feature index
};

namespace detail {

template <typename Payoff>
restricted_game restrict_to_changed(const model& m, const instance& x, const instance& xp,
                                    Payoff&& payoff) {
  const coalition c = changed_set(x, xp);
  restricted_game out;
  out.members = c.members();
  const auto members = std::make_shared<std::vector<int>>(out.members);
  auto fn = [&m, x, xp, members, payoff](std::uint32_t local_mask) {
    instance h = xp;
    for (std::size_t j = 0; j < members->size(); ++j)
      if ((local_mask >> j) & 1u) h[(*members)[j]] = x[(*members)[j]];
    return payoff(h);
  };
  out.g = game{static_cast<int>(out.members.size()), std::move(fn)};
  return out;
}

}  // namespace detail

inline restricted_game restricted_decision_game(const model& m, const instance& x,
                                                const instance& xp) {
  const int own = m.decide(x);
  return detail::restrict_to_changed(
      m, x, xp, [&m, own](const instance& h) { return m.decide(h) == own ? 1.0 : 0.0; });
}

inline restricted_game restricted_output_game(const model& m, const instance& x,
                                              const instance& xp) {
  return detail::restrict_to_changed(m, x, xp,
                                     [&m](const instance& h) { return m.output(h); });
}

// Cached payoff table of the restricted decision game: entry A is 1 iff
// restoring the changed features listed in A flips the point back to the
// query's prediction.
inline std::vector<std::int8_t> restore_table(const model& m, const instance& x,
                                              const instance& xp, int cap, const char* what) {
  const coalition c = changed_set(x, xp);
  if (c.cardinality() > cap)
    throw capacity_error(std::string(what) + ": " + std::to_string(c.cardinality()) +
                         " changed features exceed cap " + std::to_string(cap));
  auto rg = restricted_decision_game(m, x, xp);
  std::vector<std::int8_t> u(std::size_t(1) << rg.g.players);
  for (std::uint32_t mask = 0; mask < u.size(); ++mask)
    u[mask] = static_cast<std::int8_t>(rg.g.value(mask));
  return u;
}

}  // namespace cfattr
