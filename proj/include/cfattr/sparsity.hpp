#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <functional>
#include <limits>
#include <unordered_set>
#include <vector>

#include "cfattr/counterfactual.hpp"
#include "cfattr/power_indices.hpp"
#include "cfattr/rational.hpp"

namespace cfattr {

inline constexpr int kPredicateCap = 25;  // sparsity predicates, max_sparse
inline constexpr int kFamilyCap = 20;     // family enumeration

namespace detail {

inline void require_valid(const model& m, const instance& x, const instance& xp,
                          const char* what) {
  if (!is_valid(m, x, xp)) throw domain_error(std::string(what) + ": counterfactual is invalid");
}

// Moebius transform of the restore table: integer Harsanyi dividends of the
// restricted voting game (the empty coalition is zeroed first, matching the
// dividend recursion).
inline std::vector<std::int64_t> restore_dividends(const std::vector<std::int8_t>& u) {
  std::vector<std::int64_t> delta(u.begin(), u.end());
  delta[0] = 0;
  const int c = std::countr_zero(u.size());
  for (int i = 0; i < c; ++i) {
    const std::uint32_t bit = 1u << i;
    for (std::uint32_t mask = 0; mask < delta.size(); ++mask)
      if (mask & bit) delta[mask] -= delta[mask ^ bit];
  }
  return delta;
}

}  // namespace detail

// A counterfactual is maximally sparse when restoring any nonempty subset of
// its changed features flips the decision back: every change is necessary.
inline bool is_maximally_sparse(const model& m, const instance& x, const instance& xp) {
  detail::require_valid(m, x, xp, "is_maximally_sparse");
  auto u = restore_table(m, x, xp, kPredicateCap, "is_maximally_sparse");
  for (std::uint32_t mask = 1; mask < u.size(); ++mask)
    if (!u[mask]) return false;
  return true;
}

// Weak maximal sparsity: no spurious changes. Every changed feature must
// affect the decision in at least one restoration context.
inline bool is_weakly_maximally_sparse(const model& m, const instance& x, const instance& xp) {
  detail::require_valid(m, x, xp, "is_weakly_maximally_sparse");
  auto u = restore_table(m, x, xp, kPredicateCap, "is_weakly_maximally_sparse");
  const int c = std::countr_zero(u.size());
  for (int i = 0; i < c; ++i) {
    const std::uint32_t bit = 1u << i;
    bool matters = false;
    for (std::uint32_t mask = 0; mask < u.size() && !matters; ++mask)
      if (!(mask & bit) && u[mask | bit] != u[mask]) matters = true;
    if (!matters) return false;
  }
  return true;
}

// xi(S): the Harsanyi dividend of S in the single-reference voting game. It
// is 1 on every minimal winning restoration set and 0 on any set containing a
// feature that is null within it.
inline rational xi(const model& m, const instance& x, const instance& xp, const coalition& s) {
  detail::require_valid(m, x, xp, "xi");
  const coalition c = changed_set(x, xp);
  if (!s.is_subset_of(c)) throw contract_error("xi: coalition is not a subset of the changed set");
  if (s.is_empty()) throw contract_error("xi: empty coalition");
  if (c.cardinality() > kPredicateCap) throw capacity_error("xi: changed set exceeds cap");

  // Local view of s inside c.
  auto members = c.members();
  std::uint32_t local = 0;
  for (std::size_t j = 0; j < members.size(); ++j)
    if (s.contains(members[j])) local |= (1u << j);

  auto rg = restricted_decision_game(m, x, xp);
  // Targeted Moebius sum over the subsets of s only.
  std::int64_t delta = 0;
  const int bits_s = std::popcount(local);
  for_each_subset(local, [&](std::uint32_t sub) {
    const int sign = ((bits_s - std::popcount(sub)) & 1) ? -1 : 1;
    delta += sign * static_cast<std::int64_t>(rg.g.value(sub));
  });
  return rational(delta);
}

// Equal maximal sparsity: all changed features carry the same dividend-share
// weight. Equivalent to the Bin-CF-SHAP values of this single counterfactual
// being uniform over the changed set; compared exactly in integers over the
// common denominator lcm(1..|C|).
inline bool is_equally_maximally_sparse(const model& m, const instance& x, const instance& xp) {
  detail::require_valid(m, x, xp, "is_equally_maximally_sparse");
  const coalition c = changed_set(x, xp);
  const int nc = c.cardinality();
  if (nc <= 1) return true;
  auto u = restore_table(m, x, xp, kPredicateCap, "is_equally_maximally_sparse");
  auto delta = detail::restore_dividends(u);

  __int128 lcm = 1;
  for (int k = 2; k <= nc; ++k) {
    __int128 a = lcm, b = k;
    while (b != 0) {
      __int128 t = a % b;
      a = b;
      b = t;
    }
    lcm = lcm / a * k;
  }
  std::vector<__int128> sums(nc, 0);
  for (std::uint32_t mask = 1; mask < delta.size(); ++mask) {
    if (delta[mask] == 0) continue;
    const __int128 share = static_cast<__int128>(delta[mask]) * (lcm / std::popcount(mask));
    for (std::uint32_t b = mask; b != 0; b &= b - 1) sums[std::countr_zero(b)] += share;
  }
  for (int j = 1; j < nc; ++j)
    if (sums[j] != sums[0]) return false;
  return true;
}

// ---------------------------------------------------------------------------
// MS / WMS family enumeration
// ---------------------------------------------------------------------------

struct sparsity_families {
  std::vector<coalition> ms;   // minimal winning restoration sets
  std::vector<coalition> wms;  // restoration sets with no null member inside
};

// MS(F): the inclusion-minimal sets of changed features whose restoration
// flips the point back to the query's prediction; these are exactly the
// minimal winning coalitions of the single-reference voting game. WMS(F)
// relaxes minimality to "no member is null within the set", which is the
// support condition under which all dividends outside the family vanish.
inline sparsity_families enumerate_sparsity_families(const model& m, const instance& x,
                                                     const instance& xp) {
  detail::require_valid(m, x, xp, "enumerate_sparsity_families");
  const coalition c = changed_set(x, xp);
  auto u = restore_table(m, x, xp, kFamilyCap, "enumerate_sparsity_families");
  const int nc = std::countr_zero(u.size());
  auto members = c.members();
  auto to_global = [&](std::uint32_t local) {
    std::uint32_t bits = 0;
    for (int j = 0; j < nc; ++j)
      if ((local >> j) & 1u) bits |= (1u << members[j]);
    return coalition(bits, c.players());
  };

  sparsity_families out;

  // Minimal winning coalitions via a subset-closure sweep.
  std::vector<std::uint8_t> has_win_sub(u.size());
  for (std::uint32_t mask = 0; mask < u.size(); ++mask) {
    bool sub_wins = false;
    for (std::uint32_t b = mask; b != 0 && !sub_wins; b &= b - 1)
      sub_wins = has_win_sub[mask ^ (b & -b)];
    has_win_sub[mask] = sub_wins || u[mask];
    if (u[mask] && !sub_wins && mask != 0) out.ms.push_back(to_global(mask));
  }

  // cover[T] = union of all subsets of T carrying a nonzero dividend. A set
  // belongs to WMS exactly when its own members are all covered.
  auto delta = detail::restore_dividends(u);
  std::vector<std::uint32_t> cover(u.size(), 0);
  for (std::uint32_t mask = 1; mask < u.size(); ++mask)
    if (delta[mask] != 0) cover[mask] = mask;
  for (int i = 0; i < nc; ++i) {
    const std::uint32_t bit = 1u << i;
    for (std::uint32_t mask = 0; mask < u.size(); ++mask)
      if (mask & bit) cover[mask] |= cover[mask ^ bit];
  }
  for (std::uint32_t mask = 1; mask < u.size(); ++mask)
    if ((cover[mask] & mask) == mask) out.wms.push_back(to_global(mask));

  return out;
}

// ---------------------------------------------------------------------------
// MaxSparse induction (depth-first search with memoized failures)
// ---------------------------------------------------------------------------

using cost_fn = std::function<double(const instance& x, const instance& candidate)>;

inline cost_fn uniform_cost() {
  return [](const instance& x, const instance& cand) {
    return static_cast<double>(changed_set(x, cand).cardinality());
  };
}

inline cost_fn quantile_shift_cost(const quantile_map& qm) {
  return [&qm](const instance& x, const instance& cand) { return qm.manhattan(x, cand); };
}

namespace detail {

struct max_sparse_search {
  const std::vector<std::int8_t>& u;  // restore table over the changed set
  std::unordered_set<std::uint32_t> fail;
  std::unordered_set<std::uint32_t> visited;
  std::vector<std::uint32_t> succ;  // change-set masks, relative to C

  // Depth-first descent: each valid node replaces its parent among the
  // successes, each invalid node is memoized so its branch is not re-entered.
  void recurse(std::uint32_t active, std::uint32_t parent, bool has_parent) {
    const std::uint32_t full = static_cast<std::uint32_t>(u.size() - 1);
    const bool valid = !u[full & ~active];  // restoring the complement undoes?
    if (!valid) {
      fail.insert(active);
      return;
    }
    if (has_parent) std::erase(succ, parent);
    if (std::find(succ.begin(), succ.end(), active) == succ.end()) succ.push_back(active);
    for (std::uint32_t b = active; b != 0; b &= b - 1) {
      const std::uint32_t child = active ^ (b & -b);
      if (child == 0) continue;  // empty change set is never a counterfactual
      if (fail.contains(child) || !visited.insert(child).second) continue;
      recurse(child, active, true);
    }
  }
};

}  // namespace detail

// Induces a maximally sparse counterfactual from xp by restoring changed
// features, then returns the cheapest of the maximally sparse candidates.
// The search walks subsets depth-first, memoizes failed restorations and lets
// successful children replace their parent; candidates that are only locally
// minimal (possible for non-monotone rules) are filtered out by the full
// predicate, with an exhaustive sweep as fallback.
inline counterfactual max_sparse(const model& m, const instance& x, const instance& xp,
                                 const cost_fn& cost) {
  detail::require_valid(m, x, xp, "max_sparse");
  const coalition c = changed_set(x, xp);
  auto u = restore_table(m, x, xp, kPredicateCap, "max_sparse");
  auto members = c.members();
  const std::uint32_t full = static_cast<std::uint32_t>(u.size() - 1);

  detail::max_sparse_search search{u, {}, {}, {}};
  search.visited.insert(full);
  search.recurse(full, 0, false);

  // Maximal sparsity of a candidate change set A: restoring any nonempty
  // subset of A (on top of the already-restored complement) must flip back.
  auto candidate_is_max_sparse = [&](std::uint32_t active) {
    bool ok = true;
    for_each_subset(active, [&](std::uint32_t sub) {
      if (sub != 0 && !u[(full & ~active) | sub]) ok = false;
    });
    return ok;
  };

  std::vector<std::uint32_t> finalists;
  for (std::uint32_t a : search.succ)
    if (candidate_is_max_sparse(a)) finalists.push_back(a);
  if (finalists.empty()) {
    // Non-monotone rule hid every inclusion-minimal valid set behind an
    // invalid intermediate; sweep all subsets instead.
    for (std::uint32_t a = 1; a <= full; ++a)
      if (!u[full & ~a] && candidate_is_max_sparse(a)) finalists.push_back(a);
  }

  auto realize = [&](std::uint32_t active) {
    instance point = x;
    for (int j = 0; j < static_cast<int>(members.size()); ++j)
      if ((active >> j) & 1u) point[members[j]] = xp[members[j]];
    return point;
  };

  std::uint32_t best_mask = 0;
  instance best_point;
  double best_cost = std::numeric_limits<double>::infinity();
  bool have = false;
  // Global bitmask decides ties, so sort candidates by it first.
  std::sort(finalists.begin(), finalists.end(), [&](std::uint32_t a, std::uint32_t b) {
    std::uint32_t ga = 0, gb = 0;
    for (int j = 0; j < static_cast<int>(members.size()); ++j) {
      if ((a >> j) & 1u) ga |= (1u << members[j]);
      if ((b >> j) & 1u) gb |= (1u << members[j]);
    }
    return ga < gb;
  });
  for (std::uint32_t a : finalists) {
    instance point = realize(a);
    const double cc = cost(x, point);
    if (!have || cc < best_cost) {
      have = true;
      best_cost = cc;
      best_mask = a;
      best_point = std::move(point);
    }
  }
  if (!have) throw domain_error("max_sparse: no maximally sparse candidate found");
  (void)best_mask;
  return counterfactual{best_point, changed_set(x, best_point), true};
}

// Applies max_sparse to every member of a set, preserving order.
inline counterfactual_set max_sparse_set(const model& m, const counterfactual_set& cfs,
                                         const cost_fn& cost) {
  std::vector<instance> points;
  points.reserve(cfs.items.size());
  for (const auto& item : cfs.items) points.push_back(max_sparse(m, cfs.query, item.point, cost).point);
  return counterfactual_set::build(m, cfs.query, points);
}

}  // namespace cfattr
