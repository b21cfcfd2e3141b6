#pragma once

#include <bit>
#include <cstdint>
#include <optional>
#include <vector>

#include "cfattr/coalition.hpp"
#include "cfattr/errors.hpp"
#include "cfattr/game.hpp"
#include "cfattr/rational.hpp"

namespace cfattr {

// Power indices for voting games (binary characteristic functions). All three
// are implemented in their normalized form so that every one of them assigns
// exactly 1/|C| to the common dictators of a unanimity game.

namespace detail {

inline std::vector<std::int8_t> cache_binary_values(const game& g, const char* what) {
  check_player_cap(g.players, 25, what);
  std::vector<std::int8_t> v(std::size_t(1) << g.players);
  for (std::uint32_t mask = 0; mask < v.size(); ++mask) {
    double x = g.value(mask);
    if (x != 0.0 && x != 1.0)
      throw domain_error(std::string(what) + ": game is not binary");
    v[mask] = static_cast<std::int8_t>(x);
  }
  return v;
}

}  // namespace detail

// Signed swing counts per player, rescaled to sum to v(F) - v(empty).
inline std::vector<rational> banzhaf_normalized_exact(const game& g) {
  auto v = detail::cache_binary_values(g, "banzhaf_normalized");
  const int m = g.players;
  if (m == 0) return {};
  std::vector<std::int64_t> swings(m, 0);
  for (int i = 0; i < m; ++i) {
    const std::uint32_t bit = 1u << i;
    for (std::uint32_t mask = 0; mask < v.size(); ++mask)
      if (!(mask & bit)) swings[i] += v[mask | bit] - v[mask];
  }
  std::int64_t total = 0;
  for (auto s : swings) total += s;
  const std::int64_t span = v[v.size() - 1] - v[0];  // v(F) - v(empty)
  std::vector<rational> out(m);
  if (total == 0) return out;
  for (int i = 0; i < m; ++i) out[i] = rational(swings[i] * span, total);
  return out;
}

inline attribution_vector banzhaf_normalized(const game& g) {
  auto exact = banzhaf_normalized_exact(g);
  attribution_vector out(exact.size());
  for (std::size_t i = 0; i < exact.size(); ++i) out[i] = exact[i].to_double();
  return out;
}

// All winning coalitions none of whose proper subsets win. Works for
// non-monotone voting rules too: a coalition is kept only if no subset at all
// wins, tracked with a subset-closure DP.
inline std::vector<coalition> minimal_winning_coalitions(const game& g) {
  auto v = detail::cache_binary_values(g, "minimal_winning_coalitions");
  const int m = g.players;
  // has_win_sub[mask]: some subset of mask (possibly mask itself) wins.
  std::vector<std::uint8_t> has_win_sub(v.size());
  std::vector<coalition> out;
  for (std::uint32_t mask = 0; mask < v.size(); ++mask) {
    bool proper_sub_wins = false;
    for (std::uint32_t b = mask; b != 0; b &= b - 1)
      if (has_win_sub[mask ^ (b & -b)]) {
        proper_sub_wins = true;
        break;
      }
    has_win_sub[mask] = proper_sub_wins || v[mask];
    if (v[mask] && !proper_sub_wins && mask != 0) out.emplace_back(mask, m);
  }
  return out;
}

// Deegan-Packel: power equally split across minimal winning coalitions, then
// equally among each coalition's members.
inline std::vector<rational> deegan_packel_exact(const game& g) {
  auto mwc = minimal_winning_coalitions(g);
  if (mwc.empty()) throw domain_error("deegan_packel: game has no winning coalition");
  std::vector<rational> out(g.players);
  const rational per_coalition(1, static_cast<std::int64_t>(mwc.size()));
  for (const auto& c : mwc) {
    const rational share = per_coalition * rational(1, c.cardinality());
    for (int i : c.members()) out[i] += share;
  }
  return out;
}

inline attribution_vector deegan_packel(const game& g) {
  auto exact = deegan_packel_exact(g);
  attribution_vector out(exact.size());
  for (std::size_t i = 0; i < exact.size(); ++i) out[i] = exact[i].to_double();
  return out;
}

// Holler-Packel public good index: MWC membership counts, unit-sum normalized.
inline std::vector<rational> holler_packel_normalized_exact(const game& g) {
  auto mwc = minimal_winning_coalitions(g);
  if (mwc.empty()) throw domain_error("holler_packel: game has no winning coalition");
  std::vector<std::int64_t> counts(g.players, 0);
  std::int64_t total = 0;
  for (const auto& c : mwc)
    for (int i : c.members()) {
      ++counts[i];
      ++total;
    }
  std::vector<rational> out(g.players);
  for (int i = 0; i < g.players; ++i) out[i] = rational(counts[i], total);
  return out;
}

inline attribution_vector holler_packel_normalized(const game& g) {
  auto exact = holler_packel_normalized_exact(g);
  attribution_vector out(exact.size());
  for (std::size_t i = 0; i < exact.size(); ++i) out[i] = exact[i].to_double();
  return out;
}

// Detects unanimity games: returns the (nonempty) dictator coalition C when
// v(S) = 1 exactly for S containing C, otherwise nothing.
inline std::optional<coalition> unanimity_dictators(const game& g) {
  auto v = detail::cache_binary_values(g, "unanimity_dictators");
  std::uint32_t candidate = ~0u;
  bool any_winning = false;
  for (std::uint32_t mask = 0; mask < v.size(); ++mask)
    if (v[mask]) {
      candidate &= mask;
      any_winning = true;
    }
  if (!any_winning || candidate == 0) return std::nullopt;
  for (std::uint32_t mask = 0; mask < v.size(); ++mask)
    if (v[mask] != ((mask & candidate) == candidate ? 1 : 0)) return std::nullopt;
  return coalition(candidate, g.players);
}

}  // namespace cfattr
