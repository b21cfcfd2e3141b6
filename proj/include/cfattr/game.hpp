#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <functional>
#include <map>
#include <numeric>
#include <vector>

#include "cfattr/coalition.hpp"
#include "cfattr/errors.hpp"
#include "cfattr/rational.hpp"

namespace cfattr {

// Cooperative game over players 0..players-1. The characteristic function is
// addressed by bitmask; callers guarantee determinism.
struct game {
  int players = 0;
  std::function<double(std::uint32_t)> value;

  double operator()(std::uint32_t mask) const { return value(mask); }
};

using attribution_vector = std::vector<double>;

namespace detail {

inline void check_player_cap(int m, int cap, const char* what) {
  if (m > cap)
    throw capacity_error(std::string(what) + ": player count " + std::to_string(m) +
                         " exceeds cap " + std::to_string(cap));
}

// Caches all 2^m characteristic values when that is affordable.
inline std::vector<double> cache_values(const game& g) {
  std::vector<double> v(std::size_t(1) << g.players);
  for (std::uint32_t mask = 0; mask < v.size(); ++mask) v[mask] = g.value(mask);
  return v;
}

inline const __int128* factorial128_table() {
  static const auto table = [] {
    static __int128 f[kMaxPlayers + 1];
    f[0] = 1;
    for (int i = 1; i <= kMaxPlayers; ++i) f[i] = f[i - 1] * i;
    return f;
  }();
  return table;
}

}  // namespace detail

// Exact Shapley values of a {0,1}-valued game via the subset-sum formula.
// Swing counts are gathered per coalition size, so the result is the exact
// fraction  sum_s count_s * s!(m-1-s)! / m!.
inline std::vector<rational> shapley_exact(const game& g) {
  detail::check_player_cap(g.players, 25, "shapley_exact");
  const int m = g.players;
  if (m == 0) return {};
  std::vector<double> cache = detail::cache_values(g);
  std::vector<std::int8_t> v(cache.size());
  for (std::size_t i = 0; i < cache.size(); ++i) {
    if (cache[i] != 0.0 && cache[i] != 1.0)
      throw domain_error("shapley_exact: game is not binary");
    v[i] = static_cast<std::int8_t>(cache[i]);
  }
  const __int128* fact = detail::factorial128_table();
  std::vector<rational> out(m);
  std::vector<std::int64_t> swings(m);
  for (int i = 0; i < m; ++i) {
    std::fill(swings.begin(), swings.end(), 0);
    const std::uint32_t bit = 1u << i;
    for (std::uint32_t mask = 0; mask < v.size(); ++mask) {
      if (mask & bit) continue;
      int diff = v[mask | bit] - v[mask];
      if (diff != 0) swings[std::popcount(mask)] += diff;
    }
    __int128 num = 0;
    for (int s = 0; s < m; ++s)
      num += static_cast<__int128>(swings[s]) * fact[s] * fact[m - 1 - s];
    out[i] = rational::from_int128(num, fact[m]);
  }
  return out;
}

// Shapley values of an arbitrary real-valued game. Deterministic summation
// order (ascending mask, then ascending coalition size).
inline attribution_vector shapley(const game& g) {
  detail::check_player_cap(g.players, kMaxPlayers, "shapley");
  const int m = g.players;
  if (m == 0) return {};

  // Weights w(s) = s!(m-1-s)!/m!, exact up to m = 30 via 128-bit factorials.
  const __int128* fact = detail::factorial128_table();
  std::vector<double> weight(m);
  for (int s = 0; s < m; ++s)
    weight[s] = static_cast<double>(fact[s]) * static_cast<double>(fact[m - 1 - s]) /
                static_cast<double>(fact[m]);

  const bool cached = m <= 22;
  std::vector<double> cache;
  if (cached) {
    cache = detail::cache_values(g);
    // Binary games go through exact fractions so golden values like 7/12
    // compare exactly after the one conversion at the boundary.
    bool binary = true;
    for (double x : cache)
      if (x != 0.0 && x != 1.0) {
        binary = false;
        break;
      }
    if (binary) {
      game cached_game{m, [&cache](std::uint32_t mask) { return cache[mask]; }};
      auto exact = shapley_exact(cached_game);
      attribution_vector out(m);
      for (int i = 0; i < m; ++i) out[i] = exact[i].to_double();
      return out;
    }
  }
  auto v = [&](std::uint32_t mask) { return cached ? cache[mask] : g.value(mask); };

  attribution_vector out(m, 0.0);
  std::vector<double> per_size(m);
  const std::uint32_t all = (m == 32) ? ~0u : ((1u << m) - 1u);
  for (int i = 0; i < m; ++i) {
    std::fill(per_size.begin(), per_size.end(), 0.0);
    const std::uint32_t bit = 1u << i;
    for (std::uint32_t mask = 0; mask <= all; ++mask) {
      if (mask & bit) continue;
      per_size[std::popcount(mask)] += v(mask | bit) - v(mask);
    }
    double phi = 0.0;
    for (int s = 0; s < m; ++s) phi += per_size[s] * weight[s];
    out[i] = phi;
  }
  return out;
}

// Independent oracle: average marginal contribution over all m! orderings.
inline attribution_vector shapley_permutation_oracle(const game& g) {
  detail::check_player_cap(g.players, 8, "shapley_permutation_oracle");
  const int m = g.players;
  if (m == 0) return {};
  std::vector<double> cache = detail::cache_values(g);
  std::vector<int> perm(m);
  std::iota(perm.begin(), perm.end(), 0);
  std::vector<double> sums(m, 0.0);
  std::uint64_t count = 0;
  do {
    std::uint32_t mask = 0;
    double prev = cache[0];
    for (int pos = 0; pos < m; ++pos) {
      mask |= 1u << perm[pos];
      double cur = cache[mask];
      sums[perm[pos]] += cur - prev;
      prev = cur;
    }
    ++count;
  } while (std::next_permutation(perm.begin(), perm.end()));
  attribution_vector out(m);
  for (int i = 0; i < m; ++i) out[i] = sums[i] / static_cast<double>(count);
  return out;
}

// Harsanyi dividends for every nonempty coalition, following the recursion
// Delta_S = v(S) - sum_{T subset S, T nonempty} Delta_T (singletons ground it
// at Delta_{i} = v({i})); computed with the Moebius transform in O(m 2^m).
struct dividend_table {
  int players = 0;
  std::vector<double> delta;  // indexed by mask; delta[0] unused (empty coalition)

  double at(const coalition& c) const {
    if (c.players() != players) throw contract_error("dividend_table: player count mismatch");
    if (c.is_empty()) throw contract_error("dividend_table: empty coalition has no dividend");
    return delta[c.bits()];
  }

  bool complete() const {
    return players >= 0 && delta.size() == (std::size_t(1) << players);
  }

  std::map<coalition, double> as_map() const {
    std::map<coalition, double> out;
    for (std::uint32_t mask = 1; mask < delta.size(); ++mask)
      out.emplace(coalition(mask, players), delta[mask]);
    return out;
  }
};

inline dividend_table harsanyi_dividends(const game& g) {
  detail::check_player_cap(g.players, 20, "harsanyi_dividends");
  dividend_table table;
  table.players = g.players;
  table.delta = detail::cache_values(g);
  table.delta[0] = 0.0;  // the recursion never involves v(empty)
  for (int i = 0; i < g.players; ++i) {
    const std::uint32_t bit = 1u << i;
    for (std::uint32_t mask = 0; mask < table.delta.size(); ++mask)
      if (mask & bit) table.delta[mask] -= table.delta[mask ^ bit];
  }
  return table;
}

// Shapley values as dividend shares: phi_i = sum_{S : i in S} Delta_S / |S|.
inline attribution_vector shapley_from_dividends(const dividend_table& table) {
  if (!table.complete()) throw contract_error("shapley_from_dividends: incomplete table");
  const int m = table.players;
  attribution_vector out(m, 0.0);
  for (std::uint32_t mask = 1; mask < table.delta.size(); ++mask) {
    if (table.delta[mask] == 0.0) continue;
    const double share = table.delta[mask] / std::popcount(mask);
    for (std::uint32_t b = mask; b != 0; b &= b - 1) out[std::countr_zero(b)] += share;
  }
  return out;
}

}  // namespace cfattr
