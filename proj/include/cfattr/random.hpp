#pragma once

#include <cstdint>
#include <memory>
#include <random>
#include <vector>

#include "cfattr/dataset.hpp"
#include "cfattr/game.hpp"
#include "cfattr/model.hpp"

namespace cfattr {

// All randomness in the artifact flows through these helpers so runs are
// reproducible bit-for-bit from a single seed. Uniform doubles are produced
// from raw engine output (not std::uniform_real_distribution, whose mapping
// is implementation-defined).

inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Derives an independent stream for a substream index (instance, trial, ...).
inline std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t stream = 0) {
  std::uint64_t s = seed ^ (0xa076'1d64'78bd'642fULL * (stream + 1));
  std::uint64_t mixed = splitmix64(s);
  return std::mt19937_64(mixed);
}

inline double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline int uniform_int(std::mt19937_64& rng, int lo, int hi) {  // inclusive bounds
  return lo + static_cast<int>(rng() % static_cast<std::uint64_t>(hi - lo + 1));
}

// ---------------------------------------------------------------------------
// Randomized fixtures for the verification suites
// ---------------------------------------------------------------------------

// Arbitrary binary game with v(empty) = 0.
inline game random_binary_game(int players, std::mt19937_64& rng) {
  auto values = std::make_shared<std::vector<std::int8_t>>(std::size_t(1) << players);
  (*values)[0] = 0;
  for (std::size_t i = 1; i < values->size(); ++i)
    (*values)[i] = static_cast<std::int8_t>(rng() & 1u);
  return game{players, [values](std::uint32_t mask) { return double((*values)[mask]); }};
}

// Arbitrary real-valued game with v(empty) = 0.
inline game random_real_game(int players, std::mt19937_64& rng) {
  auto values = std::make_shared<std::vector<double>>(std::size_t(1) << players);
  (*values)[0] = 0.0;
  for (std::size_t i = 1; i < values->size(); ++i) (*values)[i] = uniform01(rng) * 2.0 - 1.0;
  return game{players, [values](std::uint32_t mask) { return (*values)[mask]; }};
}

// Random boolean-formula model over binary features (atoms test x_i > 0.5).
inline bool_expr random_formula(int features, int depth, std::mt19937_64& rng) {
  if (depth == 0 || uniform01(rng) < 0.3)
    return bool_expr::atom(uniform_int(rng, 0, features - 1), cmp_op::gt, 0.5);
  const int pick = uniform_int(rng, 0, 2);
  if (pick == 2) return bool_expr::negate(random_formula(features, depth - 1, rng));
  const int arity = uniform_int(rng, 2, 3);
  std::vector<bool_expr> args;
  for (int i = 0; i < arity; ++i) args.push_back(random_formula(features, depth - 1, rng));
  return pick == 0 ? bool_expr::all_of(std::move(args)) : bool_expr::any_of(std::move(args));
}

inline model random_boolean_model(int features, std::mt19937_64& rng, int depth = 3) {
  return model::boolean(random_formula(features, depth, rng), features, 0.5);
}

// Random additive tree ensemble over [0, 1]^m.
inline decision_tree random_tree(int features, int depth, std::mt19937_64& rng) {
  decision_tree tree;
  // Builds a complete tree of the given depth in level order.
  struct pending {
    int depth;
  };
  std::vector<pending> todo{{depth}};
  for (std::size_t i = 0; i < todo.size(); ++i) {
    tree_node node;
    if (todo[i].depth == 0) {
      node.leaf = true;
      node.value = uniform01(rng) * 2.0 - 1.0;
    } else {
      node.leaf = false;
      node.feature = uniform_int(rng, 0, features - 1);
      node.threshold = uniform01(rng);
      node.left = static_cast<int>(todo.size());
      node.right = static_cast<int>(todo.size()) + 1;
      todo.push_back({todo[i].depth - 1});
      todo.push_back({todo[i].depth - 1});
    }
    tree.nodes.push_back(node);
  }
  return tree;
}

inline model random_tree_ensemble(int features, int trees, int depth, std::mt19937_64& rng,
                                  double threshold = 0.0) {
  std::vector<decision_tree> forest;
  forest.reserve(trees);
  for (int i = 0; i < trees; ++i) forest.push_back(random_tree(features, depth, rng));
  return model::tree_ensemble(std::move(forest), features, threshold);
}

inline dataset random_dataset(int features, std::size_t rows, std::mt19937_64& rng) {
  dataset d;
  for (int f = 0; f < features; ++f) d.feature_names.push_back("f" + std::to_string(f));
  d.rows.reserve(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    instance row(features);
    for (int f = 0; f < features; ++f) row[f] = uniform01(rng);
    d.rows.push_back(std::move(row));
  }
  return d;
}

}  // namespace cfattr
