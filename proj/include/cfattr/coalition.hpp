#pragma once

#include <bit>
#include <cstdint>
#include <initializer_list>
#include <string>
#include <vector>

#include "cfattr/errors.hpp"

namespace cfattr {

inline constexpr int kMaxPlayers = 30;

// A subset of the players/features 0..m-1, stored as a bitmask. Every game
// evaluation, sparsity predicate and family enumeration works on these.
class coalition {
 public:
  coalition() : bits_(0), players_(0) {}

  coalition(std::uint32_t bits, int players) : bits_(bits), players_(players) {
    if (players < 0 || players > kMaxPlayers)
      throw capacity_error("coalition: player count " + std::to_string(players) +
                           " outside [0, " + std::to_string(kMaxPlayers) + "]");
    if (players < 32 && (bits >> players) != 0)
      throw contract_error("coalition: bit set at index >= player count");
  }

  static coalition empty(int players) { return coalition(0, players); }
  static coalition full(int players) {
    return coalition(players == 0 ? 0u : ((1u << players) - 1u), players);
  }
  static coalition of(std::initializer_list<int> members, int players) {
    std::uint32_t bits = 0;
    for (int i : members) bits |= (1u << i);
    return coalition(bits, players);
  }

  std::uint32_t bits() const { return bits_; }
  int players() const { return players_; }
  int cardinality() const { return std::popcount(bits_); }
  bool is_empty() const { return bits_ == 0; }

  bool contains(int i) const { return (bits_ >> i) & 1u; }
  bool is_subset_of(const coalition& o) const { return (bits_ & ~o.bits_) == 0; }

  coalition with(int i) const { return coalition(bits_ | (1u << i), players_); }
  coalition without(int i) const { return coalition(bits_ & ~(1u << i), players_); }
  coalition complement() const { return coalition(full(players_).bits_ & ~bits_, players_); }

  std::vector<int> members() const {
    std::vector<int> out;
    out.reserve(cardinality());
    for (std::uint32_t b = bits_; b != 0; b &= b - 1)
      out.push_back(std::countr_zero(b));
    return out;
  }

  bool operator==(const coalition& o) const { return bits_ == o.bits_ && players_ == o.players_; }
  bool operator!=(const coalition& o) const { return !(*this == o); }
  bool operator<(const coalition& o) const { return bits_ < o.bits_; }

  std::string str() const {
    std::string s = "{";
    bool first = true;
    for (int i : members()) {
      if (!first) s += ",";
      s += std::to_string(i);
      first = false;
    }
    return s + "}";
  }

 private:
  std::uint32_t bits_;
  int players_;
};

// Visits every subset of `mask` (including empty and mask itself).
template <typename Fn>
void for_each_subset(std::uint32_t mask, Fn&& fn) {
  std::uint32_t sub = mask;
  while (true) {
    fn(sub);
    if (sub == 0) break;
    sub = (sub - 1) & mask;
  }
}

}  // namespace cfattr
