#pragma once

#include <cstdint>
#include <numeric>
#include <ostream>
#include <string>

#include "cfattr/errors.hpp"

namespace cfattr {

// Exact fraction arithmetic for attribution values. Denominators that occur
// here are bounded by lcm(1..25) times small set sizes, which fits in 64 bits
// after reduction; intermediates go through 128-bit integers. Values that do
// not fit after reduction raise capacity_error rather than losing precision.
class rational {
 public:
  constexpr rational() : num_(0), den_(1) {}
  constexpr rational(std::int64_t value) : num_(value), den_(1) {}
  rational(std::int64_t num, std::int64_t den) { assign(num, den); }

  static rational from_int128(__int128 num, __int128 den) {
    if (den == 0) throw contract_error("rational: zero denominator");
    if (den < 0) {
      num = -num;
      den = -den;
    }
    __int128 g = gcd128(num < 0 ? -num : num, den);
    if (g > 1) {
      num /= g;
      den /= g;
    }
    if (num > kMax || num < -kMax || den > kMax)
      throw capacity_error("rational: value does not fit in 64 bits after reduction");
    rational r;
    r.num_ = static_cast<std::int64_t>(num);
    r.den_ = static_cast<std::int64_t>(den);
    return r;
  }

  std::int64_t num() const { return num_; }
  std::int64_t den() const { return den_; }

  double to_double() const { return static_cast<double>(num_) / static_cast<double>(den_); }

  rational operator+(const rational& o) const {
    return from_int128(i128(num_) * o.den_ + i128(o.num_) * den_, i128(den_) * o.den_);
  }
  rational operator-(const rational& o) const {
    return from_int128(i128(num_) * o.den_ - i128(o.num_) * den_, i128(den_) * o.den_);
  }
  rational operator*(const rational& o) const {
    return from_int128(i128(num_) * o.num_, i128(den_) * o.den_);
  }
  rational operator/(const rational& o) const {
    if (o.num_ == 0) throw contract_error("rational: division by zero");
    return from_int128(i128(num_) * o.den_, i128(den_) * o.num_);
  }
  rational operator-() const {
    rational r;
    r.num_ = -num_;
    r.den_ = den_;
    return r;
  }
  rational& operator+=(const rational& o) { return *this = *this + o; }
  rational& operator-=(const rational& o) { return *this = *this - o; }

  bool operator==(const rational& o) const { return num_ == o.num_ && den_ == o.den_; }
  bool operator!=(const rational& o) const { return !(*this == o); }
  bool operator<(const rational& o) const { return i128(num_) * o.den_ < i128(o.num_) * den_; }
  bool operator<=(const rational& o) const { return i128(num_) * o.den_ <= i128(o.num_) * den_; }
  bool operator>(const rational& o) const { return o < *this; }
  bool operator>=(const rational& o) const { return o <= *this; }

  std::string str() const {
    if (den_ == 1) return std::to_string(num_);
    return std::to_string(num_) + "/" + std::to_string(den_);
  }

  friend std::ostream& operator<<(std::ostream& os, const rational& r) { return os << r.str(); }

 private:
  static constexpr std::int64_t kMax = INT64_MAX;
  static __int128 i128(std::int64_t v) { return static_cast<__int128>(v); }

  static __int128 gcd128(__int128 a, __int128 b) {
    while (b != 0) {
      __int128 t = a % b;
      a = b;
      b = t;
    }
    return a;
  }

  void assign(std::int64_t num, std::int64_t den) {
    *this = from_int128(num, den);
  }

  std::int64_t num_;
  std::int64_t den_;
};

}  // namespace cfattr
