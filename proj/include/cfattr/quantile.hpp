#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "cfattr/dataset.hpp"
#include "cfattr/errors.hpp"

namespace cfattr {

// Per-feature empirical CDF support. The transform uses the midrank
// convention q(v) = (#{u < v} + 0.5 #{u == v}) / n, which is monotone,
// well-defined on ties and maps a constant column to 0.5.
class quantile_map {
 public:
  quantile_map() = default;

  static quantile_map fit(const dataset& data) {
    if (data.empty()) throw domain_error("quantile_map: empty dataset");
    quantile_map qm;
    qm.columns_.resize(data.features());
    for (int f = 0; f < data.features(); ++f) {
      auto& col = qm.columns_[f];
      col.reserve(data.size());
      for (const auto& row : data.rows) col.push_back(row[f]);
      std::sort(col.begin(), col.end());
    }
    return qm;
  }

  int features() const { return static_cast<int>(columns_.size()); }

  double to_quantile(int feature, double v) const {
    if (feature < 0 || feature >= features())
      throw contract_error("quantile_map: feature index out of range");
    const auto& col = columns_[feature];
    const auto lo = std::lower_bound(col.begin(), col.end(), v);
    const auto hi = std::upper_bound(lo, col.end(), v);
    const double below = static_cast<double>(lo - col.begin());
    const double equal = static_cast<double>(hi - lo);
    return (below + 0.5 * equal) / static_cast<double>(col.size());
  }

  // L1 distance in quantile coordinates.
  double manhattan(const instance& a, const instance& b) const {
    if (a.size() != b.size() || static_cast<int>(a.size()) != features())
      throw contract_error("quantile_map: dimension mismatch");
    double d = 0.0;
    for (int f = 0; f < features(); ++f)
      d += std::abs(to_quantile(f, a[f]) - to_quantile(f, b[f]));
    return d;
  }

 private:
  std::vector<std::vector<double>> columns_;
};

inline quantile_map fit_quantile_map(const dataset& data) { return quantile_map::fit(data); }

inline double to_quantile(const quantile_map& qm, int feature, double v) {
  return qm.to_quantile(feature, v);
}

// Proximity of a counterfactual to its query: sum of per-feature quantile
// shifts.
inline double total_quantile_shift(const quantile_map& qm, const instance& x, const instance& xp) {
  return qm.manhattan(x, xp);
}

}  // namespace cfattr
