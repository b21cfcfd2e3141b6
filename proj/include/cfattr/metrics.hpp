#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "cfattr/attribution.hpp"
#include "cfattr/counterfactual.hpp"
#include "cfattr/random.hpp"

namespace cfattr {

// ---------------------------------------------------------------------------
// Rankings
// ---------------------------------------------------------------------------

// Feature order underlying all agreement metrics: descending by signed
// attribution value, ties broken by ascending feature index. A magnitude
// variant exists because SHAP values are signed while frequencies are not.
inline std::vector<int> ranking(const attribution_vector& values, bool by_magnitude = false) {
  std::vector<int> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    const double va = by_magnitude ? std::abs(values[a]) : values[a];
    const double vb = by_magnitude ? std::abs(values[b]) : values[b];
    if (va != vb) return va > vb;
    return a < b;
  });
  return order;
}

// ---------------------------------------------------------------------------
// Rank-correlation and agreement metrics
// ---------------------------------------------------------------------------

struct correlation_result {
  double value = 0.0;
  bool defined = false;  // false when either side is constant
};

// Tie-corrected Kendall tau (tau-b) over attribution values.
inline correlation_result kendall_tau(const attribution_vector& a, const attribution_vector& b) {
  if (a.size() != b.size()) throw contract_error("kendall_tau: dimension mismatch");
  const int n = static_cast<int>(a.size());
  std::int64_t concordant = 0, discordant = 0, ties_a = 0, ties_b = 0;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      const double da = a[i] - a[j];
      const double db = b[i] - b[j];
      if (da == 0.0 && db == 0.0) continue;
      if (da == 0.0)
        ++ties_a;
      else if (db == 0.0)
        ++ties_b;
      else if ((da > 0.0) == (db > 0.0))
        ++concordant;
      else
        ++discordant;
    }
  const double denom_a = static_cast<double>(concordant + discordant + ties_a);
  const double denom_b = static_cast<double>(concordant + discordant + ties_b);
  if (denom_a == 0.0 || denom_b == 0.0) return {0.0, false};
  return {static_cast<double>(concordant - discordant) / std::sqrt(denom_a * denom_b), true};
}

namespace detail {

inline std::vector<double> midranks(const attribution_vector& v) {
  const int n = static_cast<int>(v.size());
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) { return v[a] > v[b]; });
  std::vector<double> ranks(n);
  int i = 0;
  while (i < n) {
    int j = i;
    while (j + 1 < n && v[order[j + 1]] == v[order[i]]) ++j;
    const double mid = 0.5 * (i + j) + 1.0;
    for (int t = i; t <= j; ++t) ranks[order[t]] = mid;
    i = j + 1;
  }
  return ranks;
}

}  // namespace detail

// Spearman rank correlation: Pearson over midranks.
inline correlation_result spearman(const attribution_vector& a, const attribution_vector& b) {
  if (a.size() != b.size()) throw contract_error("spearman: dimension mismatch");
  auto ra = detail::midranks(a);
  auto rb = detail::midranks(b);
  const double n = static_cast<double>(a.size());
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    ma += ra[i];
    mb += rb[i];
  }
  ma /= n;
  mb /= n;
  double cov = 0.0, va = 0.0, vb = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    cov += (ra[i] - ma) * (rb[i] - mb);
    va += (ra[i] - ma) * (ra[i] - ma);
    vb += (rb[i] - mb) * (rb[i] - mb);
  }
  if (va == 0.0 || vb == 0.0) return {0.0, false};
  return {cov / std::sqrt(va * vb), true};
}

// Fraction of shared features among the two top-k sets.
inline double feature_agreement(const attribution_vector& a, const attribution_vector& b, int k) {
  if (a.size() != b.size()) throw contract_error("feature_agreement: dimension mismatch");
  if (k < 1 || k > static_cast<int>(a.size()))
    throw contract_error("feature_agreement: k out of range");
  auto ra = ranking(a);
  auto rb = ranking(b);
  std::vector<char> in_a(a.size(), 0);
  for (int d = 0; d < k; ++d) in_a[ra[d]] = 1;
  int shared = 0;
  for (int d = 0; d < k; ++d) shared += in_a[rb[d]];
  return static_cast<double>(shared) / k;
}

// Fraction of the first k positions holding the same feature on both sides.
inline double rank_agreement(const attribution_vector& a, const attribution_vector& b, int k) {
  if (a.size() != b.size()) throw contract_error("rank_agreement: dimension mismatch");
  if (k < 1 || k > static_cast<int>(a.size()))
    throw contract_error("rank_agreement: k out of range");
  auto ra = ranking(a);
  auto rb = ranking(b);
  int same = 0;
  for (int d = 0; d < k; ++d) same += ra[d] == rb[d] ? 1 : 0;
  return static_cast<double>(same) / k;
}

// Rank-biased overlap over the full rankings, with the standard residual
// extrapolation beyond the truncation depth m (both lists rank the same item
// set, so the overlap fraction stays at its depth-m value).
inline double rbo(const attribution_vector& a, const attribution_vector& b, double p = 0.9) {
  if (a.size() != b.size()) throw contract_error("rbo: dimension mismatch");
  if (!(p > 0.0 && p < 1.0)) throw contract_error("rbo: persistence must lie in (0,1)");
  const int m = static_cast<int>(a.size());
  if (m == 0) return 1.0;
  auto ra = ranking(a);
  auto rb = ranking(b);
  std::vector<char> seen_a(m, 0), seen_b(m, 0);
  int overlap = 0;
  double sum = 0.0;
  double pw = 1.0;  // p^(d-1)
  double agreement_m = 0.0;
  for (int d = 1; d <= m; ++d) {
    const int ia = ra[d - 1], ib = rb[d - 1];
    if (seen_b[ia]) ++overlap;
    if (seen_a[ib]) ++overlap;
    if (ia == ib) ++overlap;
    seen_a[ia] = 1;
    seen_b[ib] = 1;
    const double agreement = static_cast<double>(overlap) / d;
    sum += pw * agreement;
    pw *= p;
    if (d == m) agreement_m = agreement;
  }
  return (1.0 - p) * sum + agreement_m * std::pow(p, m);
}

// ---------------------------------------------------------------------------
// Explanation-quality metrics
// ---------------------------------------------------------------------------

namespace detail {

inline std::vector<char> topk_mask(const explanation& e, int k) {
  auto order = ranking(e.values);
  std::vector<char> mask(e.values.size(), 0);
  for (int d = 0; d < std::min<int>(k, order.size()); ++d) mask[order[d]] = 1;
  return mask;
}

}  // namespace detail

// Can a valid counterfactual be produced by modifying only the top-k ranked
// features? Each supplied counterfactual is projected onto the top-k set
// (remaining coordinates restored to the query's values).
inline bool necessity(const model& m, const instance& x, const explanation& e,
                      const counterfactual_set& cfs, int k) {
  auto mask = detail::topk_mask(e, k);
  const int own = m.decide(x);
  for (const auto& item : cfs.items) {
    instance projected = x;
    for (int i : item.changed.members())
      if (mask[i]) projected[i] = item.point[i];
    if (m.decide(projected) != own) return true;
  }
  return false;
}

// Do all counterfactuals become invalid once the top-k features are frozen at
// the query's values (everything else still taken from the counterfactual)?
inline bool sufficiency(const model& m, const instance& x, const explanation& e,
                        const counterfactual_set& cfs, int k) {
  auto mask = detail::topk_mask(e, k);
  const int own = m.decide(x);
  for (const auto& item : cfs.items) {
    instance frozen = item.point;
    for (std::size_t i = 0; i < frozen.size(); ++i)
      if (mask[i]) frozen[i] = x[i];
    if (m.decide(frozen) != own) return false;
  }
  return true;
}

enum class recourse_action { random, proportional };

struct recourse_result {
  instance point;
  bool valid = false;
};

// Moves the top-k features from the query toward the nearest counterfactual.
// Per-feature interpolation fractions are either uniform draws (random) or
// the normalized attribution magnitudes (proportional); the step doubles
// until the decision flips or every coordinate reaches the counterfactual.
inline recourse_result induce_recourse(const model& m, const quantile_map& qm, const instance& x,
                                       const explanation& e, const counterfactual_set& cfs, int k,
                                       recourse_action action, std::mt19937_64& rng) {
  // Nearest member by total quantile shift, ties by position in the set.
  std::size_t best = 0;
  double best_d = total_quantile_shift(qm, x, cfs.items[0].point);
  for (std::size_t i = 1; i < cfs.items.size(); ++i) {
    const double d = total_quantile_shift(qm, x, cfs.items[i].point);
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  const instance& target = cfs.items[best].point;

  auto order = ranking(e.values);
  const int kk = std::min<int>(k, order.size());
  std::vector<int> top(order.begin(), order.begin() + kk);

  // Fractions are drawn per rank position so paired comparisons across
  // methods share the same randomness.
  std::vector<double> fraction(kk, 1.0);
  if (action == recourse_action::random) {
    for (int d = 0; d < kk; ++d) fraction[d] = uniform01(rng);
  } else {
    double peak = 0.0;
    for (int d = 0; d < kk; ++d) peak = std::max(peak, std::abs(e.values[top[d]]));
    for (int d = 0; d < kk; ++d)
      fraction[d] = peak > 0.0 ? std::abs(e.values[top[d]]) / peak : 1.0;
  }

  const int own = m.decide(x);
  instance candidate = x;
  for (double step = 1.0;; step *= 2.0) {
    bool saturated = true;
    candidate = x;
    for (int d = 0; d < kk; ++d) {
      const int f = top[d];
      const double lambda = std::min(step * fraction[d], 1.0);
      candidate[f] = x[f] + lambda * (target[f] - x[f]);
      if (lambda < 1.0 && target[f] != x[f]) saturated = false;
    }
    if (m.decide(candidate) != own) return {candidate, true};
    if (saturated || step > 1e18) return {candidate, false};
  }
}

// Negative mean quantile-space distance to the five nearest dataset rows.
inline double density_score(const dataset& data, const quantile_map& qm, const instance& point,
                            int neighbors = 5) {
  if (static_cast<int>(data.size()) < neighbors)
    throw domain_error("density_score: dataset smaller than the neighborhood");
  std::vector<double> d;
  d.reserve(data.size());
  for (const auto& row : data.rows) d.push_back(qm.manhattan(point, row));
  std::nth_element(d.begin(), d.begin() + (neighbors - 1), d.end());
  double sum = 0.0;
  for (int i = 0; i < neighbors; ++i) sum += d[i];
  return -sum / neighbors;
}

// ---------------------------------------------------------------------------
// Improvement rates (method vs baseline, ties count one half)
// ---------------------------------------------------------------------------

struct paired_recourse {
  recourse_result method;
  recourse_result baseline;
};

namespace detail {

// Win/tie/loss scoring shared by both improvement metrics. Invalid recourse
// loses against valid recourse; two invalid attempts tie so that
// self-comparison stays at exactly one half.
inline double score_pair(bool a_valid, bool b_valid, double a_better_metric,
                         double b_better_metric, bool higher_is_better) {
  if (a_valid && !b_valid) return 1.0;
  if (!a_valid && b_valid) return 0.0;
  if (!a_valid && !b_valid) return 0.5;
  if (a_better_metric == b_better_metric) return 0.5;
  const bool a_wins =
      higher_is_better ? a_better_metric > b_better_metric : a_better_metric < b_better_metric;
  return a_wins ? 1.0 : 0.0;
}

}  // namespace detail

// Fraction of instances where the method's induced recourse is strictly
// cheaper (total quantile shift) than the baseline's.
inline double counterfactual_ability_improvement(
    const model& m, const dataset& data, const quantile_map& qm,
    const std::vector<instance>& queries, const std::vector<counterfactual_set>& cfs_per_query,
    const std::vector<explanation>& method_expls, const std::vector<explanation>& baseline_expls,
    int k, recourse_action action, std::uint64_t seed) {
  (void)data;
  if (queries.size() != cfs_per_query.size() || queries.size() != method_expls.size() ||
      queries.size() != baseline_expls.size())
    throw contract_error("counterfactual_ability_improvement: batch size mismatch");
  if (queries.empty()) throw contract_error("counterfactual_ability_improvement: empty batch");
  double score = 0.0;
  for (std::size_t i = 0; i < queries.size(); ++i) {
    auto rng_a = make_rng(seed, i);
    auto rng_b = make_rng(seed, i);
    auto ra = induce_recourse(m, qm, queries[i], method_expls[i], cfs_per_query[i], k, action,
                              rng_a);
    auto rb = induce_recourse(m, qm, queries[i], baseline_expls[i], cfs_per_query[i], k, action,
                              rng_b);
    const double ca = total_quantile_shift(qm, queries[i], ra.point);
    const double cb = total_quantile_shift(qm, queries[i], rb.point);
    score += detail::score_pair(ra.valid, rb.valid, ca, cb, /*higher_is_better=*/false);
  }
  return score / static_cast<double>(queries.size());
}

// Fraction of instances where the method's recourse lies in a denser region
// (five-nearest-neighbor distance) than the baseline's.
inline double plausibility_improvement(
    const model& m, const dataset& data, const quantile_map& qm,
    const std::vector<instance>& queries, const std::vector<counterfactual_set>& cfs_per_query,
    const std::vector<explanation>& method_expls, const std::vector<explanation>& baseline_expls,
    int k, recourse_action action, std::uint64_t seed) {
  if (queries.size() != cfs_per_query.size() || queries.size() != method_expls.size() ||
      queries.size() != baseline_expls.size())
    throw contract_error("plausibility_improvement: batch size mismatch");
  if (queries.empty()) throw contract_error("plausibility_improvement: empty batch");
  if (data.size() < 5) throw domain_error("plausibility_improvement: dataset has fewer than 5 rows");
  double score = 0.0;
  for (std::size_t i = 0; i < queries.size(); ++i) {
    auto rng_a = make_rng(seed, i);
    auto rng_b = make_rng(seed, i);
    auto ra = induce_recourse(m, qm, queries[i], method_expls[i], cfs_per_query[i], k, action,
                              rng_a);
    auto rb = induce_recourse(m, qm, queries[i], baseline_expls[i], cfs_per_query[i], k, action,
                              rng_b);
    const double da = density_score(data, qm, ra.point);
    const double db = density_score(data, qm, rb.point);
    score += detail::score_pair(ra.valid, rb.valid, da, db, /*higher_is_better=*/true);
  }
  return score / static_cast<double>(queries.size());
}

// ---------------------------------------------------------------------------
// Pairwise method-vs-method matrices
// ---------------------------------------------------------------------------

struct metric_report {
  std::string metric;
  int k = 0;  // 0 when the metric takes no depth parameter
  std::vector<std::string> methods;
  std::vector<std::vector<double>> matrix;  // mean over instances
  std::vector<std::vector<double>> stddev;
};

// Mean pairwise metric between explanation batches (one batch per method,
// aligned instance sets). Instances where a correlation is undefined on
// either side are skipped for that pair.
inline metric_report pairwise_matrix(const std::vector<std::string>& methods,
                                     const std::vector<std::vector<explanation>>& batches,
                                     const std::string& metric, int k = 0, double rbo_p = 0.9) {
  if (methods.size() != batches.size()) throw contract_error("pairwise_matrix: method mismatch");
  if (batches.empty()) throw contract_error("pairwise_matrix: no batches");
  const std::size_t n = batches[0].size();
  for (const auto& b : batches)
    if (b.size() != n) throw contract_error("pairwise_matrix: batch size mismatch");

  auto pair_value = [&](const explanation& a, const explanation& b,
                        bool& defined) -> double {
    defined = true;
    if (metric == "kendall-tau") {
      auto r = kendall_tau(a.values, b.values);
      defined = r.defined;
      return r.value;
    }
    if (metric == "spearman") {
      auto r = spearman(a.values, b.values);
      defined = r.defined;
      return r.value;
    }
    if (metric == "feature-agreement") return feature_agreement(a.values, b.values, k);
    if (metric == "rank-agreement") return rank_agreement(a.values, b.values, k);
    if (metric == "rbo") return rbo(a.values, b.values, rbo_p);
    throw contract_error("pairwise_matrix: unknown metric '" + metric + "'");
  };

  const std::size_t nm = methods.size();
  metric_report report;
  report.metric = metric;
  report.k = k;
  report.methods = methods;
  report.matrix.assign(nm, std::vector<double>(nm, 0.0));
  report.stddev.assign(nm, std::vector<double>(nm, 0.0));
  for (std::size_t a = 0; a < nm; ++a)
    for (std::size_t b = 0; b < nm; ++b) {
      double sum = 0.0, sumsq = 0.0;
      std::size_t count = 0;
      for (std::size_t i = 0; i < n; ++i) {
        bool defined = true;
        const double v = pair_value(batches[a][i], batches[b][i], defined);
        if (!defined) continue;
        sum += v;
        sumsq += v * v;
        ++count;
      }
      const double mean = count ? sum / count : 0.0;
      report.matrix[a][b] = mean;
      report.stddev[a][b] = count ? std::sqrt(std::max(0.0, sumsq / count - mean * mean)) : 0.0;
    }
  return report;
}

}  // namespace cfattr
