#include <catch2/catch_amalgamated.hpp>

#include "cfattr/metrics.hpp"
#include "cfattr/random.hpp"
#include "cfattr/sparsity.hpp"

using namespace cfattr;

namespace {

model toy_model() {
  auto f = bool_expr::all_of(
      {bool_expr::atom(0, cmp_op::gt, 0.5),
       bool_expr::any_of({bool_expr::atom(1, cmp_op::gt, 0.5),
                          bool_expr::all_of({bool_expr::atom(2, cmp_op::gt, 0.5),
                                             bool_expr::atom(3, cmp_op::gt, 0.5)})})});
  return model::boolean(std::move(f), 6);
}

const instance kToyQuery{1, 1, 1, 1, 1, 1};
const instance kToyCf{0, 0, 0, 0, 0, 1};

explanation fake_explanation(attribution_vector v) {
  explanation e;
  e.method = "fake";
  e.values = std::move(v);
  return e;
}

quantile_map toy_qmap() {
  dataset d;
  d.feature_names = {"a", "b", "c", "d", "e", "f"};
  d.rows.push_back(kToyQuery);
  d.rows.push_back(kToyCf);
  return fit_quantile_map(d);
}

}  // namespace

TEST_CASE("ranking convention") {
  REQUIRE(ranking({0.5, 0.7, 0.5, -1.0}) == std::vector<int>{1, 0, 2, 3});
  REQUIRE(ranking({-2.0, 1.0}, true) == std::vector<int>{0, 1});  // magnitude option
}

TEST_CASE("kendall tau golden values") {
  REQUIRE(kendall_tau({3, 2, 1}, {3, 2, 1}).value == 1.0);
  REQUIRE(kendall_tau({3, 2, 1}, {-3, -2, -1}).value == -1.0);
  auto r = kendall_tau({3, 2, 1}, {3, 1, 2});
  REQUIRE(r.defined);
  REQUIRE(r.value == Catch::Approx(1.0 / 3.0));
  REQUIRE(!kendall_tau({1, 1, 1}, {3, 2, 1}).defined);
}

TEST_CASE("spearman golden values") {
  REQUIRE(spearman({3, 2, 1}, {3, 2, 1}).value == 1.0);
  REQUIRE(spearman({3, 2, 1}, {1, 2, 3}).value == -1.0);
  auto r = spearman({3, 2, 1}, {3, 1, 2});
  REQUIRE(r.defined);
  REQUIRE(r.value == Catch::Approx(0.5));
  REQUIRE(!spearman({2, 2}, {1, 2}).defined);
}

TEST_CASE("correlation metrics are symmetric") {
  auto rng = make_rng(3);
  for (int t = 0; t < 25; ++t) {
    attribution_vector a(6), b(6);
    for (auto& v : a) v = uniform01(rng);
    for (auto& v : b) v = uniform01(rng);
    REQUIRE(kendall_tau(a, b).value == kendall_tau(b, a).value);
    REQUIRE(spearman(a, b).value == Catch::Approx(spearman(b, a).value).margin(1e-14));
    REQUIRE(rbo(a, b) == Catch::Approx(rbo(b, a)).margin(1e-14));
    for (int k = 1; k <= 6; ++k)
      REQUIRE(feature_agreement(a, b, k) == feature_agreement(b, a, k));
  }
}

TEST_CASE("feature agreement golden values") {
  attribution_vector bin{7.0 / 12, 3.0 / 12, 1.0 / 12, 1.0 / 12, 0, 0};
  attribution_vector other{0, 0, 1, 1, 0, 0};
  REQUIRE(feature_agreement(bin, bin, 3) == 1.0);
  REQUIRE(feature_agreement(bin, other, 2) == 0.0);  // {0,1} vs {2,3}
  REQUIRE_THROWS_AS(feature_agreement(bin, other, 0), contract_error);
  REQUIRE_THROWS_AS(feature_agreement(bin, other, 7), contract_error);
}

TEST_CASE("rank agreement golden values") {
  attribution_vector a{3, 2, 1};
  attribution_vector b{3, 1, 2};  // rankings (0,1,2) vs (0,2,1)
  REQUIRE(rank_agreement(a, a, 3) == 1.0);
  REQUIRE(rank_agreement(a, b, 3) == Catch::Approx(1.0 / 3.0));
}

TEST_CASE("feature agreement dominates rank agreement") {
  auto rng = make_rng(47);
  for (int t = 0; t < 40; ++t) {
    attribution_vector a(8), b(8);
    for (auto& v : a) v = uniform01(rng);
    for (auto& v : b) v = uniform01(rng);
    for (int k = 1; k <= 8; ++k)
      REQUIRE(feature_agreement(a, b, k) >= rank_agreement(a, b, k));
  }
}

TEST_CASE("rbo golden values and properties") {
  attribution_vector a{2, 1};
  attribution_vector b{1, 2};
  REQUIRE(rbo(a, a, 0.5) == 1.0);
  REQUIRE(rbo(a, b, 0.5) == Catch::Approx(0.5));
  // Tiny persistence concentrates all weight on depth 1.
  REQUIRE(rbo(a, b, 1e-9) == Catch::Approx(0.0).margin(1e-6));
  REQUIRE_THROWS_AS(rbo(a, b, 1.0), contract_error);
  REQUIRE_THROWS_AS(rbo(a, b, 0.0), contract_error);

  // Prefix-identical rankings beat prefix-disjoint ones at equal p.
  attribution_vector base{8, 7, 6, 5, 4, 3, 2, 1};
  attribution_vector same_prefix{8, 7, 6, 5, 1, 2, 3, 4};
  attribution_vector diff_prefix{1, 2, 3, 4, 8, 7, 6, 5};
  REQUIRE(rbo(base, same_prefix, 0.9) > rbo(base, diff_prefix, 0.9));
}

TEST_CASE("necessity on the running example") {
  auto m = toy_model();
  auto cfs = counterfactual_set::build(m, kToyQuery, {kToyCf});
  // Ranking led by the necessary feature 0.
  auto led_by_0 = fake_explanation({1.0, 0.5, 0.1, 0.1, 0, 0});
  REQUIRE(necessity(m, kToyQuery, led_by_0, cfs, 1));
  // Ranking led by the spurious feature 4.
  auto led_by_4 = fake_explanation({0, 0, 0, 0, 1.0, 0.5});
  REQUIRE(!necessity(m, kToyQuery, led_by_4, cfs, 1));
  // Full projection is the original counterfactual.
  REQUIRE(necessity(m, kToyQuery, led_by_4, cfs, 6));
}

TEST_CASE("sufficiency on the running example") {
  auto m = toy_model();
  auto cfs = counterfactual_set::build(m, kToyQuery, {kToyCf});
  auto led_by_01 = fake_explanation({1.0, 0.9, 0.1, 0.1, 0, 0});
  // Freezing {0,1} pins the prediction at the query class.
  REQUIRE(sufficiency(m, kToyQuery, led_by_01, cfs, 2));
  // Freezing feature 0 alone is not enough: {2,3} can still drop the OR arm.
  REQUIRE(!sufficiency(m, kToyQuery, led_by_01, cfs, 1));
  REQUIRE(sufficiency(m, kToyQuery, led_by_01, cfs, 6));
}

TEST_CASE("necessity and sufficiency are monotone in k on monotone fixtures") {
  auto m = toy_model();
  auto cfs = counterfactual_set::build(m, kToyQuery, {kToyCf, {0, 0, 1, 1, 1, 1}});
  auto rng = make_rng(53);
  for (int t = 0; t < 20; ++t) {
    attribution_vector v(6);
    for (auto& x : v) x = uniform01(rng);
    auto e = fake_explanation(v);
    bool prev_nec = false, prev_suf = false;
    for (int k = 1; k <= 6; ++k) {
      const bool nec = necessity(m, kToyQuery, e, cfs, k);
      const bool suf = sufficiency(m, kToyQuery, e, cfs, k);
      if (prev_nec) REQUIRE(nec);
      if (prev_suf) REQUIRE(suf);
      prev_nec = nec;
      prev_suf = suf;
    }
    REQUIRE(necessity(m, kToyQuery, e, cfs, 6));
    REQUIRE(sufficiency(m, kToyQuery, e, cfs, 6));
  }
}

TEST_CASE("recourse reaches the nearest counterfactual at full depth") {
  auto m = toy_model();
  auto qm = toy_qmap();
  auto cfs = counterfactual_set::build(m, kToyQuery, {kToyCf});
  auto e = fake_explanation({6, 5, 4, 3, 2, 1});
  auto rng = make_rng(0, 0);
  auto r = induce_recourse(m, qm, kToyQuery, e, cfs, 6, recourse_action::random, rng);
  REQUIRE(r.valid);
  // k = 0 leaves the query untouched and flags the failure.
  auto rng2 = make_rng(0, 0);
  auto r0 = induce_recourse(m, qm, kToyQuery, e, cfs, 0, recourse_action::random, rng2);
  REQUIRE(!r0.valid);
  REQUIRE(r0.point == kToyQuery);
}

TEST_CASE("recourse along the top feature flips the toy model") {
  auto m = toy_model();
  auto qm = toy_qmap();
  auto cfs = counterfactual_set::build(m, kToyQuery, {kToyCf});
  auto e = fake_explanation({1.0, 0, 0, 0, 0, 0});
  auto rng = make_rng(1, 0);
  auto r = induce_recourse(m, qm, kToyQuery, e, cfs, 1, recourse_action::proportional, rng);
  REQUIRE(r.valid);
  REQUIRE(r.point == instance{0, 1, 1, 1, 1, 1});
}

TEST_CASE("recourse is deterministic under a fixed seed") {
  auto m = toy_model();
  auto qm = toy_qmap();
  auto cfs = counterfactual_set::build(m, kToyQuery, {kToyCf});
  auto e = fake_explanation({0.3, 0.8, 0.2, 0.9, 0.1, 0.0});
  auto r1 = make_rng(7, 3);
  auto r2 = make_rng(7, 3);
  auto a = induce_recourse(m, qm, kToyQuery, e, cfs, 3, recourse_action::random, r1);
  auto b = induce_recourse(m, qm, kToyQuery, e, cfs, 3, recourse_action::random, r2);
  REQUIRE(a.point == b.point);
  REQUIRE(a.valid == b.valid);
}

TEST_CASE("self-comparison improvement rates are exactly one half") {
  auto rng = make_rng(61);
  auto m = random_tree_ensemble(4, 3, 3, rng, 0.0);
  auto data = random_dataset(4, 80, rng);
  auto qm = fit_quantile_map(data);

  std::vector<instance> queries;
  std::vector<counterfactual_set> sets;
  std::vector<explanation> expls;
  for (std::size_t r = 0; r < data.size() && queries.size() < 12; ++r) {
    try {
      auto knn = knn_counterfactuals(m, data, qm, data.rows[r], 4);
      queries.push_back(data.rows[r]);
      sets.push_back(knn.set);
      expls.push_back(bin_cf_shap(m, data.rows[r], knn.set));
    } catch (const domain_error&) {
      continue;
    }
  }
  REQUIRE(queries.size() == 12);
  const double ca = counterfactual_ability_improvement(m, data, qm, queries, sets, expls, expls,
                                                       3, recourse_action::random, 5);
  REQUIRE(ca == 0.5);
  const double pl = plausibility_improvement(m, data, qm, queries, sets, expls, expls, 3,
                                             recourse_action::random, 5);
  REQUIRE(pl == 0.5);

  // Determinism across runs with the same seed.
  std::vector<explanation> freq;
  for (std::size_t i = 0; i < queries.size(); ++i) freq.push_back(cf_freq(queries[i], sets[i]));
  const double r1 = counterfactual_ability_improvement(m, data, qm, queries, sets, freq, expls,
                                                       2, recourse_action::random, 11);
  const double r2 = counterfactual_ability_improvement(m, data, qm, queries, sets, freq, expls,
                                                       2, recourse_action::random, 11);
  REQUIRE(r1 == r2);
  REQUIRE((r1 >= 0.0 && r1 <= 1.0));
}

TEST_CASE("density score prefers cluster points over outliers") {
  // Quantile space spreads distinct values uniformly by rank; density
  // contrast comes from repeated values, so the cluster is an exact tie.
  dataset data;
  data.feature_names = {"a", "b"};
  for (int i = 0; i < 30; ++i) data.rows.push_back({0.5, 0.5});
  data.rows.push_back({5.0, 5.0});
  auto qm = fit_quantile_map(data);
  REQUIRE(density_score(data, qm, {0.5, 0.5}) > density_score(data, qm, {5.0, 5.0}));
  dataset tiny;
  tiny.feature_names = {"a"};
  tiny.rows = {{1.0}, {2.0}};
  auto qt = fit_quantile_map(tiny);
  REQUIRE_THROWS_AS(density_score(tiny, qt, {1.0}), domain_error);
}

TEST_CASE("pairwise matrix shapes and sanity") {
  auto m = toy_model();
  auto cfs = counterfactual_set::build(m, kToyQuery, {kToyCf});
  std::vector<explanation> batch_a{bin_cf_shap(m, kToyQuery, cfs)};
  std::vector<explanation> batch_b{norm_cf_freq(kToyQuery, cfs)};

  SECTION("single method is the 1x1 identity") {
    auto rep = pairwise_matrix({"bin-cf-shap"}, {batch_a}, "kendall-tau");
    REQUIRE(rep.matrix.size() == 1);
    REQUIRE(rep.matrix[0][0] == 1.0);
  }
  SECTION("identical batches have unit off-diagonals") {
    auto rep = pairwise_matrix({"a", "b"}, {batch_a, batch_a}, "spearman");
    REQUIRE(rep.matrix[0][1] == 1.0);
    REQUIRE(rep.matrix[1][0] == 1.0);
  }
  SECTION("three methods give a symmetric matrix") {
    std::vector<explanation> batch_c{cf_freq(kToyQuery, cfs)};
    for (const char* metric : {"kendall-tau", "spearman", "rbo"}) {
      auto rep = pairwise_matrix({"a", "b", "c"}, {batch_a, batch_b, batch_c}, metric);
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
          REQUIRE(rep.matrix[i][j] == Catch::Approx(rep.matrix[j][i]).margin(1e-12));
    }
    auto fa = pairwise_matrix({"a", "b", "c"}, {batch_a, batch_b, batch_c},
                              "feature-agreement", 3);
    REQUIRE(fa.k == 3);
  }
  SECTION("batch size mismatch is rejected") {
    std::vector<explanation> two{batch_a[0], batch_a[0]};
    REQUIRE_THROWS_AS(pairwise_matrix({"a", "b"}, {batch_a, two}, "kendall-tau"),
                      contract_error);
  }
}
