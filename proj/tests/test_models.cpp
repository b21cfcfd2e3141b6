#include <catch2/catch_amalgamated.hpp>

#include <sstream>

#include "cfattr/model.hpp"
#include "cfattr/quantile.hpp"
#include "cfattr/random.hpp"

using namespace cfattr;

namespace {

// Running-example model over six features: prediction is
// 1[x0 and (x1 or (x2 and x3))]; features 4 and 5 are unused.
model toy_model() {
  auto f = bool_expr::all_of(
      {bool_expr::atom(0, cmp_op::gt, 0.5),
       bool_expr::any_of({bool_expr::atom(1, cmp_op::gt, 0.5),
                          bool_expr::all_of({bool_expr::atom(2, cmp_op::gt, 0.5),
                                             bool_expr::atom(3, cmp_op::gt, 0.5)})})});
  return model::boolean(std::move(f), 6);
}

}  // namespace

TEST_CASE("linear model output and decision") {
  auto m = model::linear({1.0, 1.0}, 0.0, 4.0);
  REQUIRE(m.output({2.0, 3.0}) == 5.0);
  REQUIRE(m.decide({2.0, 3.0}) == 1);
  REQUIRE_THROWS_AS(m.output({1.0}), contract_error);
}

TEST_CASE("decision uses strict inequality") {
  auto m = model::linear({1.0}, 0.0, 0.5);
  REQUIRE(m.decide({0.7}) == 1);
  REQUIRE(m.decide({0.5}) == 0);  // boundary classifies as 0
}

TEST_CASE("single tree and additive ensemble") {
  decision_tree t;
  t.nodes.push_back({false, 0.0, 0, 0.5, 1, 2});
  t.nodes.push_back({true, 0.0});
  t.nodes.push_back({true, 1.0});
  auto one = model::tree_ensemble({t}, 1, 0.5);
  REQUIRE(one.output({1.0}) == 1.0);
  REQUIRE(one.output({0.2}) == 0.0);
  auto two = model::tree_ensemble({t, t}, 1, 0.5);
  REQUIRE(two.output({1.0}) == 2.0);
}

TEST_CASE("boolean toy model truth table points") {
  auto m = toy_model();
  REQUIRE(m.decide({1, 1, 1, 1, 1, 1}) == 1);
  REQUIRE(m.decide({0, 1, 1, 1, 1, 1}) == 0);
  REQUIRE(m.decide({1, 0, 1, 1, 0, 1}) == 1);
  REQUIRE(m.decide({1, 0, 1, 0, 1, 1}) == 0);
  REQUIRE(m.decide({0, 0, 0, 0, 0, 1}) == 0);
}

TEST_CASE("sigmoid link") {
  auto m = model::linear({1.0}, 0.0, 0.5, link_fn::sigmoid);
  REQUIRE(m.output({0.0}) == Catch::Approx(0.5));
  REQUIRE(m.decide({0.1}) == 1);
  REQUIRE(m.decide({-0.1}) == 0);
}

TEST_CASE("hybrid point construction") {
  instance x{1, 1, 1, 1, 1, 1}, xp{0, 0, 0, 0, 0, 1};
  REQUIRE(hybrid(x, xp, coalition::full(6)) == x);
  REQUIRE(hybrid(x, xp, coalition::empty(6)) == xp);
  REQUIRE(hybrid(x, xp, coalition::of({0}, 6)) == instance{1, 0, 0, 0, 0, 1});
  REQUIRE_THROWS_AS(hybrid(x, instance{1.0}, coalition::full(6)), contract_error);
}

TEST_CASE("hybrid complementarity") {
  auto rng = make_rng(5);
  for (int t = 0; t < 20; ++t) {
    const int m = uniform_int(rng, 1, 10);
    instance x(m), xp(m);
    for (int i = 0; i < m; ++i) {
      x[i] = uniform01(rng);
      xp[i] = uniform01(rng);
    }
    const std::uint32_t bits = static_cast<std::uint32_t>(rng()) & ((1u << m) - 1u);
    coalition s(bits, m);
    REQUIRE(hybrid(x, xp, s) == hybrid(xp, x, s.complement()));
  }
}

TEST_CASE("model document round trip") {
  auto rng = make_rng(9);
  std::vector<model> models;
  models.push_back(model::linear({1.0, 0.0}, 0.0, 0.5));
  models.push_back(toy_model());
  models.push_back(random_tree_ensemble(4, 3, 3, rng, 0.1));
  for (const auto& m : models) {
    auto doc = save_model(m);
    auto reparsed = load_model(doc);
    REQUIRE(save_model(reparsed) == doc);
    for (int t = 0; t < 50; ++t) {
      instance x(m.features());
      for (auto& v : x) v = uniform01(rng) * 2.0 - 0.5;
      REQUIRE(m.output(x) == reparsed.output(x));
      REQUIRE(m.decide(x) == reparsed.decide(x));
    }
  }
}

TEST_CASE("model document parsing errors carry locations") {
  nlohmann::json linear = {{"kind", "linear"}, {"threshold", 0.5}, {"weights", {1.0, 0.0}}};
  REQUIRE(load_model(linear).decide({1.0, 0.0}) == 1);

  SECTION("unknown kind") {
    nlohmann::json doc = {{"kind", "svm"}, {"threshold", 0.0}};
    REQUIRE_THROWS_WITH(load_model(doc), Catch::Matchers::ContainsSubstring("unknown kind"));
  }
  SECTION("malformed tree child index names the tree and node") {
    nlohmann::json doc = {
        {"kind", "tree-ensemble"},
        {"threshold", 0.0},
        {"features", 2},
        {"trees",
         {{{"nodes",
            {{{"feature", 0}, {"threshold", 0.5}, {"left", 1}, {"right", 7}},
             {{"value", 0.0}}}}}}}};
    REQUIRE_THROWS_WITH(load_model(doc), Catch::Matchers::ContainsSubstring("tree 0, node 0"));
  }
  SECTION("boolean document for the running example") {
    auto doc = save_model(toy_model());
    auto m = load_model(doc);
    REQUIRE(m.decide({1, 1, 1, 1, 1, 1}) == 1);
    REQUIRE(m.decide({0, 1, 1, 1, 1, 1}) == 0);
  }
}

TEST_CASE("quantile map midrank convention") {
  dataset d;
  d.feature_names = {"a"};
  for (double v : {1.0, 2.0, 3.0, 4.0}) d.rows.push_back({v});
  auto qm = fit_quantile_map(d);
  REQUIRE(to_quantile(qm, 0, 2.5) == 0.5);
  REQUIRE(to_quantile(qm, 0, 2.0) == 0.375);
  REQUIRE(to_quantile(qm, 0, 100.0) == 1.0);
  REQUIRE(to_quantile(qm, 0, -100.0) == 0.0);
  REQUIRE_THROWS_AS(to_quantile(qm, 3, 1.0), contract_error);
}

TEST_CASE("constant column maps everything to one half") {
  dataset d;
  d.feature_names = {"a"};
  for (int i = 0; i < 3; ++i) d.rows.push_back({5.0});
  auto qm = fit_quantile_map(d);
  REQUIRE(to_quantile(qm, 0, 5.0) == 0.5);
}

TEST_CASE("quantile transform is monotone") {
  auto rng = make_rng(13);
  auto data = random_dataset(3, 40, rng);
  auto qm = fit_quantile_map(data);
  for (int f = 0; f < 3; ++f) {
    double prev = -1.0;
    for (double v = -0.2; v <= 1.2; v += 0.01) {
      double q = to_quantile(qm, f, v);
      REQUIRE(q >= prev);
      REQUIRE((q >= 0.0 && q <= 1.0));
      prev = q;
    }
  }
}

TEST_CASE("total quantile shift golden values") {
  dataset d;
  d.feature_names = {"a"};
  for (double v : {1.0, 2.0, 3.0, 4.0}) d.rows.push_back({v});
  auto qm = fit_quantile_map(d);
  REQUIRE(total_quantile_shift(qm, {1.0}, {1.0}) == 0.0);
  REQUIRE(total_quantile_shift(qm, {1.0}, {4.0}) == 0.75);
}

TEST_CASE("threshold from positive rate") {
  auto m = model::linear({1.0}, 0.0, 0.0);
  dataset d;
  d.feature_names = {"a"};
  for (double v : {0.1, 0.2, 0.3, 0.4}) d.rows.push_back({v});

  auto r = threshold_from_rate(m, d, 0.25);
  REQUIRE(!r.degenerate);
  REQUIRE(r.threshold >= 0.3);
  REQUIRE(r.threshold < 0.4);
  int positives = 0;
  for (const auto& row : d.rows) positives += m.output(row) > r.threshold ? 1 : 0;
  REQUIRE(positives == 1);

  auto r2 = threshold_from_rate(m, d, 0.5);
  REQUIRE(r2.threshold >= 0.2);
  REQUIRE(r2.threshold < 0.3);

  dataset flat;
  flat.feature_names = {"a"};
  for (int i = 0; i < 3; ++i) flat.rows.push_back({0.7});
  auto r3 = threshold_from_rate(m, flat, 0.5);
  REQUIRE(r3.degenerate);
  REQUIRE(r3.threshold == 0.7);

  REQUIRE_THROWS_AS(threshold_from_rate(m, d, 0.0), contract_error);
  REQUIRE_THROWS_AS(threshold_from_rate(m, dataset{}, 0.5), domain_error);
}

TEST_CASE("csv loading") {
  SECTION("well-formed") {
    std::stringstream in("a,b\n1,2\n3,4\n");
    auto d = load_csv(in);
    REQUIRE(d.features() == 2);
    REQUIRE(d.size() == 2);
    REQUIRE(d.rows[1] == instance{3.0, 4.0});
  }
  SECTION("non-numeric cell names row and column") {
    std::stringstream in("a,b\n1,2\n3,abc\n");
    REQUIRE_THROWS_WITH(load_csv(in), Catch::Matchers::ContainsSubstring("row 3 column 2"));
  }
  SECTION("header-only file") {
    std::stringstream in("a,b\n");
    REQUIRE_THROWS_WITH(load_csv(in), Catch::Matchers::ContainsSubstring("no data rows"));
  }
  SECTION("empty file") {
    std::stringstream in("");
    REQUIRE_THROWS_AS(load_csv(in), parse_error);
  }
  SECTION("round trip") {
    std::stringstream in("a,b\n1.5,-2\n0.125,4\n");
    auto d = load_csv(in);
    std::stringstream out;
    save_csv(d, out);
    auto d2 = load_csv(out);
    REQUIRE(d2.rows == d.rows);
  }
}

TEST_CASE("decision matches output threshold on random models") {
  auto rng = make_rng(17);
  for (int t = 0; t < 10; ++t) {
    auto m = random_tree_ensemble(3, 2, 2, rng, 0.2);
    for (int i = 0; i < 50; ++i) {
      instance x{uniform01(rng), uniform01(rng), uniform01(rng)};
      REQUIRE(m.decide(x) == (m.output(x) > m.threshold() ? 1 : 0));
    }
  }
}
