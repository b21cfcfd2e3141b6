#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "cfattr/coalition.hpp"
#include "cfattr/dataset.hpp"
#include "cfattr/errors.hpp"

namespace cfattr {

// Decision rule shared by every model kind: predict 1 iff output(x) > t,
// strictly. Boundary outputs classify as 0.

enum class model_kind { linear, tree_ensemble, boolean_formula };
enum class link_fn { identity, sigmoid };

enum class cmp_op { gt, le, eq, ge, lt };

inline bool apply_cmp(cmp_op op, double lhs, double rhs) {
  switch (op) {
    case cmp_op::gt: return lhs > rhs;
    case cmp_op::le: return lhs <= rhs;
    case cmp_op::eq: return lhs == rhs;
    case cmp_op::ge: return lhs >= rhs;
    case cmp_op::lt: return lhs < rhs;
  }
  return false;
}

// Expression tree over thresholded-feature atoms.
struct bool_expr {
  enum class kind { atom, op_and, op_or, op_not };
  kind node = kind::atom;
  // atom
  int feature = -1;
  cmp_op op = cmp_op::gt;
  double constant = 0.0;
  // and/or/not
  std::vector<bool_expr> args;

  static bool_expr atom(int feature, cmp_op op, double constant) {
    bool_expr e;
    e.node = kind::atom;
    e.feature = feature;
    e.op = op;
    e.constant = constant;
    return e;
  }
  static bool_expr all_of(std::vector<bool_expr> args) {
    bool_expr e;
    e.node = kind::op_and;
    e.args = std::move(args);
    return e;
  }
  static bool_expr any_of(std::vector<bool_expr> args) {
    bool_expr e;
    e.node = kind::op_or;
    e.args = std::move(args);
    return e;
  }
  static bool_expr negate(bool_expr arg) {
    bool_expr e;
    e.node = kind::op_not;
    e.args.push_back(std::move(arg));
    return e;
  }

  bool eval(const instance& x) const {
    switch (node) {
      case kind::atom: return apply_cmp(op, x[feature], constant);
      case kind::op_and:
        for (const auto& a : args)
          if (!a.eval(x)) return false;
        return true;
      case kind::op_or:
        for (const auto& a : args)
          if (a.eval(x)) return true;
        return false;
      case kind::op_not: return !args[0].eval(x);
    }
    return false;
  }
};

// Binary tree in node-array form; node 0 is the root. Internal nodes route
// left iff x[feature] <= threshold, leaves carry an additive value.
struct tree_node {
  bool leaf = true;
  double value = 0.0;
  int feature = -1;
  double threshold = 0.0;
  int left = -1;
  int right = -1;
};

struct decision_tree {
  std::vector<tree_node> nodes;

  double eval(const instance& x) const {
    int idx = 0;
    while (!nodes[idx].leaf) {
      const auto& n = nodes[idx];
      idx = (x[n.feature] <= n.threshold) ? n.left : n.right;
    }
    return nodes[idx].value;
  }
};

class model {
 public:
  model() = default;  // zero-feature linear model; replace via the factories

  static model linear(std::vector<double> weights, double bias, double threshold,
                      link_fn link = link_fn::identity) {
    model m;
    m.kind_ = model_kind::linear;
    m.features_ = static_cast<int>(weights.size());
    m.weights_ = std::move(weights);
    m.bias_ = bias;
    m.threshold_ = threshold;
    m.link_ = link;
    return m;
  }

  static model tree_ensemble(std::vector<decision_tree> trees, int features, double threshold,
                             link_fn link = link_fn::identity) {
    model m;
    m.kind_ = model_kind::tree_ensemble;
    m.features_ = features;
    m.trees_ = std::move(trees);
    m.threshold_ = threshold;
    m.link_ = link;
    return m;
  }

  static model boolean(bool_expr formula, int features, double threshold = 0.5,
                       link_fn link = link_fn::identity) {
    model m;
    m.kind_ = model_kind::boolean_formula;
    m.features_ = features;
    m.formula_ = std::move(formula);
    m.threshold_ = threshold;
    m.link_ = link;
    return m;
  }

  model_kind kind() const { return kind_; }
  int features() const { return features_; }
  double threshold() const { return threshold_; }
  link_fn link() const { return link_; }

  double output(const instance& x) const {
    if (static_cast<int>(x.size()) != features_)
      throw contract_error("model: instance has " + std::to_string(x.size()) +
                           " features, model expects " + std::to_string(features_));
    double raw = 0.0;
    switch (kind_) {
      case model_kind::linear: {
        raw = bias_;
        for (int i = 0; i < features_; ++i) raw += weights_[i] * x[i];
        break;
      }
      case model_kind::tree_ensemble: {
        for (const auto& t : trees_) raw += t.eval(x);
        break;
      }
      case model_kind::boolean_formula: {
        raw = formula_.eval(x) ? 1.0 : 0.0;
        break;
      }
    }
    return link_ == link_fn::sigmoid ? 1.0 / (1.0 + std::exp(-raw)) : raw;
  }

  int decide(const instance& x) const { return output(x) > threshold_ ? 1 : 0; }

  const std::vector<double>& weights() const { return weights_; }
  double bias() const { return bias_; }
  const std::vector<decision_tree>& trees() const { return trees_; }
  const bool_expr& formula() const { return formula_; }
  void set_threshold(double t) { threshold_ = t; }

 private:

  model_kind kind_ = model_kind::linear;
  int features_ = 0;
  double threshold_ = 0.0;
  link_fn link_ = link_fn::identity;
  std::vector<double> weights_;
  double bias_ = 0.0;
  std::vector<decision_tree> trees_;
  bool_expr formula_;
};

// Hybrid point <x_S, xp_{F\S}>: x's values on S, xp's values elsewhere.
inline instance hybrid(const instance& x, const instance& xp, const coalition& s) {
  if (x.size() != xp.size())
    throw contract_error("hybrid: dimension mismatch");
  if (s.players() != static_cast<int>(x.size()))
    throw contract_error("hybrid: coalition player count mismatch");
  instance out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i)
    out[i] = s.contains(static_cast<int>(i)) ? x[i] : xp[i];
  return out;
}

// ---------------------------------------------------------------------------
// Portable model document (JSON)
// ---------------------------------------------------------------------------

namespace detail {

inline double require_finite_number(const nlohmann::json& j, const std::string& where) {
  if (!j.is_number()) throw parse_error(where + ": expected a number");
  double v = j.get<double>();
  if (!std::isfinite(v)) throw parse_error(where + ": non-finite value");
  return v;
}

inline cmp_op parse_cmp(const std::string& s, const std::string& where) {
  if (s == ">") return cmp_op::gt;
  if (s == "<=" || s == "≤") return cmp_op::le;
  if (s == "==") return cmp_op::eq;
  if (s == ">=") return cmp_op::ge;
  if (s == "<") return cmp_op::lt;
  throw parse_error(where + ": unknown comparison operator '" + s + "'");
}

inline std::string cmp_to_string(cmp_op op) {
  switch (op) {
    case cmp_op::gt: return ">";
    case cmp_op::le: return "<=";
    case cmp_op::eq: return "==";
    case cmp_op::ge: return ">=";
    case cmp_op::lt: return "<";
  }
  return "?";
}

inline bool_expr parse_formula(const nlohmann::json& j, int features, const std::string& where) {
  if (!j.is_object()) throw parse_error(where + ": formula node must be an object");
  if (j.contains("feature")) {
    if (!j["feature"].is_number_integer()) throw parse_error(where + ": feature must be an integer");
    int f = j["feature"].get<int>();
    if (f < 0 || f >= features)
      throw parse_error(where + ": feature index " + std::to_string(f) + " out of range [0, " +
                        std::to_string(features) + ")");
    if (!j.contains("op") || !j["op"].is_string()) throw parse_error(where + ": atom missing op");
    if (!j.contains("constant")) throw parse_error(where + ": atom missing constant");
    return bool_expr::atom(f, parse_cmp(j["op"].get<std::string>(), where),
                           require_finite_number(j["constant"], where + ".constant"));
  }
  if (!j.contains("op") || !j["op"].is_string())
    throw parse_error(where + ": node needs either a feature atom or an op");
  const std::string op = j["op"].get<std::string>();
  if (!j.contains("args") || !j["args"].is_array() || j["args"].empty())
    throw parse_error(where + ": operator '" + op + "' needs a nonempty args array");
  std::vector<bool_expr> args;
  int idx = 0;
  for (const auto& a : j["args"])
    args.push_back(parse_formula(a, features, where + ".args[" + std::to_string(idx++) + "]"));
  if (op == "and") return bool_expr::all_of(std::move(args));
  if (op == "or") return bool_expr::any_of(std::move(args));
  if (op == "not") {
    if (args.size() != 1) throw parse_error(where + ": 'not' takes exactly one argument");
    return bool_expr::negate(std::move(args[0]));
  }
  throw parse_error(where + ": unknown operator '" + op + "'");
}

inline nlohmann::json formula_to_json(const bool_expr& e) {
  nlohmann::json j;
  switch (e.node) {
    case bool_expr::kind::atom:
      j["feature"] = e.feature;
      j["op"] = cmp_to_string(e.op);
      j["constant"] = e.constant;
      return j;
    case bool_expr::kind::op_and: j["op"] = "and"; break;
    case bool_expr::kind::op_or: j["op"] = "or"; break;
    case bool_expr::kind::op_not: j["op"] = "not"; break;
  }
  j["args"] = nlohmann::json::array();
  for (const auto& a : e.args) j["args"].push_back(formula_to_json(a));
  return j;
}

inline decision_tree parse_tree(const nlohmann::json& j, int features, int tree_index) {
  const std::string where = "tree " + std::to_string(tree_index);
  if (!j.is_object() || !j.contains("nodes") || !j["nodes"].is_array() || j["nodes"].empty())
    throw parse_error(where + ": expected an object with a nonempty nodes array");
  decision_tree tree;
  const auto& nodes = j["nodes"];
  const int n = static_cast<int>(nodes.size());
  for (int i = 0; i < n; ++i) {
    const std::string loc = where + ", node " + std::to_string(i);
    const auto& nj = nodes[i];
    if (!nj.is_object()) throw parse_error(loc + ": expected an object");
    tree_node node;
    if (nj.contains("value")) {
      node.leaf = true;
      node.value = require_finite_number(nj["value"], loc + ".value");
    } else {
      node.leaf = false;
      if (!nj.contains("feature") || !nj["feature"].is_number_integer())
        throw parse_error(loc + ": internal node needs an integer feature");
      node.feature = nj["feature"].get<int>();
      if (node.feature < 0 || node.feature >= features)
        throw parse_error(loc + ": feature index " + std::to_string(node.feature) +
                          " out of range");
      if (!nj.contains("threshold")) throw parse_error(loc + ": missing threshold");
      node.threshold = require_finite_number(nj["threshold"], loc + ".threshold");
      for (const char* side : {"left", "right"}) {
        if (!nj.contains(side) || !nj[side].is_number_integer())
          throw parse_error(loc + ": missing integer child index '" + side + "'");
        int child = nj[side].get<int>();
        if (child <= i || child >= n)
          throw parse_error(loc + ": malformed child index " + std::to_string(child));
        (side[0] == 'l' ? node.left : node.right) = child;
      }
    }
    tree.nodes.push_back(node);
  }
  return tree;
}

inline nlohmann::json tree_to_json(const decision_tree& tree) {
  nlohmann::json j;
  j["nodes"] = nlohmann::json::array();
  for (const auto& n : tree.nodes) {
    nlohmann::json nj;
    if (n.leaf) {
      nj["value"] = n.value;
    } else {
      nj["feature"] = n.feature;
      nj["threshold"] = n.threshold;
      nj["left"] = n.left;
      nj["right"] = n.right;
    }
    j["nodes"].push_back(nj);
  }
  return j;
}

}  // namespace detail

inline model load_model(const nlohmann::json& doc) {
  if (!doc.is_object()) throw parse_error("model document: expected a JSON object");
  if (!doc.contains("kind") || !doc["kind"].is_string())
    throw parse_error("model document: missing string field 'kind'");
  const std::string kind = doc["kind"].get<std::string>();
  if (kind != "linear" && kind != "tree-ensemble" && kind != "boolean-formula")
    throw parse_error("model document: unknown kind '" + kind + "'");
  if (!doc.contains("threshold"))
    throw parse_error("model document: missing field 'threshold'");
  const double threshold = detail::require_finite_number(doc["threshold"], "threshold");

  link_fn link = link_fn::identity;
  if (doc.contains("link")) {
    const std::string l = doc["link"].get<std::string>();
    if (l == "identity")
      link = link_fn::identity;
    else if (l == "sigmoid")
      link = link_fn::sigmoid;
    else
      throw parse_error("model document: unknown link '" + l + "'");
  }

  if (kind == "linear") {
    if (!doc.contains("weights") || !doc["weights"].is_array() || doc["weights"].empty())
      throw parse_error("model document: linear model needs a nonempty weights array");
    std::vector<double> w;
    int idx = 0;
    for (const auto& wj : doc["weights"])
      w.push_back(detail::require_finite_number(wj, "weights[" + std::to_string(idx++) + "]"));
    double bias = doc.contains("bias")
                      ? detail::require_finite_number(doc["bias"], "bias")
                      : 0.0;
    if (doc.contains("features") && doc["features"].get<int>() != static_cast<int>(w.size()))
      throw parse_error("model document: features field disagrees with weights length");
    return model::linear(std::move(w), bias, threshold, link);
  }

  if (!doc.contains("features") || !doc["features"].is_number_integer())
    throw parse_error("model document: '" + kind + "' needs an integer 'features' field");
  const int features = doc["features"].get<int>();
  if (features <= 0 || features > kMaxPlayers)
    throw parse_error("model document: features must be in [1, " +
                      std::to_string(kMaxPlayers) + "]");

  if (kind == "tree-ensemble") {
    if (!doc.contains("trees") || !doc["trees"].is_array() || doc["trees"].empty())
      throw parse_error("model document: tree-ensemble needs a nonempty trees array");
    std::vector<decision_tree> trees;
    int idx = 0;
    for (const auto& tj : doc["trees"]) trees.push_back(detail::parse_tree(tj, features, idx++));
    return model::tree_ensemble(std::move(trees), features, threshold, link);
  }
  if (kind == "boolean-formula") {
    if (!doc.contains("formula"))
      throw parse_error("model document: boolean-formula needs a 'formula' field");
    return model::boolean(detail::parse_formula(doc["formula"], features, "formula"), features,
                          threshold, link);
  }
  throw parse_error("model document: unknown kind '" + kind + "'");
}

inline model load_model_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw parse_error("cannot open model file: " + path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw parse_error(path + ": invalid JSON: " + e.what());
  }
  return load_model(doc);
}

inline nlohmann::json save_model(const model& m) {
  nlohmann::json doc;
  doc["threshold"] = m.threshold();
  doc["link"] = m.link() == link_fn::sigmoid ? "sigmoid" : "identity";
  switch (m.kind()) {
    case model_kind::linear:
      doc["kind"] = "linear";
      doc["weights"] = m.weights();
      doc["bias"] = m.bias();
      break;
    case model_kind::tree_ensemble:
      doc["kind"] = "tree-ensemble";
      doc["features"] = m.features();
      doc["trees"] = nlohmann::json::array();
      for (const auto& t : m.trees()) doc["trees"].push_back(detail::tree_to_json(t));
      break;
    case model_kind::boolean_formula:
      doc["kind"] = "boolean-formula";
      doc["features"] = m.features();
      doc["formula"] = detail::formula_to_json(m.formula());
      break;
  }
  return doc;
}

// ---------------------------------------------------------------------------
// Threshold selection from a target positive-prediction rate
// ---------------------------------------------------------------------------

struct threshold_result {
  double threshold = 0.0;
  bool degenerate = false;  // all scores equal; threshold forced to that value
};

// Picks t so that the fraction of rows with output > t matches positive_rate
// up to one row's granularity.
inline threshold_result threshold_from_rate(const model& m, const dataset& data,
                                            double positive_rate) {
  if (data.empty()) throw domain_error("threshold_from_rate: empty dataset");
  if (!(positive_rate > 0.0 && positive_rate < 1.0))
    throw contract_error("threshold_from_rate: rate must be in (0, 1)");
  std::vector<double> scores;
  scores.reserve(data.size());
  for (const auto& row : data.rows) scores.push_back(m.output(row));
  std::sort(scores.begin(), scores.end(), std::greater<double>());
  if (scores.front() == scores.back()) return {scores.front(), true};
  const auto n = static_cast<std::int64_t>(scores.size());
  std::int64_t k = std::llround(positive_rate * static_cast<double>(n));
  k = std::clamp<std::int64_t>(k, 0, n - 1);
  return {scores[static_cast<std::size_t>(k)], false};
}

}  // namespace cfattr
