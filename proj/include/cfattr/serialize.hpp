#pragma once

#include <cstdint>
#include <fstream>
#include <string>

#include <json.hpp>

#include "cfattr/attribution.hpp"
#include "cfattr/counterfactual.hpp"
#include "cfattr/sparsity.hpp"

namespace cfattr {

inline nlohmann::json explanation_to_json(const explanation& e) {
  nlohmann::json j;
  j["method"] = e.method;
  j["query_index"] = e.query_index;
  j["values"] = e.values;
  j["background_size"] = e.background_size;
  j["meta"] = e.meta;
  return j;
}

inline explanation explanation_from_json(const nlohmann::json& j) {
  explanation e;
  e.method = j.at("method").get<std::string>();
  e.query_index = j.at("query_index").get<int>();
  e.values = j.at("values").get<attribution_vector>();
  e.background_size = j.at("background_size").get<std::size_t>();
  if (j.contains("meta"))
    e.meta = j.at("meta").get<std::map<std::string, std::string>>();
  return e;
}

// {query, counterfactuals: [{point, changed, valid, maximally_sparse}]}
inline nlohmann::json counterfactual_set_to_json(const counterfactual_set& cfs, const model& m) {
  nlohmann::json j;
  j["query"] = cfs.query;
  j["counterfactuals"] = nlohmann::json::array();
  for (const auto& item : cfs.items) {
    nlohmann::json cj;
    cj["point"] = item.point;
    cj["changed"] = item.changed.members();
    cj["valid"] = item.valid;
    cj["maximally_sparse"] = is_maximally_sparse(m, cfs.query, item.point);
    j["counterfactuals"].push_back(std::move(cj));
  }
  return j;
}

// 64-bit FNV-1a over raw bytes; manifests use it to pin output files.
inline std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

inline std::string digest_hex(const std::string& bytes) {
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(fnv1a(bytes)));
  return std::string("fnv1a:") + buf;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw parse_error("cannot open file: " + path);
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

}  // namespace cfattr
