#pragma once

#include <stdexcept>
#include <string>

namespace cfattr {

// Error taxonomy used across the library:
//  - capacity_error: input is within the domain but beyond the enumeration caps
//  - domain_error:   input violates a semantic precondition (e.g. invalid counterfactual)
//  - contract_error: caller broke an interface contract (dimension mismatch, bad range)
//  - parse_error:    malformed document; message carries the location

class capacity_error : public std::runtime_error {
 public:
  explicit capacity_error(const std::string& msg) : std::runtime_error(msg) {}
};

class domain_error : public std::runtime_error {
 public:
  explicit domain_error(const std::string& msg) : std::runtime_error(msg) {}
};

class contract_error : public std::logic_error {
 public:
  explicit contract_error(const std::string& msg) : std::logic_error(msg) {}
};

class parse_error : public std::runtime_error {
 public:
  explicit parse_error(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace cfattr
