#pragma once

#include <stdexcept>
#include <string>

namespace ideolens {

// Bad or inconsistent configuration / arguments. CLI exit code 1.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Structurally broken input data (bad JSON, bad field types). CLI exit code 3.
struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Input data that parses but violates a documented contract. CLI exit code 3.
struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace ideolens
