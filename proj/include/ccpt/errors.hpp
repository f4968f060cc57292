#pragma once

#include <stdexcept>
#include <string>

namespace ccpt {

// Malformed document (map, demo, config, parameter file, dataset line).
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, int line = 0, std::string field = {})
      : std::runtime_error(format(what, line, field)), line_(line), field_(std::move(field)) {}

  int line() const { return line_; }
  const std::string& field() const { return field_; }

 private:
  static std::string format(const std::string& what, int line, const std::string& field) {
    std::string out = what;
    if (line > 0) out += " (line " + std::to_string(line) + ")";
    if (!field.empty()) out += " [field '" + field + "']";
    return out;
  }

  int line_;
  std::string field_;
};

// Well-formed input that breaks a domain invariant.
class InvariantError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// NaN or Inf showed up in a tensor, loss or reward.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace ccpt
