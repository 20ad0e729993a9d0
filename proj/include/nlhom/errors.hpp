#ifndef NLHOM_ERRORS_HPP
#define NLHOM_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace nlhom {

// Thrown when the nonlinear solve does not reach the requested tolerance
// within its iteration budget. Never returned as a silent partial answer.
struct SolveFailure : std::runtime_error {
  explicit SolveFailure(const std::string& what) : std::runtime_error(what) {}
};

// Thrown on malformed or out-of-range configuration input; `key` names the
// offending entry so the CLI diagnostic can point at it.
struct ConfigError : std::runtime_error {
  std::string key;
  ConfigError(std::string keyName, const std::string& what)
      : std::runtime_error(what), key(std::move(keyName)) {}
};

// Thrown when a report or manifest cannot be written.
struct IoError : std::runtime_error {
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace nlhom

#endif
