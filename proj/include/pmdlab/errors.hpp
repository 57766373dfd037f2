#pragma once

#include <stdexcept>
#include <string>

namespace pmdlab {

/**
 * Raised when user-supplied data (tables, configuration files, CLI arguments)
 * violates a documented precondition.  The message names the offending field.
 * The CLI maps this to exit code 1.
 */
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& message)
      : std::runtime_error(message) {}
};

/**
 * Raised when the data-generating policy cannot reach every state-action
 * pair (some stationary weight sigma(s,a) is zero), so temporal-difference
 * updates would never touch parts of the table.  The CLI maps this to exit
 * code 2.
 */
class ExplorationFailure : public std::runtime_error {
 public:
  explicit ExplorationFailure(const std::string& message)
      : std::runtime_error(message) {}
};

/**
 * Raised when a state chain is reducible or periodic, so it has no unique
 * stationary distribution to mix towards.  The CLI maps this to exit code 2.
 */
class NotErgodic : public std::runtime_error {
 public:
  explicit NotErgodic(const std::string& message)
      : std::runtime_error(message) {}
};

}  // namespace pmdlab
