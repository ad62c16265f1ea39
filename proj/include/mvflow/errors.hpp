#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mvflow {

/// Argument outside the mathematical domain of an operation.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// A curvature vector on or outside the boundary of the positive cone.
class ConeViolation : public DomainError {
 public:
  using DomainError::DomainError;
};

/// A principal radius fell below the positivity floor.
class ConvexityLoss : public std::runtime_error {
 public:
  ConvexityLoss(std::size_t node, double value)
      : std::runtime_error("convexity lost at node " + std::to_string(node) +
                           " (radius " + std::to_string(value) + ")"),
        node_(node),
        value_(value) {}

  std::size_t node() const noexcept { return node_; }
  double value() const noexcept { return value_; }

 private:
  std::size_t node_;
  double value_;
};

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace mvflow
