#pragma once

#include <stdexcept>
#include <string>

namespace splitshield {

// Bad call-site input (dimension mismatch, out-of-range parameter, ...).
struct ArgumentError : std::invalid_argument {
  explicit ArgumentError(const std::string& what) : std::invalid_argument(what) {}
};

// Input data admits no answer (zero covariance, single-class AUC, ...).
struct DegenerateDataError : std::runtime_error {
  explicit DegenerateDataError(const std::string& what) : std::runtime_error(what) {}
};

// Divergence undefined because a component distribution is singular.
struct SingularDivergenceError : std::runtime_error {
  explicit SingularDivergenceError(const std::string& what) : std::runtime_error(what) {}
};

// Iterative routine ran out of its iteration budget.
struct ConvergenceError : std::runtime_error {
  explicit ConvergenceError(const std::string& what) : std::runtime_error(what) {}
};

// A synthetic-data strategy cannot run with the data it was given.
struct StrategyUnavailableError : std::runtime_error {
  explicit StrategyUnavailableError(const std::string& what) : std::runtime_error(what) {}
};

// Two-party protocol violation or transport failure.
struct ProtocolError : std::runtime_error {
  explicit ProtocolError(const std::string& what) : std::runtime_error(what) {}
};

// Distinct inputs collided under a hash where the protocol needs injectivity.
struct CollisionError : std::runtime_error {
  explicit CollisionError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace splitshield
