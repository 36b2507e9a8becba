#pragma once

#include <stdexcept>
#include <string>

namespace sensnav {

/// Rejection sampling could not produce a valid map within its retry budget.
class GenerationExhausted : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The target is blocked or isolated on the inflated map.
class TargetUnreachable : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A query point lies inside an inflated obstacle or outside the inflated bounds.
class PointInObstacle : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// No visibility-graph vertex is visible from the query point.
class Unreachable : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionMismatch : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NonFiniteLoss : public std::runtime_error {
 public:
  NonFiniteLoss(const std::string& what, int epoch = -1) : std::runtime_error(what), epoch_(epoch) {}
  int epoch() const { return epoch_; }

 private:
  int epoch_;
};

/// Invalid or inconsistent configuration (maps to CLI exit code 2).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace sensnav
