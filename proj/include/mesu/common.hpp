#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace mesu {

using NodeId = int;

// Unit conventions used throughout: sizes in bits, rates in bits/second,
// delays in seconds, distances in meters, money in plain currency units.
constexpr double kBitsPerGb = 1e9;

// Additive slack for <= comparisons on floating-point delay / capacity /
// budget quantities, scaled to the magnitude of the bound.
constexpr double kRelSlack = 1e-9;

inline double slack_for(double bound) {
  return kRelSlack * std::max(1.0, std::abs(bound));
}

inline bool leq_within_slack(double value, double bound) {
  return value <= bound + slack_for(bound);
}

inline bool geq_within_slack(double value, double bound) {
  return value >= bound - slack_for(bound);
}

// Audit-side tolerance: twice the producer slack, so a value accepted right
// at the producer boundary never trips the independent re-verification.
inline bool leq_within_audit_slack(double value, double bound) {
  return value <= bound + 2.0 * slack_for(bound);
}

// Fractions below this size are never created; they are numerical dust at
// the bit scale this toolkit works on.
constexpr double kMinFractionBits = 1.0;

class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

// round-half-up to the nearest integer, used for task-count growth
inline long long round_half_up(double x) {
  return static_cast<long long>(std::floor(x + 0.5));
}

}  // namespace mesu
