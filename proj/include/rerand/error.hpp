#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace rerand {

/// Bad input: dimension mismatch, empty group, malformed criterion, ...
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A sampling budget ran out before enough acceptable assignments were found.
class BudgetError : public std::runtime_error {
 public:
  BudgetError(const std::string& what, std::size_t proposals, double acceptance_estimate)
      : std::runtime_error(what), proposals_(proposals), acceptance_estimate_(acceptance_estimate) {}

  std::size_t proposals() const noexcept { return proposals_; }
  double acceptance_estimate() const noexcept { return acceptance_estimate_; }

 private:
  std::size_t proposals_;
  double acceptance_estimate_;
};

namespace detail {

inline void require(bool ok, const std::string& message) {
  if (!ok) {
    throw ValidationError(message);
  }
}

}  // namespace detail
}  // namespace rerand
