#pragma once

// Uniform draws and exhaustive enumeration of fixed-group-size assignments.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <optional>
#include <vector>

#include "rerand/balance.hpp"
#include "rerand/error.hpp"
#include "rerand/rng.hpp"

namespace rerand {

inline constexpr std::uint64_t default_enumeration_ceiling = 10'000'000;

/// C(n, r) as a double (large values are approximate).
inline double binomial_coefficient(std::size_t n, std::size_t r) {
  if (r > n) return 0.0;
  return std::round(std::exp(std::lgamma(n + 1.0) - std::lgamma(r + 1.0) - std::lgamma(n - r + 1.0)));
}

/// C(n, r) exactly, or nullopt when it overflows 64 bits.
inline std::optional<std::uint64_t> exact_binomial(std::size_t n, std::size_t r) {
  if (r > n) return 0;
  r = std::min(r, n - r);
  unsigned __int128 value = 1;
  for (std::size_t i = 1; i <= r; ++i) {
    value = value * (n - r + i) / i;
    if (value > std::numeric_limits<std::uint64_t>::max()) return std::nullopt;
  }
  return static_cast<std::uint64_t>(value);
}

/// Reusable uniform sampler of assignments with n_t treated out of n.
///
/// Keeps a permutation of unit indices and runs a partial Fisher-Yates pass
/// over the smaller group each call; the selected subset is uniform whatever
/// the starting order.
class AssignmentDrawer {
 public:
  AssignmentDrawer(std::size_t n, std::size_t n_treated) : n_treated_(n_treated), order_(n) {
    detail::require(n_treated >= 1 && n_treated + 1 <= n, "treated group size must be in [1, n-1]");
    std::iota(order_.begin(), order_.end(), 0u);
    pick_treated_ = n_treated <= n - n_treated;
    picks_ = pick_treated_ ? n_treated : n - n_treated;
    current_.bits_.assign(n, 0);
    current_.n_treated_ = n_treated;
  }

  /// Draws a fresh assignment; the returned reference is valid until the next call.
  const Assignment& draw(Rng& rng) {
    const std::size_t n = order_.size();
    for (std::size_t i = 0; i < picks_; ++i) {
      const auto j = i + static_cast<std::size_t>(rng.bounded(n - i));
      std::swap(order_[i], order_[j]);
    }
    const std::uint8_t picked = pick_treated_ ? 1 : 0;
    std::fill(current_.bits_.begin(), current_.bits_.end(), static_cast<std::uint8_t>(1 - picked));
    for (std::size_t i = 0; i < picks_; ++i) {
      current_.bits_[order_[i]] = picked;
    }
    return current_;
  }

  std::size_t n() const noexcept { return order_.size(); }
  std::size_t n_treated() const noexcept { return n_treated_; }

 private:
  std::size_t n_treated_;
  std::vector<std::uint32_t> order_;
  bool pick_treated_ = true;
  std::size_t picks_ = 0;
  Assignment current_;
};

/// One uniform draw from the C(n, n_t) assignments.
inline Assignment draw_assignment(std::size_t n, std::size_t n_treated, Rng& rng) {
  AssignmentDrawer drawer(n, n_treated);
  return drawer.draw(rng);
}

/// Calls fn(w) for every assignment with n_t treated, in lexicographic order
/// of the 0/1 vector. Throws when C(n, n_t) exceeds the ceiling.
template <typename Fn>
void for_each_assignment(std::size_t n, std::size_t n_treated, Fn&& fn,
                         std::uint64_t ceiling = default_enumeration_ceiling) {
  detail::require(n_treated <= n, "treated group size exceeds n");
  const auto count = exact_binomial(n, n_treated);
  detail::require(count.has_value() && *count <= ceiling,
                  "enumeration ceiling exceeded: C(" + std::to_string(n) + ", " + std::to_string(n_treated) + ")");
  std::vector<std::uint8_t> bits(n, 0);
  std::fill(bits.end() - static_cast<std::ptrdiff_t>(n_treated), bits.end(), std::uint8_t{1});
  do {
    fn(Assignment::from_bits(bits));
  } while (std::next_permutation(bits.begin(), bits.end()));
}

/// All C(n, n_t) assignments, lexicographic.
inline std::vector<Assignment> enumerate_assignments(std::size_t n, std::size_t n_treated,
                                                     std::uint64_t ceiling = default_enumeration_ceiling) {
  std::vector<Assignment> out;
  for_each_assignment(n, n_treated, [&](Assignment w) { out.push_back(std::move(w)); }, ceiling);
  return out;
}

}  // namespace rerand
