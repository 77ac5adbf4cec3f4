#pragma once

// Randomization inference that conditions on the acceptance criterion:
// reference sets of acceptable assignments, sharp-null p-values, and
// confidence intervals for an additive effect by test inversion.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "rerand/balance.hpp"
#include "rerand/criteria.hpp"
#include "rerand/error.hpp"
#include "rerand/rng.hpp"
#include "rerand/sampler.hpp"

namespace rerand {

/// Observed outcomes, one per unit.
class OutcomeVector {
 public:
  OutcomeVector() = default;
  explicit OutcomeVector(std::vector<double> values) : values_(std::move(values)) {
    for (double v : values_) {
      detail::require(std::isfinite(v), "outcome vector has non-finite entries");
    }
  }

  std::size_t size() const noexcept { return values_.size(); }
  double operator[](std::size_t i) const noexcept { return values_[i]; }
  std::span<const double> values() const noexcept { return values_; }

 private:
  std::vector<double> values_;
};

/// Observed outcomes implied by potential outcomes and an assignment.
inline OutcomeVector observed_outcomes(std::span<const double> y1, std::span<const double> y0, const Assignment& w) {
  detail::require(y1.size() == y0.size() && y1.size() == w.size(), "potential outcome lengths do not match");
  std::vector<double> y(w.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = w.treated(i) ? y1[i] : y0[i];
  return OutcomeVector(std::move(y));
}

/// Difference in observed group means.
inline double estimate_tau(std::span<const double> y, const Assignment& w) {
  detail::require(y.size() == w.size(), "outcome length does not match assignment");
  detail::require_nonempty_groups(w);
  double sum_t = 0.0;
  double sum_c = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    (w.treated(i) ? sum_t : sum_c) += y[i];
  }
  return sum_t / static_cast<double>(w.n_treated()) - sum_c / static_cast<double>(w.n_control());
}

inline double estimate_tau(const OutcomeVector& y, const Assignment& w) { return estimate_tau(y.values(), w); }

/// Neyman standard error sqrt(s_T^2 / n_t + s_C^2 / n_c).
inline double classical_se(std::span<const double> y, const Assignment& w) {
  detail::require(y.size() == w.size(), "outcome length does not match assignment");
  detail::require(w.n_treated() >= 2 && w.n_control() >= 2, "classical standard error needs 2 units per group");
  double mean_t = 0.0;
  double mean_c = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) (w.treated(i) ? mean_t : mean_c) += y[i];
  mean_t /= static_cast<double>(w.n_treated());
  mean_c /= static_cast<double>(w.n_control());
  double ss_t = 0.0;
  double ss_c = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (w.treated(i)) {
      ss_t += (y[i] - mean_t) * (y[i] - mean_t);
    } else {
      ss_c += (y[i] - mean_c) * (y[i] - mean_c);
    }
  }
  const double nt = static_cast<double>(w.n_treated());
  const double nc = static_cast<double>(w.n_control());
  return std::sqrt(ss_t / (nt - 1.0) / nt + ss_c / (nc - 1.0) / nc);
}

inline double classical_se(const OutcomeVector& y, const Assignment& w) { return classical_se(y.values(), w); }

enum class Tail { two_sided, lower, upper };

inline std::string to_string(Tail t) {
  switch (t) {
    case Tail::two_sided: return "two-sided";
    case Tail::lower: return "lower";
    case Tail::upper: return "upper";
  }
  return "unknown";
}

inline Tail tail_from_string(const std::string& s) {
  if (s == "two-sided") return Tail::two_sided;
  if (s == "lower") return Tail::lower;
  if (s == "upper") return Tail::upper;
  throw ValidationError("unknown tail '" + s + "'");
}

/// Test statistic g(W, y_obs); x is available through the context captured by the caller.
using Statistic = std::function<double(const Assignment&, std::span<const double>)>;

inline Statistic difference_in_means() {
  return [](const Assignment& w, std::span<const double> y) { return estimate_tau(y, w); };
}

/// Assignments the observed one is compared against: either independent
/// draws from the acceptable set (Monte Carlo, add-one p-values) or the
/// complete acceptable set (exact).
struct ReferenceSet {
  std::vector<Assignment> assignments;
  bool exact = false;
  std::size_t proposals = 0;
  RngSpec seed;
};

/// n_sim acceptable assignments by rejection sampling from one stream.
inline ReferenceSet draw_reference(const BalanceContext& ctx, const BalanceCriterion& c, std::size_t n_sim, Rng& rng,
                                   std::size_t max_proposals_per_draw = default_max_proposals()) {
  detail::require(n_sim >= 1, "n_sim must be at least 1");
  ReferenceSet ref;
  ref.seed = rng.spec();
  ref.assignments.reserve(n_sim);
  AssignmentDrawer drawer(ctx.n(), ctx.n_treated());
  std::size_t since_last = 0;
  while (ref.assignments.size() < n_sim) {
    const Assignment& w = drawer.draw(rng);
    ++ref.proposals;
    ++since_last;
    if (c.evaluate(ctx, w)) {
      ref.assignments.push_back(w);
      since_last = 0;
    } else if (since_last >= max_proposals_per_draw) {
      throw BudgetError("simulation budget exhausted while drawing acceptable assignments", ref.proposals,
                        static_cast<double>(ref.assignments.size()) / static_cast<double>(ref.proposals));
    }
  }
  return ref;
}

/// The complete acceptable set.
inline ReferenceSet enumerate_reference(const BalanceContext& ctx, const BalanceCriterion& c,
                                        std::uint64_t ceiling = default_enumeration_ceiling) {
  ReferenceSet ref;
  ref.assignments = enumerate_acceptable(ctx, c, ceiling);
  ref.exact = true;
  ref.proposals = static_cast<std::size_t>(exact_binomial(ctx.n(), ctx.n_treated()).value_or(0));
  return ref;
}

struct TestReport {
  double estimate = 0.0;
  double p_value = 1.0;
  std::size_t draws_requested = 0;
  std::size_t draws_accepted = 0;
  std::size_t proposals = 0;
  Tail tail = Tail::two_sided;
  bool exact = false;
  nlohmann::json criterion;
  RngSpec seed;
};

inline nlohmann::json test_report_to_json(const TestReport& r) {
  return {{"estimate", r.estimate},
          {"p_value", r.p_value},
          {"draws_requested", r.draws_requested},
          {"draws_accepted", r.draws_accepted},
          {"proposals", r.proposals},
          {"tail", to_string(r.tail)},
          {"exact", r.exact},
          {"criterion", r.criterion},
          {"seed", r.seed}};
}

namespace detail {

inline void require_acceptable(const BalanceContext& ctx, const BalanceCriterion& c, const Assignment& w_obs) {
  ctx.check(w_obs);
  if (!c.evaluate(ctx, w_obs)) {
    throw ValidationError("observed assignment is not acceptable under criterion " + criterion_to_json(c).dump());
  }
}

inline double tie_tolerance(std::span<const double> y) {
  double scale = 0.0;
  for (double v : y) scale = std::max(scale, std::abs(v));
  return 1e-12 * scale;
}

inline bool as_extreme(double sim, double obs, Tail tail, double tol) {
  switch (tail) {
    case Tail::two_sided: return std::abs(sim) >= std::abs(obs) - tol;
    case Tail::upper: return sim >= obs - tol;
    case Tail::lower: return sim <= obs + tol;
  }
  return false;
}

inline double p_value_from_count(std::size_t extreme, std::size_t total, bool exact) {
  if (exact) return static_cast<double>(extreme) / static_cast<double>(total);
  return static_cast<double>(1 + extreme) / static_cast<double>(1 + total);
}

}  // namespace detail

/// Sharp-null randomization test of y against the reference set. Monte Carlo
/// sets give (1 + #extreme) / (1 + n_sim); exact sets give #extreme / |set|.
inline TestReport randomization_test(const BalanceContext& ctx, const BalanceCriterion& c, const Assignment& w_obs,
                                     const OutcomeVector& y, const ReferenceSet& ref, Tail tail = Tail::two_sided,
                                     const Statistic& statistic = difference_in_means()) {
  detail::require(y.size() == ctx.n(), "outcome length does not match covariate rows");
  detail::require_acceptable(ctx, c, w_obs);
  detail::require(!ref.assignments.empty(), "reference set is empty");
  const double observed = statistic(w_obs, y.values());
  const double tol = detail::tie_tolerance(y.values());
  std::size_t extreme = 0;
  for (const auto& w : ref.assignments) {
    if (detail::as_extreme(statistic(w, y.values()), observed, tail, tol)) ++extreme;
  }
  TestReport r;
  r.estimate = observed;
  r.p_value = detail::p_value_from_count(extreme, ref.assignments.size(), ref.exact);
  r.draws_requested = ref.assignments.size();
  r.draws_accepted = ref.assignments.size();
  r.proposals = ref.proposals;
  r.tail = tail;
  r.exact = ref.exact;
  r.criterion = criterion_to_json(c);
  r.seed = ref.seed;
  return r;
}

/// Monte Carlo test with n_sim fresh acceptable draws.
inline TestReport randomization_test(const BalanceContext& ctx, const BalanceCriterion& c, const Assignment& w_obs,
                                     const OutcomeVector& y, std::size_t n_sim, Rng& rng, Tail tail = Tail::two_sided,
                                     const Statistic& statistic = difference_in_means()) {
  detail::require_acceptable(ctx, c, w_obs);
  return randomization_test(ctx, c, w_obs, y, draw_reference(ctx, c, n_sim, rng), tail, statistic);
}

/// Exact test over the enumerated acceptable set.
inline TestReport randomization_test_exact(const BalanceContext& ctx, const BalanceCriterion& c,
                                           const Assignment& w_obs, const OutcomeVector& y,
                                           Tail tail = Tail::two_sided,
                                           const Statistic& statistic = difference_in_means()) {
  detail::require_acceptable(ctx, c, w_obs);
  return randomization_test(ctx, c, w_obs, y, enumerate_reference(ctx, c), tail, statistic);
}

/// Two-sided p-value of H0: y_i(1) = y_i(0) + tau0 as a function of tau0,
/// for the difference-in-means statistic. Under H0 the control outcomes are
/// y - tau0 W_obs, and every statistic is linear in tau0, so the reference
/// set is summarized once.
class AdditiveShiftTest {
 public:
  AdditiveShiftTest(const Assignment& w_obs, const OutcomeVector& y, const ReferenceSet& ref)
      : exact_(ref.exact), estimate_(estimate_tau(y, w_obs)), tol_(detail::tie_tolerance(y.values())) {
    std::vector<double> w_as_outcome(w_obs.size());
    for (std::size_t i = 0; i < w_obs.size(); ++i) w_as_outcome[i] = w_obs.treated(i) ? 1.0 : 0.0;
    base_.reserve(ref.assignments.size());
    slope_.reserve(ref.assignments.size());
    for (const auto& w : ref.assignments) {
      base_.push_back(estimate_tau(y.values(), w));
      slope_.push_back(estimate_tau(w_as_outcome, w));
    }
  }

  double estimate() const noexcept { return estimate_; }

  double p_value(double tau0) const {
    const double observed = estimate_ - tau0;
    const double tol = tol_ + 1e-12 * std::abs(tau0);
    std::size_t extreme = 0;
    for (std::size_t s = 0; s < base_.size(); ++s) {
      if (std::abs(base_[s] - tau0 * slope_[s]) >= std::abs(observed) - tol) ++extreme;
    }
    return detail::p_value_from_count(extreme, base_.size(), exact_);
  }

 private:
  bool exact_;
  double estimate_;
  double tol_;
  std::vector<double> base_;
  std::vector<double> slope_;
};

struct IntervalReport {
  double lower = 0.0;
  double upper = 0.0;
  double level = 0.95;
  double estimate = 0.0;
  std::size_t draws = 0;
  bool exact = false;
  /// (tau0, p) pairs visited by the endpoint searches.
  std::vector<std::pair<double, double>> trace;
  nlohmann::json criterion;
  RngSpec seed;
};

inline nlohmann::json interval_report_to_json(const IntervalReport& r) {
  nlohmann::json trace = nlohmann::json::array();
  for (const auto& [tau0, p] : r.trace) trace.push_back({tau0, p});
  return {{"lower", r.lower},   {"upper", r.upper},         {"level", r.level}, {"estimate", r.estimate},
          {"draws", r.draws},   {"exact", r.exact},         {"trace", trace},   {"criterion", r.criterion},
          {"seed", r.seed}};
}

/// {tau0 : p(tau0) > 1 - level} for an additive effect, by bisection on each
/// endpoint. All tau0 share the same reference set.
inline IntervalReport confidence_interval(const BalanceContext& ctx, const BalanceCriterion& c,
                                          const Assignment& w_obs, const OutcomeVector& y, double level,
                                          const ReferenceSet& ref) {
  detail::require(level > 0.0 && level < 1.0, "confidence level must be in (0, 1)");
  detail::require(y.size() == ctx.n(), "outcome length does not match covariate rows");
  detail::require_acceptable(ctx, c, w_obs);
  detail::require(!ref.assignments.empty(), "reference set is empty");
  const double alpha = 1.0 - level;
  const AdditiveShiftTest test(w_obs, y, ref);

  IntervalReport out;
  out.level = level;
  out.estimate = test.estimate();
  out.draws = ref.assignments.size();
  out.exact = ref.exact;
  out.criterion = criterion_to_json(c);
  out.seed = ref.seed;

  double step = 0.0;
  if (w_obs.n_treated() >= 2 && w_obs.n_control() >= 2) step = classical_se(y, w_obs);
  if (!(step > 0.0)) {
    double lo = *std::min_element(y.values().begin(), y.values().end());
    double hi = *std::max_element(y.values().begin(), y.values().end());
    step = hi > lo ? (hi - lo) / 2.0 : 1.0;
  }

  auto p_at = [&](double tau0) {
    const double p = test.p_value(tau0);
    out.trace.emplace_back(tau0, p);
    return p;
  };

  auto endpoint = [&](double direction) {
    double inside = out.estimate;
    double outside = out.estimate + direction * 6.0 * step;
    if (p_at(outside) > alpha) {
      outside = out.estimate + direction * 24.0 * step;
      if (p_at(outside) > alpha) {
        throw BudgetError("confidence interval endpoint could not be bracketed", ref.assignments.size(), 1.0);
      }
    }
    const double tol = 1e-9 * step;
    while (std::abs(outside - inside) > tol) {
      const double mid = 0.5 * (inside + outside);
      if (p_at(mid) > alpha) {
        inside = mid;
      } else {
        outside = mid;
      }
    }
    return inside;
  };

  out.lower = endpoint(-1.0);
  out.upper = endpoint(+1.0);
  return out;
}

inline IntervalReport confidence_interval(const BalanceContext& ctx, const BalanceCriterion& c,
                                          const Assignment& w_obs, const OutcomeVector& y, double level,
                                          std::size_t n_sim, Rng& rng) {
  detail::require_acceptable(ctx, c, w_obs);
  return confidence_interval(ctx, c, w_obs, y, level, draw_reference(ctx, c, n_sim, rng));
}

inline IntervalReport confidence_interval_exact(const BalanceContext& ctx, const BalanceCriterion& c,
                                                const Assignment& w_obs, const OutcomeVector& y, double level) {
  detail::require_acceptable(ctx, c, w_obs);
  return confidence_interval(ctx, c, w_obs, y, level, enumerate_reference(ctx, c));
}

}  // namespace rerand
