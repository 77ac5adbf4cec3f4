#pragma once

// Rejection sampling of acceptable assignments: draw uniformly, keep the
// first draw the criterion accepts.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rerand/assignments.hpp"
#include "rerand/balance.hpp"
#include "rerand/criteria.hpp"
#include "rerand/error.hpp"
#include "rerand/rng.hpp"

namespace rerand {

/// max(10^6, 1000 / p_a).
inline std::size_t default_max_proposals(double p_a_target = 1.0) {
  const double by_rate = p_a_target > 0.0 ? std::ceil(1000.0 / p_a_target) : 1e12;
  return static_cast<std::size_t>(std::max(1e6, std::min(by_rate, 1e15)));
}

struct DesignResult {
  Assignment assignment;
  /// Proposals generated, counting the accepted one.
  std::size_t proposals = 0;
  /// M of the accepted assignment (when the context has balance information).
  std::optional<double> accepted_m;
  nlohmann::json criterion;
  RngSpec seed;
};

inline nlohmann::json design_to_json(const DesignResult& r) {
  nlohmann::json j;
  j["assignment"] = r.assignment.bits();
  j["n"] = r.assignment.size();
  j["n_treated"] = r.assignment.n_treated();
  j["proposals"] = r.proposals;
  j["accepted_m"] = r.accepted_m ? nlohmann::json(*r.accepted_m) : nlohmann::json();
  j["criterion"] = r.criterion;
  j["seed"] = r.seed;
  return j;
}

inline DesignResult design_from_json(const nlohmann::json& j) {
  try {
    DesignResult r;
    r.assignment = Assignment::from_bits(j.at("assignment").get<std::vector<std::uint8_t>>());
    r.proposals = j.value("proposals", std::size_t{0});
    if (j.contains("accepted_m") && !j["accepted_m"].is_null()) r.accepted_m = j["accepted_m"].get<double>();
    r.criterion = j.at("criterion");
    if (j.contains("seed")) r.seed = j["seed"].get<RngSpec>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed design JSON: ") + e.what());
  }
}

/// Draws uniform assignments until `c` accepts one. Throws BudgetError after
/// max_proposals rejections.
inline DesignResult rerandomize(const BalanceContext& ctx, const BalanceCriterion& c, Rng& rng,
                                std::size_t max_proposals = default_max_proposals()) {
  detail::require(max_proposals >= 1, "max_proposals must be at least 1");
  const RngSpec seed = rng.spec();
  AssignmentDrawer drawer(ctx.n(), ctx.n_treated());
  for (std::size_t proposal = 1; proposal <= max_proposals; ++proposal) {
    const Assignment& w = drawer.draw(rng);
    if (c.evaluate(ctx, w)) {
      return DesignResult{w, proposal, ctx.mahalanobis(w), criterion_to_json(c), seed};
    }
  }
  throw BudgetError("no acceptable assignment after " + std::to_string(max_proposals) +
                        " proposals; the criterion may be infeasible or p_a too small",
                    max_proposals, 0.0);
}

struct AcceptanceEstimate {
  double p_hat = 0.0;
  /// sqrt(p_hat (1 - p_hat) / draws).
  double standard_error = 0.0;
  std::size_t draws = 0;
  std::size_t accepted = 0;
  /// Set when nothing was accepted.
  std::optional<std::string> warning;
};

/// Fraction of `draws` uniform proposals the criterion accepts.
inline AcceptanceEstimate estimate_acceptance(const BalanceContext& ctx, const BalanceCriterion& c, std::size_t draws,
                                              Rng& rng) {
  detail::require(draws >= 1, "estimate_acceptance needs at least one draw");
  AssignmentDrawer drawer(ctx.n(), ctx.n_treated());
  std::size_t accepted = 0;
  for (std::size_t i = 0; i < draws; ++i) {
    if (c.evaluate(ctx, drawer.draw(rng))) ++accepted;
  }
  AcceptanceEstimate est;
  est.draws = draws;
  est.accepted = accepted;
  est.p_hat = static_cast<double>(accepted) / static_cast<double>(draws);
  est.standard_error = std::sqrt(est.p_hat * (1.0 - est.p_hat) / static_cast<double>(draws));
  if (accepted == 0) {
    est.warning = "no proposal accepted in " + std::to_string(draws) + " draws";
  }
  return est;
}

/// Every assignment the criterion accepts (small n only).
inline std::vector<Assignment> enumerate_acceptable(const BalanceContext& ctx, const BalanceCriterion& c,
                                                    std::uint64_t ceiling = default_enumeration_ceiling) {
  std::vector<Assignment> out;
  for_each_assignment(
      ctx.n(), ctx.n_treated(),
      [&](Assignment w) {
        if (c.evaluate(ctx, w)) out.push_back(std::move(w));
      },
      ceiling);
  return out;
}

}  // namespace rerand
