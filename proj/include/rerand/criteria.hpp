#pragma once

// Acceptance functions phi(x, W): Mahalanobis threshold, per-covariate
// calipers, conjunctions, and user predicates, plus threshold calibration.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "rerand/assignments.hpp"
#include "rerand/balance.hpp"
#include "rerand/error.hpp"
#include "rerand/rng.hpp"
#include "rerand/theory.hpp"

namespace rerand {

class BalanceCriterion;

/// Accept when M <= a. a = +inf accepts every assignment; a = 0 accepts
/// only exact mean balance.
struct MahalanobisThreshold {
  double a = theory::infinite_threshold;
};

/// Accept when |d_j| <= bounds_j for every covariate j.
struct Caliper {
  std::vector<double> bounds;
};

/// Accept when every child accepts.
struct Conjunction {
  std::vector<BalanceCriterion> children;
};

using PredicateFn = std::function<bool(const BalanceContext&, const Assignment&)>;

/// Named, deterministic user predicate. `params` is carried into the JSON
/// form so the predicate can be rebuilt from the registry.
struct UserPredicate {
  std::string name;
  nlohmann::json params = nlohmann::json::object();
  PredicateFn fn;
  bool affinely_invariant = false;
};

class BalanceCriterion {
 public:
  using Variant = std::variant<MahalanobisThreshold, Caliper, Conjunction, UserPredicate>;

  BalanceCriterion() = default;
  BalanceCriterion(MahalanobisThreshold m) : v_(m) {
    detail::require(!std::isnan(m.a) && m.a >= 0.0, "Mahalanobis threshold must be nonnegative");
  }
  BalanceCriterion(Caliper c) : v_(std::move(c)) {
    const auto& b = std::get<Caliper>(v_).bounds;
    detail::require(!b.empty(), "caliper needs at least one bound");
    for (double x : b) {
      detail::require(x > 0.0 && !std::isnan(x), "caliper bounds must be positive");
    }
  }
  BalanceCriterion(Conjunction c) : v_(std::move(c)) {}
  BalanceCriterion(UserPredicate p) : v_(std::move(p)) {
    detail::require(static_cast<bool>(std::get<UserPredicate>(v_).fn), "user predicate has no function");
  }

  const Variant& variant() const noexcept { return v_; }

  template <typename T>
  const T* get_if() const noexcept {
    return std::get_if<T>(&v_);
  }

  /// True for the Mahalanobis threshold, false for calipers, AND over a
  /// conjunction, and as declared for user predicates.
  bool declared_affinely_invariant() const {
    return std::visit(
        [](const auto& c) -> bool {
          using T = std::decay_t<decltype(c)>;
          if constexpr (std::is_same_v<T, MahalanobisThreshold>) {
            return true;
          } else if constexpr (std::is_same_v<T, Caliper>) {
            return false;
          } else if constexpr (std::is_same_v<T, Conjunction>) {
            return std::all_of(c.children.begin(), c.children.end(),
                               [](const BalanceCriterion& ch) { return ch.declared_affinely_invariant(); });
          } else {
            return c.affinely_invariant;
          }
        },
        v_);
  }

  /// Mahalanobis threshold of 0 (or a conjunction containing one).
  bool requires_exact_balance() const {
    if (const auto* m = get_if<MahalanobisThreshold>()) return m->a == 0.0;
    if (const auto* c = get_if<Conjunction>()) {
      return std::any_of(c->children.begin(), c->children.end(),
                         [](const BalanceCriterion& ch) { return ch.requires_exact_balance(); });
    }
    return false;
  }

  /// phi(x, W).
  bool evaluate(const BalanceContext& ctx, const Assignment& w) const {
    return std::visit(
        [&](const auto& c) -> bool {
          using T = std::decay_t<decltype(c)>;
          if constexpr (std::is_same_v<T, MahalanobisThreshold>) {
            return ctx.mahalanobis(w) <= c.a;
          } else if constexpr (std::is_same_v<T, Caliper>) {
            detail::require(c.bounds.size() == ctx.k(), "caliper bound count does not match covariate count");
            const Eigen::VectorXd d = ctx.diff(w);
            for (Eigen::Index j = 0; j < d.size(); ++j) {
              if (std::abs(d(j)) > c.bounds[static_cast<std::size_t>(j)]) return false;
            }
            return true;
          } else if constexpr (std::is_same_v<T, Conjunction>) {
            return std::all_of(c.children.begin(), c.children.end(),
                               [&](const BalanceCriterion& ch) { return ch.evaluate(ctx, w); });
          } else {
            ctx.check(w);
            return c.fn(ctx, w);
          }
        },
        v_);
  }

 private:
  Variant v_ = MahalanobisThreshold{};
};

inline bool evaluate(const BalanceCriterion& c, const BalanceContext& ctx, const Assignment& w) {
  return c.evaluate(ctx, w);
}

inline BalanceCriterion mahalanobis_threshold(double a) { return MahalanobisThreshold{a}; }
inline BalanceCriterion always_accept() { return MahalanobisThreshold{theory::infinite_threshold}; }
inline BalanceCriterion caliper(std::vector<double> bounds) { return Caliper{std::move(bounds)}; }
inline BalanceCriterion conjunction(std::vector<BalanceCriterion> children) { return Conjunction{std::move(children)}; }
inline BalanceCriterion user_predicate(std::string name, PredicateFn fn, bool affinely_invariant = false,
                                       nlohmann::json params = nlohmann::json::object()) {
  return UserPredicate{std::move(name), std::move(params), std::move(fn), affinely_invariant};
}

// ---------------------------------------------------------------------------
// Named predicates, so user criteria survive a JSON round trip.

using PredicateFactory = std::function<UserPredicate(const nlohmann::json& params)>;

namespace detail {

inline std::map<std::string, PredicateFactory>& predicate_table() {
  static std::map<std::string, PredicateFactory> table = [] {
    std::map<std::string, PredicateFactory> t;
    // Every covariate mean difference within `tolerance` of zero.
    t["zero_mean_difference"] = [](const nlohmann::json& params) {
      const double tol = params.value("tolerance", 0.0);
      return UserPredicate{"zero_mean_difference", nlohmann::json{{"tolerance", tol}},
                           [tol](const BalanceContext& ctx, const Assignment& w) {
                             const Eigen::VectorXd d = diff_in_means(ctx.covariates(), w);
                             return d.cwiseAbs().maxCoeff() <= tol;
                           },
                           true};
    };
    // One-sided: d_column <= bound. Not mirror symmetric.
    t["max_difference"] = [](const nlohmann::json& params) {
      const double bound = params.at("bound").get<double>();
      const auto column = params.value("column", std::size_t{0});
      return UserPredicate{"max_difference", nlohmann::json{{"bound", bound}, {"column", column}},
                           [bound, column](const BalanceContext& ctx, const Assignment& w) {
                             require(column < ctx.k(), "max_difference column out of range");
                             return diff_in_means(ctx.covariates(), w)(static_cast<Eigen::Index>(column)) <= bound;
                           },
                           false};
    };
    return t;
  }();
  return table;
}

}  // namespace detail

/// Registers a predicate factory under `name` (not thread-safe; call at startup).
inline void register_predicate(const std::string& name, PredicateFactory factory) {
  detail::predicate_table()[name] = std::move(factory);
}

inline BalanceCriterion make_registered_predicate(const std::string& name,
                                                  const nlohmann::json& params = nlohmann::json::object()) {
  auto& table = detail::predicate_table();
  const auto it = table.find(name);
  detail::require(it != table.end(), "unknown user predicate '" + name + "'");
  return it->second(params);
}

// ---------------------------------------------------------------------------
// JSON form: {"type": "mahalanobis", "a": 0.21} | {"type": "caliper", "bounds": [...]}
// | {"type": "all", "children": [...]} | {"type": "user", "name": ..., "params": {...}}.
// An infinite threshold is written as the string "inf".

inline nlohmann::json criterion_to_json(const BalanceCriterion& c) {
  return std::visit(
      [](const auto& v) -> nlohmann::json {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, MahalanobisThreshold>) {
          nlohmann::json a = std::isinf(v.a) ? nlohmann::json("inf") : nlohmann::json(v.a);
          return {{"type", "mahalanobis"}, {"a", a}};
        } else if constexpr (std::is_same_v<T, Caliper>) {
          return {{"type", "caliper"}, {"bounds", v.bounds}};
        } else if constexpr (std::is_same_v<T, Conjunction>) {
          nlohmann::json children = nlohmann::json::array();
          for (const auto& ch : v.children) children.push_back(criterion_to_json(ch));
          return {{"type", "all"}, {"children", children}};
        } else {
          return {{"type", "user"}, {"name", v.name}, {"params", v.params}, {"affinely_invariant", v.affinely_invariant}};
        }
      },
      c.variant());
}

inline BalanceCriterion criterion_from_json(const nlohmann::json& j) {
  try {
    const auto type = j.at("type").get<std::string>();
    if (type == "mahalanobis") {
      const auto& a = j.at("a");
      if (a.is_string()) {
        detail::require(a.get<std::string>() == "inf", "threshold string must be \"inf\"");
        return always_accept();
      }
      return mahalanobis_threshold(a.get<double>());
    }
    if (type == "caliper") return caliper(j.at("bounds").get<std::vector<double>>());
    if (type == "all") {
      std::vector<BalanceCriterion> children;
      for (const auto& ch : j.at("children")) children.push_back(criterion_from_json(ch));
      return conjunction(std::move(children));
    }
    if (type == "user") {
      return make_registered_predicate(j.at("name").get<std::string>(), j.value("params", nlohmann::json::object()));
    }
    throw ValidationError("unknown criterion type '" + type + "'");
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed criterion JSON: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Threshold calibration.

enum class CalibrationMethod { chi_square_asymptotic, empirical, enumeration };

inline std::string to_string(CalibrationMethod m) {
  switch (m) {
    case CalibrationMethod::chi_square_asymptotic: return "chi-square-asymptotic";
    case CalibrationMethod::empirical: return "empirical";
    case CalibrationMethod::enumeration: return "enumeration";
  }
  return "unknown";
}

struct CalibrationResult {
  double a = theory::infinite_threshold;
  double p_a_target = 1.0;
  double p_a_achieved = 1.0;
  CalibrationMethod method = CalibrationMethod::chi_square_asymptotic;
  std::size_t draws_used = 0;

  BalanceCriterion criterion() const { return mahalanobis_threshold(a); }
};

inline nlohmann::json calibration_to_json(const CalibrationResult& r) {
  return {{"a", std::isinf(r.a) ? nlohmann::json("inf") : nlohmann::json(r.a)},
          {"p_a_target", r.p_a_target},
          {"p_a_achieved", r.p_a_achieved},
          {"method", to_string(r.method)},
          {"draws_used", r.draws_used}};
}

/// a = chi2_k quantile at p_a (M ~ chi2_k for large samples).
inline CalibrationResult calibrate_threshold_asymptotic(std::size_t k, double p_a) {
  detail::require(p_a > 0.0 && p_a <= 1.0, "acceptance probability must be in (0, 1]");
  return {theory::threshold_for_acceptance(k, p_a), p_a, p_a, CalibrationMethod::chi_square_asymptotic, 0};
}

namespace detail {

// ceil(p * count)-th smallest value (1-based), plus the fraction <= it.
inline std::pair<double, double> lower_quantile(std::vector<double> values, double p_a) {
  std::sort(values.begin(), values.end());
  detail::require(values.front() < values.back(), "degenerate Mahalanobis distribution: all values equal");
  const auto count = values.size();
  auto rank = static_cast<std::size_t>(std::ceil(p_a * static_cast<double>(count) - 1e-9));
  rank = std::clamp<std::size_t>(rank, 1, count);
  const double a = values[rank - 1];
  const auto accepted = static_cast<std::size_t>(std::upper_bound(values.begin(), values.end(), a) - values.begin());
  return {a, static_cast<double>(accepted) / static_cast<double>(count)};
}

}  // namespace detail

/// a = ceil(p_a * draws)-th smallest M over `draws` uniform assignments.
inline CalibrationResult calibrate_threshold_empirical(const BalanceContext& ctx, double p_a, std::size_t draws, Rng& rng,
                                                       std::size_t min_draws = 1000) {
  detail::require(p_a > 0.0 && p_a <= 1.0, "acceptance probability must be in (0, 1]");
  detail::require(draws >= min_draws, "empirical calibration needs at least " + std::to_string(min_draws) + " draws");
  AssignmentDrawer drawer(ctx.n(), ctx.n_treated());
  std::vector<double> m(draws);
  for (auto& value : m) value = ctx.mahalanobis(drawer.draw(rng));
  const auto [a, achieved] = detail::lower_quantile(std::move(m), p_a);
  return {a, p_a, achieved, CalibrationMethod::empirical, draws};
}

/// Same quantile convention over every assignment (small n only).
inline CalibrationResult calibrate_threshold_exact(const BalanceContext& ctx, double p_a,
                                                   std::uint64_t ceiling = default_enumeration_ceiling) {
  detail::require(p_a > 0.0 && p_a <= 1.0, "acceptance probability must be in (0, 1]");
  std::vector<double> m;
  for_each_assignment(ctx.n(), ctx.n_treated(), [&](const Assignment& w) { m.push_back(ctx.mahalanobis(w)); }, ceiling);
  const auto draws = m.size();
  const auto [a, achieved] = detail::lower_quantile(std::move(m), p_a);
  return {a, p_a, achieved, CalibrationMethod::enumeration, draws};
}

/// Checks phi(x, W) == phi(x, 1 - W) on probe assignments. Exhaustive when
/// C(n, n/2) <= probe_draws, otherwise a sampled necessary check.
inline bool is_mirror_symmetric(const BalanceCriterion& c, const BalanceContext& ctx, std::size_t probe_draws, Rng& rng) {
  detail::require(ctx.n_treated() == ctx.n_control(), "mirror symmetry needs equal group sizes");
  const auto total = exact_binomial(ctx.n(), ctx.n_treated());
  bool symmetric = true;
  auto probe = [&](const Assignment& w) {
    if (symmetric && c.evaluate(ctx, w) != c.evaluate(ctx, w.mirrored())) symmetric = false;
  };
  if (total && *total <= probe_draws) {
    for_each_assignment(ctx.n(), ctx.n_treated(), probe, *total);
  } else {
    AssignmentDrawer drawer(ctx.n(), ctx.n_treated());
    for (std::size_t i = 0; i < probe_draws && symmetric; ++i) probe(drawer.draw(rng));
  }
  return symmetric;
}

}  // namespace rerand
