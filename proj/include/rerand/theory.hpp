#pragma once

// Closed-form results for Mahalanobis-distance rerandomization: regularized
// incomplete gamma, chi-square CDF and quantile, the covariance shrinkage
// factor v_a, and the percent-reduction-in-variance formulas.
//
// A threshold of +infinity stands for "accept everything" and is carried
// through every formula (v_a = 1, zero reduction).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "rerand/error.hpp"

namespace rerand::theory {

inline constexpr double infinite_threshold = std::numeric_limits<double>::infinity();

namespace detail {

inline constexpr int max_iterations = 100000;
inline constexpr double series_eps = 1e-17;
inline constexpr double tiny = 1e-300;

// P(b, c) by the power series; converges for all c, used for c < b + 1.
inline double gamma_p_series(double b, double c) {
  double term = 1.0 / b;
  double sum = term;
  for (int n = 1; n < max_iterations; ++n) {
    term *= c / (b + n);
    sum += term;
    if (std::abs(term) < std::abs(sum) * series_eps) {
      break;
    }
  }
  return sum * std::exp(-c + b * std::log(c) - std::lgamma(b));
}

// Q(b, c) by the Legendre continued fraction (modified Lentz), used for c >= b + 1.
inline double gamma_q_continued_fraction(double b, double c) {
  double bb = c + 1.0 - b;
  double cc = 1.0 / tiny;
  double d = 1.0 / bb;
  double h = d;
  for (int i = 1; i < max_iterations; ++i) {
    const double an = -i * (i - b);
    bb += 2.0;
    d = an * d + bb;
    if (std::abs(d) < tiny) d = tiny;
    cc = bb + an / cc;
    if (std::abs(cc) < tiny) cc = tiny;
    d = 1.0 / d;
    const double delta = d * cc;
    h *= delta;
    if (std::abs(delta - 1.0) < series_eps) {
      break;
    }
  }
  return std::exp(-c + b * std::log(c) - std::lgamma(b)) * h;
}

}  // namespace detail

/// Regularized lower incomplete gamma P(b, c) = gamma(b, c) / Gamma(b).
inline double lower_incomplete_gamma_regularized(double b, double c) {
  rerand::detail::require(b > 0.0, "incomplete gamma shape must be positive");
  rerand::detail::require(c >= 0.0, "incomplete gamma argument must be nonnegative");
  if (c == 0.0) return 0.0;
  if (std::isinf(c)) return 1.0;
  if (c < b + 1.0) return detail::gamma_p_series(b, c);
  return 1.0 - detail::gamma_q_continued_fraction(b, c);
}

/// P(chi2_k <= x).
inline double chi2_cdf(double k, double x) {
  rerand::detail::require(k > 0.0, "chi-square degrees of freedom must be positive");
  rerand::detail::require(x >= 0.0, "chi-square argument must be nonnegative");
  return lower_incomplete_gamma_regularized(0.5 * k, 0.5 * x);
}

/// Inverse of chi2_cdf. p = 1 maps to the infinite threshold.
inline double chi2_quantile(double k, double p) {
  rerand::detail::require(k > 0.0, "chi-square degrees of freedom must be positive");
  rerand::detail::require(p >= 0.0 && p <= 1.0, "chi-square quantile probability must be in [0, 1]");
  if (p == 0.0) return 0.0;
  if (p == 1.0) return infinite_threshold;
  double lo = 0.0;
  double hi = std::max(1.0, k);
  while (chi2_cdf(k, hi) < p) {
    lo = hi;
    hi *= 2.0;
  }
  // Bisection on the bracket until the width is below 1e-13 relative.
  for (int i = 0; i < 400; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (chi2_cdf(k, mid) < p) {
      lo = mid;
    } else {
      hi = mid;
    }
    if (hi - lo <= 1e-13 * hi) break;
  }
  return 0.5 * (lo + hi);
}

/// Both algebraic routes to v_a plus the agreed value.
struct ShrinkageFactor {
  double value = 1.0;
  /// (2/k) gamma(k/2 + 1, a/2) / gamma(k/2, a/2), from the raw series ratio.
  double gamma_ratio = 1.0;
  /// P(chi2_{k+2} <= a) / P(chi2_k <= a).
  double cdf_ratio = 1.0;
  /// a == 0: the limit value 0 was returned.
  bool zero_threshold = false;
};

namespace detail {

// c * S(b+1, c) / S(b, c) with S(b, c) = sum_n c^n / (b (b+1) ... (b+n)),
// i.e. the ratio gamma(b+1, c) / gamma(b, c) without forming either term.
inline double lower_gamma_ratio(double b, double c) {
  double term_b = 1.0 / b;
  double term_b1 = 1.0 / (b + 1.0);
  double sum_b = term_b;
  double sum_b1 = term_b1;
  for (int n = 1; n < max_iterations; ++n) {
    term_b *= c / (b + n);
    term_b1 *= c / (b + 1.0 + n);
    sum_b += term_b;
    sum_b1 += term_b1;
    if (sum_b > 1e200) {
      term_b *= 1e-200;
      term_b1 *= 1e-200;
      sum_b *= 1e-200;
      sum_b1 *= 1e-200;
    }
    if (n > c && term_b < sum_b * series_eps && term_b1 < sum_b1 * series_eps) {
      break;
    }
  }
  return c * sum_b1 / sum_b;
}

}  // namespace detail

/// Shrinkage factor v_a for both forms; throws std::logic_error if the two
/// routes disagree by more than 1e-10.
inline ShrinkageFactor v_a_detail(std::size_t k, double a) {
  rerand::detail::require(k >= 1, "covariate count must be positive");
  rerand::detail::require(a >= 0.0, "threshold must be nonnegative");
  ShrinkageFactor out;
  if (std::isinf(a)) return out;
  if (a == 0.0) {
    out.value = out.gamma_ratio = out.cdf_ratio = 0.0;
    out.zero_threshold = true;
    return out;
  }
  const double kd = static_cast<double>(k);
  out.gamma_ratio = (2.0 / kd) * detail::lower_gamma_ratio(0.5 * kd, 0.5 * a);
  out.cdf_ratio = chi2_cdf(kd + 2.0, a) / chi2_cdf(kd, a);
  if (std::abs(out.gamma_ratio - out.cdf_ratio) > 1e-10) {
    throw std::logic_error("v_a forms disagree for k=" + std::to_string(k) + ", a=" + std::to_string(a));
  }
  out.value = std::clamp(out.cdf_ratio, 0.0, 1.0);
  return out;
}

/// Factor by which Mahalanobis rerandomization at threshold a scales
/// cov(mean difference) when M ~ chi2_k.
inline double v_a(std::size_t k, double a) { return v_a_detail(k, a).value; }

/// Threshold a with P(chi2_k <= a) = p_a.
inline double threshold_for_acceptance(std::size_t k, double p_a) {
  rerand::detail::require(p_a > 0.0 && p_a <= 1.0, "acceptance probability must be in (0, 1]");
  return chi2_quantile(static_cast<double>(k), p_a);
}

/// Percent reduction in variance of each covariate mean difference.
inline double priv_covariate(std::size_t k, double a) { return 100.0 * (1.0 - v_a(k, a)); }

/// Percent reduction in variance of the difference-in-means estimate.
inline double priv_tau(std::size_t k, double a, double r_squared) {
  rerand::detail::require(r_squared >= 0.0 && r_squared <= 1.0, "R^2 must be in [0, 1]");
  return priv_covariate(k, a) * r_squared;
}

/// Percent reduction from regression adjustment in a completely randomized
/// experiment with realized Mahalanobis distance m_observed.
inline double priv_regression(double m_observed, double n, double r_squared) {
  rerand::detail::require(n > 0.0, "sample size must be positive");
  rerand::detail::require(m_observed >= 0.0, "Mahalanobis distance must be nonnegative");
  rerand::detail::require(r_squared >= 0.0 && r_squared <= 1.0, "R^2 must be in [0, 1]");
  const double ratio = m_observed / n;
  return 100.0 * ((1.0 + ratio) * r_squared - ratio);
}

/// E(M | M <= a) for M ~ chi2_k; equals k v_a.
inline double expected_m_truncated(std::size_t k, double a) {
  rerand::detail::require(a > 0.0, "threshold must be positive");
  if (std::isinf(a)) return static_cast<double>(k);
  return 2.0 * detail::lower_gamma_ratio(0.5 * static_cast<double>(k), 0.5 * a);
}

/// Inputs for the analytic formulas. Give k and one of a / p_a; resolve()
/// fills in the other from the chi2_k law.
struct TheoryInputs {
  std::size_t k = 1;
  std::optional<double> a;
  std::optional<double> p_a;
  double r_squared = 0.0;
  double n = 0.0;
  std::optional<double> m_observed;

  TheoryInputs& resolve() {
    rerand::detail::require(k >= 1, "covariate count must be positive");
    rerand::detail::require(r_squared >= 0.0 && r_squared <= 1.0, "R^2 must be in [0, 1]");
    rerand::detail::require(a.has_value() != p_a.has_value(), "exactly one of threshold and acceptance probability is needed");
    if (a) {
      rerand::detail::require(*a >= 0.0, "threshold must be nonnegative");
      p_a = std::isinf(*a) ? 1.0 : chi2_cdf(static_cast<double>(k), *a);
    } else {
      a = threshold_for_acceptance(k, *p_a);
    }
    return *this;
  }
};

struct GridRow {
  std::size_t k;
  double p_a;
  double a;
  double r_squared;
  double v_a;
  double priv_covariate;
  double priv_tau;
};

/// (k, p_a, R^2) grid of reductions; R^2 = 1 rows double as the per-covariate surface.
inline std::vector<GridRow> priv_grid(const std::vector<std::size_t>& ks, const std::vector<double>& p_as,
                                      const std::vector<double>& r_squareds) {
  std::vector<GridRow> rows;
  for (double r2 : r_squareds) {
    for (double p : p_as) {
      for (std::size_t k : ks) {
        const double a = threshold_for_acceptance(k, p);
        const double v = v_a(k, a);
        rows.push_back({k, p, a, r2, v, 100.0 * (1.0 - v), 100.0 * (1.0 - v) * r2});
      }
    }
  }
  return rows;
}

}  // namespace rerand::theory
