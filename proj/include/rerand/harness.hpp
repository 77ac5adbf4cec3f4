#pragma once

// Monte Carlo and enumeration experiments that check the rerandomization
// results numerically. Every experiment is a pure function of its
// parameters and RngSpec; replications and draw chunks use child streams,
// so reports do not depend on the thread count.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <functional>
#include <iomanip>
#include <mutex>
#include <numeric>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "rerand/assignments.hpp"
#include "rerand/balance.hpp"
#include "rerand/criteria.hpp"
#include "rerand/inference.hpp"
#include "rerand/rng.hpp"
#include "rerand/sampler.hpp"
#include "rerand/theory.hpp"

namespace rerand::harness {

// ---------------------------------------------------------------------------
// Reports

enum class Rule {
  within_abs,  // |measured - target| <= tolerance
  within_rel,  // |measured - target| <= tolerance * |target|
  within_se,   // |measured - target| <= tolerance * se
  beyond_se,   // |measured - target| > tolerance * se
  at_least,    // measured >= target - tolerance
  at_most,     // measured <= target + tolerance
  greater,     // measured > target + tolerance
  exact,       // measured == target
};

inline std::string to_string(Rule r) {
  switch (r) {
    case Rule::within_abs: return "|m-t|<=tol";
    case Rule::within_rel: return "|m-t|<=tol*|t|";
    case Rule::within_se: return "|m-t|<=tol*se";
    case Rule::beyond_se: return "|m-t|>tol*se";
    case Rule::at_least: return "m>=t-tol";
    case Rule::at_most: return "m<=t+tol";
    case Rule::greater: return "m>t+tol";
    case Rule::exact: return "m==t";
  }
  return "?";
}

struct ReportRow {
  std::string name;
  double measured = 0.0;
  double se = 0.0;
  double target = 0.0;
  double tolerance = 0.0;
  Rule rule = Rule::within_abs;
  std::size_t draws = 0;
  bool pass = false;
};

inline ReportRow make_row(std::string name, double measured, double se, double target, double tolerance, Rule rule,
                          std::size_t draws) {
  ReportRow row{std::move(name), measured, se, target, tolerance, rule, draws, false};
  const double gap = std::abs(measured - target);
  switch (rule) {
    case Rule::within_abs: row.pass = gap <= tolerance; break;
    case Rule::within_rel: row.pass = gap <= tolerance * std::abs(target); break;
    case Rule::within_se: row.pass = gap <= tolerance * se; break;
    case Rule::beyond_se: row.pass = gap > tolerance * se; break;
    case Rule::at_least: row.pass = measured >= target - tolerance; break;
    case Rule::at_most: row.pass = measured <= target + tolerance; break;
    case Rule::greater: row.pass = measured > target + tolerance; break;
    case Rule::exact: row.pass = measured == target; break;
  }
  if (std::isnan(measured)) row.pass = false;
  return row;
}

struct ExperimentReport {
  std::string id;
  nlohmann::json parameters = nlohmann::json::object();
  std::vector<ReportRow> rows;
  /// Experiment-specific extras (acceptable sets, per-covariate tables, ...).
  nlohmann::json details = nlohmann::json::object();

  void add(std::string name, double measured, double se, double target, double tolerance, Rule rule,
           std::size_t draws) {
    rows.push_back(make_row(std::move(name), measured, se, target, tolerance, rule, draws));
  }

  bool passed() const {
    return !rows.empty() && std::all_of(rows.begin(), rows.end(), [](const ReportRow& r) { return r.pass; });
  }

  const ReportRow& row(const std::string& name) const {
    for (const auto& r : rows) {
      if (r.name == name) return r;
    }
    throw std::out_of_range("no report row named " + name);
  }
};

inline nlohmann::json report_to_json(const ExperimentReport& report) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : report.rows) {
    rows.push_back({{"name", r.name},
                    {"measured", r.measured},
                    {"se", r.se},
                    {"target", r.target},
                    {"tolerance", r.tolerance},
                    {"rule", to_string(r.rule)},
                    {"draws", r.draws},
                    {"pass", r.pass}});
  }
  return {{"experiment", report.id},
          {"parameters", report.parameters},
          {"rows", rows},
          {"details", report.details},
          {"passed", report.passed()}};
}

inline std::string report_to_table(const ExperimentReport& report) {
  std::ostringstream out;
  out << report.id << "  " << report.parameters.dump() << '\n';
  for (const auto& r : report.rows) {
    out << "  " << (r.pass ? "PASS" : "FAIL") << "  " << std::left << std::setw(36) << r.name << std::right
        << std::setprecision(6) << " measured=" << std::setw(12) << r.measured << " se=" << std::setw(11) << r.se
        << " target=" << std::setw(12) << r.target << " tol=" << std::setw(9) << r.tolerance << "  ["
        << to_string(r.rule) << ", n=" << r.draws << "]\n";
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// Parallel helpers

/// Runs fn(i) for i in [0, count) on up to `threads` workers.
inline void parallel_for(std::size_t count, unsigned threads, const std::function<void(std::size_t)>& fn) {
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(count, 1))));
  if (threads == 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::jthread> workers;
  for (unsigned t = 0; t < threads; ++t) {
    workers.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  workers.clear();
  if (failure) std::rethrow_exception(failure);
}

inline unsigned default_threads() { return std::max(1u, std::thread::hardware_concurrency()); }

inline constexpr std::size_t chunk_size = 10'000;

// ---------------------------------------------------------------------------
// Moments

/// Raw moment sums of a d-dimensional sample; mergeable.
class Moments {
 public:
  explicit Moments(std::size_t dim = 0)
      : s1_(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim))),
        s3_(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim))),
        s2_(Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim))),
        s22_(Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim))) {}

  void add(const Eigen::VectorXd& x) {
    ++count_;
    s1_ += x;
    s3_ += x.array().cube().matrix();
    s2_.noalias() += x * x.transpose();
    const Eigen::MatrixXd outer = x * x.transpose();
    s22_ += outer.array().square().matrix();
  }

  void merge(const Moments& other) {
    count_ += other.count_;
    s1_ += other.s1_;
    s3_ += other.s3_;
    s2_ += other.s2_;
    s22_ += other.s22_;
  }

  std::size_t count() const noexcept { return count_; }
  Eigen::VectorXd mean() const { return s1_ / static_cast<double>(count_); }

  Eigen::MatrixXd covariance() const {
    const double n = static_cast<double>(count_);
    const Eigen::VectorXd m = mean();
    return (s2_ - n * m * m.transpose()) / (n - 1.0);
  }

  /// Large-sample standard error of covariance()(i, i).
  double variance_se(std::size_t i) const {
    const auto j = static_cast<Eigen::Index>(i);
    const double n = static_cast<double>(count_);
    const double m = s1_(j) / n;
    const double e2 = s2_(j, j) / n;
    const double e3 = s3_(j) / n;
    const double e4 = s22_(j, j) / n;
    const double mu4 = e4 - 4.0 * m * e3 + 6.0 * m * m * e2 - 3.0 * m * m * m * m;
    const double var = e2 - m * m;
    return std::sqrt(std::max(mu4 - var * var, 0.0) / n);
  }

  /// Large-sample standard error of covariance()(i, j), treating the means as 0.
  double covariance_se(std::size_t i, std::size_t j) const {
    const double n = static_cast<double>(count_);
    const auto a = static_cast<Eigen::Index>(i);
    const auto b = static_cast<Eigen::Index>(j);
    const double c = s2_(a, b) / n;
    return std::sqrt(std::max(s22_(a, b) / n - c * c, 0.0) / n);
  }

  double correlation(std::size_t i, std::size_t j) const {
    const Eigen::MatrixXd c = covariance();
    const auto a = static_cast<Eigen::Index>(i);
    const auto b = static_cast<Eigen::Index>(j);
    return c(a, b) / std::sqrt(c(a, a) * c(b, b));
  }

 private:
  std::size_t count_ = 0;
  Eigen::VectorXd s1_;
  Eigen::VectorXd s3_;
  Eigen::MatrixXd s2_;
  Eigen::MatrixXd s22_;
};

/// Standard error of a ratio of two independent-ish positive estimates.
inline double ratio_se(double num, double num_se, double den, double den_se) {
  const double r = num / den;
  return std::abs(r) * std::sqrt(std::pow(num_se / num, 2) + std::pow(den_se / den, 2));
}

/// Kolmogorov-Smirnov distance between a sample and a continuous CDF.
inline double ks_distance(std::vector<double> sample, const std::function<double(double)>& cdf) {
  std::sort(sample.begin(), sample.end());
  const double n = static_cast<double>(sample.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const double f = cdf(sample[i]);
    d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
  }
  return d;
}

inline double ks_uniform(std::vector<double> sample) {
  return ks_distance(std::move(sample), [](double u) { return std::clamp(u, 0.0, 1.0); });
}

// ---------------------------------------------------------------------------
// Data generators

enum class CovariateLaw { normal, student_t5 };

/// n x k covariates with unit marginal variance (t5 draws are rescaled) and
/// equicorrelation rho between columns.
inline CovariateMatrix generate_covariates(std::size_t n, std::size_t k, Rng& rng, double rho = 0.0,
                                           CovariateLaw law = CovariateLaw::normal) {
  detail::require(rho >= 0.0 && rho < 1.0, "equicorrelation must be in [0, 1)");
  auto draw = [&] { return law == CovariateLaw::normal ? rng.normal() : rng.student_t(5) / std::sqrt(5.0 / 3.0); };
  Eigen::MatrixXd x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(k));
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double common = draw();
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      x(i, j) = std::sqrt(1.0 - rho) * draw() + std::sqrt(rho) * common;
    }
  }
  return CovariateMatrix(std::move(x));
}

/// y_i(W_i) = beta0 + beta' x_i + tau W_i + e_i, e_i ~ N(0, sigma_e^2).
struct LinearOutcomeModel {
  double beta0 = 0.0;
  Eigen::VectorXd beta;
  double tau = 0.0;
  double sigma_e = 1.0;
  double target_r_squared = 0.5;

  /// beta = 1 and sigma_e^2 = beta' cov(x) beta (1 - R^2) / R^2. R^2 = 0 gives beta = 0, sigma_e = 1.
  static LinearOutcomeModel for_r_squared(const CovariateMatrix& x, double r_squared, double tau = 0.0) {
    detail::require(r_squared >= 0.0 && r_squared <= 1.0, "R^2 must be in [0, 1]");
    LinearOutcomeModel model;
    model.tau = tau;
    model.target_r_squared = r_squared;
    const auto k = static_cast<Eigen::Index>(x.k());
    if (r_squared == 0.0) {
      model.beta = Eigen::VectorXd::Zero(k);
      model.sigma_e = 1.0;
      return model;
    }
    model.beta = Eigen::VectorXd::Ones(k);
    const double explained = model.beta.dot(sample_covariance(x) * model.beta);
    model.sigma_e = std::sqrt(explained * (1.0 - r_squared) / r_squared);
    return model;
  }
};

struct PotentialOutcomes {
  std::vector<double> y1;
  std::vector<double> y0;

  double tau() const {
    double s = 0.0;
    for (std::size_t i = 0; i < y1.size(); ++i) s += y1[i] - y0[i];
    return s / static_cast<double>(y1.size());
  }
};

/// Draws potential outcomes. With exact_r_squared the residuals are made
/// orthogonal to [1, x] and rescaled so the in-sample R^2 of y(0) on x equals
/// the target exactly.
inline PotentialOutcomes generate_outcomes(const CovariateMatrix& x, const LinearOutcomeModel& model, Rng& rng,
                                           bool exact_r_squared = false) {
  const auto n = static_cast<Eigen::Index>(x.n());
  Eigen::VectorXd signal = Eigen::VectorXd::Constant(n, model.beta0) + x.data() * model.beta;
  Eigen::VectorXd e(n);
  for (Eigen::Index i = 0; i < n; ++i) e(i) = model.sigma_e * rng.normal();
  if (exact_r_squared && model.target_r_squared > 0.0 && model.target_r_squared < 1.0) {
    Eigen::MatrixXd design(n, x.data().cols() + 1);
    design.col(0).setOnes();
    design.rightCols(x.data().cols()) = x.data();
    const Eigen::VectorXd coef = design.colPivHouseholderQr().solve(e);
    e -= design * coef;
    const Eigen::VectorXd centered_signal = signal.array() - signal.mean();
    const double explained = centered_signal.squaredNorm();
    const double target_resid = explained * (1.0 - model.target_r_squared) / model.target_r_squared;
    e *= std::sqrt(target_resid / e.squaredNorm());
  } else if (exact_r_squared && model.target_r_squared == 1.0) {
    e.setZero();
  }
  PotentialOutcomes out;
  out.y0.resize(static_cast<std::size_t>(n));
  out.y1.resize(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    out.y0[static_cast<std::size_t>(i)] = signal(i) + e(i);
    out.y1[static_cast<std::size_t>(i)] = signal(i) + e(i) + model.tau;
  }
  return out;
}

/// In-sample R^2 of y on [1, x].
inline double sample_r_squared(const CovariateMatrix& x, std::span<const double> y) {
  const auto n = static_cast<Eigen::Index>(x.n());
  Eigen::MatrixXd design(n, x.data().cols() + 1);
  design.col(0).setOnes();
  design.rightCols(x.data().cols()) = x.data();
  const Eigen::VectorXd yv = Eigen::Map<const Eigen::VectorXd>(y.data(), n);
  const Eigen::VectorXd fitted = design * design.colPivHouseholderQr().solve(yv);
  const double ss_tot = (yv.array() - yv.mean()).square().sum();
  const double ss_res = (yv - fitted).squaredNorm();
  return 1.0 - ss_res / ss_tot;
}

inline double sample_variance(std::span<const double> v) {
  const double n = static_cast<double>(v.size());
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return ss / (n - 1.0);
}

namespace detail {

// Uniform draws of d = X_T - X_C, split into chunks with child streams.
// `visit(chunk_moments_all, chunk_moments_accepted, d, z, w)` is called per
// draw on the chunk's private accumulators.
struct DrawSummary {
  Moments all_d;
  Moments accepted_d;
  Moments all_z;
  Moments accepted_z;
  std::size_t accepted = 0;
  std::size_t draws = 0;
};

inline DrawSummary summarize_draws(const BalanceContext& ctx, const BalanceCriterion& c, std::size_t draws,
                                   const RngSpec& spec, unsigned threads) {
  const std::size_t chunks = (draws + chunk_size - 1) / chunk_size;
  const std::size_t k = ctx.k();
  const std::size_t r = ctx.rank();
  std::vector<DrawSummary> parts(chunks);
  parallel_for(chunks, threads, [&](std::size_t ci) {
    Rng rng(spec.child(ci));
    AssignmentDrawer drawer(ctx.n(), ctx.n_treated());
    DrawSummary part{Moments(k), Moments(k), Moments(r), Moments(r), 0, 0};
    const std::size_t count = std::min(chunk_size, draws - ci * chunk_size);
    for (std::size_t i = 0; i < count; ++i) {
      const Assignment& w = drawer.draw(rng);
      const Eigen::VectorXd d = ctx.diff(w);
      const Eigen::VectorXd z = std::sqrt(ctx.scale()) * (ctx.whitening() * d);
      part.all_d.add(d);
      part.all_z.add(z);
      ++part.draws;
      if (c.evaluate(ctx, w)) {
        part.accepted_d.add(d);
        part.accepted_z.add(z);
        ++part.accepted;
      }
    }
    parts[ci] = std::move(part);
  });
  DrawSummary total{Moments(k), Moments(k), Moments(r), Moments(r), 0, 0};
  for (const auto& p : parts) {
    total.all_d.merge(p.all_d);
    total.accepted_d.merge(p.accepted_d);
    total.all_z.merge(p.all_z);
    total.accepted_z.merge(p.accepted_z);
    total.accepted += p.accepted;
    total.draws += p.draws;
  }
  return total;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// H1: covariance of the mean difference shrinks by v_a.

inline ExperimentReport h1_covariance_shrinkage(std::size_t n, std::size_t k, double p_a, std::size_t draws,
                                                const RngSpec& spec, unsigned threads = default_threads()) {
  ExperimentReport report;
  report.id = "H1";
  report.parameters = {{"n", n}, {"k", k}, {"p_a", p_a}, {"draws", draws}, {"seed", spec}};
  Rng rng(spec);
  const CovariateMatrix x = generate_covariates(n, k, rng);
  const auto ctx = build_context(x, n / 2);
  const double a = theory::threshold_for_acceptance(k, p_a);
  const double va = theory::v_a(k, a);
  const auto s = detail::summarize_draws(ctx, mahalanobis_threshold(a), draws, spec.child(1), threads);
  rerand::detail::require(s.accepted >= 100, "H1: fewer than 100 accepted draws");

  const Eigen::MatrixXd cov_all = s.all_d.covariance();
  const Eigen::MatrixXd cov_acc = s.accepted_d.covariance();
  double shrink = 0.0;
  double shrink_se2 = 0.0;
  nlohmann::json per_covariate = nlohmann::json::array();
  for (std::size_t j = 0; j < k; ++j) {
    const auto jj = static_cast<Eigen::Index>(j);
    const double ratio = cov_acc(jj, jj) / cov_all(jj, jj);
    const double se = ratio_se(cov_acc(jj, jj), s.accepted_d.variance_se(j), cov_all(jj, jj), s.all_d.variance_se(j));
    per_covariate.push_back({{"covariate", j}, {"ratio", ratio}, {"se", se}});
    shrink += ratio / static_cast<double>(k);
    shrink_se2 += se * se / static_cast<double>(k * k);
  }
  report.details["per_covariate"] = per_covariate;
  report.details["v_a"] = va;
  report.details["a"] = a;
  report.add("shrink factor (mean diag ratio)", shrink, std::sqrt(shrink_se2), va, 0.10, Rule::within_rel, draws);
  report.add("acceptance rate", static_cast<double>(s.accepted) / static_cast<double>(s.draws), 0.0, p_a, 0.15,
             Rule::within_rel, draws);

  // Canonical form: cov(Z | accepted) = v_a I.
  const Eigen::MatrixXd cz = s.accepted_z.covariance();
  const std::size_t r = ctx.rank();
  double trace = 0.0;
  for (std::size_t j = 0; j < r; ++j) trace += cz(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(j));
  report.add("canonical cov(Z) trace / rank", trace / static_cast<double>(r), 0.0, va, 0.10, Rule::within_rel,
             s.accepted);
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = i + 1; j < r; ++j) {
      report.add("canonical cov(Z" + std::to_string(i + 1) + ",Z" + std::to_string(j + 1) + ")",
                 cz(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)), s.accepted_z.covariance_se(i, j), 0.0,
                 3.0, Rule::within_se, s.accepted);
    }
  }
  return report;
}

// ---------------------------------------------------------------------------
// H2: equal percent reduction in variance for every covariate and for
// linear combinations.

inline ExperimentReport h2_priv_per_covariate(std::size_t n, std::size_t k, double p_a, std::size_t draws,
                                              const RngSpec& spec, unsigned threads = default_threads()) {
  ExperimentReport report;
  report.id = "H2";
  report.parameters = {{"n", n}, {"k", k}, {"p_a", p_a}, {"draws", draws}, {"seed", spec}};
  Rng rng(spec);
  const CovariateMatrix x = generate_covariates(n, k, rng);
  const auto ctx = build_context(x, n / 2);
  const double a = theory::threshold_for_acceptance(k, p_a);
  const double target = theory::priv_covariate(k, a);

  // Append a random linear combination c'x as an extra column; its mean
  // difference is c'd, and the criterion only looks at the original x.
  Eigen::VectorXd combo(static_cast<Eigen::Index>(k));
  for (Eigen::Index j = 0; j < combo.size(); ++j) combo(j) = rng.normal();
  const auto summary = detail::summarize_draws(ctx, mahalanobis_threshold(a), draws, spec.child(1), threads);

  std::vector<double> priv(k);
  std::vector<double> priv_se(k);
  const Eigen::MatrixXd cov_all = summary.all_d.covariance();
  const Eigen::MatrixXd cov_acc = summary.accepted_d.covariance();
  for (std::size_t j = 0; j < k; ++j) {
    const auto jj = static_cast<Eigen::Index>(j);
    const double ratio = cov_acc(jj, jj) / cov_all(jj, jj);
    priv[j] = 100.0 * (1.0 - ratio);
    priv_se[j] = 100.0 * ratio_se(cov_acc(jj, jj), summary.accepted_d.variance_se(j), cov_all(jj, jj),
                                  summary.all_d.variance_se(j));
    report.add("PRIV covariate " + std::to_string(j + 1), priv[j], priv_se[j], target, 5.0, Rule::within_abs,
               summary.accepted);
  }
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = i + 1; j < k; ++j) {
      report.add("EPVR gap covariates " + std::to_string(i + 1) + "," + std::to_string(j + 1), priv[i] - priv[j],
                 std::hypot(priv_se[i], priv_se[j]), 0.0, 3.0, Rule::within_se, summary.accepted);
    }
  }
  const double combo_all = combo.dot(cov_all * combo);
  const double combo_acc = combo.dot(cov_acc * combo);
  const double combo_priv = 100.0 * (1.0 - combo_acc / combo_all);
  report.add("PRIV random linear combination", combo_priv, 0.0, target, 5.0, Rule::within_abs, summary.accepted);
  report.details["a"] = a;
  report.details["combination"] = std::vector<double>(combo.data(), combo.data() + combo.size());
  return report;
}

// ---------------------------------------------------------------------------
// H3: variance of tau-hat falls by 100 (1 - v_a) R^2; tau-hat stays unbiased.

inline ExperimentReport h3_priv_tau(std::size_t n, std::size_t k, double p_a, double r_squared, double tau,
                                    std::size_t replications, const RngSpec& spec,
                                    unsigned threads = default_threads()) {
  ExperimentReport report;
  report.id = "H3";
  report.parameters = {{"n", n},     {"k", k}, {"p_a", p_a}, {"r_squared", r_squared}, {"tau", tau},
                       {"replications", replications}, {"seed", spec}};
  Rng rng(spec);
  const CovariateMatrix x = generate_covariates(n, k, rng);
  const auto model = LinearOutcomeModel::for_r_squared(x, r_squared, tau);
  const auto po = generate_outcomes(x, model, rng, true);
  const auto ctx = build_context(x, n / 2);
  const double a = theory::threshold_for_acceptance(k, p_a);
  const auto criterion = mahalanobis_threshold(a);

  std::vector<double> tau_rerand(replications);
  std::vector<double> tau_pure(replications);
  std::vector<double> m_pure(replications);
  parallel_for(replications, threads, [&](std::size_t rep) {
    Rng r(spec.child(rep + 1));
    const auto design = rerandomize(ctx, criterion, r);
    tau_rerand[rep] = estimate_tau(observed_outcomes(po.y1, po.y0, design.assignment), design.assignment);
    const Assignment pure = draw_assignment(ctx.n(), ctx.n_treated(), r);
    tau_pure[rep] = estimate_tau(observed_outcomes(po.y1, po.y0, pure), pure);
    m_pure[rep] = ctx.mahalanobis(pure);
  });

  // Exact randomization variance under pure randomization with an additive effect.
  const double nt = static_cast<double>(ctx.n_treated());
  const double nc = static_cast<double>(ctx.n_control());
  const double var_pure_exact = sample_variance(po.y0) * (1.0 / nt + 1.0 / nc);
  const double var_rerand = sample_variance(tau_rerand);
  const double reps = static_cast<double>(replications);
  const double var_rerand_se = var_rerand * std::sqrt(2.0 / (reps - 1.0));
  const double priv = 100.0 * (1.0 - var_rerand / var_pure_exact);
  const double priv_se = 100.0 * var_rerand_se / var_pure_exact;
  const double target = theory::priv_tau(k, a, r_squared);
  report.add("PRIV tau-hat", priv, priv_se, target, 5.0, Rule::within_abs, replications);

  const double mean_tau = std::accumulate(tau_rerand.begin(), tau_rerand.end(), 0.0) / reps;
  report.add("mean tau-hat (rerandomized)", mean_tau, std::sqrt(var_rerand / reps), po.tau(), 3.0, Rule::within_se,
             replications);
  const double var_pure_mc = sample_variance(tau_pure);
  report.add("pure-randomization var (MC vs exact)", var_pure_mc, var_pure_exact * std::sqrt(2.0 / (reps - 1.0)),
             var_pure_exact, 3.0, Rule::within_se, replications);

  const double mean_m = std::accumulate(m_pure.begin(), m_pure.end(), 0.0) / reps;
  const double regression = theory::priv_regression(mean_m, static_cast<double>(n), r_squared);
  report.add("rerandomization PRIV vs regression PRIV", target, 0.0, regression, 3.0, Rule::at_least, replications);
  report.details["realized_r_squared"] = sample_r_squared(x, po.y0);
  report.details["a"] = a;
  report.details["v_a"] = theory::v_a(k, a);
  report.details["mean_m_pure"] = mean_m;
  report.details["priv_regression"] = regression;
  return report;
}

// ---------------------------------------------------------------------------
// H4: with equal groups and a mirror-symmetric criterion, tau-hat averaged
// over the acceptable set equals tau exactly.

namespace detail {

inline double mean_tau_over(const std::vector<Assignment>& set, const PotentialOutcomes& po) {
  double sum = 0.0;
  for (const auto& w : set) sum += estimate_tau(observed_outcomes(po.y1, po.y0, w), w);
  return sum / static_cast<double>(set.size());
}

}  // namespace detail

inline ExperimentReport h4_unbiasedness(const RngSpec& spec) {
  ExperimentReport report;
  report.id = "H4";
  report.parameters = {{"seed", spec}};
  Rng rng(spec);
  constexpr double machine_tol = 1e-12;

  auto nonadditive_table = [&](std::size_t n) {
    PotentialOutcomes po;
    for (std::size_t i = 0; i < n; ++i) {
      po.y0.push_back(rng.normal());
      po.y1.push_back(rng.normal() + 2.0 * rng.uniform());
    }
    return po;
  };

  // n = 4 and n = 8 with several symmetric criteria and a random (nonadditive) table.
  for (std::size_t n : {4u, 8u}) {
    const CovariateMatrix x = generate_covariates(n, 2, rng);
    const auto ctx = build_context(x, n / 2);
    const auto po = nonadditive_table(n);
    const double median_a = calibrate_threshold_exact(ctx, 0.5).a;
    const Eigen::VectorXd sd = sample_covariance(x).diagonal().cwiseSqrt();
    const std::vector<std::pair<std::string, BalanceCriterion>> criteria = {
        {"mahalanobis-median", mahalanobis_threshold(median_a)},
        {"caliper", caliper({0.8 * sd(0), 0.8 * sd(1)})},
        {"conjunction", conjunction({mahalanobis_threshold(2.0 * median_a), caliper({sd(0), sd(1)})})},
    };
    for (const auto& [name, c] : criteria) {
      const auto set = enumerate_acceptable(ctx, c);
      if (set.empty()) continue;
      report.add("n=" + std::to_string(n) + " " + name + " E[tau-hat]-tau", detail::mean_tau_over(set, po) - po.tau(),
                 0.0, 0.0, machine_tol, Rule::within_abs, set.size());
    }
  }

  // n = 12, Mahalanobis threshold at the exact median.
  {
    const CovariateMatrix x = generate_covariates(12, 3, rng);
    const auto ctx = build_context(x, 6);
    const auto po = nonadditive_table(12);
    const auto c = mahalanobis_threshold(calibrate_threshold_exact(ctx, 0.5).a);
    Rng probe(spec.child(7));
    report.add("n=12 criterion mirror-symmetric", is_mirror_symmetric(c, ctx, 1000, probe) ? 1.0 : 0.0, 0.0, 1.0, 0.0,
               Rule::exact, 924);
    const auto set = enumerate_acceptable(ctx, c);
    report.add("n=12 mahalanobis-median E[tau-hat]-tau", detail::mean_tau_over(set, po) - po.tau(), 0.0, 0.0,
               machine_tol, Rule::within_abs, set.size());
  }

  // One-sided criterion d_1 <= 0: not mirror symmetric, and tau-hat is biased
  // when outcomes track x_1.
  {
    const CovariateMatrix x = generate_covariates(10, 1, rng);
    const auto ctx = build_context(x, 5);
    PotentialOutcomes po;
    for (std::size_t i = 0; i < 10; ++i) {
      po.y0.push_back(x.data()(static_cast<Eigen::Index>(i), 0));
      po.y1.push_back(x.data()(static_cast<Eigen::Index>(i), 0) + 1.0);
    }
    const auto c = make_registered_predicate("max_difference", {{"bound", 0.0}});
    Rng probe(spec.child(8));
    report.add("one-sided criterion mirror-symmetric", is_mirror_symmetric(c, ctx, 1000, probe) ? 1.0 : 0.0, 0.0, 0.0,
               0.0, Rule::exact, 252);
    const auto set = enumerate_acceptable(ctx, c);
    const double bias = detail::mean_tau_over(set, po) - po.tau();
    report.add("one-sided criterion |bias| witnessed", std::abs(bias), 0.0, 0.0, 1e-6, Rule::greater, set.size());
    report.details["one_sided_bias"] = bias;
  }
  return report;
}

// ---------------------------------------------------------------------------
// H5: the three-unit counterexample with x = (0, 1, 2), y(1) = (1, 1, 0),
// y(0) = (0, 0, 1) and the criterion "difference in x means is zero".

inline ExperimentReport h5_counterexample() {
  ExperimentReport report;
  report.id = "H5";
  const std::vector<double> xv{0.0, 1.0, 2.0};
  const PotentialOutcomes po{{1.0, 1.0, 0.0}, {0.0, 0.0, 1.0}};
  const auto x = CovariateMatrix::column(xv);
  const auto criterion = make_registered_predicate("zero_mean_difference");
  report.parameters = {{"x", xv}, {"y1", po.y1}, {"y0", po.y0}, {"criterion", criterion_to_json(criterion)}};

  auto bits_json = [](const std::vector<Assignment>& set) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& w : set) out.push_back(w.bits());
    return out;
  };
  auto same_set = [](const std::vector<Assignment>& got, std::vector<std::vector<std::uint8_t>> want) {
    std::vector<std::vector<std::uint8_t>> bits;
    for (const auto& w : got) bits.push_back(w.bits());
    std::sort(bits.begin(), bits.end());
    std::sort(want.begin(), want.end());
    return bits == want;
  };

  const double tau = po.tau();
  report.add("tau from table", tau, 0.0, 1.0 / 3.0, 0.0, Rule::exact, 1);

  // (i) every unit treated with probability 1/2, group sizes free (both groups nonempty).
  std::vector<Assignment> case_i;
  for (std::size_t nt = 1; nt <= 2; ++nt) {
    const auto ctx = build_context(x, nt);
    for (auto& w : enumerate_acceptable(ctx, criterion)) case_i.push_back(std::move(w));
  }
  std::sort(case_i.begin(), case_i.end());
  report.add("case (i) acceptable set size", static_cast<double>(case_i.size()), 0.0, 2.0, 0.0, Rule::exact, 6);
  report.add("case (i) acceptable set = {(0,1,0),(1,0,1)}", same_set(case_i, {{0, 1, 0}, {1, 0, 1}}) ? 1.0 : 0.0, 0.0,
             1.0, 0.0, Rule::exact, 6);
  for (const auto& w : case_i) {
    std::string label = "case (i) tau-hat at W=(";
    for (std::size_t i = 0; i < w.size(); ++i) label += (i ? "," : "") + std::to_string(w.bits()[i]);
    report.add(label + ")", estimate_tau(observed_outcomes(po.y1, po.y0, w), w), 0.0, 0.5, 0.0, Rule::exact, 1);
  }

  // (ii) two treated, one control.
  const auto ctx2 = build_context(x, 2);
  const auto case_ii = enumerate_acceptable(ctx2, criterion);
  report.add("case (ii) acceptable set = {(1,0,1)}", same_set(case_ii, {{1, 0, 1}}) ? 1.0 : 0.0, 0.0, 1.0, 0.0,
             Rule::exact, 3);
  if (!case_ii.empty()) {
    report.add("case (ii) tau-hat", estimate_tau(observed_outcomes(po.y1, po.y0, case_ii[0]), case_ii[0]), 0.0, 0.5,
               0.0, Rule::exact, 1);
  }
  Rng rng(RngSpec{2009, 0});
  const auto design = rerandomize(ctx2, criterion, rng, 1000);
  report.add("case (ii) rerandomize returns (1,0,1)",
             design.assignment == Assignment::from_bits({1, 0, 1}) ? 1.0 : 0.0, 0.0, 1.0, 0.0, Rule::exact,
             design.proposals);
  report.details["case_i"] = bits_json(case_i);
  report.details["case_ii"] = bits_json(case_ii);
  return report;
}

// ---------------------------------------------------------------------------
// H6: affine invariance. The Mahalanobis criterion keeps the correlation of
// the mean differences and reduces every covariate equally; calipers on raw
// coordinates do neither.

inline ExperimentReport h6_affine_invariance(std::size_t n, std::size_t k, double rho, double p_a, std::size_t draws,
                                             const RngSpec& spec, unsigned threads = default_threads()) {
  rerand::detail::require(k >= 2, "H6 needs at least two covariates");
  ExperimentReport report;
  report.id = "H6";
  report.parameters = {{"n", n}, {"k", k}, {"rho", rho}, {"p_a", p_a}, {"draws", draws}, {"seed", spec}};
  Rng rng(spec);
  const CovariateMatrix x = generate_covariates(n, k, rng, rho);
  const auto ctx = build_context(x, n / 2);
  const Eigen::MatrixXd cov_x = sample_covariance(x);
  const double cor_x = cov_x(0, 1) / std::sqrt(cov_x(0, 0) * cov_x(1, 1));
  const double a = theory::threshold_for_acceptance(k, p_a);

  // Equal calipers on raw coordinates, sized so about p_a of draws pass.
  std::vector<double> max_abs;
  {
    Rng pilot(spec.child(99));
    AssignmentDrawer drawer(ctx.n(), ctx.n_treated());
    for (std::size_t i = 0; i < std::min<std::size_t>(draws, 50'000); ++i) {
      max_abs.push_back(ctx.diff(drawer.draw(pilot)).cwiseAbs().maxCoeff());
    }
    std::sort(max_abs.begin(), max_abs.end());
  }
  const double bound = max_abs[static_cast<std::size_t>(p_a * static_cast<double>(max_abs.size()))];
  const auto equal_caliper = caliper(std::vector<double>(k, bound));
  std::vector<double> lopsided(k, 1e6 * bound);
  lopsided[0] = bound;
  const auto asymmetric_caliper = caliper(lopsided);

  const auto sm = detail::summarize_draws(ctx, mahalanobis_threshold(a), draws, spec.child(1), threads);
  const auto sc = detail::summarize_draws(ctx, equal_caliper, draws, spec.child(1), threads);
  const auto sa = detail::summarize_draws(ctx, asymmetric_caliper, draws, spec.child(1), threads);

  auto cor_se = [](double r, std::size_t count) { return (1.0 - r * r) / std::sqrt(static_cast<double>(count)); };
  const double cor_all = sm.all_d.correlation(0, 1);
  const double cor_m = sm.accepted_d.correlation(0, 1);
  const double cor_c = sc.accepted_d.correlation(0, 1);
  report.add("cor(d) under phi_M vs cor(x)", cor_m, cor_se(cor_m, sm.accepted), cor_x, 0.05, Rule::within_abs,
             sm.accepted);
  report.add("cor(d) all draws vs cor(x)", cor_all, cor_se(cor_all, sm.draws), cor_x, 0.02, Rule::within_abs, sm.draws);
  report.add("cor(d) shift under equal caliper", cor_c, std::hypot(cor_se(cor_c, sc.accepted), cor_se(cor_all, sc.draws)),
             cor_all, 3.0, Rule::beyond_se, sc.accepted);

  auto priv_gap = [&](const detail::DrawSummary& s) {
    const Eigen::MatrixXd all = s.all_d.covariance();
    const Eigen::MatrixXd acc = s.accepted_d.covariance();
    std::array<double, 2> priv{};
    std::array<double, 2> se{};
    for (std::size_t j = 0; j < 2; ++j) {
      const auto jj = static_cast<Eigen::Index>(j);
      priv[j] = 100.0 * (1.0 - acc(jj, jj) / all(jj, jj));
      se[j] = 100.0 * ratio_se(acc(jj, jj), s.accepted_d.variance_se(j), all(jj, jj), s.all_d.variance_se(j));
    }
    return std::pair{priv[0] - priv[1], std::hypot(se[0], se[1])};
  };
  const auto [gap_m, gap_m_se] = priv_gap(sm);
  const auto [gap_a, gap_a_se] = priv_gap(sa);
  report.add("EPVR gap under phi_M", gap_m, gap_m_se, 0.0, 3.0, Rule::within_se, sm.accepted);
  report.add("EPVR gap under asymmetric caliper", gap_a, gap_a_se, 0.0, 3.0, Rule::beyond_se, sa.accepted);
  report.details["cor_x"] = cor_x;
  report.details["caliper_bound"] = bound;
  report.details["caliper_acceptance"] = static_cast<double>(sc.accepted) / static_cast<double>(sc.draws);
  report.details["cor_shift_equal_caliper"] = cor_c - cor_all;
  return report;
}

// ---------------------------------------------------------------------------
// H7: randomization inference after rerandomization.

struct H7Options {
  std::size_t n = 100;
  std::size_t k = 2;
  double p_a = 0.01;
  double r_squared = 0.5;
  std::size_t replications = 2000;
  std::size_t ks_replications = 500;
  std::size_t n_sim = 499;
  double level = 0.95;
  /// Alternative used for coverage and power, in units of sd(y(0)).
  double effect_in_sd = 0.5;
};

inline ExperimentReport h7_inference_validity(const H7Options& opt, const RngSpec& spec,
                                              unsigned threads = default_threads()) {
  ExperimentReport report;
  report.id = "H7";
  report.parameters = {{"n", opt.n},
                       {"k", opt.k},
                       {"p_a", opt.p_a},
                       {"r_squared", opt.r_squared},
                       {"replications", opt.replications},
                       {"ks_replications", opt.ks_replications},
                       {"n_sim", opt.n_sim},
                       {"level", opt.level},
                       {"effect_in_sd", opt.effect_in_sd},
                       {"seed", spec}};
  const double a = theory::threshold_for_acceptance(opt.k, opt.p_a);
  const auto criterion = mahalanobis_threshold(a);
  const auto pure = always_accept();
  const double alpha = 1.0 - opt.level;
  const double z = 1.959963984540054;

  struct Rep {
    double p_null = 1.0;
    double p_alt = 1.0;
    double p_alt_pure = 1.0;
    bool ci_covers = false;
    bool classical_covers = false;
  };
  std::vector<Rep> reps(opt.replications);
  parallel_for(opt.replications, threads, [&](std::size_t i) {
    Rng rng(spec.child(i));
    const CovariateMatrix x = generate_covariates(opt.n, opt.k, rng);
    const auto ctx = build_context(x, opt.n / 2);
    auto model = LinearOutcomeModel::for_r_squared(x, opt.r_squared);
    auto po = generate_outcomes(x, model, rng, true);
    const double effect = opt.effect_in_sd * std::sqrt(sample_variance(po.y0));
    for (auto& v : po.y1) v += effect;

    Rep rep;
    const auto design = rerandomize(ctx, criterion, rng);
    const auto ref = draw_reference(ctx, criterion, opt.n_sim, rng);
    const OutcomeVector y_null(po.y0);
    rep.p_null = randomization_test(ctx, criterion, design.assignment, y_null, ref).p_value;
    const OutcomeVector y_alt = observed_outcomes(po.y1, po.y0, design.assignment);
    rep.p_alt = randomization_test(ctx, criterion, design.assignment, y_alt, ref).p_value;
    const auto ci = confidence_interval(ctx, criterion, design.assignment, y_alt, opt.level, ref);
    rep.ci_covers = ci.lower <= effect && effect <= ci.upper;
    const double est = estimate_tau(y_alt, design.assignment);
    const double se = classical_se(y_alt, design.assignment);
    rep.classical_covers = est - z * se <= effect && effect <= est + z * se;

    const auto pure_design = rerandomize(ctx, pure, rng);
    const auto pure_ref = draw_reference(ctx, pure, opt.n_sim, rng);
    const OutcomeVector y_alt_pure = observed_outcomes(po.y1, po.y0, pure_design.assignment);
    rep.p_alt_pure = randomization_test(ctx, pure, pure_design.assignment, y_alt_pure, pure_ref).p_value;
    reps[i] = rep;
  });

  const double count = static_cast<double>(opt.replications);
  std::vector<double> p_null;
  for (std::size_t i = 0; i < std::min(opt.ks_replications, reps.size()); ++i) p_null.push_back(reps[i].p_null);
  report.add("KS distance of null p-values", ks_uniform(p_null), 0.0, 0.0, 0.06, Rule::at_most, p_null.size());

  auto rate = [&](auto pred) {
    double hits = 0.0;
    for (const auto& r : reps) hits += pred(r) ? 1.0 : 0.0;
    return hits / count;
  };
  auto binom_se = [&](double p) { return std::sqrt(p * (1.0 - p) / count); };
  const double null_reject = rate([&](const Rep& r) { return r.p_null <= alpha; });
  report.add("null rejection rate", null_reject, binom_se(alpha), alpha, 0.01, Rule::within_abs, opt.replications);
  const double coverage = rate([](const Rep& r) { return r.ci_covers; });
  report.add("randomization CI coverage", coverage, binom_se(coverage), opt.level - 0.005, 0.0, Rule::at_least,
             opt.replications);
  const double classical = rate([](const Rep& r) { return r.classical_covers; });
  report.add("classical CI coverage (conservative)", classical, binom_se(classical), 0.97, 0.0, Rule::greater,
             opt.replications);
  const double power = rate([&](const Rep& r) { return r.p_alt <= alpha; });
  const double power_pure = rate([&](const Rep& r) { return r.p_alt_pure <= alpha; });
  const double gain_se = std::hypot(binom_se(power), binom_se(power_pure));
  report.add("power gain (rerandomized - pure)", power - power_pure, gain_se, 0.0, 3.0 * gain_se, Rule::greater,
             opt.replications);
  report.details["threshold"] = a;
  report.details["power_rerandomized"] = power;
  report.details["power_pure"] = power_pure;
  return report;
}

// ---------------------------------------------------------------------------
// Supporting checks: the chi-square law of M, geometric waiting times, and
// Monte Carlo against exhaustive enumeration.

inline ExperimentReport m_chi_square_law(std::size_t n, std::size_t k, std::size_t draws, const RngSpec& spec,
                                         unsigned threads = default_threads()) {
  ExperimentReport report;
  report.id = "M-law";
  report.parameters = {{"n", n}, {"k", k}, {"draws", draws}, {"seed", spec}};
  Rng rng(spec);
  const auto ctx = build_context(generate_covariates(n, k, rng), n / 2);
  const std::size_t chunks = (draws + chunk_size - 1) / chunk_size;
  std::vector<double> m(draws);
  parallel_for(chunks, threads, [&](std::size_t ci) {
    Rng r(spec.child(ci + 1));
    AssignmentDrawer drawer(ctx.n(), ctx.n_treated());
    const std::size_t end = std::min(draws, (ci + 1) * chunk_size);
    for (std::size_t i = ci * chunk_size; i < end; ++i) m[i] = ctx.mahalanobis(drawer.draw(r));
  });
  const double mean = std::accumulate(m.begin(), m.end(), 0.0) / static_cast<double>(draws);
  const double kd = static_cast<double>(k);
  const double ks = ks_distance(m, [kd](double v) { return theory::chi2_cdf(kd, v); });
  report.add("KS distance to chi2_k", ks, 0.0, 0.0, 0.02, Rule::at_most, draws);
  report.add("mean M", mean, std::sqrt(2.0 * kd / static_cast<double>(draws)), kd, 4.0, Rule::within_se, draws);
  return report;
}

/// Mean proposals per accepted assignment against 1 / p_a, with p_a known
/// exactly by enumeration (n = 12).
inline ExperimentReport waiting_time(double p_a_target, std::size_t runs, const RngSpec& spec) {
  ExperimentReport report;
  report.id = "waiting-time";
  report.parameters = {{"p_a_target", p_a_target}, {"runs", runs}, {"seed", spec}};
  Rng rng(spec);
  const auto ctx = build_context(generate_covariates(12, 2, rng), 6);
  const auto cal = calibrate_threshold_exact(ctx, p_a_target);
  const auto c = cal.criterion();
  const double p_exact = cal.p_a_achieved;
  double total = 0.0;
  double total_sq = 0.0;
  for (std::size_t i = 0; i < runs; ++i) {
    const auto d = rerandomize(ctx, c, rng);
    total += static_cast<double>(d.proposals);
    total_sq += static_cast<double>(d.proposals) * static_cast<double>(d.proposals);
  }
  const double r = static_cast<double>(runs);
  const double mean = total / r;
  const double sd = std::sqrt(std::max(total_sq / r - mean * mean, 0.0));
  report.add("mean proposals vs 1/p_a", mean, sd / std::sqrt(r), 1.0 / p_exact, 0.05, Rule::within_rel, runs);
  report.add("proposal sd vs geometric sd", sd, 0.0, std::sqrt(1.0 - p_exact) / p_exact, 0.10, Rule::within_rel, runs);
  report.details["p_a_exact"] = p_exact;
  report.details["acceptable_count"] = std::llround(p_exact * 924.0);
  return report;
}

/// Monte Carlo p-values against exhaustive-enumeration p-values on n <= 12
/// fixtures, plus exact unbiasedness over each enumerated acceptable set.
inline ExperimentReport oracle_equivalence(std::size_t n_sim, const RngSpec& spec) {
  ExperimentReport report;
  report.id = "oracle";
  report.parameters = {{"n_sim", n_sim}, {"seed", spec}};
  Rng rng(spec);
  struct Fixture {
    std::size_t n;
    std::size_t k;
    double p_a;
    double effect;
  };
  const std::vector<Fixture> fixtures = {{8, 1, 0.5, 0.5}, {10, 2, 0.3, 1.0}, {12, 2, 0.25, 0.8}, {12, 3, 0.5, 0.0}};
  for (std::size_t f = 0; f < fixtures.size(); ++f) {
    const auto& fx = fixtures[f];
    const CovariateMatrix x = generate_covariates(fx.n, fx.k, rng);
    const auto ctx = build_context(x, fx.n / 2);
    const auto c = calibrate_threshold_exact(ctx, fx.p_a).criterion();
    auto model = LinearOutcomeModel::for_r_squared(x, 0.5, fx.effect);
    const auto po = generate_outcomes(x, model, rng);
    Rng design_rng(spec.child(f));
    const auto w_obs = rerandomize(ctx, c, design_rng).assignment;
    const auto y = observed_outcomes(po.y1, po.y0, w_obs);
    const std::string tag = "n=" + std::to_string(fx.n) + ",k=" + std::to_string(fx.k) + " ";
    const auto exact = randomization_test_exact(ctx, c, w_obs, y);
    Rng mc_rng(spec.child(100 + f));
    const auto mc = randomization_test(ctx, c, w_obs, y, n_sim, mc_rng);
    report.add(tag + "MC p vs exact p", mc.p_value, 0.0, exact.p_value, 0.01, Rule::within_abs, n_sim);
    const auto set = enumerate_acceptable(ctx, c);
    report.add(tag + "E[tau-hat]-tau over acceptable set", detail::mean_tau_over(set, po) - po.tau(), 0.0, 0.0, 1e-12,
               Rule::within_abs, set.size());
  }
  return report;
}

}  // namespace rerand::harness
