#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <vector>

#include "rerand/assignments.hpp"
#include "rerand/criteria.hpp"
#include "rerand/sampler.hpp"

using namespace rerand;
using Catch::Approx;

namespace {

CovariateMatrix normal_covariates(std::size_t n, std::size_t k, Rng& rng) {
  Eigen::MatrixXd x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(k));
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.normal();
  return CovariateMatrix(x);
}

}  // namespace

TEST_CASE("evaluate examples", "[criteria]") {
  Rng rng(RngSpec{1, 0});
  const auto ctx = build_context(normal_covariates(20, 2, rng), 10);

  SECTION("infinite threshold accepts everything") {
    for (int i = 0; i < 100; ++i) REQUIRE(always_accept().evaluate(ctx, draw_assignment(20, 10, rng)));
  }
  SECTION("zero-mean-difference predicate on x = (0,1,2)") {
    const auto crit = make_registered_predicate("zero_mean_difference");
    const std::vector<double> v{0, 1, 2};
    const auto x = CovariateMatrix::column(v);
    std::vector<Assignment> accepted;
    for (std::size_t nt : {1u, 2u}) {
      const auto c = build_context(x, nt);
      for (const auto& w : enumerate_assignments(3, nt))
        if (crit.evaluate(c, w)) accepted.push_back(w);
    }
    std::sort(accepted.begin(), accepted.end());
    REQUIRE(accepted == std::vector<Assignment>{Assignment::from_bits({0, 1, 0}), Assignment::from_bits({1, 0, 1})});
  }
  SECTION("caliper rejects when one coordinate exceeds its bound") {
    // x built so that W = (1,1,0,0) gives d = (0.05, 0.2).
    Eigen::MatrixXd m(4, 2);
    m << 0.05, 0.2, 0.05, 0.2, 0.0, 0.0, 0.0, 0.0;
    const auto c = build_context(CovariateMatrix(m), 2);
    const auto w = Assignment::from_bits({1, 1, 0, 0});
    REQUIRE(diff_in_means(c.covariates(), w)(0) == Approx(0.05));
    REQUIRE(diff_in_means(c.covariates(), w)(1) == Approx(0.2));
    REQUIRE_FALSE(caliper({0.1, 0.1}).evaluate(c, w));
    REQUIRE(caliper({0.1, 0.3}).evaluate(c, w));
  }
  SECTION("caliper length mismatch") {
    REQUIRE_THROWS_AS(caliper({0.1}).evaluate(ctx, draw_assignment(20, 10, rng)), ValidationError);
  }
}

TEST_CASE("affine-invariance flags", "[criteria]") {
  REQUIRE(mahalanobis_threshold(1.0).declared_affinely_invariant());
  REQUIRE_FALSE(caliper({1.0}).declared_affinely_invariant());
  REQUIRE_FALSE(conjunction({mahalanobis_threshold(1.0), caliper({1.0})}).declared_affinely_invariant());
  REQUIRE(conjunction({mahalanobis_threshold(1.0), always_accept()}).declared_affinely_invariant());
  REQUIRE(mahalanobis_threshold(0.0).requires_exact_balance());
}

TEST_CASE("Mahalanobis decisions survive affine maps", "[criteria][property]") {
  Rng rng(RngSpec{2, 0});
  int pairs = 0;
  for (int trial = 0; trial < 25; ++trial) {
    const std::size_t k = 1 + rng.bounded(3);
    const auto x = normal_covariates(30, k, rng);
    Eigen::MatrixXd b(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k));
    for (Eigen::Index i = 0; i < b.size(); ++i) b.data()[i] = rng.normal();
    b += Eigen::MatrixXd::Identity(b.rows(), b.cols());
    const Eigen::MatrixXd moved = (x.data() * b).array() + 3.0;
    const auto ctx = build_context(x, 15);
    const auto ctx_moved = build_context(CovariateMatrix(moved), 15);
    const double a = theory::threshold_for_acceptance(k, 0.3);
    const auto crit = mahalanobis_threshold(a);
    for (int t = 0; t < 4; ++t) {
      const auto w = draw_assignment(30, 15, rng);
      // Skip draws within rounding of the boundary.
      if (std::abs(ctx.mahalanobis(w) - a) < 1e-9) continue;
      REQUIRE(crit.evaluate(ctx, w) == crit.evaluate(ctx_moved, w));
      ++pairs;
    }
  }
  REQUIRE(pairs >= 95);
}

TEST_CASE("caliper decisions change under some affine map", "[criteria][property]") {
  Rng rng(RngSpec{3, 0});
  const auto x = normal_covariates(8, 2, rng);
  const auto crit = caliper({0.5, 0.5});
  const auto all = enumerate_assignments(8, 4);
  bool witness = false;
  for (int trial = 0; trial < 200 && !witness; ++trial) {
    Eigen::Matrix2d b;
    b << rng.normal(), rng.normal(), rng.normal(), rng.normal();
    const auto ctx = build_context(x, 4);
    const auto ctx_moved = build_context(CovariateMatrix(Eigen::MatrixXd(x.data() * b)), 4);
    for (const auto& w : all) {
      if (crit.evaluate(ctx, w) != crit.evaluate(ctx_moved, w)) {
        witness = true;
        break;
      }
    }
  }
  REQUIRE(witness);
}

TEST_CASE("conjunction with always-accept matches the other child", "[criteria]") {
  Rng rng(RngSpec{4, 0});
  const auto ctx = build_context(normal_covariates(10, 2, rng), 5);
  const auto cal = caliper({0.4, 0.6});
  const auto both = conjunction({cal, always_accept()});
  for_each_assignment(10, 5, [&](const Assignment& w) { REQUIRE(both.evaluate(ctx, w) == cal.evaluate(ctx, w)); });
}

TEST_CASE("criterion JSON round trip", "[criteria]") {
  const std::vector<BalanceCriterion> items{
      mahalanobis_threshold(0.21072), always_accept(), caliper({0.1, 0.2}),
      conjunction({mahalanobis_threshold(1.5), caliper({3.0})}),
      make_registered_predicate("zero_mean_difference", {{"tolerance", 1e-9}}),
      make_registered_predicate("max_difference", {{"bound", 0.1}, {"column", 0}})};
  for (const auto& c : items) {
    const auto j = criterion_to_json(c);
    const auto back = criterion_to_json(criterion_from_json(nlohmann::json::parse(j.dump())));
    REQUIRE(back == j);
  }
  REQUIRE(criterion_to_json(always_accept())["a"] == "inf");
  REQUIRE_THROWS_AS(criterion_from_json(nlohmann::json{{"type", "nope"}}), ValidationError);
  REQUIRE_THROWS_AS(criterion_from_json(nlohmann::json{{"type", "user"}, {"name", "missing"}}), ValidationError);
  REQUIRE_THROWS_AS(criterion_from_json(nlohmann::json{{"type", "mahalanobis"}}), ValidationError);
}

TEST_CASE("asymptotic calibration", "[criteria]") {
  REQUIRE(calibrate_threshold_asymptotic(2, 0.1).a == Approx(-2.0 * std::log(0.9)).epsilon(1e-12));
  REQUIRE(std::isinf(calibrate_threshold_asymptotic(4, 1.0).a));
  // chi2_1 CDF at 1 is 2 Phi(1) - 1.
  const double p = std::erf(1.0 / std::sqrt(2.0));
  REQUIRE(calibrate_threshold_asymptotic(1, p).a == Approx(1.0).epsilon(1e-10));
  REQUIRE_THROWS_AS(calibrate_threshold_asymptotic(2, 0.0), ValidationError);
  REQUIRE_THROWS_AS(calibrate_threshold_asymptotic(2, 1.5), ValidationError);
}

TEST_CASE("empirical calibration", "[criteria]") {
  Rng rng(RngSpec{5, 0});
  SECTION("p_a = 1 gives the maximum simulated M") {
    const auto ctx = build_context(normal_covariates(30, 2, rng), 15);
    const auto r = calibrate_threshold_empirical(ctx, 1.0, 2000, rng);
    REQUIRE(r.p_a_achieved == 1.0);
    REQUIRE(std::isfinite(r.a));
  }
  SECTION("n = 100, k = 2 agrees with the chi-square quantile") {
    const auto ctx = build_context(normal_covariates(100, 2, rng), 50);
    const auto r = calibrate_threshold_empirical(ctx, 0.1, 100000, rng);
    REQUIRE(r.a == Approx(0.21072).epsilon(0.05));
    REQUIRE(r.p_a_achieved >= 0.1);
    REQUIRE(r.p_a_achieved <= 0.1 + 1e-5 + 1.0 / 100000);
  }
  SECTION("too few draws") {
    const auto ctx = build_context(normal_covariates(30, 2, rng), 15);
    REQUIRE_THROWS_AS(calibrate_threshold_empirical(ctx, 0.1, 999, rng), ValidationError);
  }
  SECTION("degenerate distribution") {
    // n = 2: both assignments have the same M.
    const std::vector<double> v{0.0, 1.0};
    const auto ctx = build_context(CovariateMatrix::column(v), 1);
    REQUIRE_THROWS_AS(calibrate_threshold_empirical(ctx, 0.5, 1000, rng), ValidationError);
  }
}

TEST_CASE("exact calibration equals the enumerated order statistic", "[criteria]") {
  Rng rng(RngSpec{6, 0});
  const auto ctx = build_context(normal_covariates(12, 2, rng), 6);
  std::vector<double> m;
  for (const auto& w : enumerate_assignments(12, 6)) m.push_back(ctx.mahalanobis(w));
  std::sort(m.begin(), m.end());
  REQUIRE(m.size() == 924);
  for (double p : {0.05, 0.1, 0.5}) {
    const auto r = calibrate_threshold_exact(ctx, p);
    const auto rank = static_cast<std::size_t>(std::ceil(p * 924.0 - 1e-9));
    REQUIRE(r.a == m[rank - 1]);
    const auto accepted = std::count_if(m.begin(), m.end(), [&](double v) { return v <= r.a; });
    REQUIRE(r.p_a_achieved == Approx(accepted / 924.0));
  }
  // Sampling every assignment many times converges to the same threshold.
  const auto empirical = calibrate_threshold_empirical(ctx, 0.5, 200000, rng);
  REQUIRE(empirical.a == Approx(calibrate_threshold_exact(ctx, 0.5).a).epsilon(0.05));
}

TEST_CASE("mirror symmetry checks", "[criteria]") {
  Rng rng(RngSpec{7, 0});
  const auto ctx = build_context(normal_covariates(10, 2, rng), 5);
  REQUIRE(is_mirror_symmetric(mahalanobis_threshold(1.0), ctx, 1000, rng));
  REQUIRE(is_mirror_symmetric(caliper({0.3, 0.3}), ctx, 1000, rng));
  REQUIRE_FALSE(is_mirror_symmetric(make_registered_predicate("max_difference", {{"bound", 0.1}}), ctx, 1000, rng));
  const auto uneven = build_context(normal_covariates(10, 2, rng), 4);
  REQUIRE_THROWS_AS(is_mirror_symmetric(mahalanobis_threshold(1.0), uneven, 10, rng), ValidationError);
}

TEST_CASE("acceptance rate of the calibrated threshold", "[criteria]") {
  Rng rng(RngSpec{8, 0});
  const auto ctx = build_context(normal_covariates(100, 2, rng), 50);
  for (double p : {0.01, 0.1, 0.5}) {
    const auto est = estimate_acceptance(ctx, calibrate_threshold_asymptotic(2, p).criterion(), 100000, rng);
    REQUIRE(est.p_hat == Approx(p).epsilon(0.15));
  }
}

TEST_CASE("evaluation is deterministic", "[criteria]") {
  Rng rng(RngSpec{9, 0});
  const auto ctx = build_context(normal_covariates(20, 3, rng), 10);
  const auto crit = conjunction({mahalanobis_threshold(2.0), caliper({1.0, 1.0, 1.0})});
  for (int i = 0; i < 100; ++i) {
    const auto w = draw_assignment(20, 10, rng);
    REQUIRE(crit.evaluate(ctx, w) == crit.evaluate(ctx, w));
  }
}
