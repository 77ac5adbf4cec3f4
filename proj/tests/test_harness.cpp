#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "rerand/harness.hpp"

using namespace rerand;
using namespace rerand::harness;
using Catch::Approx;

TEST_CASE("report rules", "[harness]") {
  REQUIRE(make_row("a", 1.05, 0, 1.0, 0.1, Rule::within_abs, 1).pass);
  REQUIRE_FALSE(make_row("a", 1.2, 0, 1.0, 0.1, Rule::within_rel, 1).pass);
  REQUIRE(make_row("a", 1.2, 0.1, 1.0, 3.0, Rule::within_se, 1).pass);
  REQUIRE(make_row("a", 1.5, 0.1, 1.0, 3.0, Rule::beyond_se, 1).pass);
  REQUIRE(make_row("a", 0.95, 0, 1.0, 0.05, Rule::at_least, 1).pass);
  REQUIRE_FALSE(make_row("a", 1.0, 0, 1.0, 0.0, Rule::greater, 1).pass);
  REQUIRE_FALSE(make_row("a", std::nan(""), 0, 1.0, 10.0, Rule::at_most, 1).pass);
  ExperimentReport r;
  REQUIRE_FALSE(r.passed());
  r.add("x", 1, 0, 1, 0, Rule::exact, 1);
  REQUIRE(r.passed());
  REQUIRE(report_to_json(r)["passed"] == true);
  REQUIRE_THROWS(r.row("missing"));
}

TEST_CASE("moments match direct formulas", "[harness]") {
  Rng rng(RngSpec{1, 0});
  std::vector<Eigen::VectorXd> xs;
  Moments a(2);
  Moments b(2);
  for (int i = 0; i < 500; ++i) {
    Eigen::VectorXd v(2);
    v << rng.normal() + 1.0, 2.0 * rng.normal();
    xs.push_back(v);
    (i % 2 == 0 ? a : b).add(v);
  }
  a.merge(b);
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(2);
  for (const auto& v : xs) mean += v;
  mean /= 500.0;
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(2, 2);
  for (const auto& v : xs) cov += (v - mean) * (v - mean).transpose();
  cov /= 499.0;
  REQUIRE(a.count() == 500);
  REQUIRE((a.covariance() - cov).cwiseAbs().maxCoeff() < 1e-10);
  REQUIRE(a.correlation(0, 1) == Approx(cov(0, 1) / std::sqrt(cov(0, 0) * cov(1, 1))));
}

TEST_CASE("KS distance", "[harness]") {
  REQUIRE(ks_uniform({0.5}) == Approx(0.5));
  std::vector<double> grid;
  for (int i = 0; i < 100; ++i) grid.push_back((i + 0.5) / 100.0);
  REQUIRE(ks_uniform(grid) == Approx(0.005));
}

TEST_CASE("parallel_for visits every index once and propagates errors", "[harness]") {
  std::vector<int> hits(1000, 0);
  parallel_for(1000, 4, [&](std::size_t i) { hits[i] += 1; });
  for (int h : hits) REQUIRE(h == 1);
  REQUIRE_THROWS_AS(parallel_for(10, 3, [](std::size_t i) { if (i == 7) throw std::runtime_error("x"); }),
                    std::runtime_error);
}

TEST_CASE("generators", "[harness]") {
  Rng rng(RngSpec{2, 0});
  SECTION("equicorrelated covariates") {
    const auto x = generate_covariates(20000, 3, rng, 0.5);
    const Eigen::MatrixXd c = sample_covariance(x);
    REQUIRE(c(0, 0) == Approx(1.0).margin(0.05));
    REQUIRE(c(0, 1) == Approx(0.5).margin(0.05));
    const auto t = generate_covariates(20000, 1, rng, 0.0, CovariateLaw::student_t5);
    REQUIRE(sample_covariance(t)(0, 0) == Approx(1.0).margin(0.1));
  }
  SECTION("exact R^2 construction") {
    const auto x = generate_covariates(100, 2, rng);
    for (double r2 : {0.2, 0.5, 0.9}) {
      const auto model = LinearOutcomeModel::for_r_squared(x, r2, 1.5);
      const auto po = generate_outcomes(x, model, rng, true);
      REQUIRE(sample_r_squared(x, po.y0) == Approx(r2).epsilon(1e-10));
      REQUIRE(po.tau() == Approx(1.5).epsilon(1e-12));
    }
  }
}

TEST_CASE("small experiment runs", "[harness]") {
  const RngSpec spec{2024, 0};
  SECTION("H1 at reduced size") {
    const auto r = h1_covariance_shrinkage(100, 2, 0.1, 100000, spec, 1);
    INFO(report_to_table(r));
    REQUIRE(r.row("shrink factor (mean diag ratio)").pass);
  }
  SECTION("H4 enumerated unbiasedness") {
    const auto r = h4_unbiasedness(spec);
    INFO(report_to_table(r));
    REQUIRE(r.passed());
  }
  SECTION("H5 counterexample") {
    const auto r = h5_counterexample();
    INFO(report_to_table(r));
    REQUIRE(r.passed());
    REQUIRE(r.row("tau from table").measured == Approx(1.0 / 3.0));
  }
  SECTION("threads do not change results") {
    const auto one = report_to_json(h1_covariance_shrinkage(60, 2, 0.2, 30000, spec, 1));
    const auto four = report_to_json(h1_covariance_shrinkage(60, 2, 0.2, 30000, spec, 4));
    REQUIRE(one["rows"] == four["rows"]);
  }
}
