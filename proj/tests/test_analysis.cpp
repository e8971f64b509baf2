#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "slowfast/analysis.hpp"

using namespace slowfast;
using namespace slowfast::analysis;
using manifold::SlowFastModel;

namespace {

std::vector<ScalingPoint> random_points(std::mt19937_64& rng, int n) {
  std::uniform_real_distribution<double> inv(5.0, 40.0), y(-3.0, 5.0);
  std::vector<ScalingPoint> pts;
  for (int i = 0; i < n; ++i) pts.push_back({inv(rng), y(rng)});
  pts[1].inv_d = pts[0].inv_d + 1.0;
  return pts;
}

}  // namespace

TEST_CASE("predict_cs") {
  CHECK(predict_cs(0.5) == doctest::Approx(0.5 / (2.0 * std::log(10.0))));
  CHECK(predict_cs(0.0) == 0.0);
  CHECK_THROWS_AS(predict_cs(-0.1), ConfigError);
  CHECK_THROWS_AS(predict_cs(NAN), ConfigError);
}

TEST_CASE("fit_scaling recovers exact lines") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> coef(-2.0, 2.0);
  for (int rep = 0; rep < 200; ++rep) {
    const double a = coef(rng), b = coef(rng);
    auto pts = random_points(rng, 3 + rep % 10);
    for (auto& p : pts) p.log10_t = a + b * p.inv_d;
    const auto fit = fit_scaling(pts);
    CHECK(fit.slope == doctest::Approx(b).epsilon(1e-9));
    CHECK(fit.intercept == doctest::Approx(a).epsilon(1e-9));
    CHECK(fit.slope_stderr < 1e-9);
    for (double r : fit.residuals) CHECK(std::abs(r) < 1e-9);
  }
}

TEST_CASE("fit_scaling is affine equivariant and order free") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> coef(-3.0, 3.0);
  for (int rep = 0; rep < 200; ++rep) {
    auto pts = random_points(rng, 3 + rep % 12);
    const auto base = fit_scaling(pts);
    double a = coef(rng);
    if (std::abs(a) < 0.1) a = 0.5;
    const double b = coef(rng), c = coef(rng);
    auto moved = pts;
    for (auto& p : moved) p.log10_t = a * p.log10_t + b + c * p.inv_d;
    const auto fit = fit_scaling(moved);
    CHECK(fit.slope == doctest::Approx(a * base.slope + c).epsilon(1e-8));
    CHECK(fit.slope_stderr ==
          doctest::Approx(std::abs(a) * base.slope_stderr).epsilon(1e-8));
    // residuals sum to zero
    double s = 0.0;
    for (double r : base.residuals) s += r;
    CHECK(std::abs(s) < 1e-9);
    std::shuffle(pts.begin(), pts.end(), rng);
    CHECK(fit_scaling(pts).slope == doctest::Approx(base.slope).epsilon(1e-9));
  }
}

TEST_CASE("degenerate designs") {
  CHECK_THROWS_AS(fit_scaling({{1, 2}, {2, 3}}), DegenerateDesign);
  CHECK_THROWS_AS(fit_scaling({{5, 2}, {5, 3}, {5, 1}}), DegenerateDesign);
  CHECK_THROWS_AS(fit_scaling({}), DegenerateDesign);
  CHECK_NOTHROW(fit_scaling({{5, 2}, {5, 3}, {6, 1}}));
}

TEST_CASE("four-figure matching") {
  CHECK(matches_four_figures(10.8568, 10.86));
  CHECK(matches_four_figures(5.42868, 5.428));
  CHECK_FALSE(matches_four_figures(5.4297, 5.428));
  CHECK(matches_four_figures(0.0012344, 0.001234));
  CHECK_FALSE(matches_four_figures(10.875, 10.86));
}

TEST_CASE("exact action model predicts the reference column") {
  const auto model = SlowFastModel::duffing();
  const auto act = exact_action_model(model);
  CHECK(act.R0 == 0.5);
  CHECK(act.c2 == -0.25);
  for (const auto& row : reference_table()) {
    const double pred = 100.0 * predict_cs(act.R(row.epsilon));
    INFO("e = " << row.epsilon << " pred " << pred);
    CHECK(matches_four_figures(pred, row.cs_pred_e2));
  }
}

TEST_CASE("reference escape points reproduce the simulated column") {
  for (const auto& row : reference_table()) {
    const auto pts = reference_escape_points(row.epsilon);
    if (pts.empty()) continue;
    REQUIRE(pts.size() == 14);
    CHECK(pts.front().inv_d == 28.0);
    CHECK(pts.back().inv_d == 15.0);
    const auto fit = fit_scaling(pts);
    INFO("e = " << row.epsilon);
    CHECK(matches_four_figures(100.0 * fit.slope, row.cs_sim_e2));
    // The quoted band is far wider than the regression error.
    CHECK(100.0 * fit.slope_stderr < row.band_e2 / 10.0);
  }
  CHECK(reference_escape_points(0.001).empty());
}

TEST_CASE("compare_table statuses and flags") {
  const auto model = SlowFastModel::duffing();
  const auto act = exact_action_model(model);
  std::vector<SimulatedSlope> sims;
  for (const auto& row : reference_table()) {
    sims.push_back({row.epsilon, row.cs_sim_e2 / 100.0, row.band_e2 / 100.0});
  }
  const auto rows = compare_table(model, act, sims);
  REQUIRE(rows.size() == sims.size());
  for (const auto& r : rows) {
    CHECK(r.agree);
    CHECK(r.cs_pred == doctest::Approx(predict_cs(0.5 - r.epsilon * r.epsilon / 4)));
    CHECK(r.beyond_manifold_bound == (r.epsilon > 0.125));
  }
  CHECK(rows[0].status == Agreement::agree);
  CHECK(rows[5].status == Agreement::agree);
  CHECK(rows[6].status == Agreement::marginal);
  CHECK(rows[6].z == doctest::Approx((6.469 - 5.42868) / 0.9437).epsilon(1e-3));
  CHECK(rows[6].flagged());
  CHECK_FALSE(rows[1].flagged());

  const auto far = compare_table(model, act, {{0.1, 0.2, 0.01}});
  CHECK(far[0].status == Agreement::disagree);
  CHECK_FALSE(far[0].agree);
  CHECK_THROWS_AS(compare_table(model, act, {{0.0, 0.1, 0.01}}), ConfigError);
  CHECK_THROWS_AS(compare_table(model, act, {{0.1, 0.1, -1.0}}), ConfigError);

  // Asymmetric model starts from the sink at -1 with bound 1/12.
  const auto asym = SlowFastModel::asymmetric();
  const auto arows = compare_table(asym, exact_action_model(asym), {{0.1, 0.1, 0.01}});
  CHECK(arows[0].beyond_manifold_bound);
}

TEST_CASE("point seeds are distinct") {
  std::vector<std::uint64_t> seeds;
  for (std::uint64_t m : {0ULL, 1ULL, 2024ULL}) {
    for (std::uint64_t i = 0; i < 50; ++i) seeds.push_back(point_seed(m, i));
  }
  std::sort(seeds.begin(), seeds.end());
  CHECK(std::adjacent_find(seeds.begin(), seeds.end()) == seeds.end());
}

TEST_CASE("small scaling sweep") {
  const auto model = SlowFastModel::duffing(0.1);
  sde::IntegratorConfig cfg;
  const auto a = run_scaling(model, {6, 8, 10}, cfg, 40, 99, 1e5, 1);
  const auto b = run_scaling(model, {6, 8, 10}, cfg, 40, 99, 1e5, 3);
  REQUIRE(a.ensembles.size() == 3);
  CHECK(a.fit.slope == b.fit.slope);
  CHECK(a.fit.slope > 0.03);
  CHECK(a.fit.slope < 0.2);
  for (const auto& e : a.ensembles) CHECK(e.timeout_count == 0);
  CHECK_THROWS_AS(run_scaling(model, {6, 8}, cfg, 5, 1, 1e5, 1), DegenerateDesign);
  CHECK_THROWS_AS(run_scaling(model, {6, -8, 9}, cfg, 5, 1, 1e5, 1), ConfigError);
}
