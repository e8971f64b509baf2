#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "slowfast/rng.hpp"
#include "slowfast/sde.hpp"

using namespace slowfast;
using namespace slowfast::sde;
using manifold::SlowFastModel;

TEST_CASE("Philox4x64-10 known answers") {
  using rng::Philox4x64;
  // Random123 known-answer vector, zero counter and key.
  auto a = Philox4x64::block({0, 0, 0, 0}, {0, 0});
  CHECK(a[0] == 0x16554d9eca36314cULL);
  CHECK(a[1] == 0xdb20fe9d672d0fdcULL);
  CHECK(a[2] == 0xd7e772cee186176bULL);
  CHECK(a[3] == 0x7e68b68aec7ba23bULL);
  // Frozen from numpy.random.Philox(key=0), whose first block uses counter 1.
  auto b = Philox4x64::block({1, 0, 0, 0}, {0, 0});
  CHECK(b[0] == 0x02f4ba6408e4d89bULL);
  CHECK(b[1] == 0x3dd62b0b9ca8c5b2ULL);
  CHECK(b[2] == 0x1c8667a55d902e79ULL);
  CHECK(b[3] == 0x907d7a052fd5b4dcULL);
}

TEST_CASE("normal stream moments and independence of streams") {
  rng::NormalStream s(42, 0), t(42, 1), u(42, 0);
  double m = 0, v = 0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double z = s.normal();
    m += z;
    v += z * z;
  }
  m /= n;
  v = v / n - m * m;
  CHECK(std::abs(m) < 4.0 / std::sqrt(double(n)));
  CHECK(std::abs(v - 1.0) < 0.02);
  CHECK(t.normal() != u.normal());
  rng::NormalStream a(7, 3), b(7, 3);
  for (int i = 0; i < 100; ++i) CHECK(a.normal() == b.normal());
  for (int i = 0; i < 1000; ++i) {
    const double x = a.uniform();
    CHECK(x > 0.0);
    CHECK(x < 1.0);
  }
}

TEST_CASE("config validation") {
  IntegratorConfig c;
  CHECK_NOTHROW(c.validate());
  c.nu = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = {};
  c.newton_max_iters = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = {};
  c.newton_tol = -1;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  CHECK(parse_scheme("explicit") == Scheme::explicit_euler);
  CHECK_THROWS_AS(parse_scheme("rk4"), ConfigError);
}

TEST_CASE("explicit step hand values") {
  auto sys = SdeSystem::from_model(SlowFastModel::duffing(0.1, 0.0));
  IntegratorConfig cfg;
  cfg.scheme = Scheme::explicit_euler;
  CHECK(explicit_step({-1, 0}, sys, cfg, 0.7) == State{-1, 0});
  auto s = explicit_step({-0.5, 0.2}, sys, cfg, 0.0);
  CHECK(s.x == doctest::Approx(-0.5 + 0.01 * 0.2));
  CHECK(s.y == doctest::Approx(0.2 + 0.1 * (-0.375 - 0.2)));
}

TEST_CASE("linear test problem: explicit vs implicit") {
  IntegratorConfig cfg;
  for (double ratio : {0.5, 1.5, 1.99, 2.01, 3.0, 50.0}) {
    auto sys = SdeSystem::linear(0.01);
    cfg.nu = ratio * sys.epsilon;
    State e{0, 1}, i{0, 1};
    double ye = 1, yi = 1;
    bool blew = false;
    for (int k = 0; k < 100000; ++k) {
      try {
        e = explicit_step(e, sys, cfg, 0.0, std::uint64_t(k));
      } catch (const StiffnessBlowup&) {
        blew = true;
        break;
      }
      if (k < 100) {
        ye *= 1 - ratio;
        CHECK(e.y == doctest::Approx(ye).epsilon(1e-9));
      }
    }
    for (int k = 0; k < 50; ++k) {
      i = implicit_step(i, sys, cfg, 0.0).state;
      yi /= 1 + ratio;
      CHECK(i.y == doctest::Approx(yi).epsilon(1e-9));
    }
    CHECK(blew == (ratio > 2.0));
    CHECK(std::abs(1.0 / (1.0 + ratio)) < 1.0);
  }
}

TEST_CASE("implicit step at an equilibrium converges in one evaluation") {
  auto sys = SdeSystem::from_model(SlowFastModel::duffing(0.1, 0.0));
  auto r = implicit_step({-1, 0}, sys, IntegratorConfig{}, 0.3);
  CHECK(r.state == State{-1, 0});
  CHECK(r.iterations == 1);
}

TEST_CASE("implicit Newton contract on a stiff noisy run") {
  auto sys = SdeSystem::from_model(SlowFastModel::duffing(0.01, 1.0 / 20));
  IntegratorConfig cfg;
  rng::NormalStream noise(1, 0);
  State s{-1, 0};
  int worst = 0;
  for (int k = 0; k < 200000; ++k) {
    auto r = implicit_step(s, sys, cfg, noise.normal());
    CHECK_MESSAGE(r.residual < 1e-10, "step ", k);
    worst = std::max(worst, r.iterations);
    s = r.state;
    if (!(r.residual < 1e-10)) break;
  }
  CHECK(worst <= 8);
}

TEST_CASE("Newton failure is reported") {
  auto sys = SdeSystem::from_model(SlowFastModel::duffing(0.01, 1.0));
  IntegratorConfig cfg;
  cfg.newton_max_iters = 1;
  CHECK_THROWS_AS(implicit_step({-0.3, 0.4}, sys, cfg, 1.0), NewtonDiverged);
}

TEST_CASE("noise-free trajectories relax to the sink") {
  auto sys = SdeSystem::from_model(SlowFastModel::duffing(0.1, 0.0));
  IntegratorConfig cfg;
  State s{-0.6, 0.3};
  double prev = 1e9;
  for (int k = 0; k < 5000; ++k) {
    s = implicit_step(s, sys, cfg, 0.0).state;
    const double d = std::hypot(s.x + 1.0, s.y);
    if (k > 200) CHECK(d <= prev + 1e-15);
    prev = d;
  }
  CHECK(prev < 1e-6);
  auto t = run_escape_trial(SlowFastModel::duffing(0.1, 0.0), cfg, 5,
                            series::Rational(-1), series::Rational(0), 50.0);
  CHECK(t.timed_out());
  CHECK(t.steps_taken == 5000);
}

TEST_CASE("doubling D doubles the single-step x variance") {
  IntegratorConfig cfg;
  auto var_of = [&](double D) {
    auto sys = SdeSystem::from_model(SlowFastModel::duffing(0.1, D));
    rng::NormalStream noise(11, 0);
    const int n = 100000;
    double m = 0, v = 0;
    for (int i = 0; i < n; ++i) {
      const double dx = implicit_step({-1, 0}, sys, cfg, noise.normal()).state.x + 1;
      m += dx;
      v += dx * dx;
    }
    m /= n;
    return v / n - m * m;
  };
  const double v1 = var_of(0.05), v2 = var_of(0.1);
  // Var of a sample variance ratio over 1e5 draws: sd ~ sqrt(2/n) each.
  const double sd = std::sqrt(4.0 / 100000);
  CHECK(std::abs(v2 / v1 - 2.0) < 3 * 2.0 * sd);
}

TEST_CASE("escape trials and ensembles are reproducible") {
  auto m = SlowFastModel::duffing(0.1, 1.0 / 8);
  IntegratorConfig cfg;
  auto a = run_escape_trial(m, cfg, 99, -1, 0, 1e5, 4);
  auto b = run_escape_trial(m, cfg, 99, -1, 0, 1e5, 4);
  REQUIRE(a.first_passage_time);
  CHECK(*a.first_passage_time == *b.first_passage_time);
  const double k = *a.first_passage_time / cfg.nu;
  CHECK(std::abs(k - std::round(k)) < 1e-9);

  auto e1 = run_ensemble(m, cfg, 40, 2024, 1e5, 1);
  auto e3 = run_ensemble(m, cfg, 40, 2024, 1e5, 3);
  REQUIRE(e1.trials.size() == 40);
  for (std::size_t i = 0; i < 40; ++i) {
    CHECK(e1.trials[i].first_passage_time == e3.trials[i].first_passage_time);
  }
  CHECK(e1.mean_T == e3.mean_T);
  CHECK(e1.std_T == e3.std_T);
  CHECK(e1.trials[4].first_passage_time ==
        run_escape_trial(m, cfg, 2024, -1, 0, 1e5, 4).first_passage_time);

  auto one = run_ensemble(m, cfg, 1, 5, 1e5, 2);
  CHECK(one.mean_T == *one.trials[0].first_passage_time);
  CHECK_THROWS_AS(run_ensemble(m, cfg, 0, 5, 1e5), ConfigError);
}

TEST_CASE("timeouts are counted, not averaged") {
  auto m = SlowFastModel::duffing(0.1, 1.0 / 30);
  IntegratorConfig cfg;
  auto e = run_ensemble(m, cfg, 8, 1, 1.0, 2);
  CHECK(e.timeout_count == 8);
  CHECK(e.escaped == 0);
  CHECK(e.mean_T == 0.0);
  CHECK(e.timeouts_flagged());
}

TEST_CASE("overshoot delays escape") {
  auto m = SlowFastModel::duffing(0.1, 1.0 / 8);
  IntegratorConfig cfg;
  auto plain = run_escape_trial(m, cfg, 3, -1, 0, 1e5, 0);
  cfg.overshoot = 0.2;
  auto late = run_escape_trial(m, cfg, 3, -1, 0, 1e5, 0);
  REQUIRE(plain.first_passage_time);
  REQUIRE(late.first_passage_time);
  CHECK(*late.first_passage_time >= *plain.first_passage_time);
}

TEST_CASE("workers from the environment") {
  setenv("SLOWFAST_WORKERS", "3", 1);
  CHECK(default_workers() == 3);
  setenv("SLOWFAST_WORKERS", "zero", 1);
  CHECK_THROWS_AS(default_workers(), ConfigError);
  unsetenv("SLOWFAST_WORKERS");
  CHECK(default_workers() >= 1);
}

TEST_CASE("escape time at e = 0.1, 1/D = 20 against the reference datum") {
  // Reference: log10 T = 2.7968. It is matched when escape means commitment
  // to the far basin; first crossing of the saddle takes about half as long
  // because a trajectory at the saddle returns with probability 1/2.
  auto m = SlowFastModel::duffing(0.1, 1.0 / 20);
  IntegratorConfig cfg;
  cfg.overshoot = 0.5;
  auto committed = run_ensemble(m, cfg, 200, 20240601, 1e7);
  MESSAGE("committed log10 T = ", std::log10(committed.mean_T));
  CHECK(committed.mean_T >= std::pow(10.0, 2.6));
  CHECK(committed.mean_T <= std::pow(10.0, 3.0));
  cfg.overshoot = 0.0;
  auto crossing = run_ensemble(m, cfg, 200, 20240601, 1e7);
  const double ratio = crossing.mean_T / committed.mean_T;
  CHECK(ratio > 0.35);
  CHECK(ratio < 0.65);
}
