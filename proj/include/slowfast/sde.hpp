#pragma once

// Stochastic simulation of  dx = y dt + sqrt(2D) dW,  e dy = (f(x) - y) dt
// and first-passage (escape) times from a sink across the adjacent saddle.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "slowfast/errors.hpp"
#include "slowfast/manifold.hpp"

namespace slowfast::sde {

using manifold::SlowFastModel;

class StiffnessBlowup : public Error {
 public:
  StiffnessBlowup(std::uint64_t step, const std::string& what)
      : Error(what), step(step) {}
  std::uint64_t step;
};

class NewtonDiverged : public Error {
 public:
  NewtonDiverged(int iterations, double residual, const std::string& what)
      : Error(what), iterations(iterations), residual(residual) {}
  int iterations;
  double residual;
};

enum class Scheme { implicit, explicit_euler };

std::string to_string(Scheme s);
Scheme parse_scheme(const std::string& s);

struct IntegratorConfig {
  double nu = 0.01;  // step in slow time
  double newton_tol = 1e-10;
  int newton_max_iters = 25;
  Scheme scheme = Scheme::implicit;
  // Escape is declared once x passes the saddle by this much.
  double overshoot = 0.0;

  /// Throws ConfigError when a field is out of range.
  void validate() const;
};

/// Drift data for the stepper: f as a polynomial in x with double
/// coefficients, plus e and D.
struct SdeSystem {
  std::vector<double> f_coeffs;
  double epsilon = 0.1;
  double noise_d = 0.0;

  static SdeSystem from_model(const SlowFastModel& model);
  /// f == 0, the linear test problem for stiffness.
  static SdeSystem linear(double epsilon, double noise_d = 0.0);

  double f(double x) const;
  double df(double x) const;
};

struct State {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const State&, const State&) = default;
};

/// Euler-Maruyama step with everything evaluated at the old state; `w` is a
/// standard normal draw. `step_index` is reported on blow-up.
State explicit_step(const State& s, const SdeSystem& sys,
                    const IntegratorConfig& cfg, double w,
                    std::uint64_t step_index = 0);

struct ImplicitResult {
  State state;
  int iterations = 0;  // residual evaluations, so an exact guess counts 1
  double residual = 0.0;
};

/// Drift-implicit Euler-Maruyama: solves z' = z + nu Phi(z') + (sqrt(2 D nu) w, 0)
/// by Newton's method with the 2x2 Jacobian inverted in closed form.
ImplicitResult implicit_step(const State& s, const SdeSystem& sys,
                             const IntegratorConfig& cfg, double w);

struct EscapeTrial {
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;
  std::optional<double> first_passage_time;  // empty on timeout
  std::uint64_t steps_taken = 0;
  int max_newton_iterations = 0;
  std::string error;  // non-empty when the trial failed

  bool timed_out() const { return !first_passage_time && error.empty(); }
  bool failed() const { return !error.empty(); }
};

/// Starts at (x*, 0) and steps until x first crosses the saddle (plus
/// `overshoot`), or until t_max. Noise comes from stream `stream` of `seed`.
EscapeTrial run_escape_trial(const SdeSystem& sys, const IntegratorConfig& cfg,
                             std::uint64_t seed, double start_sink,
                             double crossing, double t_max,
                             std::uint64_t stream = 0);

EscapeTrial run_escape_trial(const SlowFastModel& model,
                             const IntegratorConfig& cfg, std::uint64_t seed,
                             const series::Rational& start_sink,
                             const series::Rational& crossing, double t_max,
                             std::uint64_t stream = 0);

struct EscapeEnsemble {
  std::vector<EscapeTrial> trials;
  std::string model_name;
  double epsilon = 0.0;
  double noise_d = 0.0;
  IntegratorConfig config;
  std::uint64_t master_seed = 0;
  double t_max = 0.0;
  double mean_T = 0.0;  // over trials that escaped
  double std_T = 0.0;   // sample standard deviation, same trials
  int escaped = 0;
  int timeout_count = 0;
  int failed_count = 0;

  /// More than 1% of trials hit t_max.
  bool timeouts_flagged() const;
};

/// Number of workers used when 0 is requested: SLOWFAST_WORKERS if set,
/// else the hardware concurrency.
int default_workers();

/// Trial i draws from stream i of `master_seed`. Results do not depend on
/// `workers`. Throws Error only when every trial failed.
EscapeEnsemble run_ensemble(const SlowFastModel& model,
                            const IntegratorConfig& cfg, int n_trials,
                            std::uint64_t master_seed, double t_max,
                            int workers = 0,
                            std::optional<series::Rational> start_sink = {});

}  // namespace slowfast::sde
