#include "slowfast/sde.hpp"

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <thread>

#include "slowfast/path.hpp"
#include "slowfast/rng.hpp"

namespace slowfast::sde {

std::string to_string(Scheme s) {
  return s == Scheme::implicit ? "implicit" : "explicit";
}

Scheme parse_scheme(const std::string& s) {
  if (s == "implicit") return Scheme::implicit;
  if (s == "explicit") return Scheme::explicit_euler;
  throw ConfigError("unknown scheme '" + s + "' (expected implicit|explicit)");
}

void IntegratorConfig::validate() const {
  if (!(nu > 0.0) || !std::isfinite(nu)) {
    throw ConfigError("step nu must be positive");
  }
  if (!(newton_tol > 0.0)) throw ConfigError("newton_tol must be positive");
  if (newton_max_iters < 1) {
    throw ConfigError("newton_max_iters must be at least 1");
  }
  if (!(overshoot >= 0.0)) throw ConfigError("overshoot must be >= 0");
}

SdeSystem SdeSystem::from_model(const SlowFastModel& model) {
  SdeSystem s;
  for (const auto& c : model.drift_coefficients()) s.f_coeffs.push_back(c.get_d());
  s.epsilon = model.epsilon();
  s.noise_d = model.noise_d();
  return s;
}

SdeSystem SdeSystem::linear(double epsilon, double noise_d) {
  return {{0.0}, epsilon, noise_d};
}

double SdeSystem::f(double x) const {
  double acc = 0.0;
  for (auto it = f_coeffs.rbegin(); it != f_coeffs.rend(); ++it) {
    acc = acc * x + *it;
  }
  return acc;
}

double SdeSystem::df(double x) const {
  double acc = 0.0;
  for (std::size_t i = f_coeffs.size(); i-- > 1;) {
    acc = acc * x + double(i) * f_coeffs[i];
  }
  return acc;
}

State explicit_step(const State& s, const SdeSystem& sys,
                    const IntegratorConfig& cfg, double w,
                    std::uint64_t step_index) {
  const double nu = cfg.nu;
  State next{s.x + nu * s.y + std::sqrt(2.0 * sys.noise_d * nu) * w,
             s.y + nu / sys.epsilon * (sys.f(s.x) - s.y)};
  if (!std::isfinite(next.x) || !std::isfinite(next.y) ||
      std::abs(next.x) > 1e100 || std::abs(next.y) > 1e100) {
    throw StiffnessBlowup(step_index, "explicit scheme blew up at step " +
                                          std::to_string(step_index) +
                                          " (nu/e = " +
                                          std::to_string(nu / sys.epsilon) +
                                          ")");
  }
  return next;
}

ImplicitResult implicit_step(const State& s, const SdeSystem& sys,
                             const IntegratorConfig& cfg, double w) {
  const double nu = cfg.nu;
  const double e = sys.epsilon;
  const double kick = std::sqrt(2.0 * sys.noise_d * nu) * w;
  State z{s.x + kick, s.y};
  double norm = 0.0;
  for (int it = 1;; ++it) {
    const double fx = sys.f(z.x);
    const double gx = z.x - s.x - nu * z.y - kick;
    const double gy = z.y - s.y - nu / e * (fx - z.y);
    norm = std::max(std::abs(gx), std::abs(gy));
    if (norm < cfg.newton_tol) return {z, it, norm};
    if (it >= cfg.newton_max_iters || !std::isfinite(norm)) {
      throw NewtonDiverged(it, norm,
                           "Newton did not converge in " + std::to_string(it) +
                               " iterations (residual " +
                               std::to_string(norm) + ")");
    }
    // [[1, -nu], [-nu f'/e, 1 + nu/e]] (dx, dy) = -(gx, gy)
    const double a = 1.0, b = -nu;
    const double c = -nu * sys.df(z.x) / e, d = 1.0 + nu / e;
    const double det = a * d - b * c;
    if (det == 0.0 || !std::isfinite(det)) {
      throw NewtonDiverged(it, norm, "singular Newton Jacobian");
    }
    z.x += (-gx * d + gy * b) / det;
    z.y += (-gy * a + gx * c) / det;
  }
}

EscapeTrial run_escape_trial(const SdeSystem& sys, const IntegratorConfig& cfg,
                             std::uint64_t seed, double start_sink,
                             double crossing, double t_max,
                             std::uint64_t stream) {
  cfg.validate();
  if (!(t_max > 0.0)) throw ConfigError("t_max must be positive");
  if (start_sink == crossing) {
    throw ConfigError("start and crossing point coincide");
  }
  EscapeTrial trial;
  trial.seed = seed;
  trial.stream = stream;
  rng::NormalStream noise(seed, stream);
  const double dir = crossing > start_sink ? 1.0 : -1.0;
  const double threshold = crossing + dir * cfg.overshoot;
  const auto max_steps = std::uint64_t(std::floor(t_max / cfg.nu + 1e-9));
  State s{start_sink, 0.0};
  for (std::uint64_t k = 1; k <= max_steps; ++k) {
    const double w = noise.normal();
    if (cfg.scheme == Scheme::implicit) {
      const auto r = implicit_step(s, sys, cfg, w);
      s = r.state;
      trial.max_newton_iterations =
          std::max(trial.max_newton_iterations, r.iterations);
    } else {
      s = explicit_step(s, sys, cfg, w, k);
    }
    if ((s.x - threshold) * dir >= 0.0) {
      trial.first_passage_time = double(k) * cfg.nu;
      trial.steps_taken = k;
      return trial;
    }
  }
  trial.steps_taken = max_steps;
  return trial;
}

EscapeTrial run_escape_trial(const SlowFastModel& model,
                             const IntegratorConfig& cfg, std::uint64_t seed,
                             const series::Rational& start_sink,
                             const series::Rational& crossing, double t_max,
                             std::uint64_t stream) {
  model.equilibrium_at(start_sink);
  model.equilibrium_at(crossing);
  return run_escape_trial(SdeSystem::from_model(model), cfg, seed,
                          start_sink.get_d(), crossing.get_d(), t_max, stream);
}

bool EscapeEnsemble::timeouts_flagged() const {
  return trials.empty() ? false
                        : double(timeout_count) > 0.01 * double(trials.size());
}

int default_workers() {
  if (const char* env = std::getenv("SLOWFAST_WORKERS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v >= 1 && v <= 4096) return int(v);
    throw ConfigError(std::string("SLOWFAST_WORKERS must be a positive integer, got '") +
                      env + "'");
  }
  const unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1 : int(hc);
}

EscapeEnsemble run_ensemble(const SlowFastModel& model,
                            const IntegratorConfig& cfg, int n_trials,
                            std::uint64_t master_seed, double t_max,
                            int workers,
                            std::optional<series::Rational> start_sink) {
  cfg.validate();
  if (n_trials < 1) throw ConfigError("n_trials must be at least 1");
  if (!(t_max > 0.0)) throw ConfigError("t_max must be positive");
  if (workers < 0) throw ConfigError("workers must be >= 0");
  if (workers == 0) workers = default_workers();
  const series::Rational sink =
      start_sink ? *start_sink : path::default_sink(model);
  const double x0 = sink.get_d();
  const double xs = model.adjacent_saddle(sink).x.get_d();
  const SdeSystem sys = SdeSystem::from_model(model);

  EscapeEnsemble ens;
  ens.model_name = model.name();
  ens.epsilon = model.epsilon();
  ens.noise_d = model.noise_d();
  ens.config = cfg;
  ens.master_seed = master_seed;
  ens.t_max = t_max;
  ens.trials.resize(std::size_t(n_trials));

  std::atomic<int> next{0};
  auto work = [&]() {
    for (int i = next++; i < n_trials; i = next++) {
      EscapeTrial& t = ens.trials[std::size_t(i)];
      try {
        t = run_escape_trial(sys, cfg, master_seed, x0, xs, t_max,
                             std::uint64_t(i));
      } catch (const Error& e) {
        t = EscapeTrial{};
        t.seed = master_seed;
        t.stream = std::uint64_t(i);
        t.error = e.what();
      }
    }
  };
  const int n_threads = std::min(workers, n_trials);
  if (n_threads <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < n_threads; ++w) pool.emplace_back(work);
    for (auto& th : pool) th.join();
  }

  // Ordered reduction by trial index.
  double sum = 0.0;
  for (const auto& t : ens.trials) {
    if (t.failed()) {
      ++ens.failed_count;
    } else if (t.timed_out()) {
      ++ens.timeout_count;
    } else {
      ++ens.escaped;
      sum += *t.first_passage_time;
    }
  }
  if (ens.failed_count == n_trials) {
    throw Error("all " + std::to_string(n_trials) +
                " trials failed; first error: " + ens.trials.front().error);
  }
  if (ens.escaped > 0) {
    ens.mean_T = sum / ens.escaped;
    double ss = 0.0;
    for (const auto& t : ens.trials) {
      if (t.first_passage_time) {
        const double d = *t.first_passage_time - ens.mean_T;
        ss += d * d;
      }
    }
    ens.std_T = ens.escaped > 1 ? std::sqrt(ss / (ens.escaped - 1)) : 0.0;
  }
  return ens;
}

}  // namespace slowfast::sde
