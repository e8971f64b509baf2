#include "slowfast/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <memory>
#include <optional>
#include <sstream>

#include "slowfast/acceptance.hpp"
#include "slowfast/analysis.hpp"
#include "slowfast/manifold.hpp"
#include "slowfast/path.hpp"
#include "slowfast/sde.hpp"

namespace slowfast::cli {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace {

using json = nlohmann::json;
using manifold::SlowFastModel;
using series::Rational;

struct RunConfig {
  std::string model = "duffing";
  std::vector<std::string> f;      // custom drift coefficients, constant first
  std::vector<std::string> roots;  // custom equilibria
  std::vector<double> eps;
  std::vector<double> inv_d;
  std::vector<double> d;
  int grade = 5;
  int eps_order = 0;  // > 0 selects truncation by e-order
  int trials = 0;
  std::uint64_t seed = 1;
  int workers = 0;
  std::string output;
  std::string route = "auto";
  double delta = 1e-6;
  std::string raw;
  std::string action = "fitted";
  bool reference = false;
  std::vector<int> only;
  // integrator
  double nu = 0.01;
  std::string scheme = "implicit";
  double newton_tol = 1e-10;
  int newton_max_iters = 25;
  double overshoot = 0.0;
  double t_max = 1e7;
};

template <class T>
std::vector<T> as_list(const json& j) {
  if (j.is_array()) return j.get<std::vector<T>>();
  return {j.get<T>()};
}

std::vector<std::string> rational_list(const json& j) {
  std::vector<std::string> out;
  for (const auto& v : j.is_array() ? j : json::array({j})) {
    out.push_back(v.is_string() ? v.get<std::string>() : v.dump());
  }
  return out;
}

void load_config_file(const std::string& file, RunConfig& c) {
  std::ifstream in(file);
  if (!in) throw ConfigError("--config: cannot open '" + file + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("--config: " + std::string(e.what()));
  }
  if (!j.is_object()) throw ConfigError("--config: top level must be an object");
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "model") c.model = v.get<std::string>();
      else if (key == "f") c.f = rational_list(v);
      else if (key == "roots") c.roots = rational_list(v);
      else if (key == "eps" || key == "epsilon") c.eps = as_list<double>(v);
      else if (key == "invD" || key == "inv_D") c.inv_d = as_list<double>(v);
      else if (key == "D") c.d = as_list<double>(v);
      else if (key == "grade") c.grade = v.get<int>();
      else if (key == "eps_order") c.eps_order = v.get<int>();
      else if (key == "trials") c.trials = v.get<int>();
      else if (key == "seed") c.seed = v.get<std::uint64_t>();
      else if (key == "workers") c.workers = v.get<int>();
      else if (key == "output") c.output = v.get<std::string>();
      else if (key == "route") c.route = v.get<std::string>();
      else if (key == "delta") c.delta = v.get<double>();
      else if (key == "raw") c.raw = v.get<std::string>();
      else if (key == "action") c.action = v.get<std::string>();
      else if (key == "reference") c.reference = v.get<bool>();
      else if (key == "only") c.only = as_list<int>(v);
      else if (key == "integrator") {
        for (const auto& [ik, iv] : v.items()) {
          if (ik == "nu") c.nu = iv.get<double>();
          else if (ik == "scheme") c.scheme = iv.get<std::string>();
          else if (ik == "newton_tol") c.newton_tol = iv.get<double>();
          else if (ik == "newton_max_iters") c.newton_max_iters = iv.get<int>();
          else if (ik == "overshoot") c.overshoot = iv.get<double>();
          else if (ik == "t_max") c.t_max = iv.get<double>();
          else throw ConfigError("--config: unknown key 'integrator." + ik + "'");
        }
      } else {
        throw ConfigError("--config: unknown key '" + key + "'");
      }
    }
  } catch (const json::exception& e) {
    throw ConfigError("--config: " + std::string(e.what()));
  }
}

// Flags are parsed into their own storage and copied over the config-file
// values afterwards, so a flag always wins.
class FlagSet {
 public:
  template <class T>
  CLI::Option* add(CLI::App* app, const std::string& name, T RunConfig::*field,
                   const std::string& desc) {
    auto slot = std::make_shared<T>();
    CLI::Option* opt = app->add_option(name, *slot, desc);
    if constexpr (std::is_same_v<T, std::vector<double>> ||
                  std::is_same_v<T, std::vector<std::string>> ||
                  std::is_same_v<T, std::vector<int>>) {
      opt->delimiter(',');
    }
    appliers_.push_back([opt, slot, field](RunConfig& c) {
      if (opt->count() > 0) c.*field = *slot;
    });
    return opt;
  }
  CLI::Option* add_flag(CLI::App* app, const std::string& name,
                        bool RunConfig::*field, const std::string& desc) {
    auto slot = std::make_shared<bool>(false);
    CLI::Option* opt = app->add_flag(name, *slot, desc);
    appliers_.push_back([opt, slot, field](RunConfig& c) {
      if (opt->count() > 0) c.*field = *slot;
    });
    return opt;
  }
  void apply(RunConfig& c) const {
    for (const auto& a : appliers_) a(c);
  }

 private:
  std::vector<std::function<void(RunConfig&)>> appliers_;
};

SlowFastModel build_model(const RunConfig& c, double eps, double noise_d) {
  if (c.model == "duffing") return SlowFastModel::duffing(eps, noise_d);
  if (c.model == "asymmetric") return SlowFastModel::asymmetric(eps, noise_d);
  if (c.model == "custom") {
    if (c.f.empty() || c.roots.empty()) {
      throw ConfigError("--model custom needs --f and --roots");
    }
    std::vector<Rational> f, roots;
    for (const auto& s : c.f) f.push_back(series::parse_rational(s));
    for (const auto& s : c.roots) roots.push_back(series::parse_rational(s));
    return SlowFastModel::from_coefficients("custom", f, roots, eps, noise_d);
  }
  throw ConfigError("--model: unknown model '" + c.model +
                    "' (expected duffing|asymmetric|custom)");
}

sde::IntegratorConfig integrator(const RunConfig& c) {
  sde::IntegratorConfig cfg;
  cfg.nu = c.nu;
  cfg.scheme = sde::parse_scheme(c.scheme);
  cfg.newton_tol = c.newton_tol;
  cfg.newton_max_iters = c.newton_max_iters;
  cfg.overshoot = c.overshoot;
  cfg.validate();
  return cfg;
}

path::Route parse_route(const std::string& s, double eps) {
  if (s == "auto") return eps == 0.0 ? path::Route::singular : path::Route::full;
  if (s == "singular") return path::Route::singular;
  if (s == "reduced") return path::Route::reduced;
  if (s == "full") return path::Route::full;
  throw ConfigError("--route: unknown route '" + s +
                    "' (expected auto|singular|reduced|full)");
}

std::vector<double> eps_or(const RunConfig& c, std::vector<double> dflt) {
  const auto& e = c.eps.empty() ? dflt : c.eps;
  for (double v : e) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw ConfigError("--eps: values must be finite and >= 0");
    }
  }
  return e;
}

// Noise levels as (D, 1/D) pairs.
std::vector<std::pair<double, double>> noise_levels(
    const RunConfig& c, std::vector<double> dflt_inv) {
  if (!c.d.empty() && !c.inv_d.empty()) {
    throw ConfigError("--D and --invD are mutually exclusive");
  }
  std::vector<std::pair<double, double>> out;
  if (!c.d.empty()) {
    for (double d : c.d) {
      if (!(d > 0.0)) throw ConfigError("--D: values must be positive");
      out.push_back({d, 1.0 / d});
    }
  } else {
    for (double v : c.inv_d.empty() ? dflt_inv : c.inv_d) {
      if (!(v > 0.0)) throw ConfigError("--invD: values must be positive");
      out.push_back({1.0 / v, v});
    }
  }
  return out;
}

// ---------------------------------------------------------------- derive

void cmd_derive(const RunConfig& c, std::ostream& out) {
  const auto model = build_model(c, 0.1, 0.0);
  manifold::CenterManifold cm;
  if (c.eps_order > 0) {
    cm = manifold::solve_center_manifold_eps(model, c.eps_order);
  } else {
    if (c.grade < 1) throw ConfigError("--grade must be at least 1");
    cm = manifold::solve_center_manifold(model, c.grade);
  }
  const auto field = manifold::reduced_field(cm, model);
  const auto res = manifold::manifold_residuals(cm, model);
  out << "model: " << model.name() << "\n";
  out << "f = " << model.fast_drift().to_string() << "\n";
  if (c.eps_order > 0) {
    out << "truncation: e-order <= " << c.eps_order << "\n";
  } else {
    out << "truncation: total grade <= " << c.grade << "\n";
  }
  out << "h = " << cm.h.to_string() << "\n";
  out << "k = " << cm.k.to_string() << "\n";
  out << "x' = " << field.x_rate.to_string() << "\n";
  out << "l1' = " << field.l1_rate.to_string() << "\n";
  out << "residual[h] = " << res.h_condition.to_string() << "\n";
  out << "residual[k] = " << res.k_condition.to_string() << "\n";
  if (!res.vanish()) {
    throw ConsistencyError("invariance residuals do not vanish below the cap");
  }
  out << "certificate: invariance residuals vanish identically below the cap\n";
}

// ---------------------------------------------------------------- path

void cmd_path(const RunConfig& c, std::ostream& out) {
  const auto eps = eps_or(c, {0.0});
  if (eps.size() != 1) throw ConfigError("--eps: path takes a single value");
  const double e = eps[0];
  const auto model = build_model(c, e == 0.0 ? 0.1 : e, 0.0);
  const auto route = parse_route(c.route, e);
  path::PathSolution p;
  if (route == path::Route::full) {
    p = path::full_system_crosscheck(model, e, c.delta);
  } else {
    if (route == path::Route::singular && e != 0.0) {
      throw ConfigError("--route singular needs --eps 0");
    }
    const auto cm = manifold::solve_center_manifold_eps(model, 4);
    p = path::reduced_heteroclinic(model, cm, e, std::min(c.delta, 1e-3));
  }
  out << "t,x,l1,y,l2\n";
  for (const auto& s : p.samples) {
    out << format_double(s.t) << ',' << format_double(s.x) << ','
        << format_double(s.l1) << ',' << format_double(s.y) << ','
        << format_double(s.l2) << '\n';
  }
}

// ---------------------------------------------------------------- action

void cmd_action(const RunConfig& c, std::ostream& out) {
  const auto eps = eps_or(c, {0.02, 0.05, 0.1, 0.15, 0.2});
  const auto model = build_model(c, 0.1, 0.0);
  const Rational sink = path::default_sink(model);
  const Rational saddle = model.adjacent_saddle(sink).x;
  const double R0 = path::singular_action(model, sink, saddle).get_d();
  parse_route(c.route, 0.0);  // rejects unknown names
  const bool reduced = c.route == "reduced";

  // The reduced route loses the connection inside the standard grid, so the
  // e^2 fit always uses the full system.
  path::Eps2Options opts;
  opts.delta = c.delta;
  const double eps2 =
      path::eps2_fit(model, nullptr, {0.02, 0.05, 0.1, 0.15, 0.2}, opts)
          .coefficient;

  struct Row {
    double R = 0, miss = 0, drift = 0;
  };
  std::vector<Row> rows(eps.size());
  std::vector<double> positive;
  for (double e : eps) {
    if (e > 0.0 && c.route != "singular") positive.push_back(e);
  }
  std::vector<path::PathSolution> sols;
  if (!positive.empty()) {
    if (reduced) {
      const auto cm = manifold::solve_center_manifold_eps(model, 4);
      for (double e : positive) {
        sols.push_back(path::reduced_heteroclinic(model, cm, e,
                                                  std::min(c.delta, 1e-3)));
      }
    } else {
      sols = path::full_paths(model, positive, c.delta);
    }
  }
  std::size_t next = 0;
  for (std::size_t i = 0; i < eps.size(); ++i) {
    if (eps[i] > 0.0 && c.route != "singular") {
      const auto& p = sols[next++];
      rows[i] = {p.action, p.miss_distance, p.hamiltonian_drift};
    } else {
      rows[i] = {R0, 0.0, 0.0};
    }
  }
  out << "epsilon,R,R_singular,eps2_fit,miss_distance,H_drift\n";
  for (std::size_t i = 0; i < eps.size(); ++i) {
    out << format_double(eps[i]) << ',' << format_double(rows[i].R) << ','
        << format_double(R0) << ',' << format_double(eps2) << ','
        << format_double(rows[i].miss) << ',' << format_double(rows[i].drift)
        << '\n';
  }
}

// ---------------------------------------------------------------- simulate

void cmd_simulate(const RunConfig& c, std::ostream& out, std::ostream& err) {
  const auto eps = eps_or(c, {0.1});
  const auto levels = noise_levels(c, {20.0});
  const auto cfg = integrator(c);
  const int trials = c.trials > 0 ? c.trials : 100;
  if (c.trials < 0) throw ConfigError("--trials must be positive");
  if (c.workers < 0) throw ConfigError("--workers must be >= 0");

  std::unique_ptr<std::ofstream> raw;
  if (!c.raw.empty()) {
    raw = std::make_unique<std::ofstream>(c.raw);
    if (!*raw) throw ConfigError("--raw: cannot open '" + c.raw + "'");
    *raw << "epsilon,D,trial,first_passage_time,steps,max_newton_iterations,"
            "status\n";
  }
  out << "epsilon,D,n_trials,mean_T,std_T,timeout_count,seed,nu\n";
  std::uint64_t index = 0;
  for (double e : eps) {
    if (!(e > 0.0)) throw ConfigError("--eps: simulate needs e > 0");
    for (const auto& [d, inv] : levels) {
      const auto model = build_model(c, e, d);
      const std::uint64_t seed = analysis::point_seed(c.seed, index++);
      const auto ens =
          sde::run_ensemble(model, cfg, trials, seed, c.t_max, c.workers);
      if (ens.timeouts_flagged()) {
        err << "warning: " << ens.timeout_count << " of " << trials
            << " trials timed out at e=" << format_double(e)
            << " D=" << format_double(d) << "\n";
      }
      if (ens.failed_count > 0) {
        err << "warning: " << ens.failed_count << " trials failed at e="
            << format_double(e) << " D=" << format_double(d) << "\n";
      }
      const double mean = ens.escaped > 0 ? ens.mean_T : NAN;
      const double sd = ens.escaped > 1 ? ens.std_T : NAN;
      out << format_double(e) << ',' << format_double(d) << ',' << trials
          << ',' << format_double(mean) << ',' << format_double(sd) << ','
          << ens.timeout_count << ',' << seed << ',' << format_double(cfg.nu)
          << '\n';
      if (raw) {
        for (std::size_t i = 0; i < ens.trials.size(); ++i) {
          const auto& t = ens.trials[i];
          *raw << format_double(e) << ',' << format_double(d) << ',' << i << ','
               << format_double(t.first_passage_time ? *t.first_passage_time
                                                     : NAN)
               << ',' << t.steps_taken << ',' << t.max_newton_iterations << ','
               << (t.failed() ? "failed" : t.timed_out() ? "timeout" : "escaped")
               << '\n';
        }
      }
    }
  }
}

// ---------------------------------------------------------------- scaling

analysis::ActionModel action_model(const RunConfig& c,
                                   const SlowFastModel& model) {
  if (c.action == "exact") return analysis::exact_action_model(model);
  if (c.action == "fitted") return analysis::fitted_action_model(model);
  throw ConfigError("--action: expected exact|fitted, got '" + c.action + "'");
}

void cmd_scaling(const RunConfig& c, std::ostream& out) {
  const auto eps = eps_or(c, {0.1});
  const auto model = build_model(c, 0.1, 0.0);
  const auto act = action_model(c, model);
  std::vector<analysis::SimulatedSlope> sims;
  for (std::size_t i = 0; i < eps.size(); ++i) {
    const double e = eps[i];
    if (!(e > 0.0)) throw ConfigError("--eps: scaling needs e > 0");
    analysis::ScalingFit fit;
    if (c.reference) {
      if (c.model != "duffing") {
        throw ConfigError("--reference data exist for the duffing model only");
      }
      const auto pts = analysis::reference_escape_points(e);
      if (pts.empty()) {
        throw ConfigError("--reference: no reference data at e = " +
                          format_double(e));
      }
      fit = analysis::fit_scaling(pts);
    } else {
      std::vector<double> inv;
      for (const auto& [d, v] : noise_levels(c, {15, 18, 21, 24, 27})) {
        inv.push_back(v);
      }
      const int trials = c.trials > 0 ? c.trials : 200;
      fit = analysis::run_scaling(model.with_epsilon(e), inv, integrator(c),
                                  trials, analysis::point_seed(c.seed, i),
                                  c.t_max, c.workers)
                .fit;
    }
    sims.push_back({e, fit.slope, fit.slope_stderr});
  }
  const auto rows = analysis::compare_table(model, act, sims);
  out << "epsilon,cs_pred,cs_fit,cs_stderr,agree,status,z,beyond_manifold_bound\n";
  for (const auto& r : rows) {
    out << format_double(r.epsilon) << ',' << format_double(r.cs_pred) << ','
        << format_double(r.cs_fit) << ',' << format_double(r.cs_stderr) << ','
        << (r.agree ? "true" : "false") << ',' << analysis::to_string(r.status)
        << ',' << format_double(r.z) << ','
        << (r.beyond_manifold_bound ? "true" : "false") << '\n';
  }
}

// ---------------------------------------------------------------- table1

void cmd_table1(const RunConfig& c, std::ostream& out) {
  if (c.model != "duffing") throw ConfigError("table1 is defined for --model duffing");
  const auto model = SlowFastModel::duffing();
  const auto exact = analysis::exact_action_model(model);
  const auto fitted = analysis::fitted_action_model(model);
  char line[256];
  std::snprintf(line, sizeof line,
                "R(e) = %.6g + c2 e^2, exact c2 = %.6g, fitted c2 = %.6g\n",
                exact.R0, exact.c2, fitted.c2);
  out << line;
  out << "C_S in units of 1e-2; reference simulation band is one standard "
         "deviation\n\n";
  std::snprintf(line, sizeof line, "%-7s %-10s %-10s %-10s %-18s %s\n", "e",
                "pred", "pred_fit", "reference", "simulation", "match");
  out << line;
  for (const auto& row : analysis::reference_table()) {
    const double p = 100.0 * analysis::predict_cs(exact.R(row.epsilon));
    const double pf = 100.0 * analysis::predict_cs(fitted.R(row.epsilon));
    char sim[64];
    std::snprintf(sim, sizeof sim, "%.4g +- %.4g", row.cs_sim_e2, row.band_e2);
    std::snprintf(line, sizeof line, "%-7g %-10.4f %-10.4f %-10.4g %-18s %s\n",
                  row.epsilon, p, pf, row.cs_pred_e2, sim,
                  analysis::matches_four_figures(p, row.cs_pred_e2) ? "yes"
                                                                    : "no");
    out << line;
  }
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out,
        std::ostream& err) {
  CLI::App app{"Switching times of slow-fast bistable systems", "slowfast"};
  app.require_subcommand(1);
  RunConfig cfg;
  FlagSet flags;
  std::string config_file;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", config_file, "JSON configuration file");
    flags.add(sub, "--model", &RunConfig::model, "duffing|asymmetric|custom");
    flags.add(sub, "--f", &RunConfig::f,
              "custom drift coefficients, constant term first");
    flags.add(sub, "--roots", &RunConfig::roots, "custom equilibria");
    flags.add(sub, "--seed", &RunConfig::seed, "master seed");
    flags.add(sub, "--workers", &RunConfig::workers,
              "worker threads (0: SLOWFAST_WORKERS or all cores)");
    flags.add(sub, "-o,--output", &RunConfig::output, "output file");
  };
  auto noise = [&](CLI::App* sub) {
    flags.add(sub, "--invD", &RunConfig::inv_d, "1/D values");
    flags.add(sub, "--D", &RunConfig::d, "noise intensities");
    flags.add(sub, "--trials", &RunConfig::trials, "trials per point");
    flags.add(sub, "--nu", &RunConfig::nu, "time step");
    flags.add(sub, "--scheme", &RunConfig::scheme, "implicit|explicit");
    flags.add(sub, "--newton-tol", &RunConfig::newton_tol, "Newton tolerance");
    flags.add(sub, "--newton-max-iters", &RunConfig::newton_max_iters,
              "Newton iteration limit");
    flags.add(sub, "--overshoot", &RunConfig::overshoot,
              "distance past the saddle that counts as escape");
    flags.add(sub, "--t-max", &RunConfig::t_max, "per-trial time limit");
  };

  auto* derive = app.add_subcommand("derive", "center manifold series");
  common(derive);
  flags.add(derive, "--grade", &RunConfig::grade, "total-grade cap");
  flags.add(derive, "--eps-order", &RunConfig::eps_order,
            "truncate by e-order instead of grade");

  auto* pathc = app.add_subcommand("path", "optimal escape path samples");
  common(pathc);
  flags.add(pathc, "--eps", &RunConfig::eps, "epsilon");
  flags.add(pathc, "--route", &RunConfig::route, "auto|singular|reduced|full");
  flags.add(pathc, "--delta", &RunConfig::delta, "launch distance");

  auto* action = app.add_subcommand("action", "escape action against epsilon");
  common(action);
  flags.add(action, "--eps", &RunConfig::eps, "epsilon values");
  flags.add(action, "--route", &RunConfig::route, "auto|singular|reduced|full");
  flags.add(action, "--delta", &RunConfig::delta, "launch distance");

  auto* simulate = app.add_subcommand("simulate", "Monte Carlo escape times");
  common(simulate);
  noise(simulate);
  flags.add(simulate, "--eps", &RunConfig::eps, "epsilon values");
  flags.add(simulate, "--raw", &RunConfig::raw, "per-trial CSV file");

  auto* scaling = app.add_subcommand("scaling", "fitted against predicted C_S");
  common(scaling);
  noise(scaling);
  flags.add(scaling, "--eps", &RunConfig::eps, "epsilon values");
  flags.add(scaling, "--action", &RunConfig::action, "exact|fitted");
  flags.add_flag(scaling, "--reference", &RunConfig::reference,
                 "fit the reference escape times instead of simulating");

  auto* table1 = app.add_subcommand("table1", "prediction table");
  common(table1);

  auto* verify = app.add_subcommand("verify", "acceptance suite");
  common(verify);
  flags.add(verify, "--only", &RunConfig::only, "criterion numbers");

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    if (!config_file.empty()) load_config_file(config_file, cfg);
    flags.apply(cfg);
    if (cfg.workers < 0) throw ConfigError("--workers must be >= 0");

    std::ostringstream buf;
    std::ofstream file;
    if (!cfg.output.empty()) {
      file.open(cfg.output);
      if (!file) throw ConfigError("--output: cannot open '" + cfg.output + "'");
    }
    std::ostream& dest = cfg.output.empty() ? out : file;

    if (verify->parsed()) {
      const std::set<int> only(cfg.only.begin(), cfg.only.end());
      const auto results = acceptance::run_all(dest, cfg.workers, only);
      for (const auto& r : results) {
        if (!r.passed) return 1;
      }
      return 0;
    }
    if (derive->parsed()) cmd_derive(cfg, buf);
    if (pathc->parsed()) cmd_path(cfg, buf);
    if (action->parsed()) cmd_action(cfg, buf);
    if (simulate->parsed()) cmd_simulate(cfg, buf, err);
    if (scaling->parsed()) cmd_scaling(cfg, buf);
    if (table1->parsed()) cmd_table1(cfg, buf);
    dest << buf.str();
    dest.flush();
    return 0;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace slowfast::cli
