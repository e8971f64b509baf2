#pragma once

// Scaling of mean escape times with noise: predicted slopes from the action,
// fitted slopes from simulation, and their comparison.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "slowfast/errors.hpp"
#include "slowfast/manifold.hpp"
#include "slowfast/sde.hpp"

namespace slowfast::analysis {

class DegenerateDesign : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

/// Slope of log10 T against 1/D implied by T = c exp(R / 2D): R / (2 ln 10).
double predict_cs(double R);

struct ScalingPoint {
  double inv_d;
  double log10_t;
};

struct ScalingFit {
  double slope = 0.0;  // C_S
  double intercept = 0.0;
  double slope_stderr = 0.0;
  double intercept_stderr = 0.0;
  std::vector<ScalingPoint> points;
  std::vector<double> residuals;
};

/// Ordinary least squares of log10 T on 1/D. Needs at least three points
/// with at least two distinct 1/D values.
ScalingFit fit_scaling(const std::vector<ScalingPoint>& points);

/// R(e) = R0 + c2 e^2.
struct ActionModel {
  double R0 = 0.0;
  double c2 = 0.0;
  std::string source;  // "exact" or "fitted"
  double R(double e) const { return R0 + c2 * e * e; }
};

/// Exact coefficients of the action series.
ActionModel exact_action_model(const manifold::SlowFastModel& model);
/// c2 fitted from full-system actions on the standard grid.
ActionModel fitted_action_model(const manifold::SlowFastModel& model,
                                const std::vector<double>& eps_grid = {
                                    0.02, 0.05, 0.1, 0.15, 0.2});

struct SimulatedSlope {
  double epsilon;
  double cs;
  double stderr_;
};

enum class Agreement { agree, marginal, disagree };
std::string to_string(Agreement a);

struct ComparisonRow {
  double epsilon = 0.0;
  double R = 0.0;
  double cs_pred = 0.0;
  double cs_fit = 0.0;
  double cs_stderr = 0.0;
  double z = 0.0;       // |pred - fit| / stderr
  bool agree = false;   // within two standard errors
  Agreement status = Agreement::agree;
  bool beyond_manifold_bound = false;
  bool flagged() const {
    return status != Agreement::agree || beyond_manifold_bound;
  }
};

/// One row per simulated slope. Status is agree for z <= 1, marginal for
/// 1 < z <= 2 and disagree beyond; e above the slow-manifold existence
/// bound of the start sink is marked separately.
std::vector<ComparisonRow> compare_table(
    const manifold::SlowFastModel& model, const ActionModel& action,
    const std::vector<SimulatedSlope>& sim_results);

/// Reference scaling coefficients for the Duffing model: e, predicted C_S,
/// simulated C_S and its error band (all C_S in units of 1e-2).
struct ReferenceRow {
  double epsilon;
  double cs_pred_e2;
  double cs_sim_e2;
  double band_e2;
};
const std::vector<ReferenceRow>& reference_table();

/// Reference log10 escape times for the Duffing model at 1/D = 15..28.
/// Available for e in {0.01, 0.1, 0.2, 0.5, 1.0}; empty otherwise.
std::vector<ScalingPoint> reference_escape_points(double epsilon);

/// True when |value - ref| is below one unit in the fourth significant
/// figure of ref.
bool matches_four_figures(double value, double ref);

struct ScalingExperiment {
  std::vector<sde::EscapeEnsemble> ensembles;
  ScalingFit fit;
};

/// Master seed of point i in a sweep.
std::uint64_t point_seed(std::uint64_t master_seed, std::uint64_t index);

/// Mean escape times at each 1/D followed by the scaling fit. Points with no
/// escaped trial raise an Error.
ScalingExperiment run_scaling(const manifold::SlowFastModel& model,
                              const std::vector<double>& inv_d,
                              const sde::IntegratorConfig& cfg, int trials,
                              std::uint64_t master_seed, double t_max,
                              int workers = 0);

}  // namespace slowfast::analysis
