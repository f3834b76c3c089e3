#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "rcusum/calibration.hpp"
#include "rcusum/tuning.hpp"

namespace rcusum {

struct NamedScheme {
  std::string id;
  Scheme scheme;
};

/// Detection delay with the change at time 1: the first m streams follow
/// h_theta_post under `post` from the first observation.
RunEstimate simulate_delay(const Scheme& scheme, const GrossErrorModel& pre,
                           const GrossErrorModel& post, const ChangeScenario& scenario,
                           const MonteCarloOptions& opts);

enum class SweepAxis { m, theta };

std::vector<int> default_m_grid();        // 1 3 5 8 10 15 20 30 50 100
std::vector<double> default_theta_grid();  // 1 1.5 2 2.5 3

std::vector<ChangeScenario> m_sweep(int K, const std::vector<int>& ms, double theta_post);
std::vector<ChangeScenario> theta_sweep(int K, int m, const std::vector<double>& thetas);

struct ExperimentSpec {
  std::vector<NamedScheme> schemes;  // thresholds already calibrated
  GrossErrorModel model_pre;
  GrossErrorModel model_post;
  std::vector<ChangeScenario> scenarios;
  SweepAxis axis = SweepAxis::m;
  double gamma = 5000.0;
  MonteCarloOptions mc{200, 250'000, 1, 0};
};

struct DelayRow {
  std::string scheme;
  double parameter = 0.0;  // m or theta, per the sweep axis
  RunEstimate delay;
  /// Observed delay over (b/m + d) / I_theta(eps, alpha); soft-threshold
  /// CUSUM schemes with a positive information number only.
  std::optional<double> bound_ratio;
  std::optional<std::string> error;
};

/// Every scheme against every scenario. Cell (i, j) uses seed
/// derive_seed(mc.seed, {i, j}); a failing cell is recorded and skipped.
std::vector<DelayRow> run_delay_table(const ExperimentSpec& spec);

/// Columns: scheme,parameter,mean,se,reps,censored
void write_delay_csv(std::ostream& out, const std::vector<DelayRow>& rows);

std::vector<double> default_epsilon_grid();  // 0.02:0.02:0.2

struct ArlPoint {
  std::string scheme;
  double epsilon = 0.0;
  RunEstimate arl;
  double log_arl = 0.0;
  double log_se = 0.0;  // delta method: se / mean
};

/// ARL of each fixed-threshold scheme as the contamination ratio of `base`
/// varies. Every (scheme, epsilon) point reuses the seed of its scheme.
std::vector<ArlPoint> arl_vs_epsilon_curve(const std::vector<NamedScheme>& schemes,
                                           const GrossErrorModel& base, int K,
                                           const std::vector<double>& epsilons,
                                           const MonteCarloOptions& opts);

/// Columns: scheme,epsilon,mean,se,reps,censored,log_arl,log_se
void write_arl_csv(std::ostream& out, const std::vector<ArlPoint>& points);

struct CurveGrids {
  std::vector<double> theta;              // information number against theta
  std::vector<double> info_alphas{0.21, 0.51};
  AlphaGrid alpha;                        // objective and breakdown curves
  std::vector<double> objective_epsilons{0.1};
  std::vector<double> epsilon;            // efficiency against epsilon
  double efficiency_alpha = 0.21;

  CurveGrids();
};

struct CurvePoint {
  std::string figure;
  std::string series;
  double x = 0.0;
  double y = 0.0;
};

/// Long-format series: "information" (I_theta(0, a) against theta),
/// "objective" (lambda I against alpha per epsilon), "efficiency"
/// (e(eps, a) against eps) and "breakdown" (d_alpha, M and eps* against alpha).
std::vector<CurvePoint> tuning_curves(const GrossErrorModel& model, const QuadratureConfig& qc,
                                      const CurveGrids& grids);

/// Columns: figure,series,x,y
void write_curves_csv(std::ostream& out, const std::vector<CurvePoint>& points);

}  // namespace rcusum
