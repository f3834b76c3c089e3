#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "rcusum/core.hpp"
#include "rcusum/detectors.hpp"
#include "rcusum/models.hpp"
#include "rcusum/quadrature.hpp"

namespace rcusum {

/// How expectations under the nominal and outlier laws are discretized:
/// deterministic composite Gauss-Legendre panels, or one shared Monte Carlo
/// sample per component.
struct QuadratureConfig {
  enum class Method { quadrature, monte_carlo };

  Method method = Method::quadrature;
  int panels = 96;                     // per Gaussian component, 8 nodes each
  std::size_t n_samples = 1'000'000;  // monte_carlo only
  std::uint64_t seed = 1;
  double tolerance = 1e-9;

  void validate() const;
};

/// Discretized nominal and outlier measures, built once and reused for every
/// (epsilon, alpha) evaluation so grid searches see common random numbers.
class TuningContext {
 public:
  TuningContext(const GrossErrorModel& model, const QuadratureConfig& qc);

  const GrossErrorModel& model() const { return model_; }
  const QuadratureConfig& config() const { return qc_; }

  /// Nodes for f_theta (standard nodes shifted and scaled).
  WeightedNodes nominal_at(double theta) const;
  const WeightedNodes& outlier() const { return outlier_; }

  /// Twice the panels, for convergence checks (nullopt for Monte Carlo).
  std::optional<TuningContext> refined() const;

 private:
  TuningContext(const GrossErrorModel& model, const QuadratureConfig& qc, int panels);

  GrossErrorModel model_;
  QuadratureConfig qc_;
  WeightedNodes standard_;
  WeightedNodes outlier_;
};

/// Smallest positive root of sum_i w_i exp(lambda y_i) = 1. Requires
/// sum w y < 0 (else NumericError::no_positive_root).
double mgf_root(const ArrayXd& y, const ArrayXd& w, double tolerance = 1e-12);

/// I_theta(eps, alpha) = E_{h_theta}[increment]. The nominal component uses
/// the Gaussian closed form; the outlier component uses the context's rule.
double info_number(double theta, double epsilon, double alpha, const TuningContext& ctx);

/// Nominal-only closed form of E_{f_theta}[increment].
double info_number_closed_form(double theta, double alpha, const NominalFamily& fam);

/// lambda(eps, alpha): positive root of E_{h_theta0}[exp(lambda Y)] = 1.
double solve_lambda(double epsilon, double alpha, const TuningContext& ctx);

double efficiency_improvement(double epsilon, double alpha, const TuningContext& ctx);

struct AlphaGrid {
  double alpha_max = 2.0;
  double step = 0.01;

  std::vector<double> points() const;
};

struct TuningRow {
  double alpha = 0.0;
  double lambda = 0.0;
  double info = 0.0;
  double product = 0.0;
  double efficiency = 0.0;
};

struct OracleResult {
  double alpha_oracle = 0.0;
  std::vector<TuningRow> rows;  // grid points with a positive lambda
  int skipped = 0;
};

/// argmax over the grid of lambda(eps, a) * I_theta1(eps, a); ties go to the
/// smaller alpha. Grid points without a positive lambda are skipped.
OracleResult alpha_oracle(double epsilon, const TuningContext& ctx, const AlphaGrid& grid);

enum class DoptMode { simplified, first_order, exact };

DoptMode default_dopt_mode(int K, double gamma);
std::string to_string(DoptMode mode);

double d_opt(double lambda, int K, int m, double gamma, DoptMode mode);

/// b_gamma = (sqrt(log 4 gamma) + sqrt(K exp(-lambda d)))^2 / lambda.
double b_gamma(double lambda, int K, double d, double gamma);

/// Delay-bound objective b_gamma(d) / m + d minimized by d_opt(exact).
double delay_objective(double d, double lambda, int K, int m, double gamma);

/// (1/4) exp[(sqrt(lambda b) - sqrt(K exp(-lambda d)))^2], or nullopt when
/// lambda b <= K exp(-lambda d).
std::optional<double> arl_lower_bound(double lambda, double b, double d, int K);

struct TuningReport {
  double lambda = 0.0;
  double info = 0.0;
  double efficiency = 0.0;
  double alpha_oracle = 0.0;
  double d_opt = 0.0;
  DoptMode d_mode = DoptMode::simplified;
  double b_gamma = 0.0;
};

/// Report for the scheme at `alpha`; d_opt and b_gamma use lambda(eps, alpha).
TuningReport tuning_report(double epsilon, double alpha, int K, int m, double gamma,
                           const TuningContext& ctx, const AlphaGrid& grid,
                           std::optional<DoptMode> mode = std::nullopt);

}  // namespace rcusum
