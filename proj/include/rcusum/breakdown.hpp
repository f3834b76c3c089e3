#pragma once

#include <optional>
#include <vector>

#include "rcusum/models.hpp"
#include "rcusum/tuning.hpp"

namespace rcusum {

/// Where to look for the supremum of the increment. Defaults to
/// [theta0 - 10 sigma, theta1 + 10 sigma].
struct SupSearch {
  std::optional<double> lo;
  std::optional<double> hi;
  double grid_step = 1e-2;
  double refine_tol = 1e-12;
};

struct BreakdownReport {
  double alpha = 0.0;
  double d_alpha = 0.0;
  double m_alpha = 0.0;  // +inf at alpha = 0
  double eps_star = 0.0;
};

/// Density power divergence d_alpha(theta0, theta1) for the Gaussian family;
/// the Kullback-Leibler number at alpha = 0.
double density_power_divergence(const NominalFamily& fam, double alpha);

/// ess sup_x of the increment; +inf for alpha = 0.
double m_alpha(const NominalFamily& fam, double alpha, const SupSearch& search = {});

/// Location of the supremum found by m_alpha (the worst-case point mass).
double m_alpha_argmax(const NominalFamily& fam, double alpha, const SupSearch& search = {});

BreakdownReport breakdown_point(const NominalFamily& fam, double alpha,
                                const SupSearch& search = {});

/// Drift of the increment under the worst contamination at ratio eps:
/// -(1 - eps) d_alpha / (1 + alpha) + eps M(alpha).
double worst_case_drift(double epsilon, const BreakdownReport& r);

struct AlphaOptResult {
  double alpha_opt = 0.0;
  double eps_star = 0.0;
  std::vector<BreakdownReport> curve;
};

/// argmax of the breakdown point over the grid (ties to the smaller alpha).
AlphaOptResult alpha_opt(const NominalFamily& fam, const AlphaGrid& grid,
                         const SupSearch& search = {});

}  // namespace rcusum
