#pragma once

#include <functional>

#include "rcusum/core.hpp"

namespace rcusum {

/// A discrete measure: E[phi(X)] is approximated by sum_i w_i phi(x_i).
/// Quadrature rules and Monte Carlo samples (w_i = 1/n) share this form.
struct WeightedNodes {
  ArrayXd x;
  ArrayXd w;

  Eigen::Index size() const { return x.size(); }

  template <typename ArrayExpr>
  double expect(const ArrayExpr& values) const {
    return (w * values).sum();
  }
};

/// Gauss-Hermite rule for the weight exp(-x^2) (Golub-Welsch).
WeightedNodes gauss_hermite(int n);

/// Gauss-Legendre rule on [-1, 1] (Golub-Welsch).
WeightedNodes gauss_legendre(int n);

/// n-point rule for expectations under N(mean, sd^2); weights sum to 1.
WeightedNodes normal_rule(double mean, double sd, int n);

/// Composite Gauss-Legendre rule for N(mean, sd^2) on mean +/- half_width sd,
/// `panels` equal panels of `per_panel` nodes; weights sum to 1. Unlike
/// Gauss-Hermite it converges quickly for integrands such as exp(c exp(-x^2)).
WeightedNodes normal_panel_rule(double mean, double sd, int panels, int per_panel = 8,
                                double half_width = 12.0);

/// Concatenates two measures, scaling their weights by wa and wb.
WeightedNodes combine(const WeightedNodes& a, double wa, const WeightedNodes& b, double wb);

struct IntegrationResult {
  double value;
  double error;
};

/// Adaptive 15-point Gauss-Kronrod integration of f over [a, b] until the
/// estimated absolute error is below abs_tol. Throws NumericError(quadrature)
/// when max_intervals is exhausted.
IntegrationResult integrate(const std::function<double(double)>& f, double a, double b,
                            double abs_tol = 1e-12, int max_intervals = 20000);

}  // namespace rcusum
