#include "rcusum/breakdown.hpp"

#include <cmath>
#include <utility>

#include "rcusum/detectors.hpp"

namespace rcusum {

double density_power_divergence(const NominalFamily& fam, double alpha) {
  fam.validate();
  if (!(alpha >= 0.0)) throw ConfigError("alpha must be nonnegative");
  const double var = fam.sigma * fam.sigma;
  const double delta2 = (fam.theta1 - fam.theta0) * (fam.theta1 - fam.theta0);
  if (alpha == 0.0) return delta2 / (2.0 * var);
  return std::sqrt(1.0 + alpha) / (alpha * std::pow(std::sqrt(2.0 * kPi) * fam.sigma, alpha)) *
         (1.0 - std::exp(-alpha * delta2 / (2.0 * (1.0 + alpha) * var)));
}

namespace {

std::pair<double, double> sup_search(const NominalFamily& fam, double alpha,
                                     const SupSearch& search) {
  const IncrementKernel inc(LocalParams{alpha, fam});
  const double lo = search.lo.value_or(fam.theta0 - 10.0 * fam.sigma);
  const double hi = search.hi.value_or(fam.theta1 + 10.0 * fam.sigma);
  if (!(hi > lo) || !(search.grid_step > 0.0)) throw ConfigError("invalid sup search range");
  const auto n = static_cast<Eigen::Index>(std::ceil((hi - lo) / search.grid_step)) + 1;
  const ArrayXd xs = ArrayXd::LinSpaced(n, lo, hi);
  const ArrayXd vs = inc(xs);
  Eigen::Index best;
  vs.maxCoeff(&best);

  // Golden-section refinement on the bracketing grid cells.
  double a = xs(std::max<Eigen::Index>(best - 1, 0));
  double b = xs(std::min<Eigen::Index>(best + 1, n - 1));
  const double inv_phi = 0.5 * (std::sqrt(5.0) - 1.0);
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = inc(c), fd = inc(d);
  while (b - a > search.refine_tol * std::max(1.0, std::abs(a))) {
    if (fc > fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = inc(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = inc(d);
    }
  }
  const double x = 0.5 * (a + b);
  const double refined = inc(x);
  if (refined >= vs(best)) return {x, refined};
  return {xs(best), vs(best)};
}

}  // namespace

double m_alpha(const NominalFamily& fam, double alpha, const SupSearch& search) {
  fam.validate();
  if (!(alpha >= 0.0)) throw ConfigError("alpha must be nonnegative");
  // log-likelihood ratio is linear in x, unbounded above
  if (alpha == 0.0) return kInf;
  return sup_search(fam, alpha, search).second;
}

double m_alpha_argmax(const NominalFamily& fam, double alpha, const SupSearch& search) {
  if (alpha == 0.0) return kInf;
  return sup_search(fam, alpha, search).first;
}

BreakdownReport breakdown_point(const NominalFamily& fam, double alpha, const SupSearch& search) {
  BreakdownReport r;
  r.alpha = alpha;
  r.d_alpha = density_power_divergence(fam, alpha);
  r.m_alpha = m_alpha(fam, alpha, search);
  if (std::isinf(r.m_alpha)) {
    r.eps_star = std::isinf(r.d_alpha) ? std::nan("") : 0.0;
  } else {
    r.eps_star = r.d_alpha / (r.d_alpha + (1.0 + alpha) * r.m_alpha);
  }
  return r;
}

double worst_case_drift(double epsilon, const BreakdownReport& r) {
  return -(1.0 - epsilon) / (1.0 + r.alpha) * r.d_alpha + epsilon * r.m_alpha;
}

AlphaOptResult alpha_opt(const NominalFamily& fam, const AlphaGrid& grid, const SupSearch& search) {
  AlphaOptResult out;
  out.eps_star = -1.0;
  for (double a : grid.points()) {
    BreakdownReport r = breakdown_point(fam, a, search);
    if (r.eps_star > out.eps_star) {
      out.eps_star = r.eps_star;
      out.alpha_opt = a;
    }
    out.curve.push_back(r);
  }
  return out;
}

}  // namespace rcusum
