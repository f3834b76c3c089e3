#include "rcusum/tuning.hpp"

#include <algorithm>
#include <cmath>

#include "rcusum/rng.hpp"

namespace rcusum {

void QuadratureConfig::validate() const {
  if (!(tolerance > 0.0)) throw ConfigError("quadrature tolerance must be positive");
  if (method == Method::monte_carlo && n_samples < 100'000) {
    throw ConfigError("monte_carlo quadrature needs at least 1e5 samples");
  }
  if (method == Method::quadrature && panels < 4) {
    throw ConfigError("quadrature needs at least 4 panels");
  }
}

namespace {

WeightedNodes monte_carlo_standard(std::size_t n, std::uint64_t seed) {
  Engine engine = make_engine(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  WeightedNodes out;
  out.x.resize(static_cast<Eigen::Index>(n));
  for (auto& v : out.x) v = normal(engine);
  out.w = ArrayXd::Constant(out.x.size(), 1.0 / static_cast<double>(n));
  return out;
}

WeightedNodes table_rule(const TableOutlier& table, int per_segment) {
  const WeightedNodes gl = gauss_legendre(per_segment);
  const auto& grid = table.grid();
  const auto segments = static_cast<Eigen::Index>(grid.size() - 1);
  WeightedNodes out;
  out.x.resize(segments * gl.size());
  out.w.resize(segments * gl.size());
  for (Eigen::Index s = 0; s < segments; ++s) {
    const double lo = grid[s], hi = grid[s + 1];
    const double half = 0.5 * (hi - lo), mid = 0.5 * (hi + lo);
    for (Eigen::Index j = 0; j < gl.size(); ++j) {
      const double x = mid + half * gl.x(j);
      out.x(s * gl.size() + j) = x;
      out.w(s * gl.size() + j) = half * gl.w(j) * table.pdf(x);
    }
  }
  out.w /= out.w.sum();
  return out;
}

WeightedNodes outlier_rule(const OutlierSpec& g, const QuadratureConfig& qc, int panels) {
  if (const auto* pm = std::get_if<PointMassOutlier>(&g)) {
    return WeightedNodes{ArrayXd::Constant(1, pm->location), ArrayXd::Constant(1, 1.0)};
  }
  if (qc.method == QuadratureConfig::Method::monte_carlo) {
    Engine engine = make_engine(derive_seed(qc.seed, {2}));
    WeightedNodes out;
    out.x.resize(static_cast<Eigen::Index>(qc.n_samples));
    for (auto& v : out.x) v = draw_outlier(engine, g);
    out.w = ArrayXd::Constant(out.x.size(), 1.0 / static_cast<double>(qc.n_samples));
    return out;
  }
  if (const auto* gauss = std::get_if<GaussianOutlier>(&g)) {
    return normal_panel_rule(gauss->mean, gauss->sd, panels);
  }
  return table_rule(std::get<TableOutlier>(g), std::max(4, panels / 12));
}

}  // namespace

TuningContext::TuningContext(const GrossErrorModel& model, const QuadratureConfig& qc)
    : TuningContext(model, qc, qc.panels) {}

TuningContext::TuningContext(const GrossErrorModel& model, const QuadratureConfig& qc, int panels)
    : model_(model), qc_(qc) {
  model_.validate();
  qc_.validate();
  qc_.panels = panels;
  standard_ = qc.method == QuadratureConfig::Method::monte_carlo
                  ? monte_carlo_standard(qc.n_samples, derive_seed(qc.seed, {1}))
                  : normal_panel_rule(0.0, 1.0, panels);
  outlier_ = outlier_rule(model_.outlier, qc_, panels);
}

WeightedNodes TuningContext::nominal_at(double theta) const {
  return WeightedNodes{theta + model_.nominal.sigma * standard_.x, standard_.w};
}

std::optional<TuningContext> TuningContext::refined() const {
  if (qc_.method == QuadratureConfig::Method::monte_carlo) return std::nullopt;
  return TuningContext(model_, qc_, 2 * qc_.panels);
}

double mgf_root(const ArrayXd& y, const ArrayXd& w, double tolerance) {
  const double mean = (w * y).sum();
  if (!(mean < 0.0)) {
    throw NumericError(NumericError::Kind::no_positive_root,
                       "no positive root (Lemma 1): E[Y] = " + std::to_string(mean) + " >= 0", mean);
  }
  auto phi = [&](double lambda) { return (w * (lambda * y).exp()).sum(); };

  double hi = 1.0;
  double value = phi(hi);
  while (!std::isfinite(value) && hi > 1e-12) {
    hi *= 0.5;
    value = phi(hi);
  }
  if (!std::isfinite(value)) {
    throw NumericError(NumericError::Kind::mgf_diverges, "MGF diverges near zero", 0.0);
  }
  while (value <= 1.0) {
    const double last = hi;
    hi *= 2.0;
    value = phi(hi);
    if (!std::isfinite(value)) {
      throw NumericError(NumericError::Kind::mgf_diverges,
                         "MGF diverges before a root is bracketed; last finite lambda = " +
                             std::to_string(last),
                         last);
    }
    if (hi > 1e12) {
      throw NumericError(NumericError::Kind::no_positive_root,
                         "no positive root: MGF stays below 1 (Y <= 0 almost surely)", hi);
    }
  }
  double lo = 0.0;
  for (int it = 0; it < 400 && hi - lo > tolerance * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (phi(mid) < 1.0) lo = mid;
    else hi = mid;
  }
  return 0.5 * (lo + hi);
}

double info_number_closed_form(double theta, double alpha, const NominalFamily& fam) {
  const double var = fam.sigma * fam.sigma;
  if (alpha == 0.0) {
    return (fam.theta1 - fam.theta0) * (theta - 0.5 * (fam.theta0 + fam.theta1)) / var;
  }
  // E_{N(theta, var)}[f_t(X)^alpha] = (2 pi var)^(-alpha/2) (1+alpha)^(-1/2)
  //                                  * exp(-alpha (theta - t)^2 / (2 (1+alpha) var))
  const double c = std::pow(2.0 * kPi * var, -0.5 * alpha) / (alpha * std::sqrt(1.0 + alpha));
  const double r = alpha / (2.0 * (1.0 + alpha) * var);
  return c * (std::exp(-r * (theta - fam.theta1) * (theta - fam.theta1)) -
              std::exp(-r * (theta - fam.theta0) * (theta - fam.theta0)));
}

namespace {

double outlier_increment_mean(double alpha, const TuningContext& ctx) {
  const IncrementKernel kernel(LocalParams{alpha, ctx.model().nominal});
  return ctx.outlier().expect(kernel(ctx.outlier().x));
}

double lambda_on(double epsilon, double alpha, const TuningContext& ctx) {
  const IncrementKernel kernel(LocalParams{alpha, ctx.model().nominal});
  const WeightedNodes f0 = ctx.nominal_at(ctx.model().nominal.theta0);
  if (epsilon == 0.0) return mgf_root(kernel(f0.x), f0.w, 1e-13);
  const WeightedNodes h0 = combine(f0, 1.0 - epsilon, ctx.outlier(), epsilon);
  return mgf_root(kernel(h0.x), h0.w, 1e-13);
}

}  // namespace

double info_number(double theta, double epsilon, double alpha, const TuningContext& ctx) {
  if (!(epsilon >= 0.0 && epsilon < 1.0)) throw ConfigError("epsilon must lie in [0, 1)");
  if (!(alpha >= 0.0)) throw ConfigError("alpha must be nonnegative");
  const double nominal = info_number_closed_form(theta, alpha, ctx.model().nominal);
  if (epsilon == 0.0) return nominal;
  const double outlier = outlier_increment_mean(alpha, ctx);
  if (auto fine = ctx.refined()) {
    const double check = outlier_increment_mean(alpha, *fine);
    const double residual = std::abs(check - outlier);
    if (residual > ctx.config().tolerance * std::max(1.0, std::abs(check)) * 1e3) {
      throw NumericError(NumericError::Kind::quadrature,
                         "outlier expectation did not converge", residual);
    }
  }
  return (1.0 - epsilon) * nominal + epsilon * outlier;
}

double solve_lambda(double epsilon, double alpha, const TuningContext& ctx) {
  if (!(epsilon >= 0.0 && epsilon < 1.0)) throw ConfigError("epsilon must lie in [0, 1)");
  if (!(alpha >= 0.0)) throw ConfigError("alpha must be nonnegative");
  // E_{f0}[f1/f0] = 1 for any family.
  if (epsilon == 0.0 && alpha == 0.0) return 1.0;
  const double lambda = lambda_on(epsilon, alpha, ctx);
  if (auto fine = ctx.refined()) {
    const double check = lambda_on(epsilon, alpha, *fine);
    const double residual = std::abs(check - lambda);
    if (residual > std::max(1e-6, 1e3 * ctx.config().tolerance) * std::max(1.0, check)) {
      throw NumericError(NumericError::Kind::quadrature, "lambda quadrature did not converge",
                         residual);
    }
    return check;
  }
  return lambda;
}

double efficiency_improvement(double epsilon, double alpha, const TuningContext& ctx) {
  const double theta1 = ctx.model().nominal.theta1;
  const double robust = solve_lambda(epsilon, alpha, ctx) * info_number(theta1, epsilon, alpha, ctx);
  const double baseline = solve_lambda(epsilon, 0.0, ctx) * info_number(theta1, epsilon, 0.0, ctx);
  return robust / baseline - 1.0;
}

std::vector<double> AlphaGrid::points() const {
  if (!(step > 0.0)) throw ConfigError("alpha grid step must be positive");
  if (!(alpha_max >= 0.0)) throw ConfigError("alpha grid maximum must be nonnegative");
  std::vector<double> out;
  const auto n = static_cast<long>(std::floor(alpha_max / step + 1e-9));
  for (long j = 0; j <= n; ++j) out.push_back(static_cast<double>(j) * step);
  return out;
}

OracleResult alpha_oracle(double epsilon, const TuningContext& ctx, const AlphaGrid& grid) {
  const double theta1 = ctx.model().nominal.theta1;
  OracleResult result;
  std::optional<double> baseline;
  try {
    baseline = solve_lambda(epsilon, 0.0, ctx) * info_number(theta1, epsilon, 0.0, ctx);
  } catch (const NumericError&) {
  }
  double best = -kInf;
  for (double a : grid.points()) {
    TuningRow row;
    row.alpha = a;
    try {
      row.lambda = solve_lambda(epsilon, a, ctx);
    } catch (const NumericError& e) {
      if (e.kind() == NumericError::Kind::quadrature) throw;
      ++result.skipped;
      continue;
    }
    row.info = info_number(theta1, epsilon, a, ctx);
    row.product = row.lambda * row.info;
    row.efficiency = baseline ? row.product / *baseline - 1.0 : std::nan("");
    if (row.product > best) {
      best = row.product;
      result.alpha_oracle = a;
    }
    result.rows.push_back(row);
  }
  if (result.rows.empty()) {
    throw NumericError(NumericError::Kind::no_positive_root,
                       "no grid point admits a positive lambda");
  }
  return result;
}

DoptMode default_dopt_mode(int K, double gamma) {
  return std::log(gamma) <= K ? DoptMode::simplified : DoptMode::exact;
}

std::string to_string(DoptMode mode) {
  switch (mode) {
    case DoptMode::simplified:
      return "simplified";
    case DoptMode::first_order:
      return "first_order";
    case DoptMode::exact:
      return "exact";
  }
  return "?";
}

double d_opt(double lambda, int K, int m, double gamma, DoptMode mode) {
  if (!(lambda > 0.0)) throw ConfigError("lambda must be positive");
  if (m < 1 || m > K) throw ConfigError("need 1 <= m <= K");
  if (!(gamma > 1.0)) throw ConfigError("gamma must exceed 1");
  double d = 0.0;
  switch (mode) {
    case DoptMode::simplified:
      d = std::log(static_cast<double>(K) / m) / lambda;
      break;
    case DoptMode::first_order:
      d = (std::log(static_cast<double>(K) / m) + std::log(std::log(gamma) / m)) / lambda;
      break;
    case DoptMode::exact: {
      const double l4g = std::log(4.0 * gamma);
      const double root = std::sqrt(m + 0.25 * l4g) - 0.5 * std::sqrt(l4g);
      d = std::log(K / (root * root)) / lambda;
      break;
    }
  }
  return std::max(d, 0.0);
}

double b_gamma(double lambda, int K, double d, double gamma) {
  if (!(lambda > 0.0)) throw ConfigError("lambda must be positive");
  if (!(gamma > 1.0)) throw ConfigError("gamma must exceed 1");
  const double s = std::sqrt(std::log(4.0 * gamma)) + std::sqrt(K * std::exp(-lambda * d));
  return s * s / lambda;
}

double delay_objective(double d, double lambda, int K, int m, double gamma) {
  return b_gamma(lambda, K, d, gamma) / m + d;
}

std::optional<double> arl_lower_bound(double lambda, double b, double d, int K) {
  const double spill = K * std::exp(-lambda * d);
  if (!(lambda * b > spill)) return std::nullopt;
  const double gap = std::sqrt(lambda * b) - std::sqrt(spill);
  return 0.25 * std::exp(gap * gap);
}

TuningReport tuning_report(double epsilon, double alpha, int K, int m, double gamma,
                           const TuningContext& ctx, const AlphaGrid& grid,
                           std::optional<DoptMode> mode) {
  TuningReport r;
  r.lambda = solve_lambda(epsilon, alpha, ctx);
  r.info = info_number(ctx.model().nominal.theta1, epsilon, alpha, ctx);
  r.efficiency = efficiency_improvement(epsilon, alpha, ctx);
  r.alpha_oracle = alpha_oracle(epsilon, ctx, grid).alpha_oracle;
  r.d_mode = mode.value_or(default_dopt_mode(K, gamma));
  r.d_opt = d_opt(r.lambda, K, m, gamma, r.d_mode);
  r.b_gamma = b_gamma(r.lambda, K, r.d_opt, gamma);
  return r;
}

}  // namespace rcusum
