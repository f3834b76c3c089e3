#include "rcusum/models.hpp"

#include <algorithm>
#include <string>

namespace rcusum {

void NominalFamily::validate() const {
  if (!(sigma > 0.0)) throw ConfigError("sigma must be positive");
  if (!(theta1 > theta0)) throw ConfigError("theta1 must exceed theta0");
}

TableOutlier::TableOutlier(std::vector<double> grid, std::vector<double> density)
    : grid_(std::move(grid)), density_(std::move(density)) {
  if (grid_.size() < 2 || grid_.size() != density_.size()) {
    throw ConfigError("custom_table needs at least two (x, density) pairs");
  }
  cumulative_.assign(grid_.size(), 0.0);
  for (std::size_t i = 0; i < grid_.size(); ++i) {
    if (!(density_[i] >= 0.0)) throw ConfigError("custom_table densities must be nonnegative");
    if (i > 0) {
      if (!(grid_[i] > grid_[i - 1])) throw ConfigError("custom_table grid must increase");
      cumulative_[i] =
          cumulative_[i - 1] + 0.5 * (density_[i] + density_[i - 1]) * (grid_[i] - grid_[i - 1]);
    }
  }
  if (std::abs(cumulative_.back() - 1.0) > 1e-6) {
    throw ConfigError("custom_table density integrates to " + std::to_string(cumulative_.back()) +
                      ", not 1");
  }
}

double TableOutlier::pdf(double x) const {
  if (x < grid_.front() || x > grid_.back()) return 0.0;
  auto it = std::upper_bound(grid_.begin(), grid_.end(), x);
  if (it == grid_.end()) return density_.back();
  const auto j = static_cast<std::size_t>(it - grid_.begin()) - 1;
  const double t = (x - grid_[j]) / (grid_[j + 1] - grid_[j]);
  return (1.0 - t) * density_[j] + t * density_[j + 1];
}

double TableOutlier::cdf(double x) const {
  if (x <= grid_.front()) return 0.0;
  if (x >= grid_.back()) return 1.0;
  auto it = std::upper_bound(grid_.begin(), grid_.end(), x);
  const auto j = static_cast<std::size_t>(it - grid_.begin()) - 1;
  const double dx = x - grid_[j];
  const double slope = (density_[j + 1] - density_[j]) / (grid_[j + 1] - grid_[j]);
  return (cumulative_[j] + density_[j] * dx + 0.5 * slope * dx * dx) / cumulative_.back();
}

double TableOutlier::quantile(double u) const {
  const double target = std::clamp(u, 0.0, 1.0) * cumulative_.back();
  auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), target);
  if (it == cumulative_.end()) return grid_.back();
  const auto j = static_cast<std::size_t>(std::max<std::ptrdiff_t>(it - cumulative_.begin() - 1, 0));
  const double width = grid_[j + 1] - grid_[j];
  const double p = density_[j];
  const double slope = (density_[j + 1] - p) / width;
  const double r = target - cumulative_[j];
  double dx;
  if (std::abs(slope) * width < 1e-12 * std::max(p, 1e-300)) {
    dx = p > 0.0 ? r / p : 0.0;
  } else {
    // p dx + slope dx^2 / 2 = r, root in [0, width]
    const double disc = std::max(p * p + 2.0 * slope * r, 0.0);
    dx = 2.0 * r / (p + std::sqrt(disc));
  }
  return grid_[j] + std::clamp(dx, 0.0, width);
}

double TableOutlier::mean() const {
  // Exact for piecewise-linear densities: integrate x (a + s (x - x0)) per segment.
  double m = 0.0;
  for (std::size_t j = 0; j + 1 < grid_.size(); ++j) {
    const double x0 = grid_[j], x1 = grid_[j + 1], h = x1 - x0;
    const double p0 = density_[j], p1 = density_[j + 1];
    m += h * (p0 * (2.0 * x0 + x1) + p1 * (x0 + 2.0 * x1)) / 6.0;
  }
  return m / cumulative_.back();
}

double TableOutlier::variance() const {
  double m2 = 0.0;
  for (std::size_t j = 0; j + 1 < grid_.size(); ++j) {
    const double x0 = grid_[j], x1 = grid_[j + 1], h = x1 - x0;
    const double p0 = density_[j], p1 = density_[j + 1];
    // int_0^h (x0 + t)^2 (p0 + (p1 - p0) t / h) dt
    const double s = (p1 - p0) / h;
    m2 += p0 * (x0 * x0 * h + x0 * h * h + h * h * h / 3.0) +
          s * (x0 * x0 * h * h / 2.0 + 2.0 * x0 * h * h * h / 3.0 + h * h * h * h / 4.0);
  }
  const double mu = mean();
  return m2 / cumulative_.back() - mu * mu;
}

void GrossErrorModel::validate() const {
  nominal.validate();
  if (!(epsilon >= 0.0 && epsilon < 1.0)) throw ConfigError("epsilon must lie in [0, 1)");
  if (const auto* g = std::get_if<GaussianOutlier>(&outlier); g && !(g->sd > 0.0)) {
    throw ConfigError("outlier sd must be positive");
  }
}

void ChangeScenario::validate(const NominalFamily& fam) const {
  if (K < 1) throw ConfigError("K must be positive");
  if (m < 1 || m > K) throw ConfigError("m must lie in [1, K]");
  if (nu < 1) throw ConfigError("nu must be positive");
  if (has_change() && theta_post < fam.theta1) {
    throw ConfigError("theta_post must be at least theta1");
  }
}

double nominal_pdf(double x, double theta, const NominalFamily& fam) {
  return gaussian_pdf(x, theta, fam.sigma);
}

double outlier_pdf(double x, const OutlierSpec& g) {
  return std::visit(
      [x](const auto& spec) -> double {
        using T = std::decay_t<decltype(spec)>;
        if constexpr (std::is_same_v<T, GaussianOutlier>) {
          return gaussian_pdf(x, spec.mean, spec.sd);
        } else if constexpr (std::is_same_v<T, PointMassOutlier>) {
          throw NoDensityError("point-mass outlier has no density");
        } else {
          return spec.pdf(x);
        }
      },
      g);
}

double outlier_mean(const OutlierSpec& g) {
  return std::visit(
      [](const auto& spec) -> double {
        using T = std::decay_t<decltype(spec)>;
        if constexpr (std::is_same_v<T, GaussianOutlier>) return spec.mean;
        else if constexpr (std::is_same_v<T, PointMassOutlier>) return spec.location;
        else return spec.mean();
      },
      g);
}

double outlier_variance(const OutlierSpec& g) {
  return std::visit(
      [](const auto& spec) -> double {
        using T = std::decay_t<decltype(spec)>;
        if constexpr (std::is_same_v<T, GaussianOutlier>) return spec.sd * spec.sd;
        else if constexpr (std::is_same_v<T, PointMassOutlier>) return 0.0;
        else return spec.variance();
      },
      g);
}

double draw_outlier(Engine& engine, const OutlierSpec& g) {
  return std::visit(
      [&engine](const auto& spec) -> double {
        using T = std::decay_t<decltype(spec)>;
        if constexpr (std::is_same_v<T, GaussianOutlier>) {
          return std::normal_distribution<double>(spec.mean, spec.sd)(engine);
        } else if constexpr (std::is_same_v<T, PointMassOutlier>) {
          return spec.location;
        } else {
          return spec.quantile(std::uniform_real_distribution<double>(0.0, 1.0)(engine));
        }
      },
      g);
}

double mixture_pdf(double x, double theta, const GrossErrorModel& model) {
  if (std::holds_alternative<PointMassOutlier>(model.outlier)) {
    throw NoDensityError("mixture with a point-mass outlier has no density");
  }
  const double f = nominal_pdf(x, theta, model.nominal);
  if (model.epsilon == 0.0) return f;
  return (1.0 - model.epsilon) * f + model.epsilon * outlier_pdf(x, model.outlier);
}

MixtureSource::MixtureSource(GrossErrorModel pre, GrossErrorModel post, ChangeScenario scenario,
                             std::uint64_t seed)
    : pre_(std::move(pre)),
      post_(std::move(post)),
      scenario_(scenario),
      engine_(make_engine(seed)) {
  pre_.validate();
  post_.validate();
  scenario_.validate(pre_.nominal);
}

void MixtureSource::fill(const GrossErrorModel& model, double theta, Eigen::Ref<VectorXd> out) {
  const double sigma = model.nominal.sigma;
  for (Eigen::Index i = 0; i < out.size(); ++i) out(i) = theta + sigma * normal_(engine_);
  if (model.epsilon == 0.0) return;
  for (Eigen::Index i = 0; i < out.size(); ++i) {
    if (uniform_(engine_) < model.epsilon) out(i) = draw_outlier(engine_, model.outlier);
  }
}

void MixtureSource::next(Eigen::Ref<VectorXd> out) {
  if (out.size() != scenario_.K) throw ConfigError("observation buffer has wrong length");
  ++n_;
  const int affected = n_ >= scenario_.nu ? scenario_.m : 0;
  if (affected > 0) fill(post_, scenario_.theta_post, out.head(affected));
  fill(pre_, pre_.nominal.theta0, out.tail(scenario_.K - affected));
}

SourceFactory mixture_factory(GrossErrorModel pre, GrossErrorModel post, ChangeScenario scenario) {
  return [pre = std::move(pre), post = std::move(post), scenario](std::uint64_t seed) {
    return std::make_unique<MixtureSource>(pre, post, scenario, seed);
  };
}

MatrixXd sample_matrix(const GrossErrorModel& model, const ChangeScenario& scenario,
                       std::int64_t horizon, std::uint64_t seed) {
  if (horizon < 1) throw ConfigError("horizon must be positive");
  MixtureSource source(model, model, scenario, seed);
  MatrixXd out(scenario.K, horizon);
  for (std::int64_t j = 0; j < horizon; ++j) source.next(out.col(j));
  return out;
}

}  // namespace rcusum
