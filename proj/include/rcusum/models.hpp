#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <variant>
#include <vector>

#include "rcusum/core.hpp"
#include "rcusum/rng.hpp"

namespace rcusum {

/// Gaussian location family N(theta, sigma^2) with the pre-change location
/// theta0 and the smallest post-change location of interest theta1.
struct NominalFamily {
  double theta0 = 0.0;
  double theta1 = 1.0;
  double sigma = 1.0;

  void validate() const;
};

struct GaussianOutlier {
  double mean = 0.0;
  double sd = 3.0;
};

struct PointMassOutlier {
  double location = 0.0;
};

/// Outlier density given on a grid, linearly interpolated and zero outside.
class TableOutlier {
 public:
  TableOutlier(std::vector<double> grid, std::vector<double> density);

  double pdf(double x) const;
  double cdf(double x) const;
  double quantile(double u) const;
  double mean() const;
  double variance() const;

  const std::vector<double>& grid() const { return grid_; }
  const std::vector<double>& density() const { return density_; }

 private:
  std::vector<double> grid_;
  std::vector<double> density_;
  std::vector<double> cumulative_;  // trapezoid CDF at grid points
};

using OutlierSpec = std::variant<GaussianOutlier, PointMassOutlier, TableOutlier>;

/// h_theta(x) = (1 - epsilon) f_theta(x) + epsilon g(x).
struct GrossErrorModel {
  double epsilon = 0.0;
  NominalFamily nominal;
  OutlierSpec outlier = GaussianOutlier{};

  void validate() const;
};

inline constexpr std::int64_t kNoChange = std::numeric_limits<std::int64_t>::max();

/// m of K streams (the first m) shift to theta_post from time nu onwards.
struct ChangeScenario {
  int K = 1;
  int m = 1;
  std::int64_t nu = kNoChange;
  double theta_post = 1.0;

  bool has_change() const { return nu != kNoChange; }
  void validate(const NominalFamily& fam) const;
};

template <typename Scalar>
Scalar gaussian_pdf(Scalar x, Scalar mean, Scalar sd) {
  using std::exp;
  using std::sqrt;
  const Scalar z = (x - mean) / sd;
  return exp(Scalar(-0.5) * z * z) / (sd * Scalar(sqrt(2.0 * kPi)));
}

double nominal_pdf(double x, double theta, const NominalFamily& fam);

/// Throws NoDensityError for a point mass.
double outlier_pdf(double x, const OutlierSpec& g);
double outlier_mean(const OutlierSpec& g);
double outlier_variance(const OutlierSpec& g);
double draw_outlier(Engine& engine, const OutlierSpec& g);

/// Throws NoDensityError when the outlier is a point mass.
double mixture_pdf(double x, double theta, const GrossErrorModel& model);

/// Produces one K-vector of observations per call, at times n = 1, 2, ...
class ObservationSource {
 public:
  virtual ~ObservationSource() = default;
  virtual Eigen::Index dimension() const = 0;
  virtual void next(Eigen::Ref<VectorXd> out) = 0;
};

using SourceFactory = std::function<std::unique_ptr<ObservationSource>(std::uint64_t seed)>;

/// Draws from h_theta0 under `pre` before the change (and for unaffected
/// streams), from h_theta_post under `post` for affected streams afterwards.
class MixtureSource final : public ObservationSource {
 public:
  MixtureSource(GrossErrorModel pre, GrossErrorModel post, ChangeScenario scenario,
                std::uint64_t seed);

  Eigen::Index dimension() const override { return scenario_.K; }
  void next(Eigen::Ref<VectorXd> out) override;

 private:
  void fill(const GrossErrorModel& model, double theta, Eigen::Ref<VectorXd> out);

  GrossErrorModel pre_;
  GrossErrorModel post_;
  ChangeScenario scenario_;
  Engine engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
  std::int64_t n_ = 0;
};

SourceFactory mixture_factory(GrossErrorModel pre, GrossErrorModel post, ChangeScenario scenario);

/// K x horizon matrix; column j holds time n = j + 1.
MatrixXd sample_matrix(const GrossErrorModel& model, const ChangeScenario& scenario,
                       std::int64_t horizon, std::uint64_t seed);

}  // namespace rcusum
