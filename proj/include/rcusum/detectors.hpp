#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <string>
#include <type_traits>
#include <variant>

#include "rcusum/core.hpp"
#include "rcusum/models.hpp"

namespace rcusum {

/// Robustness parameter alpha of the local statistic; alpha = 0 is the
/// classical log-likelihood-ratio CUSUM.
struct LocalParams {
  double alpha = 0.0;
  NominalFamily fam;

  void validate() const;
};

/// Per-observation increment ([f1(x)]^a - [f0(x)]^a) / a, or log(f1/f0) at a = 0.
/// Precomputes the constants so the array form costs two exp() per entry.
class IncrementKernel {
 public:
  explicit IncrementKernel(const LocalParams& p);

  template <typename Scalar>
    requires(!std::is_base_of_v<Eigen::EigenBase<Scalar>, Scalar>)
  Scalar operator()(Scalar x) const {
    using std::exp;
    if (log_branch_) return Scalar(slope_) * (x - Scalar(midpoint_));
    const Scalar d1 = x - Scalar(theta1_);
    const Scalar d0 = x - Scalar(theta0_);
    return Scalar(scale_) * (exp(Scalar(-rate_) * d1 * d1) - exp(Scalar(-rate_) * d0 * d0));
  }

  ArrayXd operator()(const ArrayXd& x) const;

  /// Infimum over x: -(2 pi sigma^2)^(-alpha/2) / alpha, or -inf at alpha = 0.
  double lower_bound() const;

 private:
  bool log_branch_;
  double theta0_, theta1_;
  double slope_ = 0.0, midpoint_ = 0.0;  // log branch
  double scale_ = 0.0, rate_ = 0.0;      // power branch
};

template <typename Scalar>
Scalar lalpha_increment(Scalar x, const LocalParams& p) {
  return IncrementKernel(p)(x);
}

/// Per-stream L_alpha-CUSUM statistics W_{alpha,k,n}.
struct DetectorBank {
  LocalParams params;
  VectorXd w;
  std::int64_t n = 0;

  DetectorBank(LocalParams p, int K) : params(p), w(VectorXd::Zero(K)) { params.validate(); }
  Eigen::Index size() const { return w.size(); }
};

/// w <- max(w + increment(obs), 0), n <- n + 1.
DetectorBank bank_update(DetectorBank bank, const VectorXd& obs);
void bank_update_inplace(DetectorBank& bank, const IncrementKernel& kernel, const VectorXd& obs);

enum class FusionKind { soft_threshold, max, sum };

struct FusionRule {
  FusionKind kind = FusionKind::soft_threshold;
  double d = 0.0;
  double b = 1.0;

  void validate() const;
};

struct StepDecision {
  double global_stat = 0.0;
  bool alarmed = false;
};

double fusion_statistic(const VectorXd& w, FusionKind kind, double d);
StepDecision fuse(const DetectorBank& bank, const FusionRule& rule);

// Generalized-likelihood-ratio comparison schemes.

enum class GlrVariant { xie_siegmund, chan2, chan1 };

struct GlrParams {
  double p0 = 0.1;
  int window = 200;
  GlrVariant variant = GlrVariant::xie_siegmund;

  void validate() const;
  /// Multiplier c in log(1 - p0 + c p0 exp(u)).
  double mixing_constant() const;
};

/// log(1 - p0 + c p0 e^u) without overflow for large u.
double log_mixture_term(double u, double p0, double c);
ArrayXd log_mixture_term(const ArrayXd& u, double p0, double c);

/// U+_{k,n,i} = max(0, (S_n - S_i) / sqrt(n - i)) from prefix sums, where
/// prefix(k, j) = sum of the first j observations of stream k.
double u_plus(const MatrixXd& prefix, Eigen::Index k, std::int64_t n, std::int64_t i);

/// Window-limited GLR statistic (xie_siegmund or chan2); `window` holds the
/// last L observations per stream, oldest first, and i ranges over n-L..n-1.
double glr_statistic(const MatrixXd& window, const GlrParams& gp);
StepDecision glr_step(const MatrixXd& window, const GlrParams& gp, double b);

/// Chan's first scheme from the classical CUSUM bank W*.
double chan1_statistic(const VectorXd& wstar, double p0);
StepDecision chan1_step(const VectorXd& wstar, double p0, double b);

// Fully parameterized schemes.

struct CusumScheme {
  LocalParams local;
  FusionRule rule;
};

struct GlrScheme {
  GlrParams glr;
  double b = 1.0;
  NominalFamily fam;  // W* for chan1
};

using Scheme = std::variant<CusumScheme, GlrScheme>;

double threshold(const Scheme& s);
Scheme with_threshold(Scheme s, double b);
std::string describe(const Scheme& s);

/// Stateful global monitor for one replicate.
class Detector {
 public:
  virtual ~Detector() = default;
  virtual StepDecision update(const VectorXd& obs) = 0;
  virtual std::int64_t time() const = 0;
};

std::unique_ptr<Detector> make_detector(const Scheme& scheme, int K);

struct RunOutcome {
  std::int64_t n = 0;
  bool censored = false;
};

/// Stopping time of `scheme` on `source`, or {cap, censored} if no alarm by cap.
RunOutcome run_to_alarm(ObservationSource& source, const Scheme& scheme, std::int64_t cap);

}  // namespace rcusum
