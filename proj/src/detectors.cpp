#include "rcusum/detectors.hpp"

#include <algorithm>
#include <sstream>

namespace rcusum {

void LocalParams::validate() const {
  if (!(alpha >= 0.0)) throw ConfigError("alpha must be nonnegative");
  fam.validate();
}

IncrementKernel::IncrementKernel(const LocalParams& p)
    : log_branch_(p.alpha == 0.0), theta0_(p.fam.theta0), theta1_(p.fam.theta1) {
  p.validate();
  const double var = p.fam.sigma * p.fam.sigma;
  if (log_branch_) {
    slope_ = (p.fam.theta1 - p.fam.theta0) / var;
    midpoint_ = 0.5 * (p.fam.theta0 + p.fam.theta1);
  } else {
    scale_ = std::pow(2.0 * kPi * var, -0.5 * p.alpha) / p.alpha;
    rate_ = p.alpha / (2.0 * var);
  }
}

ArrayXd IncrementKernel::operator()(const ArrayXd& x) const {
  if (log_branch_) return slope_ * (x - midpoint_);
  return scale_ * ((-rate_ * (x - theta1_).square()).exp() - (-rate_ * (x - theta0_).square()).exp());
}

double IncrementKernel::lower_bound() const { return log_branch_ ? -kInf : -scale_; }

void bank_update_inplace(DetectorBank& bank, const IncrementKernel& kernel, const VectorXd& obs) {
  if (obs.size() != bank.w.size()) {
    throw ConfigError("observation has " + std::to_string(obs.size()) + " entries, bank has " +
                      std::to_string(bank.w.size()));
  }
  bank.w = (bank.w.array() + kernel(obs.array())).max(0.0).matrix();
  ++bank.n;
}

DetectorBank bank_update(DetectorBank bank, const VectorXd& obs) {
  bank_update_inplace(bank, IncrementKernel(bank.params), obs);
  return bank;
}

void FusionRule::validate() const {
  if (!(b >= 0.0)) throw ConfigError("threshold b must be nonnegative");
  if (!(d >= 0.0)) throw ConfigError("soft threshold d must be nonnegative");
}

double fusion_statistic(const VectorXd& w, FusionKind kind, double d) {
  switch (kind) {
    case FusionKind::soft_threshold:
      return (w.array() - d).max(0.0).sum();
    case FusionKind::max:
      return w.size() == 0 ? 0.0 : w.maxCoeff();
    case FusionKind::sum:
      return w.sum();
  }
  return 0.0;
}

StepDecision fuse(const DetectorBank& bank, const FusionRule& rule) {
  const double stat = fusion_statistic(bank.w, rule.kind, rule.d);
  return {stat, stat >= rule.b};
}

void GlrParams::validate() const {
  if (!(p0 > 0.0 && p0 < 1.0)) throw ConfigError("p0 must lie in (0, 1)");
  if (window < 1) throw ConfigError("GLR window must be positive");
}

double GlrParams::mixing_constant() const {
  switch (variant) {
    case GlrVariant::xie_siegmund:
      return 1.0;
    case GlrVariant::chan2:
      return 2.0 * (std::sqrt(2.0) - 1.0);
    case GlrVariant::chan1:
      return 0.64;
  }
  return 1.0;
}

double log_mixture_term(double u, double p0, double c) {
  if (u > 30.0) return u + std::log(c * p0 + (1.0 - p0) * std::exp(-u));
  return std::log1p(p0 * (c * std::exp(u) - 1.0));
}

ArrayXd log_mixture_term(const ArrayXd& u, double p0, double c) {
  ArrayXd out(u.size());
  for (Eigen::Index j = 0; j < u.size(); ++j) out(j) = log_mixture_term(u(j), p0, c);
  return out;
}

double u_plus(const MatrixXd& prefix, Eigen::Index k, std::int64_t n, std::int64_t i) {
  if (i < 0 || i >= n) throw ContractViolation("u_plus requires 0 <= i < n");
  if (n >= prefix.cols()) throw ContractViolation("u_plus: prefix sums do not reach time n");
  const double s = prefix(k, n) - prefix(k, i);
  return std::max(0.0, s / std::sqrt(static_cast<double>(n - i)));
}

namespace {

// Max over i in [n - L, n) of sum_k term(U+_{k,n,i}); columns of `window`
// run oldest to newest. Walks backwards accumulating suffix sums.
double windowed_glr(const MatrixXd& window, Eigen::Index cols, Eigen::Index newest,
                    const GlrParams& gp, VectorXd& suffix) {
  const double c = gp.mixing_constant();
  const Eigen::Index capacity = window.cols();
  suffix.setZero(window.rows());
  double best = -kInf;
  for (Eigen::Index len = 1; len <= cols; ++len) {
    const Eigen::Index col = ((newest - len + 1) % capacity + capacity) % capacity;
    suffix += window.col(col);
    const ArrayXd u = (suffix.array() / std::sqrt(static_cast<double>(len))).max(0.0);
    best = std::max(best, log_mixture_term(0.5 * u.square(), gp.p0, c).sum());
  }
  return best;
}

}  // namespace

double glr_statistic(const MatrixXd& window, const GlrParams& gp) {
  gp.validate();
  if (gp.variant == GlrVariant::chan1) {
    throw ContractViolation("chan1 is recursive in W*; use chan1_statistic");
  }
  if (window.cols() == 0) throw ContractViolation("glr_statistic needs at least one observation");
  VectorXd suffix;
  return windowed_glr(window, window.cols(), window.cols() - 1, gp, suffix);
}

StepDecision glr_step(const MatrixXd& window, const GlrParams& gp, double b) {
  const double stat = glr_statistic(window, gp);
  return {stat, stat >= b};
}

double chan1_statistic(const VectorXd& wstar, double p0) {
  const double c = 0.64;
  double s = 0.0;
  for (Eigen::Index k = 0; k < wstar.size(); ++k) s += log_mixture_term(0.5 * wstar(k), p0, c);
  return s;
}

StepDecision chan1_step(const VectorXd& wstar, double p0, double b) {
  const double stat = chan1_statistic(wstar, p0);
  return {stat, stat >= b};
}

double threshold(const Scheme& s) {
  return std::visit(
      [](const auto& v) -> double {
        if constexpr (std::is_same_v<std::decay_t<decltype(v)>, CusumScheme>) return v.rule.b;
        else return v.b;
      },
      s);
}

Scheme with_threshold(Scheme s, double b) {
  std::visit(
      [b](auto& v) {
        if constexpr (std::is_same_v<std::decay_t<decltype(v)>, CusumScheme>) v.rule.b = b;
        else v.b = b;
      },
      s);
  return s;
}

std::string describe(const Scheme& s) {
  std::ostringstream os;
  os.precision(6);
  if (const auto* c = std::get_if<CusumScheme>(&s)) {
    switch (c->rule.kind) {
      case FusionKind::soft_threshold:
        os << "soft(alpha=" << c->local.alpha << ";d=" << c->rule.d << ";b=" << c->rule.b << ")";
        break;
      case FusionKind::max:
        os << "max(alpha=" << c->local.alpha << ";b=" << c->rule.b << ")";
        break;
      case FusionKind::sum:
        os << "sum(alpha=" << c->local.alpha << ";b=" << c->rule.b << ")";
        break;
    }
  } else {
    const auto& g = std::get<GlrScheme>(s);
    const char* name = g.glr.variant == GlrVariant::xie_siegmund ? "xs"
                       : g.glr.variant == GlrVariant::chan2      ? "chan2"
                                                                 : "chan1";
    os << name << "(p0=" << g.glr.p0 << ";b=" << g.b << ")";
  }
  return os.str();
}

namespace {

class CusumDetector final : public Detector {
 public:
  CusumDetector(const CusumScheme& s, int K)
      : scheme_(s), kernel_(s.local), bank_(s.local, K) {
    scheme_.rule.validate();
  }

  StepDecision update(const VectorXd& obs) override {
    bank_update_inplace(bank_, kernel_, obs);
    return fuse(bank_, scheme_.rule);
  }
  std::int64_t time() const override { return bank_.n; }

 private:
  CusumScheme scheme_;
  IncrementKernel kernel_;
  DetectorBank bank_;
};

class Chan1Detector final : public Detector {
 public:
  Chan1Detector(const GlrScheme& s, int K)
      : scheme_(s), kernel_(LocalParams{0.0, s.fam}), bank_(LocalParams{0.0, s.fam}, K) {
    scheme_.glr.validate();
  }

  StepDecision update(const VectorXd& obs) override {
    bank_update_inplace(bank_, kernel_, obs);
    return chan1_step(bank_.w, scheme_.glr.p0, scheme_.b);
  }
  std::int64_t time() const override { return bank_.n; }

 private:
  GlrScheme scheme_;
  IncrementKernel kernel_;
  DetectorBank bank_;
};

class WindowGlrDetector final : public Detector {
 public:
  WindowGlrDetector(const GlrScheme& s, int K)
      : scheme_(s), ring_(MatrixXd::Zero(K, s.glr.window)) {
    scheme_.glr.validate();
  }

  StepDecision update(const VectorXd& obs) override {
    if (obs.size() != ring_.rows()) throw ConfigError("observation length does not match K");
    newest_ = (newest_ + 1) % ring_.cols();
    ring_.col(newest_) = obs;
    ++n_;
    const Eigen::Index filled = std::min<std::int64_t>(n_, ring_.cols());
    const double stat = windowed_glr(ring_, filled, newest_, scheme_.glr, suffix_);
    return {stat, stat >= scheme_.b};
  }
  std::int64_t time() const override { return n_; }

 private:
  GlrScheme scheme_;
  MatrixXd ring_;
  VectorXd suffix_;
  Eigen::Index newest_ = -1;
  std::int64_t n_ = 0;
};

}  // namespace

std::unique_ptr<Detector> make_detector(const Scheme& scheme, int K) {
  if (const auto* c = std::get_if<CusumScheme>(&scheme)) {
    return std::make_unique<CusumDetector>(*c, K);
  }
  const auto& g = std::get<GlrScheme>(scheme);
  if (g.glr.variant == GlrVariant::chan1) return std::make_unique<Chan1Detector>(g, K);
  return std::make_unique<WindowGlrDetector>(g, K);
}

RunOutcome run_to_alarm(ObservationSource& source, const Scheme& scheme, std::int64_t cap) {
  if (cap < 1) throw ContractViolation("run_to_alarm: cap must be positive");
  const auto K = static_cast<int>(source.dimension());
  auto detector = make_detector(scheme, K);
  VectorXd obs(K);
  for (std::int64_t n = 1; n <= cap; ++n) {
    source.next(obs);
    if (detector->update(obs).alarmed) return {n, false};
  }
  return {cap, true};
}

}  // namespace rcusum
