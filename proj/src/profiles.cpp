#include "rcusum/profiles.hpp"

#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "rcusum/rng.hpp"

namespace rcusum {

namespace {

bool is_power_of_two(Eigen::Index n) { return n >= 1 && (n & (n - 1)) == 0; }

void require_dyadic(Eigen::Index n) {
  if (n < 2 || !is_power_of_two(n)) {
    throw ConfigError("Haar transform needs a power-of-two length >= 2, got " + std::to_string(n));
  }
}

}  // namespace

VectorXd haar_transform(const VectorXd& signal) {
  require_dyadic(signal.size());
  VectorXd out = signal;
  VectorXd tmp(signal.size());
  const double r = 1.0 / std::sqrt(2.0);
  for (Eigen::Index len = signal.size(); len > 1; len /= 2) {
    const Eigen::Index half = len / 2;
    for (Eigen::Index i = 0; i < half; ++i) {
      tmp(i) = r * (out(2 * i) + out(2 * i + 1));
      tmp(half + i) = r * (out(2 * i) - out(2 * i + 1));
    }
    out.head(len) = tmp.head(len);
  }
  return out;
}

VectorXd inverse_haar_transform(const VectorXd& coefficients) {
  require_dyadic(coefficients.size());
  VectorXd out = coefficients;
  VectorXd tmp(coefficients.size());
  const double r = 1.0 / std::sqrt(2.0);
  for (Eigen::Index len = 2; len <= coefficients.size(); len *= 2) {
    const Eigen::Index half = len / 2;
    for (Eigen::Index i = 0; i < half; ++i) {
      tmp(2 * i) = r * (out(i) + out(half + i));
      tmp(2 * i + 1) = r * (out(i) - out(half + i));
    }
    out.head(len) = tmp.head(len);
  }
  return out;
}

BaselineStats fit_baseline(const std::vector<VectorXd>& training, int p) {
  if (training.size() < 2) throw ConfigError("baseline needs at least two training signals");
  const auto n = static_cast<Eigen::Index>(training.size());
  if (p < 1 || p > training.front().size()) {
    throw ConfigError("retained coefficient count p must lie in [1, signal length]");
  }
  MatrixXd c(p, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    if (training[j].size() != training.front().size()) {
      throw ConfigError("training signals differ in length");
    }
    c.col(j) = haar_transform(training[j]).head(p);
  }
  BaselineStats s;
  s.p = p;
  s.mu_hat = c.rowwise().mean();
  s.sigma_hat = ((c.colwise() - s.mu_hat).array().square().rowwise().sum() / double(n - 1)).sqrt();
  for (int k = 0; k < p; ++k) {
    if (!(s.sigma_hat(k) > 0.0)) {
      throw NumericError(NumericError::Kind::other,
                         "degenerate coefficient " + std::to_string(k) +
                             ": zero variance across the training pool",
                         k);
    }
  }
  return s;
}

VectorXd retain_and_standardize(const VectorXd& coefficients, int p, const BaselineStats& stats) {
  if (p < 1 || p > coefficients.size() || p > stats.p) {
    throw ConfigError("retained coefficient count p exceeds the available coefficients");
  }
  for (int k = 0; k < p; ++k) {
    if (!(stats.sigma_hat(k) > 0.0)) {
      throw NumericError(NumericError::Kind::other,
                         "degenerate coefficient " + std::to_string(k), k);
    }
  }
  return ((coefficients.head(p) - stats.mu_hat.head(p)).array() / stats.sigma_hat.head(p).array())
      .matrix();
}

const std::vector<VectorXd>& ProfilePool::group(ProfileGroup g) const {
  switch (g) {
    case ProfileGroup::normal: return normal;
    case ProfileGroup::fault1: return fault1;
    case ProfileGroup::fault2: return fault2;
  }
  throw ContractViolation("unknown profile group");
}

const std::vector<VectorXd>& StandardizedPool::group(ProfileGroup g) const {
  switch (g) {
    case ProfileGroup::normal: return normal;
    case ProfileGroup::fault1: return fault1;
    case ProfileGroup::fault2: return fault2;
  }
  throw ContractViolation("unknown profile group");
}

void ProfileGenerator::validate() const {
  if (log2_length < 1 || log2_length > 24) throw ConfigError("log2_length must lie in [1, 24]");
  if (!(noise_sd > 0.0)) throw ConfigError("noise_sd must be positive");
  if (!(fault_ratio > 0.0)) throw ConfigError("fault_ratio must be positive");
  if (!(jitter_sd >= 0.0)) throw ConfigError("jitter_sd must be nonnegative");
  if (fault_level_lo < 0 || fault_level_hi < fault_level_lo || fault_level_hi >= log2_length) {
    throw ConfigError("fault levels must satisfy 0 <= lo <= hi < log2_length");
  }
  for (double s : {fault1_window_start, fault2_window_start}) {
    if (!(s >= 0.0 && s + window_width <= 1.0)) {
      throw ConfigError("fault windows must lie inside the signal");
    }
  }
  if (!(window_width > 0.0)) throw ConfigError("window_width must be positive");
  if (n_normal < 2 || n_fault1 < 1 || n_fault2 < 1) {
    throw ConfigError("pool counts must be positive (at least two normal signals)");
  }
}

VectorXd ProfileGenerator::baseline() const {
  const Eigen::Index n = Eigen::Index{1} << log2_length;
  const ArrayXd t = (ArrayXd::LinSpaced(n, 0.0, double(n - 1)) + 0.5) / double(n);
  // A forming-press tonnage shape: a main stroke with a shoulder on the way up.
  const ArrayXd main = (-((t - 0.55) / 0.14).square()).exp();
  const ArrayXd shoulder = (-((t - 0.3) / 0.05).square()).exp();
  return (peak * (main + 0.35 * shoulder)).matrix();
}

VectorXd ProfileGenerator::deviation(ProfileGroup g) const {
  const Eigen::Index n = Eigen::Index{1} << log2_length;
  VectorXd c = VectorXd::Zero(n);
  if (g == ProfileGroup::normal) return c;
  const bool first = g == ProfileGroup::fault1;
  const double start = first ? fault1_window_start : fault2_window_start;
  const double shift = (first ? 1.0 : fault_ratio) * fault1_shift * noise_sd;
  for (int level = fault_level_lo; level <= fault_level_hi; ++level) {
    const Eigen::Index count = Eigen::Index{1} << level;
    const auto lo = static_cast<Eigen::Index>(std::ceil(start * count - 1e-9));
    const auto hi = static_cast<Eigen::Index>(std::floor((start + window_width) * count + 1e-9));
    for (Eigen::Index j = lo; j < hi; ++j) c(count + j) = shift;
  }
  return inverse_haar_transform(c);
}

ProfilePool synth_pool(const ProfileGenerator& gen, std::uint64_t seed) {
  gen.validate();
  const VectorXd base = gen.baseline();
  ProfilePool pool;
  auto make = [&](std::vector<VectorXd>& out, int count, ProfileGroup g, std::uint64_t stream) {
    Engine engine = make_engine(derive_seed(seed, {stream}));
    std::normal_distribution<double> normal(0.0, 1.0);
    const VectorXd dev = gen.deviation(g);
    out.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
      VectorXd s = base;
      if (g != ProfileGroup::normal) s += (1.0 + gen.jitter_sd * normal(engine)) * dev;
      for (auto& v : s) v += gen.noise_sd * normal(engine);
      out.push_back(std::move(s));
    }
  };
  make(pool.normal, gen.n_normal, ProfileGroup::normal, 0);
  make(pool.fault1, gen.n_fault1, ProfileGroup::fault1, 1);
  make(pool.fault2, gen.n_fault2, ProfileGroup::fault2, 2);
  return pool;
}

void write_signals(std::ostream& out, const std::vector<VectorXd>& signals) {
  out.precision(17);
  for (const auto& s : signals) {
    for (Eigen::Index i = 0; i < s.size(); ++i) out << (i ? "," : "") << s(i);
    out << '\n';
  }
}

std::vector<VectorXd> read_signals(std::istream& in) {
  std::vector<VectorXd> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::vector<double> values;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        values.push_back(std::stod(cell, &used));
        if (cell.find_first_not_of(" \t\r", used) != std::string::npos) throw std::invalid_argument(cell);
      } catch (const std::exception&) {
        throw ConfigError("signal file line " + std::to_string(line_no) + ": bad number '" + cell + "'");
      }
    }
    out.push_back(Eigen::Map<VectorXd>(values.data(), static_cast<Eigen::Index>(values.size())));
  }
  return out;
}

PoolSource::PoolSource(const std::vector<VectorXd>* first, const std::vector<VectorXd>* second,
                       double p_first, std::uint64_t seed)
    : first_(first), second_(second), p_first_(p_first), engine_(make_engine(seed)) {
  if (!(p_first >= 0.0 && p_first <= 1.0)) throw ConfigError("mixture probability must lie in [0, 1]");
  if ((p_first > 0.0 && first_->empty()) || (p_first < 1.0 && second_->empty())) {
    throw ConfigError("mixture references an empty profile group");
  }
}

Eigen::Index PoolSource::dimension() const {
  return (first_->empty() ? second_ : first_)->front().size();
}

void PoolSource::next(Eigen::Ref<VectorXd> out) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const auto& group = u(engine_) < p_first_ ? *first_ : *second_;
  std::uniform_int_distribution<std::size_t> pick(0, group.size() - 1);
  out = group[pick(engine_)];
}

StandardizedPool standardize_pool(const ProfilePool& pool, int p) {
  StandardizedPool out;
  out.stats = fit_baseline(pool.normal, p);
  auto convert = [&](const std::vector<VectorXd>& in, std::vector<VectorXd>& dst) {
    dst.reserve(in.size());
    for (const auto& s : in) dst.push_back(retain_and_standardize(haar_transform(s), p, out.stats));
  };
  convert(pool.normal, out.normal);
  convert(pool.fault1, out.fault1);
  convert(pool.fault2, out.fault2);
  return out;
}

SourceFactory pool_factory(const StandardizedPool& pool, const PoolMixture& mix) {
  const auto* first = &pool.group(mix.first);
  const auto* second = &pool.group(mix.second);
  // Validate once up front rather than inside every replicate.
  PoolSource probe(first, second, mix.p_first, 0);
  return [first, second, p = mix.p_first](std::uint64_t seed) {
    return std::make_unique<PoolSource>(first, second, p, seed);
  };
}

std::vector<CaseStudyRow> case_study_run(const ProfilePool& pool,
                                         const std::vector<std::pair<std::string, Scheme>>& schemes,
                                         const CaseStudyOptions& opts) {
  if (!(opts.target_arl > 1.0)) throw ConfigError("target ARL must exceed 1");
  const StandardizedPool std_pool = standardize_pool(pool, opts.p);
  const SourceFactory pre = pool_factory(std_pool, opts.mix_pre);
  const SourceFactory post = pool_factory(std_pool, opts.mix_post);

  std::vector<CaseStudyRow> rows;
  for (std::size_t i = 0; i < schemes.size(); ++i) {
    CalibrationOptions cal;
    cal.gamma = opts.target_arl;
    cal.rel_tol = opts.rel_tol;
    cal.full_reps = opts.calibration_reps;
    cal.coarse_reps = std::min(200, opts.calibration_reps);
    cal.seed = derive_seed(opts.seed, {i, 0});
    cal.threads = opts.threads;
    const CalibrationResult c = calibrate_threshold(schemes[i].second, pre, cal);

    MonteCarloOptions mc;
    mc.reps = opts.reps;
    mc.cap = static_cast<std::int64_t>(std::ceil(50.0 * opts.target_arl));
    mc.seed = derive_seed(opts.seed, {i, 1});
    mc.threads = opts.threads;
    CaseStudyRow row;
    row.scheme = schemes[i].first;
    row.b = c.b;
    row.arl = c.arl;
    row.delay = estimate_runs(with_threshold(schemes[i].second, c.b), post, mc);
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_case_study_csv(std::ostream& out, const std::vector<CaseStudyRow>& rows) {
  out << "scheme,b,arl,arl_se,delay,delay_se,reps,censored\n";
  for (const auto& r : rows) {
    out << r.scheme << ',' << r.b << ',' << r.arl.mean << ',' << r.arl.std_error << ','
        << r.delay.mean << ',' << r.delay.std_error << ',' << r.delay.reps << ','
        << r.delay.censored << '\n';
  }
}

}  // namespace rcusum
