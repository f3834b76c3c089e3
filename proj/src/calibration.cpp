#include "rcusum/calibration.hpp"

#include <cmath>
#include <string>

#include "rcusum/parallel.hpp"
#include "rcusum/rng.hpp"

namespace rcusum {

RunEstimate summarize(const std::vector<RunOutcome>& runs) {
  RunEstimate e;
  e.reps = static_cast<int>(runs.size());
  if (runs.empty()) return e;
  double sum = 0.0;
  for (const auto& r : runs) {
    sum += static_cast<double>(r.n);
    e.censored += r.censored ? 1 : 0;
  }
  e.mean = sum / e.reps;
  double ss = 0.0;
  for (const auto& r : runs) {
    const double dev = static_cast<double>(r.n) - e.mean;
    ss += dev * dev;
  }
  e.std_error = e.reps > 1 ? std::sqrt(ss / (e.reps - 1) / e.reps) : 0.0;
  return e;
}

RunEstimate estimate_runs(const Scheme& scheme, const SourceFactory& factory,
                          const MonteCarloOptions& opts) {
  if (opts.reps < 1) throw ConfigError("reps must be positive");
  if (opts.cap < 1) throw ConfigError("cap must be positive");
  std::vector<RunOutcome> runs(static_cast<std::size_t>(opts.reps));
  parallel_for(runs.size(), opts.threads, [&](std::size_t r) {
    auto source = factory(derive_seed(opts.seed, {r}));
    runs[r] = run_to_alarm(*source, scheme, opts.cap);
  });
  return summarize(runs);
}

RunEstimate estimate_arl(const Scheme& scheme, const GrossErrorModel& model, int K,
                         const MonteCarloOptions& opts) {
  if (opts.reps < 50) throw ConfigError("ARL estimation needs at least 50 replicates");
  ChangeScenario none;
  none.K = K;
  none.m = 1;
  none.nu = kNoChange;
  return estimate_runs(scheme, mixture_factory(model, model, none), opts);
}

namespace {

struct Evaluator {
  const Scheme& family;
  const SourceFactory& factory;
  const CalibrationOptions& opts;
  int evaluations = 0;

  RunEstimate operator()(double b, int reps, double cap_factor) {
    ++evaluations;
    MonteCarloOptions mc;
    mc.reps = reps;
    mc.cap = static_cast<std::int64_t>(std::ceil(cap_factor * opts.gamma));
    mc.seed = opts.seed;
    mc.threads = opts.threads;
    return estimate_runs(with_threshold(family, b), factory, mc);
  }
};

}  // namespace

CalibrationResult calibrate_threshold(const Scheme& family, const SourceFactory& pre_change,
                                      const CalibrationOptions& opts) {
  if (!(opts.rel_tol > 0.0)) throw ConfigError("rel_tol must be positive");
  if (opts.coarse_reps < 1 || opts.full_reps < 1) throw ConfigError("reps must be positive");
  Evaluator eval{family, pre_change, opts};

  if (opts.gamma <= 1.0) {
    CalibrationResult r;
    r.b = 0.0;
    r.arl = eval(0.0, opts.full_reps, opts.cap_factor);
    r.iterations = 0;
    return r;
  }

  // Searching only needs to know on which side of gamma the ARL lies; a cap
  // of 10 gamma biases that decision by < e^-10 for geometric-like run lengths.
  const double search_cap = std::min(opts.cap_factor, 10.0);
  const double gamma = opts.gamma;

  auto bracket = [&](double start, int reps, double& lo, double& hi) {
    double b = start;
    RunEstimate e = eval(b, reps, search_cap);
    if (e.mean >= gamma) {
      hi = b;
      for (int i = 0;; ++i) {
        if (i >= 60) throw NumericError(NumericError::Kind::bracket, "lower bracket not found");
        b /= 2.0;
        if (eval(b, reps, search_cap).mean < gamma) break;
        hi = b;
      }
      lo = b;
    } else {
      lo = b;
      for (int i = 0;; ++i) {
        if (i >= 60) {
          throw NumericError(NumericError::Kind::bracket,
                             "upper bracket not found within 60 doublings", b);
        }
        b *= 2.0;
        if (eval(b, reps, search_cap).mean >= gamma) break;
        lo = b;
      }
      hi = b;
    }
  };

  double lo = 0.0, hi = 0.0;
  bracket(opts.initial_b.value_or(1.0), opts.coarse_reps, lo, hi);

  // Coarse bisection until the bracket is tight relative to the sampling noise.
  int iterations = 0;
  while (hi / lo > 1.02 && iterations < opts.max_iterations) {
    const double mid = std::sqrt(lo * hi);
    ++iterations;
    const RunEstimate e = eval(mid, opts.coarse_reps, search_cap);
    if (e.mean < gamma) lo = mid;
    else hi = mid;
  }

  // Full replicate count: re-establish the bracket, then bisect to tolerance.
  const int reps = opts.full_reps;
  auto accept = [&](const RunEstimate& e) {
    return std::abs(e.mean - gamma) <= std::max(opts.rel_tol * gamma, 2.0 * e.std_error);
  };
  if (eval(lo, reps, search_cap).mean >= gamma || eval(hi, reps, search_cap).mean < gamma) {
    bracket(std::sqrt(lo * hi), reps, lo, hi);
  }
  for (; iterations < opts.max_iterations + 60; ++iterations) {
    const double mid = std::sqrt(lo * hi);
    const RunEstimate e = eval(mid, reps, opts.cap_factor);
    if (accept(e)) return {mid, e, iterations + 1};
    if (e.mean < gamma) lo = mid;
    else hi = mid;
  }
  throw NumericError(NumericError::Kind::bracket,
                     "threshold bisection did not reach tolerance at gamma = " +
                         std::to_string(gamma));
}

}  // namespace rcusum
