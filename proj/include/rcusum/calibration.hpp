#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "rcusum/detectors.hpp"
#include "rcusum/models.hpp"

namespace rcusum {

/// Monte Carlo mean of a stopping time. Censored replicates count as `cap`,
/// so `mean` is a lower bound whenever censored > 0.
struct RunEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  int reps = 0;
  int censored = 0;

  /// More than 20% of replicates hit the cap.
  bool flagged() const { return censored * 5 > reps; }
};

RunEstimate summarize(const std::vector<RunOutcome>& runs);

struct MonteCarloOptions {
  int reps = 1000;
  std::int64_t cap = 250'000;
  std::uint64_t seed = 1;
  unsigned threads = 0;
};

/// Replicate r draws its data from factory(derive_seed(seed, {r})).
RunEstimate estimate_runs(const Scheme& scheme, const SourceFactory& factory,
                          const MonteCarloOptions& opts);

/// ARL to false alarm: no change, K streams i.i.d. from h_theta0. Needs reps >= 50.
RunEstimate estimate_arl(const Scheme& scheme, const GrossErrorModel& model, int K,
                         const MonteCarloOptions& opts);

struct CalibrationOptions {
  double gamma = 5000.0;
  double rel_tol = 0.05;
  int coarse_reps = 200;
  int full_reps = 1000;
  double cap_factor = 50.0;
  std::uint64_t seed = 1;
  unsigned threads = 0;
  /// Starting point of the bracket search, e.g. the threshold whose ARL lower
  /// bound equals gamma. Defaults to 1.
  std::optional<double> initial_b;
  int max_iterations = 60;
};

struct CalibrationResult {
  double b = 0.0;
  RunEstimate arl;
  int iterations = 0;
};

/// Bisection on log b for the threshold whose ARL matches gamma, i.e.
/// |ARL - gamma| <= max(rel_tol gamma, 2 SE) at full_reps. Replicates reuse
/// the same seeds at every b, so the estimate is monotone in b.
CalibrationResult calibrate_threshold(const Scheme& family, const SourceFactory& pre_change,
                                      const CalibrationOptions& opts);

}  // namespace rcusum
