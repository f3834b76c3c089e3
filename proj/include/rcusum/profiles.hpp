#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "rcusum/calibration.hpp"
#include "rcusum/detectors.hpp"

namespace rcusum {

/// Orthonormal discrete Haar transform of a length-2^J signal. Output order:
/// the scaling coefficient, then detail coefficients from the coarsest level
/// (one coefficient) to the finest (2^(J-1) coefficients).
VectorXd haar_transform(const VectorXd& signal);
VectorXd inverse_haar_transform(const VectorXd& coefficients);

struct BaselineStats {
  VectorXd mu_hat;
  VectorXd sigma_hat;
  int p = 0;
};

/// Per-coefficient mean and sd (n - 1 denominator) of the first p Haar
/// coefficients over an in-control training pool.
BaselineStats fit_baseline(const std::vector<VectorXd>& training, int p);

/// z-scores of the first p coefficients.
VectorXd retain_and_standardize(const VectorXd& coefficients, int p, const BaselineStats& stats);

enum class ProfileGroup { normal, fault1, fault2 };

struct ProfilePool {
  std::vector<VectorXd> normal;
  std::vector<VectorXd> fault1;
  std::vector<VectorXd> fault2;

  const std::vector<VectorXd>& group(ProfileGroup g) const;
};

/// Synthetic forming-process profiles. Each signal is a smooth press-force
/// curve plus white noise. A fault adds a localized deviation built from the
/// Haar details of levels [fault_level_lo, fault_level_hi] whose support lies
/// inside the fault's window; fault2 uses `fault_ratio` times the magnitude
/// of fault1 and its own window, with a per-signal amplitude jitter.
struct ProfileGenerator {
  int log2_length = 11;
  double noise_sd = 1.0;
  double peak = 40.0;
  double fault1_shift = 1.5;  // per affected coefficient, in noise sd
  double fault_ratio = 5.0;
  double jitter_sd = 0.1;
  int fault_level_lo = 3;
  int fault_level_hi = 8;
  double fault1_window_start = 0.25;  // fractions of the signal length
  double fault2_window_start = 0.625;
  double window_width = 0.125;
  int n_normal = 307;
  int n_fault1 = 69;
  int n_fault2 = 69;

  void validate() const;
  VectorXd baseline() const;
  /// Deviation of a fault group relative to the baseline, before jitter.
  VectorXd deviation(ProfileGroup g) const;
};

ProfilePool synth_pool(const ProfileGenerator& gen, std::uint64_t seed);

/// One signal per row, comma separated.
void write_signals(std::ostream& out, const std::vector<VectorXd>& signals);
std::vector<VectorXd> read_signals(std::istream& in);

/// Draws group `first` with probability p_first, otherwise `second`.
struct PoolMixture {
  double p_first = 0.9;
  ProfileGroup first = ProfileGroup::normal;
  ProfileGroup second = ProfileGroup::fault2;
};

/// Emits standardized coefficient vectors of profiles drawn uniformly, with
/// replacement, from the groups of a mixture.
class PoolSource final : public ObservationSource {
 public:
  PoolSource(const std::vector<VectorXd>* first, const std::vector<VectorXd>* second,
             double p_first, std::uint64_t seed);

  Eigen::Index dimension() const override;
  void next(Eigen::Ref<VectorXd> out) override;

 private:
  const std::vector<VectorXd>* first_;
  const std::vector<VectorXd>* second_;
  double p_first_;
  Engine engine_;
};

struct StandardizedPool {
  std::vector<VectorXd> normal;
  std::vector<VectorXd> fault1;
  std::vector<VectorXd> fault2;
  BaselineStats stats;

  const std::vector<VectorXd>& group(ProfileGroup g) const;
};

/// Baseline fitted on the normal group; every group standardized with it.
StandardizedPool standardize_pool(const ProfilePool& pool, int p);

/// Mixture source factory over a standardized pool, which must outlive it.
SourceFactory pool_factory(const StandardizedPool& pool, const PoolMixture& mix);

struct CaseStudyOptions {
  int p = 512;
  double target_arl = 300.0;
  PoolMixture mix_pre{0.9, ProfileGroup::normal, ProfileGroup::fault2};
  PoolMixture mix_post{0.9, ProfileGroup::fault1, ProfileGroup::fault2};
  int reps = 100;
  int calibration_reps = 1000;
  double rel_tol = 0.05;
  std::uint64_t seed = 1;
  unsigned threads = 0;
};

struct CaseStudyRow {
  std::string scheme;
  double b = 0.0;
  RunEstimate arl;
  RunEstimate delay;
};

/// Calibrates each scheme's threshold to target_arl under mix_pre, then
/// estimates the delay under mix_post with the change at time one.
std::vector<CaseStudyRow> case_study_run(const ProfilePool& pool,
                                         const std::vector<std::pair<std::string, Scheme>>& schemes,
                                         const CaseStudyOptions& opts);

/// Columns: scheme,b,arl,arl_se,delay,delay_se,reps,censored
void write_case_study_csv(std::ostream& out, const std::vector<CaseStudyRow>& rows);

}  // namespace rcusum
