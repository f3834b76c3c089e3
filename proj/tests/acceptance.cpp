// Acceptance suite: one PASS/FAIL line per criterion, tolerances fixed below.
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "rcusum/breakdown.hpp"
#include "rcusum/calibration.hpp"
#include "rcusum/experiments.hpp"
#include "rcusum/profiles.hpp"
#include "rcusum/tuning.hpp"

using namespace rcusum;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

GrossErrorModel contaminated(double eps) {
  GrossErrorModel m;
  m.epsilon = eps;
  return m;
}

Scheme soft(double alpha, double d, double b) {
  return CusumScheme{LocalParams{alpha, {}}, FusionRule{FusionKind::soft_threshold, d, b}};
}

// Collects sub-check outcomes for one criterion and prints them.
class Criterion {
 public:
  Criterion(int id, std::string title) : id_(id), title_(std::move(title)), t0_(Clock::now()) {
    std::printf("--- criterion %d: %s\n", id_, title_.c_str());
    std::fflush(stdout);
  }

  bool check(bool ok, const char* fmt, ...) __attribute__((format(printf, 3, 4))) {
    char buf[512];
    va_list args;
    va_start(args, fmt);
    std::vsnprintf(buf, sizeof buf, fmt, args);
    va_end(args);
    std::printf("    [%s] %s\n", ok ? "ok" : "MISS", buf);
    std::fflush(stdout);
    all_ &= ok;
    return ok;
  }

  void note(const std::string& text) {
    std::printf("    %s\n", text.c_str());
    std::fflush(stdout);
  }

  double elapsed() const { return seconds_since(t0_); }

  bool finish() {
    std::printf("criterion %d: %s (%s, %.1f s)\n", id_, all_ ? "PASS" : "FAIL", title_.c_str(), elapsed());
    std::fflush(stdout);
    return all_;
  }

 private:
  int id_;
  std::string title_;
  Clock::time_point t0_;
  bool all_ = true;
};

bool criterion_lambda() {
  Criterion c(1, "lambda solver");
  QuadratureConfig qc;
  qc.method = QuadratureConfig::Method::monte_carlo;
  qc.n_samples = 1'000'000;
  qc.seed = 2024;
  const TuningContext ctx0(contaminated(0.0), qc);
  const TuningContext ctx(contaminated(0.1), qc);
  const double l00 = solve_lambda(0.0, 0.0, ctx0);
  const double l21 = solve_lambda(0.1, 0.21, ctx);
  const double l0 = solve_lambda(0.1, 0.0, ctx);
  const double l51 = solve_lambda(0.1, 0.51, ctx);
  c.check(l00 == 1.0, "lambda(0,0) = %.17g, expected exactly 1", l00);
  c.check(std::abs(l21 - 1.3681) <= 0.02, "lambda(0.1,0.21) = %.4f, expected 1.3681 +- 0.02", l21);
  c.check(std::abs(l0 - 0.4572) <= 0.02, "lambda(0.1,0) = %.4f, expected 0.4572 +- 0.02", l0);
  c.check(std::abs(l51 - 2.3777) <= 0.03, "lambda(0.1,0.51) = %.4f, expected 2.3777 +- 0.03", l51);
  c.check(c.elapsed() < 60.0, "runtime %.1f s with 1e6 Monte Carlo samples, limit 60 s", c.elapsed());

  const TuningContext quad(contaminated(0.1), QuadratureConfig{});
  c.note("deterministic quadrature for comparison: lambda(0.1,0.21) = " +
         std::to_string(solve_lambda(0.1, 0.21, quad)) + ", lambda(0.1,0) = " +
         std::to_string(solve_lambda(0.1, 0.0, quad)) + ", lambda(0.1,0.51) = " +
         std::to_string(solve_lambda(0.1, 0.51, quad)));
  return c.finish();
}

bool criterion_dopt() {
  Criterion c(2, "simplified d_opt");
  const double lambdas[] = {1.0, 1.3681, 2.3777, 0.4572};
  const double expected[] = {2.3026, 1.6831, 0.9684, 5.0363};
  for (int i = 0; i < 4; ++i) {
    const double d = d_opt(lambdas[i], 100, 10, 5000.0, DoptMode::simplified);
    c.check(std::abs(d - expected[i]) < 5e-5, "d_opt(lambda=%.4f) = %.6f, expected %.4f to 4 decimals",
            lambdas[i], d, expected[i]);
  }
  return c.finish();
}

bool criterion_oracle() {
  Criterion c(3, "oracle alpha and efficiency");
  const AlphaGrid grid;  // 0:0.01:2
  const TuningContext ctx(contaminated(0.1), QuadratureConfig{});
  const OracleResult res = alpha_oracle(0.1, ctx, grid);
  double e_oracle = NAN;
  for (const auto& r : res.rows) {
    if (r.alpha == res.alpha_oracle) e_oracle = r.efficiency;
  }
  c.check(std::abs(res.alpha_oracle - 0.21) <= 0.03 + 1e-9, "alpha_oracle(0.1) = %.2f, expected 0.21 +- 0.03",
          res.alpha_oracle);
  c.check(std::abs(e_oracle - 0.63) <= 0.05, "e(0.1, alpha_oracle) = %.4f, expected 0.63 +- 0.05", e_oracle);
  const double e51 = efficiency_improvement(0.1, 0.51, ctx);
  c.check(std::abs(e51 - 0.55) <= 0.05, "e(0.1, 0.51) = %.4f, expected 0.55 +- 0.05", e51);
  const TuningContext ctx0(contaminated(0.0), QuadratureConfig{});
  const double a0 = alpha_oracle(0.0, ctx0, grid).alpha_oracle;
  c.check(a0 == 0.0, "alpha_oracle(0) = %.2f, expected 0", a0);
  c.check(c.elapsed() < 300.0, "runtime %.1f s, limit 300 s", c.elapsed());
  return c.finish();
}

bool criterion_breakdown() {
  Criterion c(4, "false-alarm breakdown point");
  const NominalFamily fam;
  const double e0 = breakdown_point(fam, 0.0).eps_star;
  const double e51 = breakdown_point(fam, 0.51).eps_star;
  const double e21 = breakdown_point(fam, 0.21).eps_star;
  c.check(e0 == 0.0, "eps*(0) = %g, expected exactly 0", e0);
  c.check(std::abs(e51 - 0.233) <= 0.005, "eps*(0.51) = %.4f, expected 0.233 +- 0.005", e51);
  c.check(std::abs(e21 - 0.217) <= 0.005, "eps*(0.21) = %.4f, expected 0.217 +- 0.005", e21);
  const AlphaOptResult opt = alpha_opt(fam, AlphaGrid{});
  c.check(std::abs(opt.alpha_opt - 0.51) <= 0.02 + 1e-9, "alpha_opt = %.2f (eps* %.5f), expected 0.51 +- 0.02",
          opt.alpha_opt, opt.eps_star);
  c.check(c.elapsed() < 60.0, "runtime %.1f s, limit 60 s", c.elapsed());
  return c.finish();
}

bool criterion_calibration() {
  Criterion c(5, "threshold calibration at gamma 5000");
  const double targets[] = {16.40, 11.69};
  const double epsilons[] = {0.1, 0.0};
  for (int i = 0; i < 2; ++i) {
    const GrossErrorModel model = contaminated(epsilons[i]);
    const TuningContext ctx(model, QuadratureConfig{});
    ChangeScenario none;
    none.K = 100;
    CalibrationOptions opts;
    opts.gamma = 5000.0;
    opts.full_reps = 1000;
    opts.seed = 500 + static_cast<std::uint64_t>(i);
    // Start the search at the first-order threshold for this model.
    opts.initial_b = b_gamma(solve_lambda(model.epsilon, 0.21, ctx), 100, 1.6831, 5000.0);
    const auto t0 = Clock::now();
    const CalibrationResult r = calibrate_threshold(soft(0.21, 1.6831, 1.0), mixture_factory(model, model, none), opts);
    c.check(std::abs(r.b - targets[i]) <= 0.1 * targets[i],
            "epsilon %.1f: b = %.3f (ARL %.0f +- %.0f, %d steps, %.0f s), expected %.2f +- 10%%", epsilons[i], r.b,
            r.arl.mean, r.arl.std_error, r.iterations, seconds_since(t0), targets[i]);
  }
  c.check(c.elapsed() < 1800.0, "runtime %.1f s, limit 1800 s", c.elapsed());
  return c.finish();
}

bool criterion_delay() {
  Criterion c(6, "delay cells at 200 replicates");
  struct Cell {
    const char* name;
    double eps, b, theta, expected, column_max_se;
    std::uint64_t seed;
  };
  const Cell cells[] = {
      {"eps=0.1, m=10, theta=1", 0.1, 16.40, 1.0, 10.1, 0.22, 601},
      {"eps=0, m=10, theta=1", 0.0, 11.69, 1.0, 8.0, 0.06, 602},
      {"eps=0.1, m=10, theta=2", 0.1, 16.40, 2.0, 5.2, 0.15, 603},
  };
  for (const auto& cell : cells) {
    ChangeScenario sc;
    sc.K = 100;
    sc.m = 10;
    sc.nu = 1;
    sc.theta_post = cell.theta;
    MonteCarloOptions mc;
    mc.reps = 200;
    mc.seed = cell.seed;
    const GrossErrorModel model = contaminated(cell.eps);
    const RunEstimate r = simulate_delay(soft(0.21, 1.6831, cell.b), model, model, sc, mc);
    const double tol = 3.0 * cell.column_max_se * std::sqrt(1000.0 / 200.0);
    c.check(std::abs(r.mean - cell.expected) <= tol, "%s: delay %.3f +- %.3f, expected %.1f +- %.3f", cell.name,
            r.mean, r.std_error, cell.expected, tol);
  }
  c.check(c.elapsed() < 1200.0, "runtime %.1f s, limit 1200 s", c.elapsed());
  return c.finish();
}

bool criterion_arl_bound() {
  Criterion c(7, "ARL lower bound");
  struct Config {
    int K;
    double eps, alpha, d, b;
  };
  const Config configs[] = {
      {1, 0.0, 0.0, 0.0, 6.0},      {1, 0.1, 0.21, 0.0, 5.0},      {10, 0.1, 0.51, 0.5, 4.0},
      {10, 0.0, 0.21, 1.0, 6.0},    {100, 0.1, 0.21, 1.6831, 16.40},
  };
  std::uint64_t seed = 700;
  for (const auto& cfg : configs) {
    const GrossErrorModel model = contaminated(cfg.eps);
    const double lambda = solve_lambda(cfg.eps, cfg.alpha, TuningContext(model, QuadratureConfig{}));
    const double spread = cfg.K * std::exp(-lambda * cfg.d);
    const auto bound = arl_lower_bound(lambda, cfg.b, cfg.d, cfg.K);
    MonteCarloOptions mc;
    mc.reps = 300;
    mc.cap = 2'000'000;
    mc.seed = seed++;
    const RunEstimate arl = estimate_arl(soft(cfg.alpha, cfg.d, cfg.b), model, cfg.K, mc);
    const bool valid = lambda * cfg.b > spread && bound.has_value();
    c.check(valid && arl.mean >= *bound - 2.0 * arl.std_error && arl.censored == 0,
            "K=%d eps=%.1f alpha=%.2f d=%.4f b=%.2f: lambda*b=%.2f > K e^{-lambda d}=%.2f, ARL %.1f +- %.1f >= bound %.2f",
            cfg.K, cfg.eps, cfg.alpha, cfg.d, cfg.b, lambda * cfg.b, spread, arl.mean, arl.std_error,
            bound.value_or(NAN));
  }
  return c.finish();
}

double brute_force_cusum(const std::vector<double>& xs) {
  double best = 0.0;
  for (std::size_t nu = 0; nu < xs.size(); ++nu) {
    double s = 0.0;
    for (std::size_t i = nu; i < xs.size(); ++i) s += xs[i] - 0.5;  // log f1/f0 for N(1,1) vs N(0,1)
    best = std::max(best, s);
  }
  return best;
}

bool criterion_oracles() {
  Criterion c(8, "oracle equivalences");
  Engine eng = make_engine(800);
  std::normal_distribution<double> nd(0.3, 1.5);
  std::uniform_int_distribution<int> len(1, 30);
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<double> xs(static_cast<std::size_t>(len(eng)));
    for (auto& x : xs) x = nd(eng);
    DetectorBank bank(LocalParams{0.0, {}}, 1);
    for (double x : xs) bank = bank_update(bank, VectorXd::Constant(1, x));
    worst = std::max(worst, std::abs(bank.w(0) - brute_force_cusum(xs)));
  }
  c.check(worst <= 1e-10, "recursive CUSUM vs max over change times, 1000 sequences: max error %.2e", worst);

  // Scaling every increment by lambda scales the bank by lambda, so
  // N_alpha(b, d) and the scaled rule with (lambda b, lambda d) stop together.
  const GrossErrorModel model = contaminated(0.1);
  const double lambda = solve_lambda(0.1, 0.21, TuningContext(model, QuadratureConfig{}));
  const IncrementKernel kernel(LocalParams{0.21, {}});
  const int K = 20;
  const double d = 1.6831, b = 8.0;
  int mismatched = 0;
  double worst_rel = 0.0;
  for (std::uint64_t run = 0; run < 100; ++run) {
    ChangeScenario sc;
    sc.K = K;
    sc.m = 5;
    sc.nu = 20;
    MixtureSource src(model, model, sc, derive_seed(801, {run}));
    ArrayXd w = ArrayXd::Zero(K), ws = ArrayXd::Zero(K);
    VectorXd obs(K);
    std::int64_t stop = 0, stop_scaled = 0;
    for (std::int64_t n = 1; n <= 100'000 && (stop == 0 || stop_scaled == 0); ++n) {
      src.next(obs);
      const ArrayXd inc = kernel(obs.array());
      w = (w + inc).max(0.0);
      ws = (ws + lambda * inc).max(0.0);
      worst_rel = std::max(worst_rel, ((ws - lambda * w).abs() / (1.0 + ws.abs())).maxCoeff());
      if (stop == 0 && (w - d).max(0.0).sum() >= b) stop = n;
      if (stop_scaled == 0 && (ws - lambda * d).max(0.0).sum() >= lambda * b) stop_scaled = n;
    }
    mismatched += stop != stop_scaled || stop == 0;
  }
  c.check(worst_rel <= 1e-10, "lambda-scaled bank vs lambda * bank, 100 runs: max relative error %.2e", worst_rel);
  c.check(mismatched == 0, "stopping times of the scaled and unscaled rules differ on %d of 100 runs", mismatched);
  return c.finish();
}

bool criterion_contamination_curves() {
  Criterion c(9, "false-alarm robustness to contamination");
  const int K = 100;
  const double gamma = 500.0;
  struct Series {
    const char* name;
    double alpha, d;
  };
  const Series series[] = {{"alpha=0.51", 0.51, 0.9684}, {"alpha=0.21", 0.21, 1.6831}, {"alpha=0", 0.0, 2.3026}};
  const GrossErrorModel clean = contaminated(0.0);
  ChangeScenario none;
  none.K = K;
  std::vector<NamedScheme> schemes;
  std::vector<RunEstimate> anchors;
  for (std::size_t i = 0; i < 3; ++i) {
    CalibrationOptions opts;
    opts.gamma = gamma;
    opts.full_reps = 1000;
    opts.seed = 900 + i;
    const auto r = calibrate_threshold(soft(series[i].alpha, series[i].d, 1.0), mixture_factory(clean, clean, none), opts);
    schemes.push_back({series[i].name, soft(series[i].alpha, series[i].d, r.b)});
    anchors.push_back(r.arl);
    c.note(std::string(series[i].name) + ": b = " + std::to_string(r.b) + ", ARL at epsilon 0 = " +
           std::to_string(r.arl.mean));
  }
  MonteCarloOptions mc;
  mc.reps = 500;
  mc.cap = static_cast<std::int64_t>(50 * gamma);
  mc.seed = 910;
  const auto points = arl_vs_epsilon_curve(schemes, clean, K, default_epsilon_grid(), mc);

  std::vector<double> drop(3), drop_se(3);
  for (std::size_t i = 0; i < 3; ++i) {
    std::vector<ArlPoint> curve;
    for (const auto& p : points) {
      if (p.scheme == series[i].name) curve.push_back(p);
    }
    int rises = 0;
    for (std::size_t j = 1; j < curve.size(); ++j) {
      const double se = std::hypot(curve[j].log_se, curve[j - 1].log_se);
      rises += curve[j].log_arl > curve[j - 1].log_arl + 2.0 * se;
    }
    c.check(rises == 0, "%s: log-ARL from %.3f at 0.02 to %.3f at 0.2, %d significant rises", series[i].name,
            curve.front().log_arl, curve.back().log_arl, rises);
    // Total drop from the calibrated level at epsilon 0 to the end of the grid.
    const double anchor = std::log(anchors[i].mean);
    const double anchor_se = anchors[i].std_error / anchors[i].mean;
    drop[i] = anchor - curve.back().log_arl;
    drop_se[i] = std::hypot(anchor_se, curve.back().log_se);
    c.note(std::string(series[i].name) + ": drop over the grid endpoints = " +
           std::to_string(curve.front().log_arl - curve.back().log_arl));
  }
  c.check(drop[0] < drop[1] + 2.0 * std::hypot(drop_se[0], drop_se[1]),
          "total log-ARL drop alpha=0.51 %.3f +- %.3f < alpha=0.21 %.3f +- %.3f", drop[0], drop_se[0], drop[1],
          drop_se[1]);
  c.check(drop[1] < drop[2] + 2.0 * std::hypot(drop_se[1], drop_se[2]),
          "total log-ARL drop alpha=0.21 %.3f +- %.3f < alpha=0 %.3f +- %.3f", drop[1], drop_se[1], drop[2],
          drop_se[2]);
  return c.finish();
}

bool criterion_profiles() {
  Criterion c(10, "profile monitoring");
  Engine eng = make_engine(1000);
  std::normal_distribution<double> nd(0.0, 5.0);
  double parseval = 0.0, round_trip = 0.0;
  for (int t = 0; t < 50; ++t) {
    VectorXd x(2048);
    for (auto& v : x) v = nd(eng);
    const VectorXd cx = haar_transform(x);
    parseval = std::max(parseval, std::abs(cx.squaredNorm() - x.squaredNorm()) / x.squaredNorm());
    round_trip = std::max(round_trip, (inverse_haar_transform(cx) - x).cwiseAbs().maxCoeff());
  }
  c.check(parseval <= 1e-10, "Parseval relative error %.2e over 50 signals of length 2048", parseval);
  c.check(round_trip <= 1e-10, "inverse round trip max error %.2e", round_trip);

  const ProfilePool pool = synth_pool(ProfileGenerator{}, 1001);
  const StandardizedPool sp = standardize_pool(pool, 512);
  MatrixXd z(512, static_cast<Eigen::Index>(sp.normal.size()));
  for (std::size_t j = 0; j < sp.normal.size(); ++j) z.col(static_cast<Eigen::Index>(j)) = sp.normal[j];
  const VectorXd mean = z.rowwise().mean();
  const VectorXd sd =
      ((z.colwise() - mean).array().square().rowwise().sum() / double(z.cols() - 1)).sqrt();
  c.check(mean.cwiseAbs().maxCoeff() <= 1e-10 && (sd.array() - 1.0).abs().maxCoeff() <= 1e-10,
          "standardized training coefficients: max |mean| %.2e, max |sd - 1| %.2e", mean.cwiseAbs().maxCoeff(),
          (sd.array() - 1.0).abs().maxCoeff());

  CaseStudyOptions opts;
  opts.seed = 1002;
  const std::vector<std::pair<std::string, Scheme>> schemes{
      {"alpha=0.21", soft(0.21, 1.5056, 1.0)}, {"alpha=0.51", soft(0.51, 0.7235, 1.0)}, {"alpha=0", soft(0.0, 3.9357, 1.0)}};
  const auto rows = case_study_run(pool, schemes, opts);
  for (const auto& r : rows) {
    c.check(std::abs(r.arl.mean - opts.target_arl) <= 0.1 * opts.target_arl,
            "%s: b = %.2f, ARL %.1f +- %.1f (target 300), delay %.2f +- %.2f", r.scheme.c_str(), r.b, r.arl.mean,
            r.arl.std_error, r.delay.mean, r.delay.std_error);
  }
  for (int i : {0, 1}) {
    const double se = std::hypot(rows[i].delay.std_error, rows[2].delay.std_error);
    c.check(rows[i].delay.mean < rows[2].delay.mean + 2.0 * se, "%s delay %.2f < alpha=0 delay %.2f (2 SE = %.2f)",
            rows[i].scheme.c_str(), rows[i].delay.mean, rows[2].delay.mean, 2.0 * se);
  }
  return c.finish();
}

}  // namespace

int main() {
  const std::vector<std::function<bool()>> criteria{
      criterion_lambda,   criterion_dopt,      criterion_oracle,    criterion_breakdown,
      criterion_calibration, criterion_delay,  criterion_arl_bound, criterion_oracles,
      criterion_contamination_curves, criterion_profiles};
  std::vector<bool> results;
  for (const auto& run : criteria) {
    try {
      results.push_back(run());
    } catch (const std::exception& e) {
      std::printf("    exception: %s\n", e.what());
      std::printf("criterion %zu: FAIL (exception)\n", results.size() + 1);
      results.push_back(false);
    }
  }
  std::printf("\nsummary\n");
  int failed = 0;
  for (std::size_t i = 0; i < results.size(); ++i) {
    std::printf("criterion %zu: %s\n", i + 1, results[i] ? "PASS" : "FAIL");
    failed += !results[i];
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(results.size()) - failed, results.size());
  return failed == 0 ? 0 : 1;
}
