#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "rcusum/profiles.hpp"

using namespace rcusum;

namespace {

VectorXd random_signal(Eigen::Index n, std::uint64_t seed) {
  Engine e = make_engine(seed);
  std::normal_distribution<double> z;
  VectorXd v(n);
  for (auto& x : v) x = z(e);
  return v;
}

Scheme soft(double alpha, double d) {
  return CusumScheme{LocalParams{alpha, {}}, FusionRule{FusionKind::soft_threshold, d, 1.0}};
}

}  // namespace

TEST_CASE("haar transform on length two") {
  VectorXd x(2);
  x << 3.0, 1.0;
  const VectorXd c = haar_transform(x);
  CHECK(c(0) == doctest::Approx(4.0 / std::sqrt(2.0)));
  CHECK(c(1) == doctest::Approx(2.0 / std::sqrt(2.0)));
}

TEST_CASE("haar transform of a constant keeps only the scaling coefficient") {
  const VectorXd c = haar_transform(VectorXd::Constant(16, 2.5));
  CHECK(c(0) == doctest::Approx(2.5 * 4.0));
  CHECK(c.tail(15).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("haar coefficient ordering is coarse to fine") {
  // A step at the midpoint lives entirely in the coarsest detail.
  VectorXd x(8);
  x << 1, 1, 1, 1, -1, -1, -1, -1;
  const VectorXd c = haar_transform(x);
  CHECK(std::abs(c(0)) < 1e-12);
  CHECK(c(1) == doctest::Approx(std::sqrt(8.0)));
  CHECK(c.tail(6).cwiseAbs().maxCoeff() < 1e-12);

  // A single spike at sample 5 touches the finest detail with index 2.
  x.setZero();
  x(5) = 1.0;
  const VectorXd s = haar_transform(x);
  CHECK(s(4 + 2) == doctest::Approx(-1.0 / std::sqrt(2.0)));
  CHECK(s(4 + 0) == 0.0);
  CHECK(s(4 + 1) == 0.0);
  CHECK(s(4 + 3) == 0.0);
}

TEST_CASE("haar rejects non-dyadic lengths") {
  CHECK_THROWS_AS(haar_transform(VectorXd::Ones(6)), ConfigError);
  CHECK_THROWS_AS(haar_transform(VectorXd::Ones(1)), ConfigError);
  CHECK_THROWS_AS(inverse_haar_transform(VectorXd::Ones(12)), ConfigError);
}

TEST_CASE("haar is orthonormal and linear") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Eigen::Index n = Eigen::Index{1} << (1 + seed % 11);
    const VectorXd x = random_signal(n, seed);
    const VectorXd y = random_signal(n, seed + 1000);
    const VectorXd cx = haar_transform(x);
    CHECK(std::abs(cx.squaredNorm() - x.squaredNorm()) < 1e-10 * std::max(1.0, x.squaredNorm()));
    CHECK((inverse_haar_transform(cx) - x).cwiseAbs().maxCoeff() < 1e-10);
    const VectorXd combo = haar_transform(2.5 * x - 0.75 * y);
    CHECK((combo - (2.5 * cx - 0.75 * haar_transform(y))).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("fit_baseline hand example") {
  VectorXd a(2), b(2);
  a << 0, 0;
  b << 2, 0;
  const BaselineStats s = fit_baseline({a, b}, 1);
  REQUIRE(s.p == 1);
  CHECK(s.mu_hat(0) == doctest::Approx(std::sqrt(2.0) / 2.0));
  CHECK(s.sigma_hat(0) == doctest::Approx(1.0));
}

TEST_CASE("fit_baseline errors") {
  const VectorXd x = random_signal(8, 3);
  CHECK_THROWS_AS(fit_baseline({x}, 4), ConfigError);
  CHECK_THROWS_AS(fit_baseline({x, x}, 9), ConfigError);
  try {
    fit_baseline({x, x}, 4);
    FAIL("identical signals should be degenerate");
  } catch (const NumericError& e) {
    CHECK(e.detail() == 0.0);
    CHECK(std::string(e.what()).find("coefficient 0") != std::string::npos);
  }
  VectorXd u(2), v(2);
  u << 1, 0;
  v << 2, 0;
  VectorXd w(2);
  w << 0, 0;
  CHECK_NOTHROW(fit_baseline({u, v, w}, 2));
  // Only the detail coefficient is constant across this pool.
  VectorXd p(2), q(2);
  p << 1, 1;
  q << 2, 2;
  try {
    fit_baseline({p, q}, 2);
    FAIL("constant detail should be degenerate");
  } catch (const NumericError& e) {
    CHECK(e.detail() == 1.0);
    CHECK(std::string(e.what()).find("coefficient 1") != std::string::npos);
  }
}

TEST_CASE("standardized training coefficients have mean 0 and sd 1") {
  std::vector<VectorXd> pool;
  for (std::uint64_t i = 0; i < 40; ++i) {
    pool.push_back(random_signal(64, i).array() * 3.0 + double(i % 5));
  }
  const int p = 32;
  const BaselineStats s = fit_baseline(pool, p);
  MatrixXd z(p, pool.size());
  for (std::size_t j = 0; j < pool.size(); ++j) {
    z.col(Eigen::Index(j)) = retain_and_standardize(haar_transform(pool[j]), p, s);
  }
  const VectorXd mean = z.rowwise().mean();
  const VectorXd sd = ((z.colwise() - mean).array().square().rowwise().sum() / double(pool.size() - 1)).sqrt();
  CHECK(mean.cwiseAbs().maxCoeff() < 1e-10);
  CHECK((sd.array() - 1.0).abs().maxCoeff() < 1e-10);
}

TEST_CASE("identity stats leave coefficients unchanged") {
  BaselineStats s;
  s.p = 4;
  s.mu_hat = VectorXd::Zero(4);
  s.sigma_hat = VectorXd::Ones(4);
  const VectorXd c = random_signal(8, 9);
  CHECK((retain_and_standardize(c, 4, s) - c.head(4)).cwiseAbs().maxCoeff() == 0.0);
  s.sigma_hat(2) = 0.0;
  CHECK_THROWS_AS(retain_and_standardize(c, 4, s), NumericError);
  CHECK_THROWS_AS(retain_and_standardize(c, 5, s), ConfigError);
}

TEST_CASE("synthetic generator structure") {
  ProfileGenerator gen;
  const Eigen::Index n = 2048;
  const VectorXd d1 = gen.deviation(ProfileGroup::fault1);
  const VectorXd d2 = gen.deviation(ProfileGroup::fault2);
  REQUIRE(d1.size() == n);
  CHECK(gen.deviation(ProfileGroup::normal).isZero());

  // Sparse support in both domains.
  const VectorXd c1 = haar_transform(d1);
  int nonzero = 0;
  for (auto v : c1) nonzero += std::abs(v) > 1e-12;
  CHECK(nonzero == 63);
  CHECK((c1.array().abs() > 1e-12).head(512).count() == 63);
  CHECK(d1.head(512).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(d1.tail(n - 768).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(d2.head(1280).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(d2.tail(n - 1536).cwiseAbs().maxCoeff() < 1e-12);

  CHECK(d2.norm() == doctest::Approx(5.0 * d1.norm()));

  ProfileGenerator bad = gen;
  bad.fault_level_hi = 11;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = gen;
  bad.n_fault1 = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("synthetic pool matches its construction") {
  ProfileGenerator gen;
  const ProfilePool pool = synth_pool(gen, 11);
  REQUIRE(pool.normal.size() == 307);
  REQUIRE(pool.fault1.size() == 69);
  REQUIRE(pool.fault2.size() == 69);

  auto mean_of = [](const std::vector<VectorXd>& g) {
    VectorXd m = VectorXd::Zero(g.front().size());
    for (const auto& s : g) m += s;
    return VectorXd(m / double(g.size()));
  };
  const VectorXd base = gen.baseline();
  CHECK((mean_of(pool.normal) - base).cwiseAbs().maxCoeff() < 5.5 / std::sqrt(307.0));

  const VectorXd off = mean_of(pool.fault1) - base - gen.deviation(ProfileGroup::fault1);
  CHECK(off.cwiseAbs().maxCoeff() < 5.5 / std::sqrt(69.0) + 0.1);
  const VectorXd resid1 = mean_of(pool.fault1) - base;
  CHECK(resid1.head(512).cwiseAbs().maxCoeff() < 5.5 / std::sqrt(69.0));
  CHECK(resid1.tail(2048 - 768).cwiseAbs().maxCoeff() < 5.5 / std::sqrt(69.0));

  const ProfilePool again = synth_pool(gen, 11);
  CHECK(again.normal[17] == pool.normal[17]);
  CHECK(again.fault2[68] == pool.fault2[68]);
  CHECK_FALSE(synth_pool(gen, 12).normal[0] == pool.normal[0]);
}

TEST_CASE("signals round trip through CSV") {
  std::vector<VectorXd> sig{random_signal(8, 1), random_signal(8, 2)};
  std::stringstream ss;
  write_signals(ss, sig);
  const auto back = read_signals(ss);
  REQUIRE(back.size() == 2);
  CHECK(back[0] == sig[0]);
  CHECK(back[1] == sig[1]);
  std::stringstream bad("1,2,x\n");
  CHECK_THROWS_AS(read_signals(bad), ConfigError);
}

TEST_CASE("pool source draws from the configured groups") {
  ProfileGenerator gen;
  gen.log2_length = 6;
  gen.fault_level_hi = 4;
  const StandardizedPool sp = standardize_pool(synth_pool(gen, 5), 32);
  auto factory = pool_factory(sp, PoolMixture{0.7, ProfileGroup::fault1, ProfileGroup::fault2});
  auto src = factory(42);
  REQUIRE(src->dimension() == 32);
  VectorXd v(32);
  int from_first = 0;
  const int draws = 4000;
  for (int i = 0; i < draws; ++i) {
    src->next(v);
    bool in1 = false, in2 = false;
    for (const auto& s : sp.fault1) in1 |= s == v;
    for (const auto& s : sp.fault2) in2 |= s == v;
    REQUIRE((in1 || in2));
    from_first += in1;
  }
  CHECK(std::abs(from_first / double(draws) - 0.7) < 4.0 * std::sqrt(0.21 / draws));

  StandardizedPool empty = sp;
  empty.fault2.clear();
  CHECK_THROWS_AS(pool_factory(empty, PoolMixture{0.9, ProfileGroup::normal, ProfileGroup::fault2}),
                  ConfigError);
  CHECK_NOTHROW(pool_factory(empty, PoolMixture{1.0, ProfileGroup::normal, ProfileGroup::fault2}));
}

TEST_CASE("case study: robust schemes beat the classical CUSUM at matched ARL") {
  const ProfilePool pool = synth_pool(ProfileGenerator{}, 7);
  CaseStudyOptions opts;
  opts.p = 128;
  opts.target_arl = 300.0;
  opts.reps = 100;
  opts.calibration_reps = 300;
  opts.rel_tol = 0.05;
  opts.seed = 3;
  const std::vector<std::pair<std::string, Scheme>> schemes{
      {"N0.21", soft(0.21, 1.5056)}, {"N0.51", soft(0.51, 0.7235)}, {"N0", soft(0.0, 3.9357)}};
  const auto rows = case_study_run(pool, schemes, opts);
  REQUIRE(rows.size() == 3);
  for (const auto& r : rows) {
    CHECK(std::abs(r.arl.mean - 300.0) <= 0.1 * 300.0);
    CHECK(r.delay.censored == 0);
  }
  for (int i : {0, 1}) {
    const double se = std::hypot(rows[i].delay.std_error, rows[2].delay.std_error);
    CHECK(rows[i].delay.mean < rows[2].delay.mean + 2.0 * se);
    CHECK(rows[i].delay.mean < rows[2].delay.mean);
  }

  // Removing the fault2 contamination after the change can only help.
  CaseStudyOptions pure = opts;
  pure.mix_post = PoolMixture{1.0, ProfileGroup::fault1, ProfileGroup::fault2};
  const auto clean = case_study_run(pool, {schemes[0]}, pure);
  CHECK(clean[0].b == rows[0].b);
  CHECK(clean[0].delay.mean <=
        rows[0].delay.mean + 2.0 * std::hypot(clean[0].delay.std_error, rows[0].delay.std_error));

  // Same seed, same report.
  const auto again = case_study_run(pool, {schemes[0]}, opts);
  CHECK(again[0].b == rows[0].b);
  CHECK(again[0].delay.mean == rows[0].delay.mean);

  std::ostringstream csv;
  write_case_study_csv(csv, rows);
  CHECK(csv.str().rfind("scheme,b,arl,arl_se,delay,delay_se,reps,censored\n", 0) == 0);
}
