#include <doctest.h>

#include <cmath>

#include "rcusum/breakdown.hpp"
#include "rcusum/quadrature.hpp"

using namespace rcusum;

namespace {

// Density power divergence by direct integration of its defining integrand.
double dpd_quadrature(const NominalFamily& f, double a) {
  auto g = [&](double x) {
    const double f0 = gaussian_pdf(x, f.theta0, f.sigma);
    const double f1 = gaussian_pdf(x, f.theta1, f.sigma);
    return std::pow(f1, 1 + a) - (1 + 1 / a) * f0 * std::pow(f1, a) + std::pow(f0, 1 + a) / a;
  };
  return integrate(g, f.theta0 - 40 * f.sigma, f.theta1 + 40 * f.sigma, 1e-14).value;
}

double grid_sup(const NominalFamily& f, double a, double step) {
  const IncrementKernel k(LocalParams{a, f});
  double best = -kInf;
  for (double x = f.theta0 - 10 * f.sigma; x <= f.theta1 + 10 * f.sigma; x += step) {
    best = std::max(best, k(x));
  }
  return best;
}

}  // namespace

TEST_CASE("density power divergence") {
  const NominalFamily f;
  CHECK(density_power_divergence(f, 0.0) == doctest::Approx(0.5));
  CHECK(density_power_divergence(NominalFamily{0.0, 1e-9, 1.0}, 0.51) < 1e-15);
  for (double a : {0.21, 0.51, 1.0, 2.0}) {
    CHECK(std::abs(density_power_divergence(f, a) - dpd_quadrature(f, a)) < 1e-6);
  }
  const NominalFamily g{-0.5, 2.0, 1.7};
  CHECK(std::abs(density_power_divergence(g, 0.51) - dpd_quadrature(g, 0.51)) < 1e-6);
  CHECK(density_power_divergence(NominalFamily{0.0, 1e-6, 1.0}, 1e-8) ==
        doctest::Approx(density_power_divergence(NominalFamily{0.0, 1e-6, 1.0}, 0.0)).epsilon(1e-5));
}

TEST_CASE("m_alpha") {
  const NominalFamily f;
  CHECK(m_alpha(f, 0.0) == kInf);

  const double m1 = m_alpha(f, 1.0);
  CHECK(m1 <= 1.0 / std::sqrt(2 * kPi));
  CHECK(m1 == doctest::Approx(grid_sup(f, 1.0, 1e-4)).epsilon(1e-8));

  for (double a : {0.05, 0.21, 0.51, 1.3}) {
    const double m = m_alpha(f, a);
    CHECK(m >= grid_sup(f, a, 1e-2));
    CHECK(m <= 2.0 * std::pow(2 * kPi, -a / 2) / a);
    const IncrementKernel k(LocalParams{a, f});
    CHECK(k(m_alpha_argmax(f, a)) == doctest::Approx(m));
  }
}

TEST_CASE("breakdown_point") {
  const NominalFamily f;
  CHECK(breakdown_point(f, 0.0).eps_star == 0.0);
  CHECK(std::abs(breakdown_point(f, 0.51).eps_star - 0.233) <= 0.005);
  CHECK(std::abs(breakdown_point(f, 0.21).eps_star - 0.217) <= 0.005);

  for (double a = 0.01; a <= 2.0; a += 0.07) {
    const auto r = breakdown_point(f, a);
    CHECK(r.eps_star > 0.0);
    CHECK(r.eps_star < 1.0);
    CHECK(r.eps_star ==
          doctest::Approx(r.d_alpha / (r.d_alpha + (1 + a) * r.m_alpha)).epsilon(1e-14));
  }
}

TEST_CASE("worst-case drift changes sign at the breakdown point") {
  const NominalFamily f;
  for (double a : {0.1, 0.21, 0.51, 1.0}) {
    const auto r = breakdown_point(f, a);
    CHECK(worst_case_drift(r.eps_star + 1e-3, r) > 0.0);
    CHECK(worst_case_drift(r.eps_star - 1e-3, r) < 0.0);
  }
}

TEST_CASE("alpha_opt") {
  const NominalFamily f;
  const auto r = alpha_opt(f, {});
  REQUIRE(r.curve.size() == 201);
  CHECK(r.curve.front().eps_star == 0.0);

  // Brute-force oracle over the same grid with a fine-step supremum.
  double best = -1.0, arg = 0.0;
  for (const auto& row : r.curve) {
    if (row.alpha == 0.0) continue;
    const double m = grid_sup(f, row.alpha, 1e-4);
    const double d = density_power_divergence(f, row.alpha);
    const double e = d / (d + (1 + row.alpha) * m);
    if (e > best + 1e-9) {
      best = e;
      arg = row.alpha;
    }
  }
  CHECK(r.alpha_opt == doctest::Approx(arg).epsilon(0.011));
  CHECK(r.eps_star == doctest::Approx(best).epsilon(1e-6));

  // Increases then decreases.
  bool after = false;
  for (std::size_t i = 1; i < r.curve.size(); ++i) {
    if (r.curve[i - 1].alpha >= r.alpha_opt - 1e-12) after = true;
    if (after) CHECK(r.curve[i].eps_star <= r.curve[i - 1].eps_star);
    else CHECK(r.curve[i].eps_star > r.curve[i - 1].eps_star);
  }
}

TEST_CASE("alpha_opt is location-scale equivariant") {
  const auto base = alpha_opt(NominalFamily{0.0, 1.0, 1.0}, {});
  const auto scaled = alpha_opt(NominalFamily{0.0, 3.0, 3.0}, {});
  const auto shifted = alpha_opt(NominalFamily{2.0, 3.0, 1.0}, {});
  CHECK(scaled.alpha_opt == base.alpha_opt);
  CHECK(shifted.alpha_opt == base.alpha_opt);
}
