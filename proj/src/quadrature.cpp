#include "rcusum/quadrature.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <queue>
#include <vector>

#include <Eigen/Eigenvalues>

namespace rcusum {

namespace {

// Symmetric tridiagonal Jacobi matrix with zero diagonal; mu0 is the total
// mass of the weight function.
WeightedNodes golub_welsch(const VectorXd& offdiag, double mu0) {
  const Eigen::Index n = offdiag.size() + 1;
  MatrixXd jacobi = MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i + 1 < n; ++i) {
    jacobi(i, i + 1) = offdiag(i);
    jacobi(i + 1, i) = offdiag(i);
  }
  Eigen::SelfAdjointEigenSolver<MatrixXd> solver(jacobi);
  WeightedNodes rule;
  rule.x = solver.eigenvalues().array();
  rule.w = mu0 * solver.eigenvectors().row(0).transpose().array().square();
  return rule;
}

}  // namespace

WeightedNodes gauss_hermite(int n) {
  if (n < 1) throw ContractViolation("gauss_hermite: n must be positive");
  VectorXd off(n - 1);
  for (int i = 1; i < n; ++i) off(i - 1) = std::sqrt(i / 2.0);
  return golub_welsch(off, std::sqrt(kPi));
}

WeightedNodes gauss_legendre(int n) {
  if (n < 1) throw ContractViolation("gauss_legendre: n must be positive");
  VectorXd off(n - 1);
  for (int i = 1; i < n; ++i) off(i - 1) = i / std::sqrt(4.0 * i * i - 1.0);
  return golub_welsch(off, 2.0);
}

WeightedNodes normal_rule(double mean, double sd, int n) {
  WeightedNodes gh = gauss_hermite(n);
  gh.x = mean + std::sqrt(2.0) * sd * gh.x;
  gh.w /= std::sqrt(kPi);
  return gh;
}

WeightedNodes normal_panel_rule(double mean, double sd, int panels, int per_panel,
                                double half_width) {
  if (panels < 1 || per_panel < 1) throw ConfigError("panel rule needs positive sizes");
  const WeightedNodes gl = gauss_legendre(per_panel);
  const double h = 2.0 * half_width / panels;
  WeightedNodes out;
  out.x.resize(static_cast<Eigen::Index>(panels) * per_panel);
  out.w.resize(out.x.size());
  for (int p = 0; p < panels; ++p) {
    const double centre = -half_width + h * (p + 0.5);
    for (int j = 0; j < per_panel; ++j) {
      const double z = centre + 0.5 * h * gl.x(j);
      out.x(p * per_panel + j) = mean + sd * z;
      out.w(p * per_panel + j) = 0.5 * h * gl.w(j) * std::exp(-0.5 * z * z);
    }
  }
  out.w /= out.w.sum();
  return out;
}

WeightedNodes combine(const WeightedNodes& a, double wa, const WeightedNodes& b, double wb) {
  WeightedNodes out;
  out.x.resize(a.size() + b.size());
  out.w.resize(a.size() + b.size());
  out.x << a.x, b.x;
  out.w << wa * a.w, wb * b.w;
  return out;
}

namespace {

constexpr std::array<double, 8> kKronrodNodes = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
constexpr std::array<double, 8> kKronrodWeights = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
constexpr std::array<double, 4> kGaussWeights = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct Panel {
  double a, b, value, error;
  bool operator<(const Panel& o) const { return error < o.error; }
};

Panel gk15(const std::function<double(double)>& f, double a, double b) {
  const double c = 0.5 * (a + b);
  const double h = 0.5 * (b - a);
  const double fc = f(c);
  double kronrod = fc * kKronrodWeights[7];
  double gauss = fc * kGaussWeights[3];
  for (int j = 0; j < 7; ++j) {
    const double dx = h * kKronrodNodes[j];
    const double s = f(c - dx) + f(c + dx);
    kronrod += kKronrodWeights[j] * s;
    if (j % 2 == 1) gauss += kGaussWeights[j / 2] * s;
  }
  return {a, b, kronrod * h, std::abs((kronrod - gauss) * h)};
}

}  // namespace

IntegrationResult integrate(const std::function<double(double)>& f, double a, double b,
                            double abs_tol, int max_intervals) {
  // A single panel can step over a narrow peak entirely, so start from a
  // uniform split of the interval.
  constexpr int kInitialPanels = 16;
  std::priority_queue<Panel> panels;
  double value = 0.0;
  double error = 0.0;
  for (int i = 0; i < kInitialPanels; ++i) {
    const double lo = a + (b - a) * i / kInitialPanels;
    const double hi = i + 1 == kInitialPanels ? b : a + (b - a) * (i + 1) / kInitialPanels;
    Panel p = gk15(f, lo, hi);
    value += p.value;
    error += p.error;
    panels.push(p);
  }
  int count = kInitialPanels;
  while (!(error <= abs_tol)) {
    if (count >= max_intervals || !std::isfinite(error)) {
      throw NumericError(NumericError::Kind::quadrature,
                         "adaptive quadrature did not converge", error);
    }
    Panel worst = panels.top();
    panels.pop();
    const double mid = 0.5 * (worst.a + worst.b);
    Panel left = gk15(f, worst.a, mid);
    Panel right = gk15(f, mid, worst.b);
    value += left.value + right.value - worst.value;
    error += left.error + right.error - worst.error;
    panels.push(left);
    panels.push(right);
    ++count;
  }
  // Recompute from the panels to shed accumulated rounding in the running sums.
  double v = 0.0, e = 0.0;
  while (!panels.empty()) {
    v += panels.top().value;
    e += panels.top().error;
    panels.pop();
  }
  return {v, e};
}

}  // namespace rcusum
