#include "rcusum/experiments.hpp"

#include <cmath>
#include <ostream>

#include "rcusum/breakdown.hpp"
#include "rcusum/rng.hpp"

namespace rcusum {

RunEstimate simulate_delay(const Scheme& scheme, const GrossErrorModel& pre,
                           const GrossErrorModel& post, const ChangeScenario& scenario,
                           const MonteCarloOptions& opts) {
  if (scenario.nu != 1) throw ConfigError("delay simulation needs the change at nu = 1");
  return estimate_runs(scheme, mixture_factory(pre, post, scenario), opts);
}

std::vector<int> default_m_grid() { return {1, 3, 5, 8, 10, 15, 20, 30, 50, 100}; }

std::vector<double> default_theta_grid() { return {1.0, 1.5, 2.0, 2.5, 3.0}; }

std::vector<ChangeScenario> m_sweep(int K, const std::vector<int>& ms, double theta_post) {
  std::vector<ChangeScenario> out;
  for (int m : ms) out.push_back(ChangeScenario{K, m, 1, theta_post});
  return out;
}

std::vector<ChangeScenario> theta_sweep(int K, int m, const std::vector<double>& thetas) {
  std::vector<ChangeScenario> out;
  for (double t : thetas) out.push_back(ChangeScenario{K, m, 1, t});
  return out;
}

namespace {

std::optional<double> bound_ratio(const Scheme& scheme, const ChangeScenario& sc,
                                  const GrossErrorModel& post, double delay) {
  const auto* cusum = std::get_if<CusumScheme>(&scheme);
  if (cusum == nullptr || cusum->rule.kind != FusionKind::soft_threshold) return std::nullopt;
  GrossErrorModel model = post;
  model.nominal = cusum->local.fam;
  const TuningContext ctx(model, {});
  const double info = info_number(sc.theta_post, model.epsilon, cusum->local.alpha, ctx);
  if (!(info > 0.0)) return std::nullopt;
  const double bound = (cusum->rule.b / sc.m + cusum->rule.d) / info;
  return delay / bound;
}

}  // namespace

std::vector<DelayRow> run_delay_table(const ExperimentSpec& spec) {
  std::vector<DelayRow> rows;
  for (std::size_t i = 0; i < spec.schemes.size(); ++i) {
    const auto& named = spec.schemes[i];
    for (std::size_t j = 0; j < spec.scenarios.size(); ++j) {
      const auto& sc = spec.scenarios[j];
      DelayRow row;
      row.scheme = named.id;
      row.parameter = spec.axis == SweepAxis::m ? sc.m : sc.theta_post;
      try {
        MonteCarloOptions mc = spec.mc;
        mc.seed = derive_seed(spec.mc.seed, {i, j});
        row.delay = simulate_delay(named.scheme, spec.model_pre, spec.model_post, sc, mc);
        row.bound_ratio = bound_ratio(named.scheme, sc, spec.model_post, row.delay.mean);
      } catch (const std::exception& e) {
        row.error = e.what();
      }
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

namespace {

void write_estimate(std::ostream& out, const RunEstimate& e) {
  out << e.mean << ',' << e.std_error << ',' << e.reps << ',' << e.censored;
}

}  // namespace

void write_delay_csv(std::ostream& out, const std::vector<DelayRow>& rows) {
  out << "scheme,parameter,mean,se,reps,censored\n";
  for (const auto& r : rows) {
    out << r.scheme << ',' << r.parameter << ',';
    if (r.error) out << "nan,nan,0,0";
    else write_estimate(out, r.delay);
    out << '\n';
  }
}

std::vector<double> default_epsilon_grid() {
  std::vector<double> out;
  for (int i = 1; i <= 10; ++i) out.push_back(0.02 * i);
  return out;
}

std::vector<ArlPoint> arl_vs_epsilon_curve(const std::vector<NamedScheme>& schemes,
                                           const GrossErrorModel& base, int K,
                                           const std::vector<double>& epsilons,
                                           const MonteCarloOptions& opts) {
  std::vector<ArlPoint> out;
  for (std::size_t i = 0; i < schemes.size(); ++i) {
    MonteCarloOptions mc = opts;
    mc.seed = derive_seed(opts.seed, {i});
    for (double eps : epsilons) {
      GrossErrorModel model = base;
      model.epsilon = eps;
      ArlPoint p;
      p.scheme = schemes[i].id;
      p.epsilon = eps;
      p.arl = estimate_arl(schemes[i].scheme, model, K, mc);
      p.log_arl = std::log(p.arl.mean);
      p.log_se = p.arl.std_error / p.arl.mean;
      out.push_back(std::move(p));
    }
  }
  return out;
}

void write_arl_csv(std::ostream& out, const std::vector<ArlPoint>& points) {
  out << "scheme,epsilon,mean,se,reps,censored,log_arl,log_se\n";
  for (const auto& p : points) {
    out << p.scheme << ',' << p.epsilon << ',';
    write_estimate(out, p.arl);
    out << ',' << p.log_arl << ',' << p.log_se << '\n';
  }
}

CurveGrids::CurveGrids() {
  for (int i = 0; i <= 100; ++i) theta.push_back(0.05 * i);
  for (int i = 0; i <= 20; ++i) epsilon.push_back(0.01 * i);
}

std::vector<CurvePoint> tuning_curves(const GrossErrorModel& model, const QuadratureConfig& qc,
                                      const CurveGrids& grids) {
  std::vector<CurvePoint> out;
  auto label = [](const char* name, double v) {
    std::string s = std::to_string(v);
    s.erase(s.find_last_not_of('0') + 1);
    if (s.back() == '.') s.pop_back();
    return std::string(name) + "=" + s;
  };

  for (double a : grids.info_alphas) {
    for (double th : grids.theta) {
      out.push_back({"information", label("alpha", a), th,
                     info_number_closed_form(th, a, model.nominal)});
    }
  }

  const TuningContext ctx(model, qc);
  for (double eps : grids.objective_epsilons) {
    for (const auto& row : alpha_oracle(eps, ctx, grids.alpha).rows) {
      out.push_back({"objective", label("epsilon", eps), row.alpha, row.product});
    }
  }

  for (double eps : grids.epsilon) {
    out.push_back({"efficiency", label("alpha", grids.efficiency_alpha), eps,
                   efficiency_improvement(eps, grids.efficiency_alpha, ctx)});
  }

  for (const auto& r : alpha_opt(model.nominal, grids.alpha).curve) {
    out.push_back({"breakdown", "eps_star", r.alpha, r.eps_star});
    out.push_back({"breakdown", "d_alpha", r.alpha, r.d_alpha});
    out.push_back({"breakdown", "m_alpha", r.alpha, r.m_alpha});
  }
  return out;
}

void write_curves_csv(std::ostream& out, const std::vector<CurvePoint>& points) {
  out << "figure,series,x,y\n";
  for (const auto& p : points) {
    out << p.figure << ',' << p.series << ',' << p.x << ',' << p.y << '\n';
  }
}

}  // namespace rcusum
