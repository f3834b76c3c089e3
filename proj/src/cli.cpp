#include "rcusum/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <sstream>

#include "rcusum/breakdown.hpp"
#include "rcusum/calibration.hpp"
#include "rcusum/experiments.hpp"
#include "rcusum/profiles.hpp"
#include "rcusum/tuning.hpp"

namespace rcusum::cli {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) parts.push_back(trim(item));
  return parts;
}

double to_double(const std::string& text, const std::string& what) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (trim(text.substr(used)).empty()) return v;
  } catch (const std::exception&) {
  }
  throw ConfigError(what + ": expected a number, got '" + text + "'");
}

bool is_auto(const std::string& v) { return v.empty() || v == "auto"; }

}  // namespace

const std::vector<KeySpec>& key_registry() {
  static const std::vector<KeySpec> keys = {
      {"seed", "run", "1", "master seed; fixes every random draw"},
      {"threads", "run", "0", "worker threads (0 = hardware concurrency)"},
      {"reps", "run", "auto",
       "Monte Carlo replicates (auto: calibrate 1000, simulate 200, casestudy 100)"},

      {"epsilon", "model", "0.1", "contamination ratio of the gross error model"},
      {"theta0", "model", "0", "pre-change location"},
      {"theta1", "model", "1", "smallest post-change location of interest"},
      {"sigma", "model", "1", "nominal standard deviation"},
      {"outlier.kind", "outlier", "gaussian", "gaussian | point_mass | custom_table"},
      {"outlier.mean", "outlier", "0", "gaussian outlier mean"},
      {"outlier.sd", "outlier", "3", "gaussian outlier standard deviation"},
      {"outlier.location", "outlier", "0", "point_mass outlier location"},
      {"outlier.table", "outlier", "", "custom_table CSV file with rows x,density"},

      {"K", "scenario", "100", "number of streams"},
      {"m", "scenario", "10", "number of affected streams"},
      {"nu", "scenario", "1", "change time for delay studies"},
      {"theta_post", "scenario", "1", "post-change location of affected streams"},
      {"gamma", "scenario", "5000", "target average run length to false alarm"},
      {"cap_factor", "scenario", "50", "runs are censored at cap_factor * gamma"},

      {"kind", "detector", "soft", "soft | max | sum | xs | chan1 | chan2"},
      {"alpha", "detector", "0.21", "robustness parameter of the local statistic"},
      {"d", "detector", "auto", "soft-threshold shift (auto: optimized from lambda)"},
      {"b", "detector", "", "global alarm threshold"},
      {"p0", "detector", "0.1", "assumed fraction of affected streams (GLR schemes)"},
      {"window", "detector", "200", "GLR window length"},

      {"alpha_grid", "tuning", "0:0.01:2", "alpha grid start:step:stop (start must be 0)"},
      {"d_mode", "tuning", "auto", "auto | simplified | first_order | exact"},
      {"quadrature", "tuning", "quadrature",
       "quadrature | monte_carlo (gauss_hermite_mixture is accepted as quadrature)"},
      {"panels", "tuning", "96", "quadrature panels per Gaussian component"},
      {"mc_samples", "tuning", "1000000", "samples for the monte_carlo method"},
      {"tolerance", "tuning", "1e-9", "root-finding tolerance"},

      {"sup_grid_step", "breakdown", "0.01", "grid step of the outlier-location search"},

      {"rel_tol", "calibration", "0.05", "accepted relative ARL error"},
      {"coarse_reps", "calibration", "200", "replicates per coarse bisection step"},
      {"calibration_reps", "calibration", "1000", "replicates for thresholds calibrated on the fly"},
      {"initial_b", "calibration", "auto", "first threshold tried (auto: b_gamma when available)"},

      {"study", "simulate", "delay", "delay | arl_curve | curves"},
      {"axis", "simulate", "m", "delay sweep axis: m | theta"},
      {"m_grid", "simulate", "1,3,5,8,10,15,20,30,50,100", "affected-stream counts"},
      {"theta_grid", "simulate", "1,1.5,2,2.5,3", "post-change locations"},
      {"epsilon_grid", "simulate", "0.02:0.02:0.2", "contamination ratios of the ARL curve"},
      {"curve_theta", "simulate", "0:0.05:5", "theta grid of the information curves"},

      {"case.p", "case", "512", "retained Haar coefficients"},
      {"case.target_arl", "case", "300", "calibration target"},
      {"case.pre_p", "case", "0.9", "probability of pre_first before the change"},
      {"case.pre_first", "case", "normal", "normal | fault1 | fault2"},
      {"case.pre_second", "case", "fault2", "normal | fault1 | fault2"},
      {"case.post_p", "case", "0.9", "probability of post_first after the change"},
      {"case.post_first", "case", "fault1", "normal | fault1 | fault2"},
      {"case.post_second", "case", "fault2", "normal | fault1 | fault2"},
      {"case.normal", "case", "", "CSV of normal signals (synthetic pool when all three are empty)"},
      {"case.fault1", "case", "", "CSV of fault1 signals"},
      {"case.fault2", "case", "", "CSV of fault2 signals"},
      {"case.write_pool", "case", "", "write the pool as PREFIX_{normal,fault1,fault2}.csv"},

      {"profile.log2_length", "profile", "11", "synthetic signal length exponent"},
      {"profile.noise_sd", "profile", "1", "white-noise standard deviation"},
      {"profile.peak", "profile", "40", "baseline peak force"},
      {"profile.fault1_shift", "profile", "1.5", "fault1 coefficient shift in noise sd"},
      {"profile.fault_ratio", "profile", "5", "fault2 magnitude relative to fault1"},
      {"profile.jitter_sd", "profile", "0.1", "per-signal fault amplitude jitter"},
      {"profile.n_normal", "profile", "307", "normal signals"},
      {"profile.n_fault1", "profile", "69", "fault1 signals"},
      {"profile.n_fault2", "profile", "69", "fault2 signals"},
  };
  return keys;
}

const KeySpec* find_key(const std::string& name) {
  for (const auto& k : key_registry()) {
    if (k.name == name) return &k;
  }
  return nullptr;
}

std::string flag_name(const std::string& key) {
  std::string f = key;
  std::replace(f.begin(), f.end(), '_', '-');
  std::replace(f.begin(), f.end(), '.', '-');
  return f;
}

const std::vector<std::string>& scheme_fields() {
  static const std::vector<std::string> fields{"kind", "alpha", "d", "b", "p0", "window"};
  return fields;
}

Config::Config() {
  for (const auto& k : key_registry()) values_[k.name] = k.default_value;
}

void Config::set(const std::string& key, const std::string& value) {
  if (!find_key(key)) throw ConfigError("unknown key '" + key + "'");
  values_[key] = trim(value);
}

void Config::load(std::istream& in, const std::string& origin) {
  std::string line, prefix;
  SchemeFields* scheme = nullptr;
  int line_no = 0;
  auto where = [&] { return origin + ":" + std::to_string(line_no) + ": "; };
  auto is_prefix = [](const std::string& s) {
    return std::any_of(key_registry().begin(), key_registry().end(),
                       [&](const KeySpec& k) { return k.name.rfind(s + ".", 0) == 0; });
  };
  auto is_group = [](const std::string& s) {
    return std::any_of(key_registry().begin(), key_registry().end(),
                       [&](const KeySpec& k) { return k.section == s; });
  };
  while (std::getline(in, line)) {
    ++line_no;
    // Comments run from '#' or ';' at line start, or after whitespace.
    for (std::size_t i = 0; i < line.size(); ++i) {
      if ((line[i] == '#' || line[i] == ';') && (i == 0 || std::isspace(static_cast<unsigned char>(line[i - 1])))) {
        line.resize(i);
        break;
      }
    }
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(where() + "malformed section header");
      const std::string name = trim(line.substr(1, line.size() - 2));
      scheme = nullptr;
      prefix.clear();
      if (name.rfind("scheme", 0) == 0 && name.size() > 6 && std::isspace(static_cast<unsigned char>(name[6]))) {
        const std::string id = trim(name.substr(6));
        for (const auto& [existing, fields] : schemes_) {
          if (existing == id) throw ConfigError(where() + "duplicate scheme '" + id + "'");
        }
        schemes_.emplace_back(id, SchemeFields{});
        scheme = &schemes_.back().second;
      } else if (is_prefix(name)) {
        prefix = name + ".";
      } else if (!is_group(name)) {
        throw ConfigError(where() + "unknown section '" + name + "'");
      }
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(where() + "expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (scheme) {
      const auto& f = scheme_fields();
      if (std::find(f.begin(), f.end(), key) == f.end()) {
        throw ConfigError(where() + "unknown key '" + key + "' in scheme section");
      }
      (*scheme)[key] = value;
      continue;
    }
    const std::string full = prefix + key;
    if (!find_key(full)) throw ConfigError(where() + "unknown key '" + full + "'");
    values_[full] = value;
  }
}

void Config::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  load(in, path);
}

bool Config::has(const std::string& key) const {
  const auto it = values_.find(key);
  return it != values_.end() && !it->second.empty();
}

std::string Config::str(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw ContractViolation("unregistered key '" + key + "'");
  if (it->second.empty()) throw ConfigError("missing required key '" + key + "'");
  return it->second;
}

double Config::num(const std::string& key) const { return to_double(str(key), "key '" + key + "'"); }

long long Config::integer(const std::string& key) const {
  const double v = num(key);
  if (v != std::floor(v) || std::abs(v) > 9e15) {
    throw ConfigError("key '" + key + "': expected an integer, got '" + str(key) + "'");
  }
  return static_cast<long long>(v);
}

std::optional<double> Config::optional_num(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end() || is_auto(it->second)) return std::nullopt;
  return num(key);
}

std::vector<double> parse_grid(const std::string& text, const std::string& key) {
  std::vector<double> out;
  for (const auto& part : split(text, ',')) {
    if (part.empty()) continue;
    const auto pieces = split(part, ':');
    if (pieces.size() == 1) {
      out.push_back(to_double(pieces[0], "key '" + key + "'"));
    } else if (pieces.size() == 3) {
      const double a = to_double(pieces[0], "key '" + key + "'");
      const double s = to_double(pieces[1], "key '" + key + "'");
      const double b = to_double(pieces[2], "key '" + key + "'");
      if (!(s > 0.0) || b < a) throw ConfigError("key '" + key + "': range needs step > 0 and stop >= start");
      const auto n = static_cast<long long>(std::floor((b - a) / s + 1e-9));
      if (n > 10'000'000) throw ConfigError("key '" + key + "': range too long");
      for (long long i = 0; i <= n; ++i) out.push_back(a + double(i) * s);
    } else {
      throw ConfigError("key '" + key + "': expected a list or start:step:stop, got '" + part + "'");
    }
  }
  if (out.empty()) throw ConfigError("key '" + key + "' is empty");
  return out;
}

namespace {

TableOutlier read_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open outlier table '" + path + "'");
  std::vector<double> x, f;
  std::string line;
  while (std::getline(in, line)) {
    line = trim(line);
    if (line.empty() || line.front() == '#') continue;
    const auto cells = split(line, ',');
    if (cells.size() != 2) throw ConfigError("outlier table rows must be x,density");
    x.push_back(to_double(cells[0], "outlier table"));
    f.push_back(to_double(cells[1], "outlier table"));
  }
  return TableOutlier(std::move(x), std::move(f));
}

}  // namespace

GrossErrorModel model_from(const Config& cfg) {
  GrossErrorModel m;
  m.epsilon = cfg.num("epsilon");
  m.nominal = NominalFamily{cfg.num("theta0"), cfg.num("theta1"), cfg.num("sigma")};
  const std::string kind = cfg.str("outlier.kind");
  if (kind == "gaussian") {
    m.outlier = GaussianOutlier{cfg.num("outlier.mean"), cfg.num("outlier.sd")};
  } else if (kind == "point_mass") {
    m.outlier = PointMassOutlier{cfg.num("outlier.location")};
  } else if (kind == "custom_table") {
    m.outlier = read_table(cfg.str("outlier.table"));
  } else {
    throw ConfigError("key 'outlier.kind': unknown outlier kind '" + kind + "'");
  }
  m.validate();
  return m;
}

namespace {

struct Session {
  const Config& cfg;
  std::istream& in;
  std::ostream& out;
  std::ostream& err;
  int exit_code = 0;

  std::uint64_t seed() const {
    const long long s = cfg.integer("seed");
    if (s < 0) throw ConfigError("key 'seed' must be nonnegative");
    return static_cast<std::uint64_t>(s);
  }
  unsigned threads() const {
    const long long t = cfg.integer("threads");
    if (t < 0) throw ConfigError("key 'threads' must be nonnegative");
    return static_cast<unsigned>(t);
  }
  int reps(int fallback) const {
    const auto r = cfg.optional_num("reps");
    if (!r) return fallback;
    const long long v = cfg.integer("reps");
    if (v < 1) throw ConfigError("key 'reps' must be positive");
    return static_cast<int>(v);
  }
  int K() const { return positive_int("K"); }
  int m() const { return positive_int("m"); }
  int positive_int(const std::string& key) const {
    const long long v = cfg.integer(key);
    if (v < 1 || v > 100'000'000) throw ConfigError("key '" + key + "' must be a positive integer");
    return static_cast<int>(v);
  }
  double gamma() const {
    const double g = cfg.num("gamma");
    if (!(g > 0.0)) throw ConfigError("key 'gamma' must be positive");
    return g;
  }
  std::int64_t cap() const {
    const double c = cfg.num("cap_factor");
    if (!(c >= 1.0)) throw ConfigError("key 'cap_factor' must be at least 1");
    return static_cast<std::int64_t>(std::ceil(c * gamma()));
  }

  QuadratureConfig quadrature() const {
    QuadratureConfig qc;
    const std::string method = cfg.str("quadrature");
    if (method == "quadrature" || method == "gauss_hermite_mixture") {
      qc.method = QuadratureConfig::Method::quadrature;
    } else if (method == "monte_carlo") {
      qc.method = QuadratureConfig::Method::monte_carlo;
    } else {
      throw ConfigError("key 'quadrature': unknown method '" + method + "'");
    }
    qc.panels = positive_int("panels");
    qc.n_samples = static_cast<std::size_t>(positive_int("mc_samples"));
    qc.seed = seed();
    qc.tolerance = cfg.num("tolerance");
    qc.validate();
    return qc;
  }

  AlphaGrid alpha_grid() const {
    const auto pieces = split(cfg.str("alpha_grid"), ':');
    if (pieces.size() != 3 || to_double(pieces[0], "key 'alpha_grid'") != 0.0) {
      throw ConfigError("key 'alpha_grid' must read 0:step:stop");
    }
    AlphaGrid g;
    g.step = to_double(pieces[1], "key 'alpha_grid'");
    g.alpha_max = to_double(pieces[2], "key 'alpha_grid'");
    if (!(g.step > 0.0) || !(g.alpha_max >= 0.0)) {
      throw ConfigError("key 'alpha_grid' needs a positive step and a nonnegative stop");
    }
    return g;
  }

  std::optional<DoptMode> dopt_mode() const {
    const std::string s = cfg.str("d_mode");
    if (s == "auto") return std::nullopt;
    if (s == "simplified") return DoptMode::simplified;
    if (s == "first_order") return DoptMode::first_order;
    if (s == "exact") return DoptMode::exact;
    throw ConfigError("key 'd_mode': unknown mode '" + s + "'");
  }

  std::ostream& summary() { return err; }
};

struct SchemeSpec {
  std::string id;
  std::string kind;
  double alpha = 0.0;
  std::optional<double> d;
  std::optional<double> b;
  double p0 = 0.1;
  int window = 200;
};

std::vector<SchemeSpec> scheme_specs(const Config& cfg) {
  auto from = [&](const Config::SchemeFields* f, const std::string& id) {
    auto field = [&](const std::string& name) -> std::string {
      if (f) {
        const auto it = f->find(name);
        if (it != f->end()) return it->second;
      }
      const auto v = cfg.has(name) ? cfg.str(name) : std::string{};
      return v;
    };
    const std::string where = id.empty() ? "" : "scheme '" + id + "' ";
    auto number = [&](const std::string& name) { return to_double(field(name), where + "key '" + name + "'"); };
    auto optional = [&](const std::string& name) -> std::optional<double> {
      const std::string v = field(name);
      if (is_auto(v)) return std::nullopt;
      return to_double(v, where + "key '" + name + "'");
    };
    SchemeSpec s;
    s.kind = field("kind");
    s.alpha = number("alpha");
    s.d = optional("d");
    s.b = optional("b");
    s.p0 = number("p0");
    const double w = number("window");
    if (w != std::floor(w) || w < 1) throw ConfigError(where + "key 'window' must be a positive integer");
    s.window = static_cast<int>(w);
    s.id = id;
    return s;
  };
  std::vector<SchemeSpec> specs;
  if (cfg.schemes().empty()) {
    specs.push_back(from(nullptr, ""));
  } else {
    for (const auto& [id, fields] : cfg.schemes()) specs.push_back(from(&fields, id));
  }
  return specs;
}

bool is_cusum_kind(const std::string& kind) {
  return kind == "soft" || kind == "max" || kind == "sum";
}

double resolve_d(const Session& s, const SchemeSpec& spec, const GrossErrorModel& model, int K) {
  if (spec.d) return *spec.d;
  if (spec.kind != "soft") return 0.0;
  const TuningContext ctx(model, s.quadrature());
  const double lambda = solve_lambda(model.epsilon, spec.alpha, ctx);
  const double gamma = s.gamma();
  const int m = std::min(s.m(), K);
  return d_opt(lambda, K, m, gamma, s.dopt_mode().value_or(default_dopt_mode(K, gamma)));
}

Scheme build_scheme(const SchemeSpec& spec, const NominalFamily& fam, double d, double b) {
  if (is_cusum_kind(spec.kind)) {
    const FusionKind fk = spec.kind == "soft" ? FusionKind::soft_threshold
                          : spec.kind == "max" ? FusionKind::max
                                               : FusionKind::sum;
    FusionRule rule{fk, fk == FusionKind::soft_threshold ? d : 0.0, b};
    LocalParams local{spec.alpha, fam};
    local.validate();
    rule.validate();
    return CusumScheme{local, rule};
  }
  GlrParams gp;
  gp.p0 = spec.p0;
  gp.window = spec.window;
  if (spec.kind == "xs") {
    gp.variant = GlrVariant::xie_siegmund;
  } else if (spec.kind == "chan1") {
    gp.variant = GlrVariant::chan1;
  } else if (spec.kind == "chan2") {
    gp.variant = GlrVariant::chan2;
  } else {
    throw ConfigError("key 'kind': unknown detector kind '" + spec.kind + "'");
  }
  gp.validate();
  return GlrScheme{gp, b, fam};
}

std::string scheme_id(const SchemeSpec& spec, double d) {
  if (!spec.id.empty()) return spec.id;
  std::ostringstream id;
  id << spec.kind;
  if (is_cusum_kind(spec.kind)) {
    id << "(alpha=" << spec.alpha;
    if (spec.kind == "soft") id << ";d=" << d;
  } else {
    id << "(p0=" << spec.p0 << ";window=" << spec.window;
  }
  id << ')';
  return id.str();
}

std::optional<double> auto_initial_b(const Session& s, const SchemeSpec& spec, const GrossErrorModel& model,
                                     int K, double d, double gamma) {
  if (const auto b = s.cfg.optional_num("initial_b")) return *b;
  if (spec.kind != "soft") return std::nullopt;
  try {
    const TuningContext ctx(model, s.quadrature());
    const double bg = b_gamma(solve_lambda(model.epsilon, spec.alpha, ctx), K, d, gamma);
    if (std::isfinite(bg) && bg > 0.0) return bg;
  } catch (const NumericError&) {
  }
  return std::nullopt;
}

CalibrationOptions calibration_options(const Session& s, double gamma, int full_reps, std::uint64_t seed) {
  CalibrationOptions c;
  c.gamma = gamma;
  c.rel_tol = s.cfg.num("rel_tol");
  c.coarse_reps = s.positive_int("coarse_reps");
  c.full_reps = full_reps;
  c.cap_factor = s.cfg.num("cap_factor");
  c.seed = seed;
  c.threads = s.threads();
  return c;
}

/// Schemes with thresholds; a missing b is calibrated to gamma under `model`.
std::vector<NamedScheme> resolve_schemes(Session& s, const GrossErrorModel& model, int K) {
  std::vector<NamedScheme> named;
  const auto specs = scheme_specs(s.cfg);
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const auto& spec = specs[i];
    const double d = resolve_d(s, spec, model, K);
    Scheme scheme = build_scheme(spec, model.nominal, d, spec.b.value_or(1.0));
    const std::string id = scheme_id(spec, d);
    if (!spec.b) {
      ChangeScenario none;
      none.K = K;
      auto cal = calibration_options(s, s.gamma(), s.positive_int("calibration_reps"),
                                     derive_seed(s.seed(), {0xCA1Bu, i}));
      cal.initial_b = auto_initial_b(s, spec, model, K, d, s.gamma());
      const auto res = calibrate_threshold(scheme, mixture_factory(model, model, none), cal);
      scheme = with_threshold(scheme, res.b);
      s.summary() << "calibrated " << id << ": b=" << res.b << " arl=" << res.arl.mean
                  << " se=" << res.arl.std_error << '\n';
    }
    named.push_back({id, scheme});
  }
  return named;
}

// ---------------------------------------------------------------------------

void run_tune(Session& s) {
  const GrossErrorModel model = model_from(s.cfg);
  const TuningContext ctx(model, s.quadrature());
  const AlphaGrid grid = s.alpha_grid();
  const OracleResult oracle = alpha_oracle(model.epsilon, ctx, grid);
  s.out << "alpha,lambda,info,product,efficiency\n";
  for (const auto& r : oracle.rows) {
    s.out << r.alpha << ',' << r.lambda << ',' << r.info << ',' << r.product << ',' << r.efficiency << '\n';
  }
  s.out.flush();

  double e_oracle = 0.0;
  for (const auto& r : oracle.rows) {
    if (r.alpha == oracle.alpha_oracle) e_oracle = r.efficiency;
  }
  s.summary() << "alpha_oracle=" << oracle.alpha_oracle << " efficiency=" << e_oracle
              << " skipped=" << oracle.skipped << '\n';

  const double alpha = s.cfg.num("alpha");
  const int K = s.K();
  const int m = std::min(s.m(), K);
  const double gamma = s.gamma();
  const TuningReport rep = tuning_report(model.epsilon, alpha, K, m, gamma, ctx, grid, s.dopt_mode());
  s.summary() << "alpha=" << alpha << " lambda=" << rep.lambda << " info=" << rep.info
              << " efficiency=" << rep.efficiency << " d_opt=" << rep.d_opt << " d_mode="
              << to_string(rep.d_mode) << " b_gamma=" << rep.b_gamma;
  const double d = s.cfg.optional_num("d").value_or(rep.d_opt);
  const double b = s.cfg.optional_num("b").value_or(b_gamma(rep.lambda, K, d, gamma));
  if (const auto lb = arl_lower_bound(rep.lambda, b, d, K)) {
    s.summary() << " arl_lower_bound(b=" << b << ",d=" << d << ")=" << *lb;
  }
  s.summary() << '\n';
}

void run_breakdown(Session& s) {
  const GrossErrorModel model = model_from(s.cfg);
  SupSearch search;
  search.grid_step = s.cfg.num("sup_grid_step");
  if (!(search.grid_step > 0.0)) throw ConfigError("key 'sup_grid_step' must be positive");
  const AlphaOptResult res = alpha_opt(model.nominal, s.alpha_grid(), search);
  s.out << "alpha,d_alpha,m_alpha,eps_star\n";
  for (const auto& r : res.curve) {
    s.out << r.alpha << ',' << r.d_alpha << ',' << r.m_alpha << ',' << r.eps_star << '\n';
  }
  s.out.flush();
  s.summary() << "alpha_opt=" << res.alpha_opt << " eps_star=" << res.eps_star << '\n';
  const double alpha = s.cfg.num("alpha");
  const BreakdownReport r = breakdown_point(model.nominal, alpha, search);
  s.summary() << "alpha=" << alpha << " eps_star=" << r.eps_star << " d_alpha=" << r.d_alpha
              << " m_alpha=" << r.m_alpha << " worst_case_drift(epsilon=" << model.epsilon
              << ")=" << worst_case_drift(model.epsilon, r) << '\n';
}

void run_calibrate(Session& s) {
  const GrossErrorModel model = model_from(s.cfg);
  const int K = s.K();
  const double gamma = s.gamma();
  const int reps = s.reps(1000);
  const auto specs = scheme_specs(s.cfg);
  ChangeScenario none;
  none.K = K;
  const SourceFactory pre = mixture_factory(model, model, none);
  s.out << "scheme,b,arl,arl_se,reps,censored,iterations\n";
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const double d = resolve_d(s, specs[i], model, K);
    const Scheme scheme = build_scheme(specs[i], model.nominal, d, 1.0);
    auto cal = calibration_options(s, gamma, reps, derive_seed(s.seed(), {i}));
    cal.initial_b = auto_initial_b(s, specs[i], model, K, d, gamma);
    const CalibrationResult res = calibrate_threshold(scheme, pre, cal);
    const std::string id = scheme_id(specs[i], d);
    s.out << id << ',' << res.b << ',' << res.arl.mean << ',' << res.arl.std_error << ','
          << res.arl.reps << ',' << res.arl.censored << ',' << res.iterations << '\n';
    s.summary() << id << ": d=" << d << " b=" << res.b << " arl=" << res.arl.mean << " +/- "
                << res.arl.std_error << " after " << res.iterations << " steps"
                << (res.arl.flagged() ? " (over 20% censored)" : "") << '\n';
  }
}

void run_simulate(Session& s) {
  const GrossErrorModel model = model_from(s.cfg);
  const std::string study = s.cfg.str("study");
  if (study == "curves") {
    CurveGrids grids;
    grids.theta = parse_grid(s.cfg.str("curve_theta"), "curve_theta");
    grids.alpha = s.alpha_grid();
    grids.efficiency_alpha = s.cfg.num("alpha");
    write_curves_csv(s.out, tuning_curves(model, s.quadrature(), grids));
    return;
  }
  const int K = s.K();
  MonteCarloOptions mc;
  mc.reps = s.reps(200);
  mc.cap = s.cap();
  mc.seed = s.seed();
  mc.threads = s.threads();
  if (study == "arl_curve") {
    const auto schemes = resolve_schemes(s, model, K);
    write_arl_csv(s.out, arl_vs_epsilon_curve(schemes, model, K,
                                              parse_grid(s.cfg.str("epsilon_grid"), "epsilon_grid"), mc));
    return;
  }
  if (study != "delay") throw ConfigError("key 'study': unknown study '" + study + "'");

  ExperimentSpec spec;
  spec.model_pre = model;
  spec.model_post = model;
  spec.gamma = s.gamma();
  spec.mc = mc;
  const std::string axis = s.cfg.str("axis");
  const double theta_post = s.cfg.num("theta_post");
  if (axis == "m") {
    std::vector<int> ms;
    for (double v : parse_grid(s.cfg.str("m_grid"), "m_grid")) {
      if (v != std::floor(v) || v < 1 || v > K) {
        throw ConfigError("key 'm_grid': entries must be integers in [1, K]");
      }
      ms.push_back(static_cast<int>(v));
    }
    spec.axis = SweepAxis::m;
    spec.scenarios = m_sweep(K, ms, theta_post);
  } else if (axis == "theta") {
    spec.axis = SweepAxis::theta;
    spec.scenarios = theta_sweep(K, std::min(s.m(), K), parse_grid(s.cfg.str("theta_grid"), "theta_grid"));
  } else {
    throw ConfigError("key 'axis': expected m or theta, got '" + axis + "'");
  }
  const long long nu = s.cfg.integer("nu");
  for (auto& sc : spec.scenarios) sc.nu = nu;
  spec.schemes = resolve_schemes(s, model, K);
  const auto rows = run_delay_table(spec);
  write_delay_csv(s.out, rows);
  for (const auto& r : rows) {
    if (r.error) {
      s.summary() << "cell " << r.scheme << " at " << r.parameter << " failed: " << *r.error << '\n';
      s.exit_code = 2;
    } else if (r.delay.flagged()) {
      s.summary() << "cell " << r.scheme << " at " << r.parameter << ": over 20% of runs censored\n";
    }
  }
}

void run_monitor(Session& s) {
  const GrossErrorModel model = model_from(s.cfg);
  const auto specs = scheme_specs(s.cfg);
  if (specs.size() != 1) throw ConfigError("monitor runs exactly one scheme; remove the [scheme] sections");
  const SchemeSpec& spec = specs.front();
  const double b = s.cfg.num("b");  // required

  std::unique_ptr<Detector> detector;
  VectorXd obs;
  std::string line;
  long long line_no = 0;
  bool header_allowed = true;
  s.out << "n,global_stat,alarmed\n";
  while (std::getline(s.in, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty()) continue;
    const auto cells = split(line, ',');
    std::vector<double> values;
    values.reserve(cells.size());
    bool numeric = true;
    for (const auto& c : cells) {
      try {
        values.push_back(to_double(c, "input"));
      } catch (const ConfigError&) {
        numeric = false;
        break;
      }
    }
    if (!numeric) {
      if (header_allowed) {
        header_allowed = false;
        continue;
      }
      throw ConfigError("input line " + std::to_string(line_no) + ": non-numeric value");
    }
    header_allowed = false;
    if (!detector) {
      const int K = static_cast<int>(values.size());
      const double d = resolve_d(s, spec, model, K);
      detector = make_detector(build_scheme(spec, model.nominal, d, b), K);
      obs.resize(K);
    } else if (static_cast<Eigen::Index>(values.size()) != obs.size()) {
      throw ConfigError("input line " + std::to_string(line_no) + ": expected " +
                        std::to_string(obs.size()) + " values, got " + std::to_string(values.size()));
    }
    for (std::size_t k = 0; k < values.size(); ++k) obs(static_cast<Eigen::Index>(k)) = values[k];
    const StepDecision dec = detector->update(obs);
    s.out << detector->time() << ',' << dec.global_stat << ',' << (dec.alarmed ? 1 : 0) << '\n';
    if (dec.alarmed) {
      s.summary() << "alarm at n=" << detector->time() << '\n';
      return;
    }
  }
  s.summary() << "no alarm\n";
}

ProfileGroup group_from(const Config& cfg, const std::string& key) {
  const std::string v = cfg.str(key);
  if (v == "normal") return ProfileGroup::normal;
  if (v == "fault1") return ProfileGroup::fault1;
  if (v == "fault2") return ProfileGroup::fault2;
  throw ConfigError("key '" + key + "': expected normal, fault1 or fault2, got '" + v + "'");
}

std::vector<VectorXd> read_signal_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open signal file '" + path + "'");
  return read_signals(in);
}

void run_casestudy(Session& s) {
  const Config& cfg = s.cfg;
  ProfilePool pool;
  const int given = cfg.has("case.normal") + cfg.has("case.fault1") + cfg.has("case.fault2");
  if (given == 3) {
    pool.normal = read_signal_file(cfg.str("case.normal"));
    pool.fault1 = read_signal_file(cfg.str("case.fault1"));
    pool.fault2 = read_signal_file(cfg.str("case.fault2"));
  } else if (given == 0) {
    ProfileGenerator gen;
    gen.log2_length = s.positive_int("profile.log2_length");
    gen.noise_sd = cfg.num("profile.noise_sd");
    gen.peak = cfg.num("profile.peak");
    gen.fault1_shift = cfg.num("profile.fault1_shift");
    gen.fault_ratio = cfg.num("profile.fault_ratio");
    gen.jitter_sd = cfg.num("profile.jitter_sd");
    gen.n_normal = s.positive_int("profile.n_normal");
    gen.n_fault1 = s.positive_int("profile.n_fault1");
    gen.n_fault2 = s.positive_int("profile.n_fault2");
    pool = synth_pool(gen, s.seed());
  } else {
    throw ConfigError("keys 'case.normal', 'case.fault1' and 'case.fault2' must be given together");
  }
  if (cfg.has("case.write_pool")) {
    const std::string prefix = cfg.str("case.write_pool");
    for (auto g : {ProfileGroup::normal, ProfileGroup::fault1, ProfileGroup::fault2}) {
      const std::string name = g == ProfileGroup::normal ? "normal" : g == ProfileGroup::fault1 ? "fault1" : "fault2";
      std::ofstream f(prefix + "_" + name + ".csv");
      if (!f) throw ConfigError("cannot write '" + prefix + "_" + name + ".csv'");
      write_signals(f, pool.group(g));
    }
  }

  CaseStudyOptions opts;
  opts.p = s.positive_int("case.p");
  opts.target_arl = cfg.num("case.target_arl");
  opts.mix_pre = PoolMixture{cfg.num("case.pre_p"), group_from(cfg, "case.pre_first"),
                             group_from(cfg, "case.pre_second")};
  opts.mix_post = PoolMixture{cfg.num("case.post_p"), group_from(cfg, "case.post_first"),
                              group_from(cfg, "case.post_second")};
  opts.reps = s.reps(100);
  opts.calibration_reps = s.positive_int("calibration_reps");
  opts.rel_tol = cfg.num("rel_tol");
  opts.seed = derive_seed(s.seed(), {1});
  opts.threads = s.threads();

  std::vector<std::pair<std::string, Scheme>> schemes;
  if (cfg.schemes().empty()) {
    const NominalFamily fam{};
    auto soft = [&](double alpha, double d) {
      return Scheme{CusumScheme{LocalParams{alpha, fam}, FusionRule{FusionKind::soft_threshold, d, 1.0}}};
    };
    schemes = {{"N0.21", soft(0.21, 1.5056)}, {"N0.51", soft(0.51, 0.7235)}, {"N0", soft(0.0, 3.9357)}};
  } else {
    GrossErrorModel model = model_from(cfg);
    for (const auto& spec : scheme_specs(cfg)) {
      const double d = resolve_d(s, spec, model, opts.p);
      const Scheme scheme = build_scheme(spec, model.nominal, d, 1.0);
      schemes.emplace_back(scheme_id(spec, d), scheme);
    }
  }
  const auto rows = case_study_run(pool, schemes, opts);
  write_case_study_csv(s.out, rows);
  for (const auto& r : rows) {
    if (std::abs(r.arl.mean - opts.target_arl) > 0.1 * opts.target_arl) {
      s.summary() << r.scheme << ": calibrated ARL " << r.arl.mean << " is off target by over 10%\n";
    }
  }
}

const char* kFooterTune =
    "Output CSV columns: alpha,lambda,info,product,efficiency (grid points with a positive lambda).\n"
    "Summary on stderr: alpha_oracle and the tuning report at --alpha.";
const char* kFooterBreakdown =
    "Output CSV columns: alpha,d_alpha,m_alpha,eps_star.\nSummary on stderr: alpha_opt.";
const char* kFooterCalibrate =
    "Output CSV columns: scheme,b,arl,arl_se,reps,censored,iterations.\n"
    "Schemes come from [scheme NAME] sections, or from the detector keys.";
const char* kFooterSimulate =
    "Output CSV columns by study:\n"
    "study=delay: scheme,parameter,mean,se,reps,censored\n"
    "study=arl_curve: scheme,epsilon,mean,se,reps,censored,log_arl,log_se\n"
    "study=curves: figure,series,x,y\n"
    "Schemes without a b are calibrated to gamma first.";
const char* kFooterMonitor =
    "Reads one comma-separated observation vector per line from stdin (an optional header is skipped).\n"
    "Output CSV columns: n,global_stat,alarmed. Stops after the first alarm.";
const char* kFooterCasestudy =
    "Output CSV columns: scheme,b,arl,arl_se,delay,delay_se,reps,censored.\n"
    "Defaults: soft schemes alpha 0.21 (d 1.5056), 0.51 (d 0.7235), 0 (d 3.9357) on a synthetic pool.";

}  // namespace

int parse_and_dispatch(int argc, const char* const* argv, std::istream& in, std::ostream& out,
                       std::ostream& err) {
  CLI::App app{"Robust multi-stream change-point detection"};
  app.require_subcommand(1);
  app.fallthrough();
  std::string config_path, output_path;
  std::map<std::string, std::string> flag_values;
  std::vector<std::pair<std::string, CLI::Option*>> flag_options;

  app.add_option("--config", config_path, "config file with [section] key = value lines");
  app.add_option("--output", output_path, "write data here instead of stdout");
  for (const auto& k : key_registry()) {
    if (k.section != "run") continue;
    auto* opt = app.add_option("--" + flag_name(k.name), flag_values[k.name], k.help)
                    ->default_str(k.default_value);
    flag_options.emplace_back(k.name, opt);
  }

  const std::vector<std::pair<std::string, const char*>> commands{
      {"tune", "lambda, information number and efficiency over an alpha grid"},
      {"breakdown", "false-alarm breakdown point over an alpha grid"},
      {"calibrate", "calibrate thresholds to a target ARL by simulation"},
      {"simulate", "delay tables, ARL-versus-contamination curves and tuning curves"},
      {"monitor", "run a detector on observations read from stdin"},
      {"casestudy", "profile-monitoring case study on a Haar-coefficient pool"}};
  const std::map<std::string, const char*> footers{
      {"tune", kFooterTune},         {"breakdown", kFooterBreakdown}, {"calibrate", kFooterCalibrate},
      {"simulate", kFooterSimulate}, {"monitor", kFooterMonitor},     {"casestudy", kFooterCasestudy}};
  for (const auto& [name, description] : commands) {
    CLI::App* sub = app.add_subcommand(name, description);
    sub->footer(footers.at(name));
    // Global flags are repeated here so they may follow the subcommand and
    // show up in its help.
    sub->add_option("--config", config_path, "config file with [section] key = value lines")->group("run");
    sub->add_option("--output", output_path, "write data here instead of stdout")->group("run");
    for (const auto& k : key_registry()) {
      auto* opt = sub->add_option("--" + flag_name(k.name), flag_values[k.name], k.help)
                      ->default_str(k.default_value.empty() ? "none" : k.default_value)
                      ->group(k.section);
      flag_options.emplace_back(k.name, opt);
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 1;
  }

  try {
    Config cfg;
    if (!config_path.empty()) cfg.load_file(config_path);
    for (const auto& [key, opt] : flag_options) {
      if (opt->count() > 0) cfg.set(key, flag_values[key]);
    }
    std::ofstream file;
    if (!output_path.empty()) {
      file.open(output_path);
      if (!file) throw ConfigError("cannot open output file '" + output_path + "'");
    }
    std::ostream& data = output_path.empty() ? out : file;
    data << std::setprecision(10);
    err << std::setprecision(6);
    Session session{cfg, in, data, err};

    const std::string name = app.get_subcommands().front()->get_name();
    if (name == "tune") run_tune(session);
    else if (name == "breakdown") run_breakdown(session);
    else if (name == "calibrate") run_calibrate(session);
    else if (name == "simulate") run_simulate(session);
    else if (name == "monitor") run_monitor(session);
    else run_casestudy(session);
    data.flush();
    return session.exit_code;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return 1;
  } catch (const NoDensityError& e) {
    err << "config error: " << e.what() << '\n';
    return 1;
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }
}

int parse_and_dispatch(int argc, const char* const* argv) {
  return parse_and_dispatch(argc, argv, std::cin, std::cout, std::cerr);
}

}  // namespace rcusum::cli
