#pragma once
// Config-driven experiment drivers: the same entry points back the CLI and
// the test suite.  Configs are flat "key = value" text with dotted sections;
// every run emits CSV/JSON artifacts plus a manifest into the output
// directory, all written atomically and byte-deterministic for a fixed
// config and seed (wall-clock timing goes to a separate log).

#include <cctype>
#include <chrono>
#include <set>

#include "scalespace.hpp"
#include "sparse.hpp"

namespace radonlab {

constexpr const char* kArtifactVersion = "1.0.0";

struct config_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct check_failure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Config {
  std::map<std::string, std::string> kv;

  bool has(const std::string& key) const { return kv.count(key) != 0; }
  std::string str(const std::string& key, const std::string& dflt) const {
    auto it = kv.find(key);
    return it == kv.end() ? dflt : it->second;
  }
  std::string require(const std::string& key) const {
    auto it = kv.find(key);
    if (it == kv.end()) throw config_error("missing config key: " + key);
    return it->second;
  }
  int64_t integer(const std::string& key, int64_t dflt) const {
    auto it = kv.find(key);
    if (it == kv.end()) return dflt;
    try {
      size_t pos = 0;
      int64_t v = std::stoll(it->second, &pos);
      if (pos != it->second.size()) throw std::invalid_argument("");
      return v;
    } catch (...) {
      throw config_error("config key " + key + " is not an integer: " + it->second);
    }
  }
  double real(const std::string& key, double dflt) const {
    auto it = kv.find(key);
    if (it == kv.end()) return dflt;
    try {
      size_t pos = 0;
      double v = std::stod(it->second, &pos);
      if (pos != it->second.size()) throw std::invalid_argument("");
      return v;
    } catch (...) {
      throw config_error("config key " + key + " is not a number: " + it->second);
    }
  }
  std::string canonical() const {
    std::string out;
    for (const auto& [k, v] : kv) out += k + " = " + v + "\n";
    return out;
  }
  // Hash input: every key that can change the science.  `out` and `threads`
  // only say where results land and how fast they arrive, so two runs of the
  // same experiment into different directories share a hash.
  std::string hash_text() const {
    std::string out;
    for (const auto& [k, v] : kv)
      if (k != "out" && k != "threads") out += k + " = " + v + "\n";
    return out;
  }
};

inline Config parse_config_text(const std::string& text) {
  Config cfg;
  size_t pos = 0;
  int lineno = 0;
  while (pos <= text.size()) {
    size_t eol = text.find('\n', pos);
    std::string line = text.substr(pos, eol == std::string::npos ? eol : eol - pos);
    pos = eol == std::string::npos ? text.size() + 1 : eol + 1;
    ++lineno;
    size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    auto trim = [](std::string s) {
      size_t a = s.find_first_not_of(" \t\r");
      if (a == std::string::npos) return std::string();
      size_t b = s.find_last_not_of(" \t\r");
      return s.substr(a, b - a + 1);
    };
    line = trim(line);
    if (line.empty()) continue;
    size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw config_error("line " + std::to_string(lineno) + ": expected key = value");
    std::string key = trim(line.substr(0, eq)), val = trim(line.substr(eq + 1));
    if (key.empty()) throw config_error("line " + std::to_string(lineno) + ": empty key");
    for (char c : key)
      if (!std::isalnum(static_cast<unsigned char>(c)) && c != '.' && c != '_' && c != '-')
        throw config_error("line " + std::to_string(lineno) + ": bad key " + key);
    if (cfg.kv.count(key))
      throw config_error("duplicate config key: " + key);
    cfg.kv[key] = val;
  }
  return cfg;
}

inline Config load_config(const std::string& path) {
  return parse_config_text(read_text(path));
}

inline const std::set<std::string>& known_config_keys() {
  static const std::set<std::string> keys{
      "experiment",       "out",
      "seed",             "threads",
      "grid.n",           "grid.K",
      "grid.s",           "measure.kind",
      "measure.radius",   "measure.points",
      "measure.density",  "measure.file",
      "exponents.p",      "exponents.q",
      "epsilon.N1",       "epsilon.N2",
      "epsilon.pattern",  "epsilon.values",
      "kind",             "slice_weight_exponent",
      "battery.pairs",    "battery.trials",
      "cube.level",       "cube.corner_x",
      "cube.corner_y",    "scalespace.k_min",
      "scalespace.k_lo",  "scalespace.k_hi",
      "llogl.r",          "checks.alpha_lo",
      "checks.alpha_hi",  "checks.residual_max",
      "checks.slope_band", "checks.weakl1_slack",
  };
  return keys;
}

namespace detail {

inline void validate_keys(const Config& cfg) {
  for (const auto& [k, v] : cfg.kv)
    if (!known_config_keys().count(k))
      throw config_error("unknown config key: " + k);
}

inline GridSpec config_grid(const Config& cfg) {
  int n = int(cfg.integer("grid.n", 2));
  int K = int(cfg.integer("grid.K", 9));
  int s = int(cfg.integer("grid.s", 5));
  return make_grid(n, K, s);
}

inline DiscreteMeasure config_base_measure(const Config& cfg, const GridSpec& g) {
  std::string kind = cfg.str("measure.kind", "circle");
  if (kind == "circle")
    return circle_measure(g, cfg.real("measure.radius", 1.0),
                          int(cfg.integer("measure.points", 0)));
  if (kind == "bump") return interval_bump_measure(g);
  if (kind == "projected-circle")
    return projected_circle_measure(g, int(cfg.integer("measure.points", 0)));
  if (kind == "custom-file") {
    DiscreteMeasure m = read_json(cfg.require("measure.file")).get<DiscreteMeasure>();
    if (!m.compatible(g))
      throw config_error("measure.file does not match the configured grid");
    return m;
  }
  throw config_error("unknown measure.kind: " + kind);
}

inline DiscreteMeasure config_modulated(const Config& cfg, const DiscreteMeasure& base) {
  std::string d = cfg.str("measure.density", "none");
  if (d == "none") return base;
  if (d == "x1") return modulate_mean_zero(base, coordinate_density);
  throw config_error("unknown measure.density: " + d);
}

inline EpsilonSigns config_epsilon(const Config& cfg, uint64_t seed) {
  int n1 = int(cfg.integer("epsilon.N1", -2));
  int n2 = int(cfg.integer("epsilon.N2", 0));
  std::string pat = cfg.str("epsilon.pattern", "alternating");
  if (pat == "alternating") return EpsilonSigns::alternating(n1, n2);
  if (pat == "random") return EpsilonSigns::random_signs(n1, n2, seed);
  if (pat == "custom") {
    std::vector<double> vals;
    std::string raw = cfg.require("epsilon.values");
    size_t pos = 0;
    while (pos <= raw.size()) {
      size_t c = raw.find(',', pos);
      std::string tok = raw.substr(pos, c == std::string::npos ? c : c - pos);
      pos = c == std::string::npos ? raw.size() + 1 : c + 1;
      if (!tok.empty()) {
        try {
          vals.push_back(std::stod(tok));
        } catch (...) {
          throw config_error("epsilon.values entry is not a number: " + tok);
        }
      }
    }
    if (vals.size() != size_t(n2 - n1 + 1))
      throw config_error("epsilon.values count must equal N2 - N1 + 1");
    return EpsilonSigns(n1, n2, std::move(vals));
  }
  throw config_error("unknown epsilon.pattern: " + pat);
}

inline ExponentPair config_exponents(const Config& cfg) {
  double p = cfg.real("exponents.p", 1.5), q = cfg.real("exponents.q", 3.0);
  if (!(1.0 < p && p < q && std::isfinite(q)))
    throw config_error("exponents must satisfy 1 < p < q < inf");
  return ExponentPair(p, q);
}

struct CheckList {
  std::vector<std::string> failed;
  json report = json::object();
  void record(const std::string& name, bool pass, const json& detail = {}) {
    report[name] = json{{"pass", pass}};
    if (!detail.is_null()) report[name]["detail"] = detail;
    if (!pass) failed.push_back(name);
  }
};

}  // namespace detail

struct RunOutcome {
  int exit_code = 0;
  std::string message;
};

namespace detail {

struct RunEnv {
  Config cfg;
  std::string out;
  uint64_t seed = 0;
  int threads = 0;
  uint64_t hash = 0;
  CheckList checks;
  json manifest = json::object();
};

inline void finish_run(RunEnv& env, const std::string& experiment) {
  env.manifest["experiment"] = experiment;
  env.manifest["version"] = kArtifactVersion;
  env.manifest["config_hash"] = hex64(env.hash);
  env.manifest["seed"] = env.seed;
  env.manifest["threads"] = env.threads;
  env.manifest["checks"] = env.checks.report;
  write_json(env.out + "/manifest.json", env.manifest);
  if (!env.checks.failed.empty())
    throw check_failure(env.checks.failed.front());
}

inline void run_decay(RunEnv& env) {
  GridSpec g = config_grid(env.cfg);
  DiscreteMeasure m = config_modulated(env.cfg, config_base_measure(env.cfg, g));
  DecayFit fit = estimate_decay(m);

  CsvWriter csv({"annulus_log2_center", "annulus_max", "fit_residual"});
  for (size_t i = 0; i < fit.annulus_center.size(); ++i) {
    double resid = std::log2(fit.annulus_max[i]) -
                   (-fit.alpha_hat * fit.annulus_center[i] + fit.intercept);
    csv.row({fit.annulus_center[i], fit.annulus_max[i], resid});
  }
  csv.save(env.out + "/decay.csv");

  env.manifest["grid"] = {{"n", g.n}, {"K", g.K}, {"s", g.s}};
  env.manifest["alpha_hat"] = fit.alpha_hat;
  env.manifest["fit_residual_rms"] = fit.residual;
  env.manifest["xi_window"] = {fit.xi_lo, fit.xi_hi};
  env.manifest["annuli"] = fit.annulus_center.size();

  std::string kind = env.cfg.str("measure.kind", "circle");
  bool curved = kind == "circle" || kind == "projected-circle";
  double lo = env.cfg.real("checks.alpha_lo", curved ? 0.40 : -1e300);
  double hi = env.cfg.real("checks.alpha_hi", curved ? 0.60 : 1e300);
  env.checks.record("decay.alpha_band", fit.alpha_hat >= lo && fit.alpha_hat <= hi,
                    json{{"alpha_hat", fit.alpha_hat}, {"lo", lo}, {"hi", hi}});
  double rmax = env.cfg.real("checks.residual_max", 0.15);
  env.checks.record("decay.residual", fit.residual <= rmax,
                    json{{"residual", fit.residual}, {"max", rmax}});
  finish_run(env, "decay");
}

inline void run_improving(RunEnv& env) {
  GridSpec g = config_grid(env.cfg);
  DiscreteMeasure m = config_modulated(env.cfg, config_base_measure(env.cfg, g));
  ExponentPair exps = config_exponents(env.cfg);
  int trials = int(env.cfg.integer("battery.trials", 24));
  auto table = improving_norm_table(g, m, exps.p, exps.q, trials, env.seed);
  double best = 0.0;
  CsvWriter csv({"trial", "ratio"});
  for (size_t i = 0; i < table.size(); ++i) {
    best = std::max(best, table[i]);
    csv.row({double(i), table[i]});
  }
  csv.save(env.out + "/improving.csv");
  env.manifest["grid"] = {{"n", g.n}, {"K", g.K}, {"s", g.s}};
  env.manifest["p"] = exps.p;
  env.manifest["q"] = exps.q;
  env.manifest["estimate"] = best;
  env.manifest["trials"] = table.size();
  env.checks.record("improving.positive", best > 0.0, json{{"estimate", best}});
  finish_run(env, "improving");
}

inline GridFunction random_in_box(const GridSpec& g, const Box& b, Rng& rng,
                                  bool nonneg) {
  GridFunction f(g);
  for (int64_t c : cells_of_box(g, b)) {
    double v = rng.uniform(-1.0, 1.0);
    f.v[size_t(c)] = nonneg ? std::fabs(v) : v;
  }
  return f;
}

inline void run_sparse_certify(RunEnv& env) {
  GridSpec g = config_grid(env.cfg);
  DiscreteMeasure base = config_base_measure(env.cfg, g);
  Config& cfg = env.cfg;
  if (!cfg.has("measure.density")) cfg.kv["measure.density"] = "x1";
  DiscreteMeasure mu = config_modulated(cfg, base);
  DiscreteMeasure sigma = base;
  ExponentPair exps = config_exponents(cfg);
  EpsilonSigns eps = config_epsilon(cfg, env.seed);
  OperatorKind kind = cfg.str("kind", "singular") == "maximal"
                          ? OperatorKind::maximal
                          : OperatorKind::singular;
  int weight_exp = int(cfg.integer("slice_weight_exponent", 4));
  DyadicCube Q0{int(cfg.integer("cube.level", 0)),
                {cfg.integer("cube.corner_x", 0), cfg.integer("cube.corner_y", 0)}};
  int pairs = int(cfg.integer("battery.pairs", 3));
  if (pairs < 1) throw config_error("battery.pairs must be >= 1");

  DecayFit fit = estimate_decay(sigma);
  Box q0box = box_of(g, Q0), q3box = dilate_box(g, Q0, 3);

  json ratios = json::array(), Ds = json::array(), depths = json::array();
  double c_max = 0.0, form_plus0 = 0.0, form_plain0 = 0.0;
  bool all_sparse = true, all_union = true;
  for (int i = 0; i < pairs; ++i) {
    Rng rng(env.seed, uint64_t(i));
    GridFunction f1 = random_in_box(g, q0box, rng, false);
    GridFunction f2 = random_in_box(g, q3box, rng, kind == OperatorKind::maximal);
    SparseCertificate cert =
        certify_bound(f1, f2, mu, sigma, eps, exps, Q0, kind, weight_exp);
    all_sparse = all_sparse && cert.sparsity_ok;
    all_union = all_union && cert.union_ok;
    c_max = std::max(c_max, cert.ratio);
    ratios.push_back(cert.ratio);
    Ds.push_back(cert.trace.nodes.empty() ? 0.0 : cert.trace.nodes.front().D);
    depths.push_back(cert.trace.max_depth);
    if (i == 0) {
      form_plus0 = cert.form;
      SparseCollection plain = cert.col;
      Accum pf;
      for (const auto& ent : plain.entries)
        pf.add(cube_volume(g, ent.Q) * local_p_average(f1, ent.Q, exps.p) *
               local_p_average(f2, dilate_box(g, ent.Q, 3), exps.q_prime()));
      form_plain0 = pf.value();
      json cj = certificate_to_json(cert);
      cj["alpha_hat"] = fit.alpha_hat;
      cj["l2_threshold_coeff"] = fit.alpha_hat / 2.0;
      cj["seed"] = env.seed;
      write_json(env.out + "/certificate.json", cj);
      write_json(env.out + "/inputs.json",
                 sparse_inputs_json(f1, f2, mu, sigma, eps, exps, Q0, kind, weight_exp));
    }
  }

  env.manifest["grid"] = {{"n", g.n}, {"K", g.K}, {"s", g.s}};
  env.manifest["alpha_hat"] = fit.alpha_hat;
  env.manifest["kind"] = kind_name(kind);
  env.manifest["pairs"] = pairs;
  env.manifest["ratios"] = ratios;
  env.manifest["C_max"] = c_max;
  env.manifest["D_values"] = Ds;
  env.manifest["max_depths"] = depths;
  env.manifest["form_plus"] = form_plus0;
  env.manifest["form_plain"] = form_plain0;

  env.checks.record("sparse.sparsity", all_sparse);
  env.checks.record("sparse.union", all_union);
  env.checks.record("sparse.ratio_finite", std::isfinite(c_max), json{{"C_max", c_max}});
  env.checks.record("sparse.plus_dominates_plain",
                    form_plus0 >= form_plain0 * (1.0 - 1e-12),
                    json{{"plus", form_plus0}, {"plain", form_plain0}});
  finish_run(env, "sparse-certify");
}

inline void run_scalespace(RunEnv& env) {
  GridSpec g = config_grid(env.cfg);
  Config& cfg = env.cfg;
  if (!cfg.has("measure.density")) cfg.kv["measure.density"] = "x1";
  DiscreteMeasure base = config_base_measure(cfg, g);
  DiscreteMeasure mu = config_modulated(cfg, base);
  EpsilonSigns eps = config_epsilon(cfg, env.seed);
  int k_min = int(cfg.integer("scalespace.k_min", -3));
  RegularizerFamily fam = build_regularizers(g, k_min);
  int k_lo = int(cfg.integer("scalespace.k_lo", k_min));
  int k_hi = int(cfg.integer("scalespace.k_hi", 0));
  if (k_lo < k_min || k_hi > 0 || k_lo > k_hi)
    throw config_error("scalespace k range must lie in [k_min, 0]");

  DecayFit fit = estimate_decay(base);

  // exact partition of unity over a frequency sample
  double partition_dev = 0.0;
  {
    Rng rng(env.seed, 1001);
    for (int t = 0; t < 100; ++t) {
      double rho = std::exp(rng.uniform(std::log(1e-3), std::log(double(g.u))));
      Accum s;
      s.add(fam.tilde_hat(rho));
      for (int k = fam.k_min; k <= 0; ++k) s.add(fam.piece_hat(k, rho));
      s.add(fam.remainder_hat(rho));
      partition_dev = std::max(partition_dev, std::fabs(s.value() - 1.0));
    }
  }

  auto l2 = l2_decay_curve(g, mu, eps, fam, k_lo, k_hi);
  std::vector<double> ks, lognorms;
  for (const auto& pt : l2) {
    ks.push_back(pt.k);
    lognorms.push_back(std::log2(std::max(pt.value, 1e-300)));
  }
  LineFit l2fit = fit_line(ks, lognorms);
  CsvWriter l2csv({"k", "value", "fit_residual"});
  for (size_t i = 0; i < l2.size(); ++i)
    l2csv.row({l2[i].k, l2[i].value, l2fit.residuals[i]});
  l2csv.save(env.out + "/l2_curve.csv");

  auto battery = l1_test_battery(g);
  auto lambdas = dyadic_lambdas(-10, 10);
  auto wk = weak_l1_growth_curve(g, mu, eps, fam, k_lo, k_hi, battery, lambdas);
  std::vector<double> onemk, wvals;
  double wmax = 0.0;
  for (const auto& pt : wk) {
    onemk.push_back(1.0 - pt.k);
    wvals.push_back(pt.value);
    wmax = std::max(wmax, pt.value);
  }
  LineFit wfit = fit_line(onemk, wvals);
  double slack = 0.0;
  for (double r : wfit.residuals) slack = std::max(slack, std::fabs(r));
  slack = wmax > 0.0 ? slack / wmax : 0.0;
  CsvWriter wcsv({"k", "value", "fit_residual"});
  for (size_t i = 0; i < wk.size(); ++i)
    wcsv.row({wk[i].k, wk[i].value, wfit.residuals[i]});
  wcsv.save(env.out + "/weakl1_curve.csv");

  // telescoping against the assembled operator on a random test function
  double telescope_dev = 0.0;
  {
    Rng rng(env.seed, 1002);
    GridFunction f(g);
    for (auto& v : f.v) v = rng.uniform(-1.0, 1.0);
    GridFunction total = tilde_operator(f, mu, eps, fam);
    for (int k = fam.k_min; k <= 0; ++k) {
      GridFunction piece = piece_operator_Tk(f, mu, eps, fam, k);
      for (size_t i = 0; i < total.v.size(); ++i) total.v[i] += piece.v[i];
    }
    GridFunction rem = remainder_operator(f, mu, eps, fam);
    for (size_t i = 0; i < total.v.size(); ++i) total.v[i] += rem.v[i];
    GridFunction direct = radon_T(f, mu, eps);
    for (size_t i = 0; i < total.v.size(); ++i)
      telescope_dev = std::max(telescope_dev, std::fabs(total.v[i] - direct.v[i]));
  }

  env.manifest["grid"] = {{"n", g.n}, {"K", g.K}, {"s", g.s}};
  env.manifest["alpha_hat"] = fit.alpha_hat;
  env.manifest["l2_slope"] = l2fit.slope;
  env.manifest["l2_slope_over_alpha"] =
      fit.alpha_hat != 0.0 ? l2fit.slope / fit.alpha_hat : 0.0;
  env.manifest["weakl1_envelope_slack"] = slack;
  env.manifest["weakl1_fit"] = {{"slope", wfit.slope}, {"intercept", wfit.intercept}};
  env.manifest["telescope_dev"] = telescope_dev;
  env.manifest["partition_dev"] = partition_dev;
  env.manifest["k_range"] = {k_lo, k_hi};

  env.checks.record("scalespace.partition", partition_dev <= 1e-12,
                    json{{"dev", partition_dev}});
  env.checks.record("scalespace.telescope", telescope_dev <= 1e-8,
                    json{{"dev", telescope_dev}});
  double band = env.cfg.real("checks.slope_band", 0.30);
  bool slope_ok = ks.size() < 4 ||
                  (fit.alpha_hat > 0.0 &&
                   std::fabs(l2fit.slope - fit.alpha_hat) <= band * fit.alpha_hat);
  env.checks.record("scalespace.l2_slope_band", slope_ok,
                    json{{"slope", l2fit.slope}, {"alpha_hat", fit.alpha_hat}});
  double smax = env.cfg.real("checks.weakl1_slack", 0.20);
  env.checks.record("scalespace.weakl1_envelope", slack <= smax,
                    json{{"slack", slack}, {"max", smax}});
  finish_run(env, "scalespace");
}

inline void run_llogl(RunEnv& env) {
  GridSpec g = config_grid(env.cfg);
  Config& cfg = env.cfg;
  if (!cfg.has("measure.density")) cfg.kv["measure.density"] = "x1";
  DiscreteMeasure mu = config_modulated(cfg, config_base_measure(cfg, g));
  EpsilonSigns eps = config_epsilon(cfg, env.seed);
  double r = cfg.real("llogl.r", 5.0);

  GridFunction f(g);
  f.v[0] = 1.0 / g.cell_volume();  // unit-mass cell
  GridFunction Tf = radon_T(f, mu, eps);
  auto lambdas = dyadic_lambdas(-10, 10);
  auto table = weak_llogl_ratios(Tf, f, lambdas, r);

  CsvWriter csv({"lambda", "ratio"});
  double rmax = 0.0;
  bool finite = true;
  for (const auto& [lam, ratio] : table) {
    csv.row({lam, ratio});
    rmax = std::max(rmax, ratio);
    finite = finite && std::isfinite(ratio);
  }
  csv.save(env.out + "/llogl.csv");

  env.manifest["grid"] = {{"n", g.n}, {"K", g.K}, {"s", g.s}};
  env.manifest["r"] = r;
  env.manifest["max_ratio"] = rmax;
  env.checks.record("llogl.finite", finite, json{{"max_ratio", rmax}});
  finish_run(env, "llogl");
}

}  // namespace detail

// Execute a config, honoring CLI overrides.  Exit codes: 0 success, 2 config
// problem, 3 guard violation, 4 failed check.
inline RunOutcome run_config(const std::string& config_path,
                             const std::string& out_override = "",
                             int64_t seed_override = -1, int threads_override = -1) {
  auto t0 = std::chrono::steady_clock::now();
  detail::RunEnv env;
  std::string experiment;
  try {
    env.cfg = load_config(config_path);
    if (!out_override.empty()) env.cfg.kv["out"] = out_override;
    if (seed_override >= 0) env.cfg.kv["seed"] = std::to_string(seed_override);
    if (threads_override >= 0) env.cfg.kv["threads"] = std::to_string(threads_override);
    detail::validate_keys(env.cfg);
    experiment = env.cfg.require("experiment");
    env.out = env.cfg.require("out");
    env.seed = uint64_t(env.cfg.integer("seed", 0));
    env.threads = int(env.cfg.integer("threads", 0));
    if (env.threads < 0) throw config_error("threads must be >= 0");
    if (env.threads > 0) worker_threads() = env.threads;
    env.hash = fnv1a(env.cfg.hash_text());

    if (experiment == "decay")
      detail::run_decay(env);
    else if (experiment == "improving")
      detail::run_improving(env);
    else if (experiment == "sparse-certify")
      detail::run_sparse_certify(env);
    else if (experiment == "scalespace")
      detail::run_scalespace(env);
    else if (experiment == "llogl")
      detail::run_llogl(env);
    else
      throw config_error("unknown experiment: " + experiment);
  } catch (const config_error& e) {
    return {2, std::string("config error: ") + e.what()};
  } catch (const check_failure& e) {
    auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                  std::chrono::steady_clock::now() - t0)
                  .count();
    atomic_write(env.out + "/timing.log",
                 "wall_time_ms " + std::to_string(ms) + "\n");
    return {4, std::string("check failed: ") + e.what()};
  } catch (const guard_error& e) {
    return {3, std::string("guard violation: ") + e.what()};
  } catch (const json::exception& e) {
    return {2, std::string("config error: ") + e.what()};
  } catch (const std::exception& e) {
    // unreadable config / measure file and similar input problems
    return {2, std::string("config error: ") + e.what()};
  }
  auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                std::chrono::steady_clock::now() - t0)
                .count();
  atomic_write(env.out + "/timing.log", "wall_time_ms " + std::to_string(ms) + "\n");
  return {0, "ok: " + experiment};
}

// Offline certificate re-check.  Exit 0 iff the certificate re-derives.
inline RunOutcome run_reverify(const std::string& cert_path,
                               const std::string& inputs_path) {
  try {
    json cert = read_json(cert_path);
    json inputs = read_json(inputs_path);
    ReverifyReport rep = reverify(cert, inputs);
    if (rep.pass) return {0, "certificate re-derived: ok"};
    std::string msg = "reverify failed:";
    if (!rep.structure_match) msg += " structure-mismatch";
    if (!rep.sparsity_ok) msg += " sparsity";
    if (!rep.union_ok) msg += " union";
    if (rep.pairing_rel > 1e-8)
      msg += " pairing_rel=" + format_g17(rep.pairing_rel);
    if (rep.form_rel > 1e-8) msg += " form_rel=" + format_g17(rep.form_rel);
    if (rep.ratio_rel > 1e-8) msg += " ratio_rel=" + format_g17(rep.ratio_rel);
    if (!rep.detail.empty()) msg += " (" + rep.detail + ")";
    return {4, msg};
  } catch (const guard_error& e) {
    return {3, std::string("guard violation: ") + e.what()};
  } catch (const std::exception& e) {
    return {2, std::string("reverify input error: ") + e.what()};
  }
}

}  // namespace radonlab
