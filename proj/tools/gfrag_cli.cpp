// gfrag: growth-fragmentation semigroup toolkit.
//
// Every subcommand loads a scenario (INI file or "builtin:<name>"), checks
// which certified result covers it, and refuses to run the heavy numerics
// when none does unless --override-verdict is passed.  Reports are written
// as JSON / CSV (optionally SVG) under --out with deterministic content;
// partial outputs are removed on failure.
//
// Exit codes: 0 success, 1 numeric failure, 2 configuration error.

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <optional>
#include <string>
#include <system_error>
#include <vector>

#include "gfrag/cache.hpp"
#include "gfrag/reports.hpp"
#include "gfrag/scenario.hpp"

using namespace gfrag;

namespace {

struct Options {
  std::string config;
  std::string out_dir = "out";
  bool override_verdict = false;
  bool svg = false;
  int grid_n = 0;          // 0 = keep scenario value
  unsigned seed = 0;
  bool seed_set = false;
  double tmax = -1.0;      // < 0 = keep scenario value
};

// Collects files written by the current command so a failure can remove
// them instead of leaving a half-finished report set behind.
class OutputSet {
 public:
  explicit OutputSet(std::string dir) : dir_(std::move(dir)) {}

  std::string path(const std::string& scenario, const char* command,
                   const char* ext) const {
    return dir_ + "/" + scenario + "_" + command + "." + ext;
  }

  void ensure_dir() const {
    std::error_code ec;
    std::filesystem::create_directories(dir_, ec);
    if (ec) throw std::runtime_error("cannot create output dir " + dir_);
  }

  void write_json(const std::string& p, const Json& j) {
    write_text_file(p, j.dump(2) + "\n");
    written_.push_back(p);
  }

  void record(const std::string& p) { written_.push_back(p); }

  void discard() noexcept {
    for (const auto& p : written_) std::remove(p.c_str());
    written_.clear();
  }

  void announce() const {
    for (const auto& p : written_) std::printf("wrote %s\n", p.c_str());
  }

 private:
  std::string dir_;
  std::vector<std::string> written_;
};

Scenario load_scenario(const Options& o) {
  if (o.config.empty()) throw ConfigError("no --config given");
  Scenario s;
  if (o.config.rfind("builtin:", 0) == 0) {
    s = Scenario::builtin(o.config.substr(8));
  } else {
    s = Scenario::from_config(o.config);
  }
  if (o.grid_n > 0) s.grid_n = o.grid_n;
  if (o.seed_set) s.seed = o.seed;
  if (o.tmax >= 0.0) s.t_max = o.tmax;
  return s;
}

// Applicability JSON, via the derived-report cache when the stored spec
// line matches the scenario exactly.
Json applicability_json(const Scenario& s) {
  const std::string spec = scenario_cache_spec(s);
  const std::string key = scenario_cache_key(s);
  std::string payload, warning;
  if (cache_load(key, "applicability", spec, payload, warning)) {
    try {
      return Json::parse(payload);
    } catch (const std::exception&) {
      warning = "cache entry " + key + ".applicability.cache is not valid "
                "JSON; rebuilding";
    }
  }
  if (!warning.empty()) std::fprintf(stderr, "warning: %s\n", warning.c_str());
  Json j = to_json(applicability(s));
  try {
    cache_store(key, "applicability", spec, j.dump());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "warning: cache store failed: %s\n", e.what());
  }
  return j;
}

// Returns the verdict string; exits (via exception) when no certified
// result covers the scenario and the user did not override.
struct VerdictRefusal : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string gate_verdict(const Scenario& s, const Json& app, bool overridden,
                         const char* cmd) {
  std::string verdict = app.value("verdict", std::string("none"));
  if (verdict != "none") return verdict;
  const std::string banner = app.value("banner", std::string());
  if (!banner.empty()) std::fprintf(stderr, "%s\n", banner.c_str());
  if (!overridden) {
    throw VerdictRefusal("no certified result covers scenario '" + s.name +
                         "'; pass --override-verdict to run '" +
                         std::string(cmd) + "' anyway");
  }
  std::fprintf(stderr,
               "proceeding with '%s' despite the verdict (--override-verdict)\n",
               cmd);
  return verdict;
}

Json envelope(const char* command, const Scenario& s,
              const std::string& verdict) {
  Json j;
  j["schema_version"] = 1;
  j["command"] = command;
  j["scenario"] = s.name;
  j["space"]["weight"] = s.space.kind == Weight::Power ? "power" : "shifted";
  j["space"]["alpha"] = s.space.alpha;
  j["grid"]["x_min"] = s.x_min;
  j["grid"]["x_max"] = s.x_max;
  j["grid"]["n"] = s.grid_n;
  j["seed"] = s.seed;
  j["t_max"] = s.t_max;
  j["tolerances"]["tail_tol"] = s.tail_tol;
  j["tolerances"]["generation_margin"] = 1e-3;
  j["tolerances"]["flow_tol_rel"] = FlowOptions{}.tol_rel;
  j["verdict"] = verdict;
  return j;
}

std::vector<double> linspace(double a, double b, int n) {
  std::vector<double> v(n);
  for (int i = 0; i < n; ++i)
    v[i] = a + (b - a) * static_cast<double>(i) / (n - 1);
  v.back() = b;
  return v;
}

TransportOperator make_transport(const Scenario& s) {
  return TransportOperator(s.growth, s.classify(), s.absorption, s.space,
                           s.make_grid());
}

EvolutionEngine make_engine(const Scenario& s, const Options& o) {
  EngineOptions eo;
  eo.override_generation = o.override_verdict;
  return EvolutionEngine(make_transport(s), s.kernel,
                         desch_condition(s.kernel, s.absorption, s.space), eo);
}

double num_or_nan(const std::optional<double>& v) {
  return v ? *v : std::numeric_limits<double>::quiet_NaN();
}

// ---------------------------------------------------------------- commands

int cmd_validate(const Options& o) {
  Scenario s = load_scenario(o);
  Json app = applicability_json(s);
  Json j = envelope("validate", s, app.value("verdict", std::string("none")));
  for (auto it = app.begin(); it != app.end(); ++it) j[it.key()] = it.value();
  OutputSet outs(o.out_dir);
  outs.ensure_dir();
  outs.write_json(outs.path(s.name, "validate", "json"), j);
  std::printf("%s\n", j.dump(2).c_str());
  return 0;  // validate reports; it never refuses
}

int cmd_characteristics(const Options& o, OutputSet& outs) {
  Scenario s = load_scenario(o);
  Json app = applicability_json(s);
  std::string verdict = gate_verdict(s, app, o.override_verdict, "characteristics");

  RegimeReport regime = s.classify();
  CharacteristicFlow flow(s.growth, regime);
  GridPtr g = s.make_grid();
  const double t = s.t_max;

  outs.ensure_dir();
  CsvWriter csv(outs.path(s.name, "characteristics", "csv"),
                {"x", "phi", "backward_t", "jacobian_t", "forward_t"});
  for (int j = 0; j < g->size(); ++j) {
    const double x = g->node(j);
    csv.row({x, flow.zero_integral(x), num_or_nan(flow.backward(x, t)),
             num_or_nan(flow.jacobian(x, t)), flow.forward(x, t)});
  }
  csv.close();
  outs.record(outs.path(s.name, "characteristics", "csv"));

  Json j = envelope("characteristics", s, verdict);
  j["t"] = t;
  j["regime"] = to_json(regime);
  if (regime.regime == Regime::PartlySingular) j["front_at_t"] = flow.front(t);
  outs.write_json(outs.path(s.name, "characteristics", "json"), j);
  return 0;
}

int cmd_transport(const Options& o, OutputSet& outs) {
  Scenario s = load_scenario(o);
  Json app = applicability_json(s);
  std::string verdict = gate_verdict(s, app, o.override_verdict, "transport");

  TransportOperator op = make_transport(s);
  GridPtr g = op.grid();
  GridFunction f0 = s.initial_datum(g);
  const double t = s.t_max;

  ApplyReport rep;
  GridFunction u0 = op.apply_U0(t, f0, &rep);
  GridFunction u = op.apply_U(t, f0);

  outs.ensure_dir();
  CsvWriter csv(outs.path(s.name, "transport", "csv"),
                {"x", "f0", "u0_t", "u_t"});
  for (int j = 0; j < g->size(); ++j)
    csv.row({g->node(j), f0.values()[j], u0.values()[j], u.values()[j]});
  csv.close();
  outs.record(outs.path(s.name, "transport", "csv"));

  NormEstimate ne = op.operator_norm_U0(t);
  Json j = envelope("transport", s, verdict);
  j["t"] = t;
  j["growth_bound"] = op.growth_bound();
  j["norm_f0"] = norm(f0, op.space());
  j["norm_u0_t"] = norm(u0, op.space());
  j["norm_u_t"] = norm(u, op.space());
  j["operator_norm_u0"]["value"] = ne.value;
  j["operator_norm_u0"]["arg"] = ne.arg;
  j["operator_norm_u0"]["at_lower_edge"] = ne.at_lower_edge;
  j["operator_norm_u0"]["at_upper_edge"] = ne.at_upper_edge;
  j["empirical_norm_u0"] = op.empirical_norm_U0(t, 100, s.seed);
  j["front_crossed"] = rep.front_crossed;
  if (rep.front_crossed) {
    j["front"] = rep.front;
    j["first_above_front"] = rep.first_above_front;
  }
  outs.write_json(outs.path(s.name, "transport", "json"), j);
  return 0;
}

int cmd_resolvent(const Options& o, OutputSet& outs) {
  Scenario s = load_scenario(o);
  Json app = applicability_json(s);
  std::string verdict = gate_verdict(s, app, o.override_verdict, "resolvent");

  TransportOperator op = make_transport(s);
  GridPtr g = op.grid();
  GridFunction f0 = s.initial_datum(g);

  const double bound = op.growth_bound();
  const double l1 = bound > 0 ? bound : bound + 1.0;
  const double l2 = bound > 0 ? 2.0 * bound : bound + 2.0;
  GridFunction r1 = op.resolvent_T(l1, f0);
  GridFunction r2 = op.resolvent_T(l2, f0);

  outs.ensure_dir();
  CsvWriter csv(outs.path(s.name, "resolvent", "csv"),
                {"x", "f0", "res_lambda1", "res_lambda2"});
  for (int j = 0; j < g->size(); ++j)
    csv.row({g->node(j), f0.values()[j], r1.values()[j], r2.values()[j]});
  csv.close();
  outs.record(outs.path(s.name, "resolvent", "csv"));

  auto slack_json = [](const SlackReport& sr) {
    Json v;
    v["lambda"] = sr.lambda;
    v["lhs"] = sr.lhs;
    v["norm_f"] = sr.norm_f;
    v["slack"] = sr.slack;
    v["argmax_node"] = sr.argmax_node;
    return v;
  };
  Json j = envelope("resolvent", s, verdict);
  j["lambda1"] = l1;
  j["lambda2"] = l2;
  j["pointwise_lambda1"] = slack_json(op.oracle_pointwise(l1, f0));
  j["pointwise_lambda2"] = slack_json(op.oracle_pointwise(l2, f0));
  j["smoothing_lambda1"] = slack_json(op.oracle_smoothing(l1, f0));
  j["smoothing_lambda2"] = slack_json(op.oracle_smoothing(l2, f0));
  outs.write_json(outs.path(s.name, "resolvent", "json"), j);
  return 0;
}

int cmd_simulate(const Options& o, OutputSet& outs) {
  Scenario s = load_scenario(o);
  Json app = applicability_json(s);
  std::string verdict = gate_verdict(s, app, o.override_verdict, "simulate");

  EvolutionEngine eng = make_engine(s, o);
  GridPtr g = eng.transport().grid();
  GridFunction f0 = s.initial_datum(g);

  std::vector<double> ts = linspace(0.0, s.t_max, 21);
  std::vector<GridFunction> snaps = eng.fv_sweep(f0, ts);

  outs.ensure_dir();
  CsvWriter csv(outs.path(s.name, "simulate", "csv"),
                {"t", "space_norm", "moment0", "moment1"});
  std::vector<std::pair<double, double>> m1_curve, norm_curve;
  for (size_t i = 0; i < ts.size(); ++i) {
    const double nv = norm(snaps[i], eng.transport().space());
    const double m0 = integrate(snaps[i]);
    const double m1 = weighted_moment(snaps[i], [](double x) { return x; });
    csv.row({ts[i], nv, m0, m1});
    m1_curve.emplace_back(ts[i], m1);
    norm_curve.emplace_back(ts[i], nv);
  }
  csv.close();
  outs.record(outs.path(s.name, "simulate", "csv"));

  VApplyInfo info;
  (void)eng.apply_V(s.t_max, f0, &info);
  Json j = envelope("simulate", s, verdict);
  j["lambda_desch"] = eng.lambda_desch();
  j["lambda_ref"] = eng.lambda_ref();
  j["cross_check_rel"] = s.t_max > 0 ? eng.cross_check(s.t_max, f0) : 0.0;
  j["duhamel"] = to_json(info);
  outs.write_json(outs.path(s.name, "simulate", "json"), j);

  if (o.svg) {
    const std::string p = outs.path(s.name, "simulate", "svg");
    write_svg_lines(p, s.name + ": evolution", "t", "value",
                    {{"space norm", norm_curve}, {"first moment", m1_curve}});
    outs.record(p);
  }
  return 0;
}

int cmd_threshold(const Options& o, OutputSet& outs) {
  Scenario s = load_scenario(o);
  Json app = applicability_json(s);
  std::string verdict = gate_verdict(s, app, o.override_verdict, "threshold");

  Json j = envelope("threshold", s, verdict);
  j["moment_ratio_condition"] = app.at("moment_ratio_condition");
  j["thresholds"] = app.at("thresholds");
  j["thin_sublevel"] = app.at("thin_sublevel");

  auto as_num = [](const Json& v) -> double {
    if (v.is_number()) return v.get<double>();
    const std::string s = v.get<std::string>();  // "inf" / "-inf" / "nan"
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    return std::numeric_limits<double>::quiet_NaN();
  };
  outs.ensure_dir();
  CsvWriter csv(outs.path(s.name, "threshold", "csv"), {"alpha", "limit"});
  for (const auto& probe : app.at("thresholds").at("alpha_probes"))
    csv.row({as_num(probe.at(0)), as_num(probe.at(1))});
  csv.close();
  outs.record(outs.path(s.name, "threshold", "csv"));
  outs.write_json(outs.path(s.name, "threshold", "json"), j);
  return 0;
}

int cmd_eigen(const Options& o, OutputSet& outs) {
  Scenario s = load_scenario(o);
  Json app = applicability_json(s);
  std::string verdict = gate_verdict(s, app, o.override_verdict, "eigen");

  EvolutionEngine eng = make_engine(s, o);
  EigenReport rep = eng.perron_eigenpair();
  if (!rep.converged)
    throw std::runtime_error("eigenpair iteration failed: " + rep.message);

  GridPtr g = eng.transport().grid();
  outs.ensure_dir();
  CsvWriter csv(outs.path(s.name, "eigen", "csv"), {"x", "f", "e"});
  std::vector<std::pair<double, double>> fc, ec;
  double emax = 0.0;
  for (int j = 0; j < g->size(); ++j)
    emax = std::max(emax, std::abs(rep.e_vec.values()[j]));
  for (int j = 0; j < g->size(); ++j) {
    const double x = g->node(j);
    csv.row({x, rep.f_vec.values()[j], rep.e_vec.values()[j]});
    fc.emplace_back(std::log10(x), rep.f_vec.values()[j]);
    if (emax > 0) ec.emplace_back(std::log10(x), rep.e_vec.values()[j] / emax);
  }
  csv.close();
  outs.record(outs.path(s.name, "eigen", "csv"));

  Json j = envelope("eigen", s, verdict);
  j["eigen"] = to_json(rep);
  outs.write_json(outs.path(s.name, "eigen", "json"), j);

  if (o.svg) {
    const std::string p = outs.path(s.name, "eigen", "svg");
    write_svg_lines(p, s.name + ": Perron pair", "log10 x", "value",
                    {{"f (primal)", fc}, {"e / max e (dual)", ec}});
    outs.record(p);
  }
  return 0;
}

int cmd_aeg(const Options& o, OutputSet& outs) {
  Scenario s = load_scenario(o);
  Json app = applicability_json(s);
  std::string verdict = gate_verdict(s, app, o.override_verdict, "aeg");

  EvolutionEngine eng = make_engine(s, o);
  EigenReport rep = eng.perron_eigenpair();
  if (!rep.converged)
    throw std::runtime_error("eigenpair iteration failed: " + rep.message);

  GridPtr g = eng.transport().grid();
  GridFunction f0 = s.initial_datum(g);
  AEGReport aeg = eng.aeg_diagnose(rep, f0, linspace(0.0, s.t_max, 25));

  outs.ensure_dir();
  CsvWriter csv(outs.path(s.name, "aeg", "csv"), {"t", "distance"});
  std::vector<std::pair<double, double>> curve;
  for (const auto& [t, d] : aeg.decay_curve) {
    csv.row({t, d});
    if (d > 0) curve.emplace_back(t, std::log10(d));
  }
  csv.close();
  outs.record(outs.path(s.name, "aeg", "csv"));

  Json j = envelope("aeg", s, verdict);
  j["eigen"] = to_json(rep);
  j["aeg"] = to_json(aeg);
  outs.write_json(outs.path(s.name, "aeg", "json"), j);

  if (o.svg) {
    const std::string p = outs.path(s.name, "aeg", "svg");
    write_svg_lines(p, s.name + ": distance to the Perron profile", "t",
                    "log10 distance", {{"decay", curve}});
    outs.record(p);
  }
  return 0;
}

int cmd_cache(const Options& o, const std::string& action) {
  Json j;
  j["schema_version"] = 1;
  j["command"] = "cache";
  j["action"] = action;
  j["dir"] = cache_directory();
  if (action == "warm") {
    Scenario s = load_scenario(o);
    Json app = to_json(applicability(s));
    const std::string key = scenario_cache_key(s);
    cache_store(key, "applicability", scenario_cache_spec(s), app.dump());
    j["scenario"] = s.name;
    j["key"] = key;
  } else if (action == "clear") {
    j["removed"] = cache_clear();
  } else {  // status
    j["entries"] = Json::array();
    for (const auto& e : cache_list()) j["entries"].push_back(e);
  }
  std::printf("%s\n", j.dump(2).c_str());
  return 0;
}

int run_command(const Options& o, int (*fn)(const Options&, OutputSet&)) {
  OutputSet outs(o.out_dir);
  try {
    int rc = fn(o, outs);
    outs.announce();
    return rc;
  } catch (const ConfigError& e) {
    outs.discard();
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const VerdictRefusal& e) {
    outs.discard();
    std::fprintf(stderr, "%s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    outs.discard();
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}

void add_common(CLI::App* sub, Options& o, bool config_required = true) {
  auto* c = sub->add_option("--config", o.config,
                            "scenario INI file, or builtin:<name>");
  if (config_required) c->required();
  sub->add_option("--out", o.out_dir, "output directory (default: out)");
  sub->add_flag("--override-verdict", o.override_verdict,
                "run even when no certified result covers the scenario");
  sub->add_flag("--svg", o.svg, "also write SVG plots");
  sub->add_option("--grid-n", o.grid_n, "override the grid resolution")
      ->check(CLI::PositiveNumber);
  sub->add_option("--seed", o.seed, "override the scenario seed")
      ->each([&o](const std::string&) { o.seed_set = true; });
  sub->add_option("--tmax", o.tmax, "override the scenario horizon")
      ->check(CLI::NonNegativeNumber);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"growth-fragmentation semigroups: transport, thresholds, "
               "evolution, and spectral diagnostics"};
  app.require_subcommand(1);

  Options o;
  auto* validate = app.add_subcommand(
      "validate", "applicability report: regime, generation condition, "
                  "thresholds, irreducibility, verdict");
  add_common(validate, o);
  auto* characteristics = app.add_subcommand(
      "characteristics", "characteristic flow: feet, jacobians, front");
  add_common(characteristics, o);
  auto* transport = app.add_subcommand(
      "transport", "transport semigroup actions and operator norms");
  add_common(transport, o);
  auto* resolvent = app.add_subcommand(
      "resolvent", "transport resolvent profiles and a priori estimate slack");
  add_common(resolvent, o);
  auto* simulate = app.add_subcommand(
      "simulate", "full evolution: moments over time plus a cross-check of "
                  "the series and finite-volume paths");
  add_common(simulate, o);
  auto* threshold = app.add_subcommand(
      "threshold", "generation condition and weight thresholds");
  add_common(threshold, o);
  auto* eigen = app.add_subcommand(
      "eigen", "Perron eigenvalue and primal/dual eigenvectors");
  add_common(eigen, o);
  auto* aeg = app.add_subcommand(
      "aeg", "asynchronous exponential growth diagnostics");
  add_common(aeg, o);

  auto* cache = app.add_subcommand("cache", "derived-report cache maintenance");
  std::string cache_action;
  cache->add_option("action", cache_action, "warm | clear | status")
      ->required()
      ->check(CLI::IsMember({"warm", "clear", "status"}));
  add_common(cache, o, /*config_required=*/false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  if (validate->parsed()) {
    // validate writes its own outputs and never gates
    try {
      return cmd_validate(o);
    } catch (const ConfigError& e) {
      std::fprintf(stderr, "config error: %s\n", e.what());
      return 2;
    } catch (const std::exception& e) {
      std::fprintf(stderr, "error: %s\n", e.what());
      return 1;
    }
  }
  if (characteristics->parsed()) return run_command(o, cmd_characteristics);
  if (transport->parsed()) return run_command(o, cmd_transport);
  if (resolvent->parsed()) return run_command(o, cmd_resolvent);
  if (simulate->parsed()) return run_command(o, cmd_simulate);
  if (threshold->parsed()) return run_command(o, cmd_threshold);
  if (eigen->parsed()) return run_command(o, cmd_eigen);
  if (aeg->parsed()) return run_command(o, cmd_aeg);
  // cache
  try {
    return cmd_cache(o, cache_action);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
