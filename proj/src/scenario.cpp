#include "gfrag/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <map>
#include <memory>
#include <sstream>

#include "gfrag/quadrature.hpp"

namespace gfrag {
namespace {

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

struct Entry {
  std::string value;
  int line = 0;
  mutable bool used = false;
};

struct Section {
  int line = 0;
  std::map<std::string, Entry> keys;
  mutable bool used = false;
};

// Minimal strict INI: [section] headers, key = value lines, '#'/';'
// comments.  Every key must be consumed by the schema; leftovers are
// reported with their line numbers.
class Config {
 public:
  Config(const std::string& path) : path_(path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(path + ": cannot open config file");
    std::string raw;
    int ln = 0;
    std::string section;
    while (std::getline(in, raw)) {
      ++ln;
      const size_t cut = raw.find_first_of("#;");
      std::string line = trim(cut == std::string::npos ? raw : raw.substr(0, cut));
      if (line.empty()) continue;
      if (line.front() == '[') {
        if (line.back() != ']')
          fail(ln, "malformed section header '" + line + "'");
        section = trim(line.substr(1, line.size() - 2));
        if (section.empty()) fail(ln, "empty section name");
        if (!sections_.count(section)) sections_[section].line = ln;
        continue;
      }
      const size_t eq = line.find('=');
      if (eq == std::string::npos)
        fail(ln, "expected 'key = value', got '" + line + "'");
      const std::string key = trim(line.substr(0, eq));
      const std::string val = trim(line.substr(eq + 1));
      if (key.empty()) fail(ln, "missing key before '='");
      if (section.empty()) fail(ln, "key '" + key + "' outside any [section]");
      auto& sec = sections_[section];
      if (sec.keys.count(key))
        fail(ln, "duplicate key '" + key + "' in [" + section + "]");
      sec.keys[key] = Entry{val, ln, false};
    }
  }

  bool has_section(const std::string& s) const {
    auto it = sections_.find(s);
    if (it != sections_.end()) it->second.used = true;
    return it != sections_.end();
  }

  bool has(const std::string& s, const std::string& k) const {
    auto it = sections_.find(s);
    return it != sections_.end() && it->second.keys.count(k) > 0;
  }

  std::string str(const std::string& s, const std::string& k) const {
    auto it = sections_.find(s);
    if (it == sections_.end())
      throw ConfigError(path_ + ": missing required section [" + s + "]");
    it->second.used = true;
    auto jt = it->second.keys.find(k);
    if (jt == it->second.keys.end())
      throw ConfigError(path_ + ": missing required key '" + k + "' in [" +
                        s + "]");
    jt->second.used = true;
    return jt->second.value;
  }

  std::string str_or(const std::string& s, const std::string& k,
                     const std::string& dflt) const {
    return has(s, k) ? str(s, k) : dflt;
  }

  double num(const std::string& s, const std::string& k) const {
    return parse_num(s, k, str(s, k));
  }

  double num_or(const std::string& s, const std::string& k, double dflt) const {
    return has(s, k) ? num(s, k) : dflt;
  }

  // Everything the schema did not consume is a hard error.
  void check_consumed() const {
    for (const auto& [sname, sec] : sections_) {
      if (!sec.used)
        fail(sec.line, "unknown section [" + sname + "]");
      for (const auto& [kname, e] : sec.keys)
        if (!e.used)
          fail(e.line, "unknown key '" + kname + "' in [" + sname + "]");
    }
  }

  const std::string& path() const { return path_; }

 private:
  [[noreturn]] void fail(int line, const std::string& msg) const {
    throw ConfigError(path_ + ":" + std::to_string(line) + ": " + msg);
  }

  double parse_num(const std::string& s, const std::string& k,
                   const std::string& v) const {
    char* end = nullptr;
    const double x = std::strtod(v.c_str(), &end);
    if (end == v.c_str() || *end != '\0') {
      auto it = sections_.find(s);
      const int ln = it->second.keys.at(k).line;
      fail(ln, "value of '" + k + "' is not a number: '" + v + "'");
    }
    return x;
  }

  std::string path_;
  std::map<std::string, Section> sections_;
};

std::string dir_of(const std::string& path) {
  const size_t cut = path.find_last_of('/');
  return cut == std::string::npos ? std::string(".") : path.substr(0, cut);
}

std::string resolve(const std::string& base_dir, const std::string& p) {
  if (!p.empty() && p.front() == '/') return p;
  return base_dir + "/" + p;
}

// Numeric CSV reader: '#' comments, one optional header row, rows of
// `cols` comma-separated numbers.
std::vector<std::vector<double>> read_csv(const std::string& path, int cols) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path + ": cannot open data file");
  std::vector<std::vector<double>> rows;
  std::string raw;
  int ln = 0;
  bool header_allowed = true;
  while (std::getline(in, raw)) {
    ++ln;
    const size_t cut = raw.find('#');
    std::string line = trim(cut == std::string::npos ? raw : raw.substr(0, cut));
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    bool numeric = true;
    while (std::getline(ss, cell, ',')) {
      cell = trim(cell);
      char* end = nullptr;
      const double x = std::strtod(cell.c_str(), &end);
      if (end == cell.c_str() || *end != '\0') {
        numeric = false;
        break;
      }
      row.push_back(x);
    }
    if (!numeric) {
      if (header_allowed) {
        header_allowed = false;
        continue;
      }
      throw ConfigError(path + ":" + std::to_string(ln) +
                        ": non-numeric row in data file");
    }
    header_allowed = false;
    if (static_cast<int>(row.size()) != cols)
      throw ConfigError(path + ":" + std::to_string(ln) + ": expected " +
                        std::to_string(cols) + " columns, got " +
                        std::to_string(row.size()));
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ConfigError(path + ": no data rows");
  return rows;
}

GrowthRate growth_from(const Config& c, const std::string& base) {
  const std::string fam = c.str("growth", "family");
  if (fam == "constant") return GrowthRate::constant(c.num("growth", "k"));
  if (fam == "linear") return GrowthRate::linear(c.num("growth", "k"));
  if (fam == "affine") return GrowthRate::affine(c.num("growth", "k"));
  if (fam == "power")
    return GrowthRate::power(c.num("growth", "k"), c.num("growth", "p"));
  if (fam == "tabulated") {
    const auto rows = read_csv(resolve(base, c.str("growth", "file")), 2);
    std::vector<double> xs, rs;
    for (const auto& r : rows) {
      xs.push_back(r[0]);
      rs.push_back(r[1]);
    }
    return GrowthRate::tabulated(std::move(xs), std::move(rs));
  }
  throw ConfigError(c.path() + ": unknown growth family '" + fam +
                    "' (constant|linear|affine|power|tabulated)");
}

AbsorptionRate absorption_from(const Config& c, const std::string& base) {
  const std::string fam = c.str("absorption", "family");
  if (fam == "zero") return AbsorptionRate::zero();
  if (fam == "constant") return AbsorptionRate::constant(c.num("absorption", "k"));
  if (fam == "linear") return AbsorptionRate::linear(c.num("absorption", "k"));
  if (fam == "affine") return AbsorptionRate::affine(c.num("absorption", "k"));
  if (fam == "power")
    return AbsorptionRate::power(c.num("absorption", "k"),
                                 c.num("absorption", "p"));
  if (fam == "power_sum") {
    std::vector<std::pair<double, double>> terms;
    for (int i = 1; i <= 8; ++i) {
      const std::string ki = "k" + std::to_string(i);
      const std::string pi = "p" + std::to_string(i);
      if (!c.has("absorption", ki)) break;
      terms.emplace_back(c.num("absorption", ki), c.num("absorption", pi));
    }
    if (terms.empty())
      throw ConfigError(c.path() +
                        ": power_sum absorption needs k1/p1 (k2/p2, ...)");
    return AbsorptionRate::power_sum(terms);
  }
  if (fam == "tabulated") {
    const auto rows = read_csv(resolve(base, c.str("absorption", "file")), 2);
    std::vector<double> xs, as;
    for (const auto& r : rows) {
      xs.push_back(r[0]);
      as.push_back(r[1]);
    }
    return AbsorptionRate::tabulated(std::move(xs), std::move(as));
  }
  throw ConfigError(c.path() + ": unknown absorption family '" + fam +
                    "' (zero|constant|linear|affine|power|power_sum|tabulated)");
}

Kernel kernel_from(const Config& c, const std::string& base) {
  const std::string fam = c.str("kernel", "family");
  if (fam == "uniform_binary") return Kernel::uniform_binary();
  if (fam == "power_law") return Kernel::power_law(c.num("kernel", "nu"));
  if (fam == "tabulated") {
    const std::string file = resolve(base, c.str("kernel", "file"));
    const auto rows = read_csv(file, 3);  // x, y, b
    auto uniq = [](std::vector<double> v) {
      std::sort(v.begin(), v.end());
      std::vector<double> out;
      for (double x : v)
        if (out.empty() || x > out.back() * (1.0 + 1e-12)) out.push_back(x);
      return out;
    };
    std::vector<double> zall, yall;
    for (const auto& r : rows) {
      if (!(r[1] > 0.0) || !(r[0] > 0.0) || !(r[0] < r[1]))
        throw ConfigError(file + ": kernel rows need 0 < x < y");
      zall.push_back(r[0] / r[1]);
      yall.push_back(r[1]);
    }
    const auto zs = uniq(zall);
    const auto ys = uniq(yall);
    if (zs.size() * ys.size() != rows.size())
      throw ConfigError(file + ": samples do not form a full (x/y, y) grid");
    auto index = [](const std::vector<double>& v, double x) {
      auto it = std::lower_bound(v.begin(), v.end(), x * (1.0 - 1e-10));
      return static_cast<size_t>(it - v.begin());
    };
    std::vector<std::vector<double>> vals(
        ys.size(), std::vector<double>(zs.size(),
                                       std::numeric_limits<double>::quiet_NaN()));
    for (const auto& r : rows)
      vals[index(ys, r[1])][index(zs, r[0] / r[1])] = r[2];
    for (const auto& row : vals)
      for (double v : row)
        if (std::isnan(v))
          throw ConfigError(file + ": samples do not form a full (x/y, y) grid");
    return Kernel::tabulated(zs, ys, std::move(vals));
  }
  throw ConfigError(c.path() + ": unknown kernel family '" + fam +
                    "' (uniform_binary|power_law|tabulated)");
}

void initial_from(const Config& c, const std::string& base, Scenario& s) {
  const std::string kind = c.str("initial", "kind");
  char desc[128];
  if (kind == "gaussian_bump") {
    const double ctr = c.num("initial", "center");
    const double wid = c.num("initial", "width");
    if (!(wid > 0.0))
      throw ConfigError(c.path() + ": gaussian_bump needs width > 0");
    s.initial = [ctr, wid](double x) {
      const double u = (x - ctr) / wid;
      return std::exp(-0.5 * u * u);
    };
    std::snprintf(desc, sizeof(desc), "gaussian_bump(center=%g, width=%g)", ctr,
                  wid);
    s.initial_desc = desc;
  } else if (kind == "indicator") {
    const double lo = c.num("initial", "lo");
    const double hi = c.num("initial", "hi");
    if (!(lo < hi) || !(lo > 0.0))
      throw ConfigError(c.path() + ": indicator needs 0 < lo < hi");
    s.initial = [lo, hi](double x) { return (x >= lo && x <= hi) ? 1.0 : 0.0; };
    std::snprintf(desc, sizeof(desc), "indicator(%g, %g)", lo, hi);
    s.initial_desc = desc;
  } else if (kind == "exp_decay") {
    s.initial = [](double x) { return std::exp(-x); };
    s.initial_desc = "exp_decay";
  } else if (kind == "tabulated") {
    const auto rows = read_csv(resolve(base, c.str("initial", "file")), 2);
    std::vector<double> lx, v;
    for (const auto& r : rows) {
      if (!(r[0] > 0.0))
        throw ConfigError(c.path() + ": tabulated initial needs x > 0");
      lx.push_back(std::log(r[0]));
      v.push_back(r[1]);
    }
    auto itp = std::make_shared<MonotoneCubic>(std::move(lx), std::move(v));
    s.initial = [itp](double x) {
      if (!(x > 0.0)) return 0.0;
      const double s_ = std::log(x);
      if (s_ < itp->front() || s_ > itp->back()) return 0.0;
      return (*itp)(s_);
    };
    s.initial_desc = "tabulated(" + c.str("initial", "file") + ")";
  } else {
    throw ConfigError(c.path() + ": unknown initial kind '" + kind +
                      "' (gaussian_bump|indicator|exp_decay|tabulated)");
  }
}

Scenario gaussian_default(const std::string& name) {
  Scenario s;
  s.name = name;
  s.initial = [](double x) {
    const double u = (x - 1.0) / 0.2;
    return std::exp(-0.5 * u * u);
  };
  s.initial_desc = "gaussian_bump(center=1, width=0.2)";
  return s;
}

}  // namespace

Scenario Scenario::from_config(const std::string& path) {
  Config c(path);
  const std::string base = dir_of(path);
  Scenario s;
  s.name = c.str_or("scenario", "name", "scenario");

  const std::string wk = c.str("space", "weight");
  if (wk == "power")
    s.space.kind = Weight::Power;
  else if (wk == "shifted")
    s.space.kind = Weight::Shifted;
  else
    throw ConfigError(path + ": space weight must be 'power' or 'shifted'");
  s.space.alpha = c.num("space", "alpha");
  s.space.validate();

  s.x_min = c.num("grid", "x_min");
  s.x_max = c.num("grid", "x_max");
  s.grid_n = static_cast<int>(c.num("grid", "n"));
  if (!(s.x_min > 0.0) || !(s.x_max > s.x_min) || s.grid_n < 8)
    throw ConfigError(path + ": grid needs 0 < x_min < x_max and n >= 8");

  s.growth = growth_from(c, base);
  s.absorption = absorption_from(c, base);
  s.kernel = kernel_from(c, base);
  initial_from(c, base, s);

  s.tail_tol = c.num_or("run", "tail_tol", 1e-8);
  s.seed = static_cast<unsigned>(c.num_or("run", "seed", 1234));
  s.t_max = c.num_or("run", "t_max", 2.0);
  if (!(s.tail_tol > 0.0) || !(s.t_max >= 0.0))
    throw ConfigError(path + ": run needs tail_tol > 0 and t_max >= 0");

  c.check_consumed();
  return s;
}

std::vector<std::string> Scenario::builtin_names() {
  return {"exact_eigenpair", "binary_shift", "affine_growth", "selfsimilar",
          "open_problem"};
}

Scenario Scenario::builtin(const std::string& name) {
  if (name == "exact_eigenpair") {
    Scenario s;
    s.name = name;
    s.space = {Weight::Power, 2.0};
    s.growth = GrowthRate::linear(1.0);
    s.absorption = AbsorptionRate::linear(1.0);
    s.kernel = Kernel::uniform_binary();
    s.initial = [](double x) { return std::exp(-x); };
    s.initial_desc = "exp_decay";
    return s;
  }
  if (name == "binary_shift") {
    Scenario s = gaussian_default(name);
    s.space = {Weight::Shifted, 2.0};
    s.growth = GrowthRate::constant(1.0);
    s.absorption = AbsorptionRate::linear(1.0);
    s.kernel = Kernel::uniform_binary();
    return s;
  }
  if (name == "affine_growth") {
    Scenario s = gaussian_default(name);
    s.space = {Weight::Shifted, 2.0};
    s.growth = GrowthRate::affine(1.0);
    s.absorption = AbsorptionRate::linear(1.0);
    s.kernel = Kernel::uniform_binary();
    return s;
  }
  if (name == "selfsimilar") {
    Scenario s = gaussian_default(name);
    s.space = {Weight::Power, 2.0};
    s.growth = GrowthRate::linear(1.0);
    s.absorption = AbsorptionRate::power_sum({{1.0, 1.0}, {1.0, -1.0}});
    s.kernel = Kernel::uniform_binary();
    return s;
  }
  if (name == "open_problem") {
    Scenario s = gaussian_default(name);
    s.space = {Weight::Shifted, 2.0};
    s.growth = GrowthRate::linear(1.0);
    s.absorption = AbsorptionRate::linear(1.0);
    s.kernel = Kernel::uniform_binary();
    return s;
  }
  throw std::invalid_argument("unknown builtin scenario '" + name + "'");
}

RegimeReport Scenario::classify() const { return classify_regime(growth); }

GridPtr Scenario::make_grid(int n_override) const {
  return Grid::make_log(x_min, x_max, n_override > 0 ? n_override : grid_n);
}

double Scenario::initial_tail_weight() const {
  auto wf = [this](double x) { return space.weight(x) * initial(x); };
  const double core = integrate_log(wf, x_min, x_max, 256);
  if (!(core > 0.0)) return 0.0;
  const double below = integrate_log(wf, x_min * 1e-6, x_min, 48);
  const double above = integrate_log(wf, x_max, x_max * 1e4, 96);
  return (below + above) / core;
}

GridFunction Scenario::initial_datum(const GridPtr& g) const {
  const double tail = initial_tail_weight();
  if (tail > tail_tol) {
    char buf[160];
    std::snprintf(buf, sizeof(buf),
                  "initial datum leaves relative weighted mass %.3g outside "
                  "[%g, %g], above tail_tol %.3g; enlarge the window",
                  tail, x_min, x_max, tail_tol);
    throw std::invalid_argument(buf);
  }
  return GridFunction::sample(g, initial);
}

ApplicabilityReport applicability(const Scenario& s) {
  ApplicabilityReport rep;
  rep.regime = classify_regime(s.growth);
  rep.desch = desch_condition(s.kernel, s.absorption, s.space);
  rep.thresholds = threshold_report(s.kernel, s.absorption, s.space.kind);
  rep.thin = thin_sublevel_check(s.absorption, s.growth, rep.regime,
                                 {1.0, 10.0, 100.0});
  rep.irreducibility = irreducibility_report(s.kernel, s.absorption);
  rep.tail_weight = s.initial_tail_weight();
  rep.tail_ok = rep.tail_weight <= s.tail_tol;

  auto thin_at_inf = [&] {
    for (const auto& v : rep.thin)
      if (v.at_infinity != TailVerdict::Convergent) return false;
    return true;
  };
  auto thin_at_zero = [&] {
    for (const auto& v : rep.thin)
      if (v.at_zero != TailVerdict::Convergent) return false;
    return true;
  };

  const char* fail = nullptr;
  std::string detail;
  if (s.space.kind == Weight::Shifted) {
    if (rep.regime.regime != Regime::PartlySingular) {
      fail = "regime/space mismatch";
      detail = std::string(rep.regime.regime_name()) +
               " growth with the (1+x)^alpha weight is outside the certified "
               "case";
    } else if (!rep.regime.sublinear_c.finite) {
      fail = "growth not sublinear";
      detail = "sup r(x)/(1+x) is not finite";
    } else if (!rep.desch.satisfied) {
      char b[96];
      std::snprintf(b, sizeof(b), "moment-ratio condition fails (L = %.6g)",
                    rep.desch.L);
      fail = "moment-ratio condition";
      detail = b;
    } else if (!thin_at_inf()) {
      fail = "sublevel set not thin";
      detail = "integral of 1_{a<c}/r diverges toward infinity";
    } else if (!rep.irreducibility.verdict) {
      fail = "irreducibility";
      detail = "no irreducibility route certified";
    } else {
      rep.verdict = "Thm-Main-result";
    }
  } else {
    if (rep.regime.regime != Regime::FullySingular) {
      fail = "regime/space mismatch";
      detail = std::string(rep.regime.regime_name()) +
               " growth with the x^alpha weight is outside the certified case";
    } else if (!rep.regime.varpi.finite) {
      fail = "growth not linearly bounded";
      detail = "sup r(x)/x is not finite";
    } else if (!rep.desch.satisfied) {
      char b[96];
      std::snprintf(b, sizeof(b), "moment-ratio condition fails (L = %.6g)",
                    rep.desch.L);
      fail = "moment-ratio condition";
      detail = b;
    } else if (!thin_at_inf()) {
      fail = "sublevel set not thin";
      detail = "integral of 1_{a<c}/r diverges toward infinity";
    } else if (!thin_at_zero()) {
      fail = "sublevel set not thin";
      detail = "integral of 1_{a<c}/r diverges toward zero";
    } else if (!rep.irreducibility.verdict) {
      fail = "irreducibility";
      detail = "no irreducibility route certified";
    } else {
      rep.verdict = "Thm-Main-result-Bis";
    }
  }

  if (rep.verdict.empty()) {
    rep.verdict = "none";
    rep.failing = std::string(fail) + ": " + detail;
    rep.banner =
        "NO THEOREM APPLIES: asynchronous exponential growth is not "
        "certified for this configuration (" +
        rep.failing + "); results are exploratory";
  }
  return rep;
}

}  // namespace gfrag
