#include "gfrag/reports.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace gfrag {
namespace {

// JSON numbers round-trip bit-exactly through nlohmann's shortest-repr
// printer, but +-inf/nan do not exist in JSON; encode them as strings.
Json num(double v) {
  if (std::isfinite(v)) return v;
  if (std::isnan(v)) return "nan";
  return v > 0 ? "inf" : "-inf";
}

Json curve_json(const std::vector<std::pair<double, double>>& pts) {
  Json arr = Json::array();
  for (const auto& [a, b] : pts) arr.push_back(Json::array({num(a), num(b)}));
  return arr;
}

const char* verdict_name(TailVerdict v) {
  switch (v) {
    case TailVerdict::Convergent: return "convergent";
    case TailVerdict::Divergent: return "divergent";
    default: return "inconclusive";
  }
}

}  // namespace

Json sup_json(const SupEstimate& s) {
  return s.finite ? num(s.value) : Json("inf");
}

Json to_json(const RegimeReport& r) {
  Json j;
  j["regime"] = r.regime_name();
  j["integral_at_zero"] = verdict_name(r.lower.verdict);
  j["integral_at_infinity"] = verdict_name(r.upper.verdict);
  j["varpi"] = sup_json(r.varpi);
  j["c_tilde"] = sup_json(r.c_tilde);
  j["c_hat"] = sup_json(r.c_hat);
  j["sublinear_c"] = sup_json(r.sublinear_c);
  return j;
}

Json to_json(const DeschReport& d) {
  Json j;
  j["space"] = d.space.kind_name();
  j["alpha"] = num(d.space.alpha);
  j["ratio"] = d.ratio_name;
  j["L"] = num(d.L);
  j["satisfied"] = d.satisfied;
  j["margin"] = num(d.margin);
  j["unsatisfiable_at_zero"] = d.unsatisfiable_at_zero;
  j["alpha_low_fact"] = d.alpha_low_fact;
  j["trivially_satisfied"] = d.trivially_satisfied;
  j["bounded_rate"] = d.bounded_rate;
  Json det;
  det["plateau"] = num(d.detail.plateau);
  det["tail_fit"] = num(d.detail.tail_fit);
  det["fit_residual"] = num(d.detail.fit_residual);
  det["empty_filtration"] = d.detail.empty_filtration;
  det["inconclusive"] = d.detail.inconclusive;
  det["probe_lo"] = num(d.detail.probe_lo);
  det["probe_hi"] = num(d.detail.probe_hi);
  det["sup_curve"] = curve_json(d.detail.sup_curve);
  j["filtration"] = det;
  return j;
}

Json to_json(const EtaEstimate& e) {
  Json j;
  j["eta"] = num(e.eta);
  j["slope"] = num(e.slope);
  j["uncertainty"] = num(e.uncertainty);
  j["superpolynomial"] = e.superpolynomial;
  j["infinite_moment"] = e.infinite_moment;
  return j;
}

Json to_json(const ThresholdReport& t) {
  Json j;
  j["alpha_tilde"] = num(t.alpha_tilde);
  j["eta"] = to_json(t.eta);
  j["alpha_probes"] = curve_json(t.alpha_probes);
  return j;
}

Json to_json(const SublevelVerdict& v) {
  Json j;
  j["c"] = num(v.c);
  j["at_infinity"] = verdict_name(v.at_infinity);
  j["at_zero"] = verdict_name(v.at_zero);
  j["requires_zero_side"] = v.requires_zero_side;
  j["thin"] = v.thin;
  j["evidence"] = v.evidence;
  return j;
}

Json to_json(const IrreducibilityReport& r) {
  Json j;
  j["support_route"] = r.support_route;
  j["support_evidence"] = r.support_evidence;
  j["positivity_route"] = r.positivity_route;
  j["positivity_evidence"] = r.positivity_evidence;
  j["p_fraction"] = num(r.p_fraction);
  j["n_zero_margin"] = num(r.n_zero_margin);
  j["verdict"] = r.verdict;
  return j;
}

Json to_json(const ApplicabilityReport& r) {
  Json j;
  j["verdict"] = r.verdict;
  if (!r.failing.empty()) j["failing_hypothesis"] = r.failing;
  if (!r.banner.empty()) j["banner"] = r.banner;
  j["regime"] = to_json(r.regime);
  j["moment_ratio_condition"] = to_json(r.desch);
  j["thresholds"] = to_json(r.thresholds);
  Json thin = Json::array();
  for (const auto& v : r.thin) thin.push_back(to_json(v));
  j["thin_sublevel"] = thin;
  j["irreducibility"] = to_json(r.irreducibility);
  j["initial_tail_weight"] = num(r.tail_weight);
  j["initial_tail_ok"] = r.tail_ok;
  return j;
}

Json to_json(const EigenReport& r) {
  Json j;
  j["lambda_star"] = num(r.lambda_star);
  j["mu"] = num(r.mu);
  j["lambda_shift"] = num(r.lambda_shift);
  j["iterations"] = r.iterations;
  j["converged"] = r.converged;
  if (!r.message.empty()) j["message"] = r.message;
  j["residual_primal"] = num(r.residual_primal);
  j["residual_dual"] = num(r.residual_dual);
  return j;
}

Json to_json(const AEGReport& r) {
  Json j;
  j["epsilon_fit"] = num(r.epsilon_fit);
  j["fit_valid"] = r.fit_valid;
  j["transient_index"] = r.transient_index;
  j["post_transient_monotone"] = r.post_transient_monotone;
  j["monotone_wiggle"] = num(r.monotone_wiggle);
  j["conserved_drift"] = num(r.conserved_drift);
  j["decay_curve"] = curve_json(r.decay_curve);
  return j;
}

Json to_json(const VApplyInfo& info) {
  Json j;
  j["terms_used"] = info.terms_used;
  j["truncated"] = info.truncated;
  j["last_term_norm"] = num(info.last_term_norm);
  j["contraction"] = num(info.contraction);
  return j;
}

void write_text_file(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp);
    out << content;
    if (!out) throw std::runtime_error("short write to " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    std::remove(tmp.c_str());
    throw std::runtime_error("cannot move " + tmp + " into place");
  }
}

std::string format_g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

CsvWriter::CsvWriter(std::string path, const std::vector<std::string>& columns)
    : path_(std::move(path)), ncols_(columns.size()) {
  buf_ = "# schema_version=1\n";
  for (size_t i = 0; i < columns.size(); ++i) {
    buf_ += columns[i];
    buf_ += (i + 1 < columns.size()) ? ',' : '\n';
  }
}

void CsvWriter::row(const std::vector<double>& values) {
  if (closed_) throw std::logic_error("CsvWriter: row() after close()");
  if (values.size() != ncols_)
    throw std::logic_error("CsvWriter: column count mismatch");
  for (size_t i = 0; i < values.size(); ++i) {
    buf_ += format_g17(values[i]);
    buf_ += (i + 1 < values.size()) ? ',' : '\n';
  }
}

void CsvWriter::close() {
  if (closed_) return;
  closed_ = true;
  write_text_file(path_, buf_);
}

void write_svg_lines(const std::string& path, const std::string& title,
                     const std::string& x_label, const std::string& y_label,
                     const std::vector<SvgSeries>& series) {
  const double W = 720, H = 440, ml = 64, mr = 160, mt = 40, mb = 48;
  double xlo = 0, xhi = 1, ylo = 0, yhi = 1;
  bool first = true;
  for (const auto& s : series)
    for (const auto& [x, y] : s.points) {
      if (!std::isfinite(x) || !std::isfinite(y)) continue;
      if (first) {
        xlo = xhi = x;
        ylo = yhi = y;
        first = false;
      }
      xlo = std::min(xlo, x);
      xhi = std::max(xhi, x);
      ylo = std::min(ylo, y);
      yhi = std::max(yhi, y);
    }
  if (xhi <= xlo) xhi = xlo + 1;
  if (yhi <= ylo) yhi = ylo + 1;
  auto px = [&](double x) { return ml + (x - xlo) / (xhi - xlo) * (W - ml - mr); };
  auto py = [&](double y) { return H - mb - (y - ylo) / (yhi - ylo) * (H - mt - mb); };

  static const char* palette[] = {"#1f6fb2", "#c2483c", "#3c8c4a",
                                  "#8a5bb2", "#b2843c", "#3cb2a4"};
  std::string s;
  char line[256];
  std::snprintf(line, sizeof(line),
                "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%.0f\" "
                "height=\"%.0f\" viewBox=\"0 0 %.0f %.0f\">\n",
                W, H, W, H);
  s += line;
  s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  std::snprintf(line, sizeof(line),
                "<text x=\"%.0f\" y=\"24\" font-family=\"sans-serif\" "
                "font-size=\"15\" text-anchor=\"middle\">%s</text>\n",
                ml + (W - ml - mr) / 2, title.c_str());
  s += line;
  // axes
  std::snprintf(line, sizeof(line),
                "<path d=\"M %.1f %.1f L %.1f %.1f L %.1f %.1f\" fill=\"none\" "
                "stroke=\"#333\" stroke-width=\"1\"/>\n",
                ml, mt, ml, H - mb, W - mr, H - mb);
  s += line;
  char nbuf[224];
  std::snprintf(nbuf, sizeof(nbuf),
                "<text x=\"%.1f\" y=\"%.1f\" font-family=\"sans-serif\" "
                "font-size=\"11\" text-anchor=\"middle\">%s</text>\n",
                ml + (W - ml - mr) / 2, H - 12, x_label.c_str());
  s += nbuf;
  std::snprintf(nbuf, sizeof(nbuf),
                "<text x=\"16\" y=\"%.1f\" font-family=\"sans-serif\" "
                "font-size=\"11\" text-anchor=\"middle\" transform=\"rotate(-90 "
                "16 %.1f)\">%s</text>\n",
                mt + (H - mt - mb) / 2, mt + (H - mt - mb) / 2, y_label.c_str());
  s += nbuf;
  // extent labels
  auto tick = [&](double v, double x, double y, const char* anchor) {
    std::snprintf(nbuf, sizeof(nbuf),
                  "<text x=\"%.1f\" y=\"%.1f\" font-family=\"sans-serif\" "
                  "font-size=\"10\" text-anchor=\"%s\">%.6g</text>\n",
                  x, y, anchor, v);
    s += nbuf;
  };
  tick(xlo, ml, H - mb + 14, "middle");
  tick(xhi, W - mr, H - mb + 14, "middle");
  tick(ylo, ml - 6, H - mb + 3, "end");
  tick(yhi, ml - 6, mt + 3, "end");

  int ci = 0;
  for (const auto& sr : series) {
    const char* color = palette[ci % 6];
    std::string pts;
    for (const auto& [x, y] : sr.points) {
      if (!std::isfinite(x) || !std::isfinite(y)) continue;
      std::snprintf(nbuf, sizeof(nbuf), "%.2f,%.2f ", px(x), py(y));
      pts += nbuf;
    }
    std::snprintf(line, sizeof(line),
                  "<polyline fill=\"none\" stroke=\"%s\" stroke-width=\"1.5\" "
                  "points=\"",
                  color);
    s += line;
    s += pts;
    s += "\"/>\n";
    std::snprintf(nbuf, sizeof(nbuf),
                  "<text x=\"%.1f\" y=\"%.1f\" font-family=\"sans-serif\" "
                  "font-size=\"11\" fill=\"%s\">%s</text>\n",
                  W - mr + 10, mt + 16.0 * ci + 12, color, sr.label.c_str());
    s += nbuf;
    ++ci;
  }
  s += "</svg>\n";
  write_text_file(path, s);
}

}  // namespace gfrag
