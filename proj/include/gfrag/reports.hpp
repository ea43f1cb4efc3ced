#pragma once

#include <json.hpp>
#include <string>
#include <utility>
#include <vector>

#include "gfrag/scenario.hpp"

namespace gfrag {

// All report serialization funnels through ordered_json so key order (and
// therefore the emitted bytes) is deterministic for identical inputs.
using Json = nlohmann::ordered_json;

Json to_json(const RegimeReport& r);
Json to_json(const DeschReport& d);
Json to_json(const EtaEstimate& e);
Json to_json(const ThresholdReport& t);
Json to_json(const SublevelVerdict& v);
Json to_json(const IrreducibilityReport& r);
Json to_json(const ApplicabilityReport& r);
Json to_json(const EigenReport& r);   // summary; node vectors go to CSV
Json to_json(const AEGReport& r);
Json to_json(const VApplyInfo& info);

// Writes content to path atomically-ish (temp file + rename); throws
// std::runtime_error on I/O failure.
void write_text_file(const std::string& path, const std::string& content);

// CSV with a fixed schema: line 1 "# schema_version=1", line 2 the header.
// All numbers print as %.17g so repeated runs emit identical bytes.
class CsvWriter {
 public:
  CsvWriter(std::string path, const std::vector<std::string>& columns);
  void row(const std::vector<double>& values);
  // Writes the accumulated file; invalid to call row() afterwards.
  void close();
  const std::string& path() const { return path_; }

 private:
  std::string path_;
  std::string buf_;
  size_t ncols_;
  bool closed_ = false;
};

std::string format_g17(double v);

// Minimal line-plot SVG (one polyline per series, shared axes, legend).
// Purely presentational; nothing downstream parses these.
struct SvgSeries {
  std::string label;
  std::vector<std::pair<double, double>> points;
};
void write_svg_lines(const std::string& path, const std::string& title,
                     const std::string& x_label, const std::string& y_label,
                     const std::vector<SvgSeries>& series);

}  // namespace gfrag
