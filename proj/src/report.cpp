#include "spdcsim/report.h"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace spdc {

void ReportTable::add(std::string metric, std::string unit, double computed, double published, double uncertainty,
                      double tolerance, std::string citation) {
  if (citation.empty()) throw std::logic_error("report row '" + metric + "' needs a citation");
  ReportRow r{std::move(metric), std::move(unit), computed, published, uncertainty, tolerance, std::move(citation),
              false};
  r.pass = std::isfinite(computed) && std::abs(computed - published) <= tolerance;
  rows_.push_back(std::move(r));
}

std::size_t ReportTable::failures() const {
  return static_cast<std::size_t>(std::count_if(rows_.begin(), rows_.end(), [](const ReportRow& r) { return !r.pass; }));
}

std::string ReportTable::csv(const ArtifactHeader& header) const {
  CsvTable t({"metric", "unit", "computed", "published", "published_uncertainty", "tolerance", "result", "citation"});
  for (const auto& r : rows_)
    t.row({r.metric, r.unit, fmt(r.computed), fmt(r.published), fmt(r.published_uncertainty), fmt(r.tolerance),
           r.pass ? "pass" : "fail", "\"" + r.citation + "\""});
  return t.str(header);
}

std::string ReportTable::text() const {
  std::size_t w_metric = 6, w_unit = 4, w_cite = 8;
  for (const auto& r : rows_) {
    w_metric = std::max(w_metric, r.metric.size());
    w_unit = std::max(w_unit, r.unit.size());
    w_cite = std::max(w_cite, r.citation.size());
  }
  auto pad = [](const std::string& s, std::size_t w) { return s + std::string(w > s.size() ? w - s.size() : 0, ' '); };
  auto num = [](double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%12.6g", x);
    return std::string(buf);
  };
  std::string out = pad("metric", w_metric) + "  " + pad("unit", w_unit) + "  " + "    computed" + "   published" +
                    "   +/-        " + "  tolerance" + "  result  citation\n";
  for (const auto& r : rows_) {
    out += pad(r.metric, w_metric) + "  " + pad(r.unit, w_unit) + "  " + num(r.computed) + num(r.published) + "   " +
           num(r.published_uncertainty) + num(r.tolerance) + "  " + (r.pass ? "pass  " : "FAIL  ") + "  " + r.citation +
           "\n";
  }
  char tail[64];
  std::snprintf(tail, sizeof tail, "%zu of %zu rows within tolerance\n", rows_.size() - failures(), rows_.size());
  return out + tail;
}

}  // namespace spdc
