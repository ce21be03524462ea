#pragma once

#include <string>
#include <vector>

#include "spdcsim/csv.h"

namespace spdc {

struct ReportRow {
  std::string metric;
  std::string unit;
  double computed = 0.0;
  double published = 0.0;
  double published_uncertainty = 0.0;
  double tolerance = 0.0;  // pass when |computed - published| <= tolerance
  std::string citation;    // where the published value comes from
  bool pass = false;
};

class ReportTable {
 public:
  /// Adds a row and evaluates pass. Rejects an empty citation.
  void add(std::string metric, std::string unit, double computed, double published, double uncertainty,
           double tolerance, std::string citation);
  const std::vector<ReportRow>& rows() const { return rows_; }
  std::size_t failures() const;

  std::string csv(const ArtifactHeader& header) const;
  /// Fixed-width rendering for terminals.
  std::string text() const;

 private:
  std::vector<ReportRow> rows_;
};

}  // namespace spdc
