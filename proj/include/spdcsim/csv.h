#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "spdcsim/jsa.h"
#include "spdcsim/tof.h"

namespace spdc {

std::string version();

/// 64-bit FNV-1a.
std::uint64_t fnv1a(std::string_view data);
std::string hex64(std::uint64_t value);

/// First line of every emitted CSV.
struct ArtifactHeader {
  std::string command;
  std::string config_hash;
  std::uint64_t seed = 0;
};
std::string header_comment(const ArtifactHeader& header);

/// Shortest-roundtrip-stable text for a double ("%.10g").
std::string fmt(double value);

/// Column-oriented CSV builder. Cells are stored as text so output is byte-stable.
class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> columns);
  CsvTable& row(std::vector<std::string> cells);
  std::size_t size() const { return rows_.size(); }
  void write(std::ostream& out, const ArtifactHeader& header) const;
  std::string str(const ArtifactHeader& header) const;

 private:
  std::vector<std::string> columns_;
  std::vector<std::vector<std::string>> rows_;
};

/// "signal_nm,idler_nm,re,im" per grid point.
void write_jsa(std::ostream& out, const JointAmplitude& jsa, const ArtifactHeader& header);
/// "signal_nm,idler_nm,jsi" per grid point.
void write_jsi(std::ostream& out, const JointGrid& grid, const Eigen::MatrixXd& jsi, const ArtifactHeader& header);

}  // namespace spdc
