#include "spdcsim/csv.h"

#include <cstdio>
#include <ostream>
#include <sstream>

namespace spdc {

std::string version() { return SPDCSIM_VERSION; }

std::uint64_t fnv1a(std::string_view data) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string hex64(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(value));
  return buf;
}

std::string header_comment(const ArtifactHeader& h) {
  return "# spdcsim " + version() + " command=" + h.command + " config_hash=" + h.config_hash +
         " seed=" + std::to_string(h.seed);
}

std::string fmt(double value) {
  if (value == 0.0) return "0";  // folds -0
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", value);
  return buf;
}

CsvTable::CsvTable(std::vector<std::string> columns) : columns_(std::move(columns)) {}

CsvTable& CsvTable::row(std::vector<std::string> cells) {
  if (cells.size() != columns_.size()) throw std::logic_error("CsvTable: row width mismatch");
  rows_.push_back(std::move(cells));
  return *this;
}

void CsvTable::write(std::ostream& out, const ArtifactHeader& header) const {
  out << header_comment(header) << '\n';
  for (std::size_t k = 0; k < columns_.size(); ++k) out << (k ? "," : "") << columns_[k];
  out << '\n';
  for (const auto& r : rows_) {
    for (std::size_t k = 0; k < r.size(); ++k) out << (k ? "," : "") << r[k];
    out << '\n';
  }
}

std::string CsvTable::str(const ArtifactHeader& header) const {
  std::ostringstream s;
  write(s, header);
  return s.str();
}

void write_jsa(std::ostream& out, const JointAmplitude& jsa, const ArtifactHeader& header) {
  out << header_comment(header) << "\nsignal_nm,idler_nm,re,im\n";
  for (std::size_t i = 0; i < jsa.grid.signal.size(); ++i)
    for (std::size_t j = 0; j < jsa.grid.idler.size(); ++j) {
      auto v = jsa.f(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      out << fmt(jsa.grid.signal[i] / kNm) << ',' << fmt(jsa.grid.idler[j] / kNm) << ',' << fmt(v.real()) << ','
          << fmt(v.imag()) << '\n';
    }
}

void write_jsi(std::ostream& out, const JointGrid& grid, const Eigen::MatrixXd& jsi, const ArtifactHeader& header) {
  out << header_comment(header) << "\nsignal_nm,idler_nm,jsi\n";
  for (std::size_t i = 0; i < grid.signal.size(); ++i)
    for (std::size_t j = 0; j < grid.idler.size(); ++j)
      out << fmt(grid.signal[i] / kNm) << ',' << fmt(grid.idler[j] / kNm) << ','
          << fmt(jsi(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j))) << '\n';
}

}  // namespace spdc
