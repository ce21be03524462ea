#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "spdcsim/counting.h"
#include "spdcsim/interference.h"
#include "spdcsim/jsa.h"
#include "spdcsim/tof.h"

namespace spdc {

/// Physical dimension of a config value. Each has a fixed set of accepted unit suffixes;
/// values are stored in SI after conversion.
enum class Dimension {
  number,       // plain, no unit
  length,       // nm um mm cm m
  time,         // fs ps ns us ms s
  gdd,          // fs2 ps2 s2
  frequency,    // Hz kHz MHz GHz THz
  power,        // uW mW W
  temperature,  // K C
  angle,        // deg rad
  fraction,     // %
  loss,         // dB %
  dispersion,   // ps/nm s/m
  text,
  flag,         // true false
};

/// Raw key/value pairs after unit conversion, keyed by dotted path.
struct ConfigEntry {
  std::vector<double> numbers;  // SI
  std::string text;
  int line = 0;
};
using ConfigMap = std::map<std::string, ConfigEntry>;

/// Parses the sectioned key-value format. Unknown keys, malformed numbers, missing or wrong
/// units, missing required sections and missing required keys raise ConfigError with the key path.
ConfigMap parse_config(std::istream& in);

/// The four detectors by role. The HOM and LO experiments use the idler pair as heralds
/// and the signal pair as interferometer outputs.
struct DetectorSet {
  DetectorModel signal, idler, signal_2, idler_2;
};

struct RatesSettings {
  double pump_power_mW = 62.8;
  double coincidence_rate = 128600;  // measured pairs/s at pump_power_mW
  double heralded_efficiency = 0.680;
  double rep_rate = 100e6;
  double integration = 1.0;           // s
  double window = kDefaultCoincidenceWindow;
  double modes_K = 0.0;               // 0 uses the design K
  double simulate_duration = 0.1;     // s of Monte Carlo time tags
};

struct SweepSettings {
  std::vector<double> pump_fwhm;
  std::vector<double> pump_gdd;
  std::vector<double> apodization_fwhm;
};

struct PolSettings {
  PolarizationModel model;
  std::size_t scan_points = 73;  // over one analyzer turn
  double peak_counts = 10000;    // coincidences at the curve maximum, for Poisson sigmas
};

struct HomSettings {
  double purity = 0.963;
  std::vector<double> powers_mW;
  double dip_power_mW = 48.3;
  double delay_half_width = 15e-12;
  std::size_t delay_points = 41;
  HomMethod method = HomMethod::analytic;
  double baseline_counts = 2000;
  double pulse_spacing = 10e-9;
  double splitter_ratio = 0.5;
};

struct LoSettings {
  double mu_lo = 0.0194;
  double mode_overlap = 1.0;
  std::vector<double> powers_mW;
  std::size_t fock_cutoff = 6;
  double delay_half_width = 15e-12;
  std::size_t delay_points = 41;
  double splitter_ratio = 0.5;
};

struct TofSettings {
  TofSpec spec;  // both arms
  std::size_t bins = kTofBins;
  std::uint64_t events = 10000000;
};

struct ExperimentConfig {
  SourceDesign design;
  RatesSettings rates;
  SweepSettings sweep;
  DetectorSet detectors;
  PolSettings pol;
  HomSettings hom;
  LoSettings lo;
  TofSettings tof;
  std::uint64_t seed = 1;
  std::string hash;  // FNV-1a over the canonical resolved entries
};

ExperimentConfig build_config(const ConfigMap& entries);
ExperimentConfig load_config(std::istream& in);
ExperimentConfig load_config_file(const std::string& path);

/// Sorted "key = SI values" lines of a parsed config, the input to the hash.
std::string canonical_text(const ConfigMap& entries);

}  // namespace spdc
