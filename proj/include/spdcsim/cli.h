#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "spdcsim/config.h"
#include "spdcsim/report.h"

namespace spdc {

enum class Command { design, sweep, rates, pol, hom, lo_hom, tof, report };

Command parse_command(const std::string& name);
std::string to_string(Command command);

/// One output file, named relative to the output directory.
struct Artifact {
  std::string name;
  std::string content;
};
using Artifacts = std::vector<Artifact>;

// Intermediate results, also used by the report and the Python bindings.

struct RatesOutcome {
  OperatingPoint operating_point;
  double mu_per_mW = 0.0;
  double modes_K = 1.0;
  RatePrediction predicted;            // over the integration time
  RatePrediction predicted_simulated;  // over the simulated duration
  double simulated_singles_s = 0.0;
  double simulated_singles_i = 0.0;
  CoincidenceCount simulated_coincidences{};
  HeraldedEfficiency simulated_H{};
};

struct PolOutcome {
  PolarizationModel model;
  double V[4];       // exact, in H V D A order
  Visibility V_sampled[4];  // from the sampled curves at the configured peak counts
  BasisCalibration calibration;
};

struct HomPowerPoint {
  HeraldKind herald;
  double power_mW;
  double mu;
  std::uint64_t pulses;
  HomResult result;
};

struct HomOutcome {
  std::vector<HomPowerPoint> points;
  LineFit fit_quasi_pnr{};
  LineFit fit_single_click{};
  HomResult dip;  // at the dip power, quasi-PNR herald
};

struct LoOutcome {
  std::vector<double> powers_mW;
  std::vector<PowerPoint> points;
  LineFit fit{};
  LoHomResult dip;  // at the highest power
};

struct TofOutcome {
  TofHistogram histogram;
  ReconstructedJsi reconstruction;
  double K_true = 0.0;
  double K_reconstructed = 0.0;
  double K_jitter_only = 0.0;  // infinite-count histogram with detector jitter
  double total_variation = 0.0;
};

DesignResult run_design(const ExperimentConfig& config);
RatesOutcome run_rates(const ExperimentConfig& config, const DesignResult& design);
PolOutcome run_pol(const ExperimentConfig& config);
HomOutcome run_hom(const ExperimentConfig& config, const DesignResult& design, const RatesOutcome& rates);
LoOutcome run_lo(const ExperimentConfig& config, const DesignResult& design, const RatesOutcome& rates);
TofOutcome run_tof(const ExperimentConfig& config, const DesignResult& design);

ReportTable design_rows(const DesignResult& design);
ReportTable build_report(const ExperimentConfig& config);

/// Runs a subcommand and returns its artifacts without touching the file system.
Artifacts execute(Command command, const ExperimentConfig& config);

/// Full command-line entry point. Returns the process exit status: 0 success, 2 configuration
/// error (including bad flags and unwritable output), 3 numerical-validation error.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace spdc
