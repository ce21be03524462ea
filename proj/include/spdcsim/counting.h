#pragma once

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <string>
#include <vector>

namespace spdc {

struct DetectorModel {
  double efficiency = 1.0;   // system detection efficiency of the detector itself
  double dark_rate = 0.0;    // counts/s
  double jitter_fwhm = 0.0;  // s, Gaussian
  double dead_time = 0.0;    // s, non-paralyzable
  bool number_resolving = false;
};

void validate(const DetectorModel& det);

struct SourceStats {
  double mu = 0.0;        // mean pairs per pulse
  double modes_K = 1.0;   // effective thermal modes; infinity selects Poisson
  double eta_signal = 1.0;
  double eta_idler = 1.0;
  double rep_rate = 100e6;          // Hz
  double power_calibration = 0.0;   // mean pairs per pulse per mW; 0 if uncalibrated
};

void validate(const SourceStats& source);

/// Multimode thermal photon-pair number distribution P(0..n_max).
/// n_max = 0 picks the smallest cutoff whose tail mass is below 1e-9.
std::vector<double> pair_dist(double mu, double modes_K, std::size_t n_max = 0);

/// Threshold-detector click probability for n-pair distribution dist, arm transmission
/// and detector, with dark counts integrated over gate seconds.
double click_prob(const std::vector<double>& dist, double transmission, const DetectorModel& det, double gate);

struct HeraldedEfficiency {
  double H;
  double sigma;
};

/// H = C / sqrt(S_s S_i); sigma from independent Poisson C and uncorrelated singles.
HeraldedEfficiency heralded_efficiency(double C, double S_s, double S_i);

struct RatePrediction {
  double singles_s = 0.0;         // counts in the integration time, after dead time
  double singles_i = 0.0;
  double coincidences = 0.0;
  double H_predicted = 0.0;
  double pairs_per_s_per_mW = 0.0;  // coincidence rate per pump mW, 0 without a power calibration
  double pump_power_mW = 0.0;
  bool saturated = false;
  std::string warning;
};

inline constexpr double kDefaultCoincidenceWindow = 1e-9;

/// Analytic singles and coincidences per integration time, with dead-time correction
/// R_obs = R / (1 + R tau) and jitter loss inside the coincidence window.
RatePrediction predict_rates(const SourceStats& source, const DetectorModel& det_s, const DetectorModel& det_i,
                             double integration, double window = kDefaultCoincidenceWindow);

double g2_unheralded(double modes_K);

/// Pairs per pulse per mW such that predicted coincidences at power_mW equal
/// pairs_per_s_per_mW * power_mW. Only mu of the source is varied.
double calibrate_power(const SourceStats& source, const DetectorModel& det_s, const DetectorModel& det_i,
                       double pairs_per_s_per_mW, double power_mW, double window = kDefaultCoincidenceWindow);

struct OperatingPoint {
  double mu;
  double eta_signal;
  double eta_idler;
};

/// Finds mu and arm transmissions with equal total efficiency per arm that reproduce a measured
/// coincidence rate and heralded efficiency, detector effects included.
OperatingPoint fit_operating_point(const SourceStats& base, const DetectorModel& det_s, const DetectorModel& det_i,
                                   double coincidence_rate, double H, double window = kDefaultCoincidenceWindow);

struct TimeTagStream {
  int channel = 0;
  std::vector<double> times;  // s, non-decreasing
  double duration = 0.0;
  std::uint64_t seed = 0;
};

struct PairSourceSetup {
  SourceStats source;
  DetectorModel det_s;
  DetectorModel det_i;
};

inline constexpr std::size_t kPulsesPerBlock = std::size_t{1} << 20;

/// Monte Carlo acquisition of the signal (channel 1) and idler (channel 2) detectors.
/// Blocks of pulses draw from independent streams derived from (seed, block), so the
/// output does not depend on the worker count.
std::vector<TimeTagStream> simulate_timetags(const PairSourceSetup& setup, double duration, std::uint64_t seed);

/// Removes events closer than dead_time to the previous kept event. times must be sorted.
void apply_dead_time(std::vector<double>& times, double dead_time);

struct CoincidenceCount {
  double C;
  double sigma;
};

/// Two-pointer match of |t_a - t_b - offset| <= window / 2, each event used at most once.
CoincidenceCount coincidences(const TimeTagStream& a, const TimeTagStream& b, double window, double offset = 0.0);

/// Tab-separated "channel\ttime_ps" lines, merged over channels in time order, after a
/// header comment carrying the seed and config hash.
void write_timetags(std::ostream& out, const std::vector<TimeTagStream>& streams, const std::string& config_hash);

}  // namespace spdc
