#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>

#include <Eigen/Dense>

#include "spdcsim/counting.h"
#include "spdcsim/jsa.h"

namespace spdc {

/// One dispersive arm of the spectrometer. Arrival time inside the frame is
/// frame / 2 + dispersion * (lambda - reference_wavelength).
struct TofSpec {
  double dispersion = 1360e-12 / 1e-9;  // s per m of wavelength (1360 ps/nm)
  double insertion_loss = 0.4988;       // fraction lost in the arm (3 dB)
  double reference_wavelength = 1550e-9;
  double frame = 10e-9;  // s
};

void validate(const TofSpec& spec);

/// Noise-free arrival time of a photon of the given wavelength.
double arrival_time(const TofSpec& spec, double wavelength);

/// Real JSI on a wavelength grid, rows indexed by the channel-1 photon.
struct JointIntensity {
  JointGrid grid;
  Eigen::MatrixXd values;
};

JointIntensity intensity_of(const JointAmplitude& jsa);

/// Exchanges the arms: the idler axis becomes channel 1.
JointIntensity swap_arms(const JointIntensity& jsi);

inline constexpr std::size_t kTofBins = 128;

struct TofHistogram {
  Eigen::MatrixXd counts;  // rows: channel 1 time bins, cols: channel 2
  double frame = 10e-9;
  std::uint64_t events = 0;    // pairs generated
  std::uint64_t recorded = 0;  // pairs with both photons detected
  std::uint64_t seed = 0;

  std::size_t bins_1() const { return static_cast<std::size_t>(counts.rows()); }
  std::size_t bins_2() const { return static_cast<std::size_t>(counts.cols()); }
  double bin_width_1() const { return frame / static_cast<double>(counts.rows()); }
  double bin_width_2() const { return frame / static_cast<double>(counts.cols()); }
  double center_1(std::size_t k) const { return (static_cast<double>(k) + 0.5) * bin_width_1(); }
  double center_2(std::size_t k) const { return (static_cast<double>(k) + 0.5) * bin_width_2(); }
};

/// Forward simulation. Each pair is drawn from the JSI (uniform inside its grid cell), mapped to
/// arrival times, blurred by each detector's Gaussian jitter, thinned by arm loss and detector
/// efficiency, and histogrammed over the frame. Events pushed past a frame edge by jitter wrap
/// into the neighbouring frame position.
TofHistogram simulate_tof(const JointIntensity& jsi, const TofSpec& spec_1, const TofSpec& spec_2,
                          const DetectorModel& det_1, const DetectorModel& det_2, std::uint64_t n_events,
                          std::uint64_t seed, std::size_t bins = kTofBins);

/// Probability per time bin for zero jitter: each grid cell spread uniformly over its time interval.
Eigen::MatrixXd expected_histogram(const JointIntensity& jsi, const TofSpec& spec_1, const TofSpec& spec_2,
                                   std::size_t bins = kTofBins);

/// Infinite-count limit of simulate_tof: the zero-jitter histogram blurred by each channel's
/// wrapped Gaussian jitter. Efficiency and loss only scale the counts and drop out.
Eigen::MatrixXd expected_histogram(const JointIntensity& jsi, const TofSpec& spec_1, const TofSpec& spec_2,
                                   const DetectorModel& det_1, const DetectorModel& det_2,
                                   std::size_t bins = kTofBins);

/// Wavelength grid whose cells map one-to-one onto the time bins.
JointGrid matched_grid(const TofSpec& spec_1, const TofSpec& spec_2, std::size_t bins = kTofBins);

struct ReconstructedJsi {
  JointIntensity jsi;     // normalized to unit sum, wavelengths ascending
  Eigen::MatrixXd sigma;  // Poisson per bin, same normalization
};

ReconstructedJsi reconstruct_jsi(const TofHistogram& histogram, const TofSpec& spec_1, const TofSpec& spec_2);

/// 0.5 * sum |p - q| after normalizing both to unit sum.
double total_variation(const Eigen::MatrixXd& p, const Eigen::MatrixXd& q);

struct SwapCalibration {
  double reference_wavelength_1;  // corrected specs for the two channels
  double reference_wavelength_2;
  double reflection_time_1;  // s, arrival time at which the channel sees nu_pump / 2
  double reflection_time_2;
  bool higher_frequency_on_1;  // axis assignment in histogram_ab
  double residual;             // mirror-match total variation
};

/// Absolute wavelength calibration from a measurement and its arm-swapped repeat. On each
/// channel the photon centroids of the two runs sit symmetrically about nu_pump / 2. The
/// nominal specs supply dispersion and the starting reference wavelengths.
SwapCalibration swap_calibrate(const TofHistogram& histogram_ab, const TofHistogram& histogram_swapped,
                               const TofSpec& nominal_1, const TofSpec& nominal_2, double pump_wavelength);

/// "t1_ps,t2_ps,counts" rows after a header comment.
void write_histogram(std::ostream& out, const TofHistogram& histogram, const std::string& header);

}  // namespace spdc
