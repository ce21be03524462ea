#pragma once

#include <array>
#include <complex>
#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "spdcsim/counting.h"
#include "spdcsim/jsa.h"

namespace spdc {

// ---------------------------------------------------------------------------
// Polarization entanglement

/// (sqrt(1+e)|HV> + e^{i phi} sqrt(1-e)|VH>) / sqrt(2) mixed with white noise.
/// Each analyzer is a half-wave plate with retardance pi + error followed by a fixed polarizer.
struct PolarizationModel {
  double phi = 0.0;                  // rad
  double amplitude_imbalance = 0.0;  // e in [-1, 1]
  double mixed_fraction = 0.0;       // weight of I/4
  double dephasing = 0.0;            // fraction of HV-VH coherence lost
  double waveplate_error_a = 0.0;    // rad of retardance error, analyzer A
  double waveplate_error_b = 0.0;    // analyzer B
};

void validate(const PolarizationModel& model);

enum class Basis { H, V, D, A };

/// Nominal analyzer angle of a basis. Angle theta passes sin(theta)|H> + cos(theta)|V>,
/// so H = 90 deg, V = 0, D = 45, A = -45.
double basis_angle(Basis basis);

Eigen::Matrix4cd density_matrix(const PolarizationModel& model);

/// Jones vector passed by an analyzer set to theta with the given retardance error.
Eigen::Vector2cd analyzer_state(double theta, double retardance_error);

/// Coincidence probability with analyzer A at theta_a and analyzer B at theta_b.
double coincidence_probability(const PolarizationModel& model, double theta_a, double theta_b);

/// Analyzer A fixed at a basis, analyzer B scanned.
std::vector<double> coincidence_curve(const PolarizationModel& model, Basis fixed_basis,
                                      const std::vector<double>& scan_angles);

enum class VisibilityKind { polarization, hom };

struct Visibility {
  double V;
  double sigma;
};

/// (C_max - C_min) / (C_max + C_min) for polarization, (C_max - C_min) / C_max for HOM.
/// sigma assumes Poisson counts.
Visibility visibility(double c_max, double c_min, VisibilityKind kind);

/// Extremes of a sampled curve. HOM dips take the mean of the two end points as C_max.
Visibility visibility(const std::vector<double>& curve, VisibilityKind kind);

/// Polarization visibility with analyzer A fixed at a basis, from the exact extremes of the B scan.
double basis_visibility(const PolarizationModel& model, Basis fixed_basis);

/// Mixed fraction that gives the target visibility in a basis, other parameters held.
double fit_mixed_fraction(PolarizationModel model, Basis basis, double target_visibility);

/// Dephasing that brings a basis down to the target visibility, other parameters held.
/// Only superposition bases respond to it.
double fit_dephasing(PolarizationModel model, Basis basis, double target_visibility);

/// rate(theta_a, theta_b) for the two analyzers.
using AnalyzerResponse = std::function<double(double, double)>;

struct BasisCalibration {
  double angle_H;  // rad, settings of analyzer B
  double angle_V;
  double angle_D;
  double angle_A;
  double naive_D;  // angle_H - 45 deg
  double naive_A;  // angle_H + 45 deg, wrapped
  double fit_residual;
};

/// Calibrates analyzer B against analyzer A held at its nominal H and V settings.
/// H minimizes and V maximizes coincidences with A at H. D and A are where the rates for
/// A at H and A at V are equal. Searches resolve 0.01 deg.
BasisCalibration calibrate_bases(const AnalyzerResponse& response);

// ---------------------------------------------------------------------------
// Fock-space oracle

struct FockOutcome {
  double p00;  // neither detector clicks
  double p10;  // only the first output clicks
  double p01;
  double p11;
  double trace;  // total probability before detection
};

/// Two single-mode inputs in the number basis on a splitter with power transmission
/// splitter_ratio, threshold detectors with efficiency on each output.
FockOutcome fock_oracle(const Eigen::MatrixXcd& state_a, const Eigen::MatrixXcd& state_b, double splitter_ratio,
                        const DetectorModel& det_c, const DetectorModel& det_d);

Eigen::MatrixXcd fock_state(std::size_t n, std::size_t cutoff);
Eigen::MatrixXcd coherent_state(double mean_photons, std::size_t cutoff);

/// Both-outputs click probability for photons in four internal modes: counts[0..1] enter port a
/// in modes 0 and 1, counts[2..3] enter port b in modes 2 and 3. gram holds the mode overlaps.
/// Threshold detectors with the given efficiencies.
double two_port_coincidence(const std::array<int, 4>& counts, const Eigen::Matrix4cd& gram, double splitter_ratio,
                            double eta_c, double eta_d);

// ---------------------------------------------------------------------------
// Successive-photon HOM

enum class HeraldKind { single_click, dual_click_quasi_pnr };
enum class HomMethod { analytic, monte_carlo };

/// Two-mode mixture weights (w1 >= w2) with w1^2 + w2^2 = purity.
std::pair<double, double> mixture_weights(double purity);

struct HomConfig {
  JointAmplitude jsa;                  // supplies the two dominant signal Schmidt modes
  std::optional<double> purity;        // overrides the JSA purity for the mode weights
  double mu = 0.01;                    // pairs per pulse
  double modes_K = 0.0;                // pair statistics; 0 uses 1 / purity
  std::vector<double> delay_grid;      // s
  HeraldKind herald = HeraldKind::dual_click_quasi_pnr;
  double splitter_ratio = 0.5;         // interfering splitter
  double pulse_spacing = 10e-9;        // s, the fixed delay arm
  double eta_signal = 1.0;             // signal arm transmission up to the interferometer outputs
  double eta_idler = 1.0;
  DetectorModel out_c{}, out_d{};      // interferometer outputs
  DetectorModel herald_a{}, herald_b{};  // idler detectors behind a 50:50 splitter
};

struct HomResult {
  std::vector<double> delays;
  std::vector<double> fourfold;  // per pulse (analytic) or counts / pulses (Monte Carlo)
  std::vector<double> counts;    // expected (analytic) or observed counts
  double V = 0.0;
  double sigma_V = 0.0;
  double purity = 0.0;           // mixture purity used
};

/// Four-fold HOM dip between photons of consecutive pulses. The earlier photon takes the long
/// arm and the later one the short arm, a factor 1/4 per attempt. Photons of the same pulse
/// share their Schmidt modes; photons of the later pulse carry the delay.
HomResult hom_experiment(const HomConfig& config, HomMethod method, std::uint64_t pulses, std::uint64_t seed);

/// Analytic fourfold probability per pulse pair at the baseline (mean of the two end delays).
double hom_baseline_rate(const HomConfig& config);

/// Delay grid spanning +/- half_width with n points.
std::vector<double> delay_grid(double half_width, std::size_t n);

/// FWHM of the single-photon HOM dip of a JSA.
double hom_dip_fwhm(const JointAmplitude& jsa);

struct PowerPoint {
  double x;  // pump power or mu
  double V;
  double sigma;
};

struct LineFit {
  double intercept;
  double slope;
  double sigma_intercept;
  double sigma_slope;
  double chi2;
};

/// Weighted least squares V = intercept + slope * x with weights 1 / sigma^2.
LineFit power_extrapolation(const std::vector<PowerPoint>& points);

// ---------------------------------------------------------------------------
// Heralded photon against a weak local oscillator

struct LoConfig {
  double mu_lo = 0.0194;           // mean LO photons per herald bin
  double mode_overlap = 1.0;       // amplitude overlap of the LO with the dominant photon mode
  double purity = 1.0;             // heralded photon purity (two-mode mixture)
  double mu_pump = 0.0;            // pairs per pulse
  double modes_K = 0.0;            // 0 uses 1 / purity
  std::size_t fock_cutoff = 6;
  double signal_transmission = 1.0;
  double eta_idler = 1.0;
  double splitter_ratio = 0.5;
  DetectorModel out_c{}, out_d{}, herald{};
  std::vector<double> delay_grid{0.0};
  std::function<double(double)> delay_overlap;  // |g(tau)|; empty means 1 everywhere
};

struct LoHomResult {
  std::vector<double> delays;
  std::vector<double> threefold;         // per herald attempt, analytic path
  std::vector<double> threefold_oracle;  // same from the truncated Fock computation
  double V = 0.0;                        // at mu_pump
  double V_zero_power = 0.0;
  double V_ideal_lo = 0.0;               // zero power and mu_lo -> 0
};

LoHomResult lo_hom(const LoConfig& config);

/// Mode overlap that yields a target zero-power visibility, other parameters held.
double solve_lo_overlap(LoConfig config, double target_V);

}  // namespace spdc
