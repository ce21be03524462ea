#pragma once

#include <complex>
#include <vector>

#include "spdcsim/common.h"
#include "spdcsim/phasematch.h"

namespace spdc {

/// Uniform frequency axis nu_k = center + (k - n/2) * span / n.
struct FrequencyGrid {
  double center_frequency = 0.0;  // Hz
  double span = 0.0;              // Hz
  std::size_t n_points = 0;

  double step() const { return span / static_cast<double>(n_points); }
  double frequency(std::size_t k) const {
    return center_frequency + (static_cast<double>(k) - 0.5 * static_cast<double>(n_points)) * step();
  }
  double wavelength(std::size_t k) const { return frequency_to_wavelength(frequency(k)); }
};

FrequencyGrid make_grid(double center_frequency, double span, std::size_t n_points);

/// 1024 points spanning 8x the FWHM (in frequency) around the center wavelength.
FrequencyGrid default_grid(double center_wavelength, double fwhm_wavelength);

enum class PulseShape { gaussian, sech2, custom };

struct PulseEnvelope {
  FrequencyGrid grid;
  std::vector<std::complex<double>> amplitude;  // sum |a|^2 dnu = 1
  double center_wavelength = 0.0;               // m
  PulseShape shape = PulseShape::custom;

  std::vector<double> frequencies() const;
  std::vector<double> wavelengths() const;
  std::vector<double> intensity() const;
  double norm() const;  // sum |a|^2 dnu
};

struct DispersionSpec {
  double gdd = 0.0;  // s^2
  double tod = 0.0;  // s^3
};

/// Intensity profile of the requested shape with the requested FWHM in wavelength and
/// spectral phase gdd/2 (omega - omega0)^2. Rejects grids narrower than 2x the FWHM.
PulseEnvelope make_envelope(PulseShape shape, double center_wavelength, double fwhm_wavelength,
                            double gdd, const FrequencyGrid& grid);

/// Normalized envelope from arbitrary samples.
PulseEnvelope make_custom_envelope(const FrequencyGrid& grid, std::vector<std::complex<double>> amplitude,
                                   double center_wavelength);

/// Multiplies by exp(i (gdd/2 dw^2 + tod/6 dw^3)) with dw = omega - omega0.
PulseEnvelope apply_dispersion(const PulseEnvelope& envelope, const DispersionSpec& dispersion);

/// Delta nu = c Delta lambda / lambda0^2. Rejects Delta lambda >= lambda0 / 2.
double bandwidth_convert(double center_wavelength, double fwhm_wavelength);

double spectral_fwhm_frequency(const PulseEnvelope& envelope);
double spectral_fwhm_wavelength(const PulseEnvelope& envelope);

struct TimeBandwidth {
  double duration_fwhm;   // s, intensity FWHM of the time-domain pulse
  double bandwidth_fwhm;  // Hz
  double tbp;
};

/// Duration from a 16x zero-padded FFT of the spectral amplitude.
TimeBandwidth time_bandwidth(const PulseEnvelope& envelope);

/// Transform-limited time-bandwidth products: 2 ln2 / pi and (2 acosh sqrt2)^2 / pi^2.
double transform_limited_tbp(PulseShape shape);

/// Ratio of intensity-autocorrelation FWHM to pulse FWHM (sqrt 2 and 1.543).
double autocorrelation_factor(PulseShape shape);

/// Pulse duration implied by an autocorrelation trace width.
inline double deconvolve_autocorrelation(double autocorrelation_fwhm, PulseShape shape) {
  return autocorrelation_fwhm / autocorrelation_factor(shape);
}

/// Gaussian broadening law dt = dt0 sqrt(1 + (4 ln2 gdd / dt0^2)^2).
double gaussian_broadened_duration(double transform_limited_duration, double gdd);

/// Inverse of the broadening law: |gdd| that stretches dt0 to dt. Rejects dt < dt0.
double gaussian_gdd_from_duration(double transform_limited_duration, double duration);

/// Non-negative gdd for which time_bandwidth(envelope with added gdd) reaches the target duration.
double solve_gdd_for_duration(const PulseEnvelope& envelope, double target_duration);

/// Effective grating-pair GDD for a defocused Martinez telescope. The pair separation is
/// 2 x defocus; the total scales with n_passes / 2 and is odd in the defocus sign.
double grating_stretcher_gdd(double groove_density, double incidence_angle, double defocus,
                             int n_passes, double wavelength);

enum class SlitEdge { hard, gaussian };

struct SlitResult {
  PulseEnvelope envelope;
  double transmitted_fraction;
};

/// Spectral slit with passband defined in wavelength. A gaussian edge has intensity
/// transmission exp(-4 ln2 (lambda - lambda_c)^2 / w^2).
SlitResult slit_filter(const PulseEnvelope& envelope, double center_wavelength, double passband_fwhm,
                       SlitEdge edge);

/// Passband width that yields the target output FWHM (wavelength), by bisection.
double solve_slit_width(const PulseEnvelope& envelope, double center_wavelength, double target_fwhm,
                        SlitEdge edge);

struct ShgResult {
  PulseEnvelope envelope;
  double fwhm_wavelength;  // m
};

/// Undepleted-pump second-harmonic spectrum A(Omega) = sum_nu a(nu) a(Omega - nu) PMF(dk).
/// The output grid has the input step and is centered at twice the input center frequency.
ShgResult shg_convert(const PulseEnvelope& envelope, const CrystalSpec& shg_crystal);

/// The same conversion with the phase-matching function set to one.
ShgResult shg_autoconvolution(const PulseEnvelope& envelope);

}  // namespace spdc
