#pragma once

#include <complex>
#include <optional>
#include <string>
#include <vector>

#include "spdcsim/common.h"

namespace spdc {

enum class Material { KTP, LN_MgO };

/// Principal dielectric axis a wave is polarized along. For MgO:LN, z is the
/// extraordinary axis and y the ordinary one.
enum class Axis { y, z };

enum class ApodizationKind { none, gaussian_duty_cycle };

/// Which quantity the apodization FWHM describes. `nonlinearity` treats the FWHM as the
/// width of g(z) itself; `duty_cycle` treats it as the width of the duty-cycle ramp D(z)
/// with g = sin(pi D).
enum class ApodizationWidthOf { nonlinearity, duty_cycle };

struct Apodization {
  ApodizationKind kind = ApodizationKind::none;
  double fwhm = 0.0;  // m
  ApodizationWidthOf width_of = ApodizationWidthOf::nonlinearity;
};

struct PolarizationAssignment {
  Axis pump = Axis::y;
  Axis signal = Axis::y;
  Axis idler = Axis::z;
};

/// Periodically poled crystal. The quasi-phase-matching term enters the mismatch as
/// -qpm_order * 2 pi / poling_period, so the sign of qpm_order selects which grating
/// vector direction compensates the material mismatch.
struct CrystalSpec {
  Material material = Material::KTP;
  double length = 0.0;         // m
  double poling_period = 0.0;  // m, +inf for an unpoled crystal
  double temperature = 298.15; // K
  Apodization apodization;
  PolarizationAssignment axes;
  int qpm_order = 1;
};

void validate(const CrystalSpec& crystal);

struct NonlinearityProfile {
  std::vector<double> z;           // m, uniform over [0, L]
  std::vector<double> g;           // peak-normalized effective nonlinearity
  std::vector<double> duty_cycle;  // D(z) with g = sin(pi D)
};

struct WavelengthRange {
  double min;
  double max;
};

/// Sellmeier validity window (m) for a material.
WavelengthRange sellmeier_range(Material material);

/// Refractive index from the pinned Sellmeier fits:
///   KTP y: Koenig & Wong (2004); KTP z: Kato & Takaoka (2002);
///   KTP thermo-optic: Emanueli & Arie (2003), referenced to 25 C;
///   MgO:LN (5 mol%) o/e: Gayer et al. (2008), temperature-dependent.
double refractive_index(Material material, Axis axis, double wavelength, double temperature);

/// Wavevector 2 pi n / lambda in 1/m.
double wavevector(Material material, Axis axis, double wavelength, double temperature);

/// Group index n - lambda dn/dlambda, by central differences.
double group_index(Material material, Axis axis, double wavelength, double temperature);

/// Wavevector mismatch k_p - k_s - k_i - qpm_order 2 pi / Lambda for a down-conversion
/// event. The pump wavelength follows from energy conservation.
double delta_k(const CrystalSpec& crystal, double signal_wavelength, double idler_wavelength);

NonlinearityProfile nonlinearity_profile(const CrystalSpec& crystal, std::size_t n_samples = 513);

/// Phase-matching function (1/L) * integral_0^L g(z) exp(i dk (z - L/2)) dz.
/// The phase reference is the crystal center, so symmetric profiles give a real result.
/// Quadrature is Filon-Simpson (piecewise-quadratic g, exact oscillatory weights) with
/// dz <= L/512 and dk * dz < pi/4. For second-harmonic generation the same mismatch
/// applies with the two fundamental photons on the signal and idler axes.
std::complex<double> pmf(const CrystalSpec& crystal, double dk);

/// Quadrature over a fixed, caller-supplied profile. Rejects steps too coarse for dk.
std::complex<double> pmf(const NonlinearityProfile& profile, double dk);

/// Tabulated phase-matching function for bulk evaluation over a known dk range.
class PmfTable {
 public:
  PmfTable(const CrystalSpec& crystal, double dk_min, double dk_max, std::size_t n = 8193);
  std::complex<double> operator()(double dk) const;

 private:
  double dk_min_;
  double step_;
  std::vector<std::complex<double>> values_;
};

enum class DegeneracyParameter { temperature, poling_period };

struct DegeneracySolution {
  double value;      // K or m depending on the parameter
  double residual;   // |dk| at the solution, 1/m
  CrystalSpec crystal;  // input crystal with the solved value applied
};

/// Solves dk(2 lambda_p, 2 lambda_p) = 0 by bisection inside [lo, hi]. The default
/// bracket is 273.15-473.15 K for temperature and +/-20% of the current period.
DegeneracySolution degeneracy_solve(const CrystalSpec& crystal, double pump_wavelength,
                                    DegeneracyParameter parameter,
                                    std::optional<double> lo = std::nullopt,
                                    std::optional<double> hi = std::nullopt);

std::string to_string(Material m);
std::string to_string(Axis a);

}  // namespace spdc
