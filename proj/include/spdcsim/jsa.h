#pragma once

#include <complex>
#include <vector>

#include <Eigen/Dense>

#include "spdcsim/phasematch.h"
#include "spdcsim/spectra.h"

namespace spdc {

/// Signal x idler wavelength axes, each uniform and strictly increasing.
struct JointGrid {
  std::vector<double> signal;  // m
  std::vector<double> idler;   // m

  double signal_step() const { return signal[1] - signal[0]; }
  double idler_step() const { return idler[1] - idler[0]; }
  bool same_as(const JointGrid& other) const;
};

JointGrid make_joint_grid(double signal_center, double signal_span, std::size_t n_signal, double idler_center,
                          double idler_span, std::size_t n_idler);

/// f(lambda_s, lambda_i) with rows indexed by signal. Sum |f|^2 dls dli = 1.
struct JointAmplitude {
  JointGrid grid;
  Eigen::MatrixXcd f;

  Eigen::MatrixXd jsi() const;
};

struct BuildOptions {
  bool unity_pmf = false;       // replace the phase-matching function by 1
  bool check_coverage = true;   // reject grids that capture < 99% of the JSI
};

/// f = alpha(nu_s + nu_i) PMF(dk(lambda_s, lambda_i)), L2-normalized. The pump amplitude is
/// interpolated linearly in magnitude and unwrapped phase, and is zero off its grid.
JointAmplitude build_jsa(const PulseEnvelope& pump, const CrystalSpec& crystal, const JointGrid& grid,
                         const BuildOptions& options = {});

/// Normalizes an arbitrary matrix on a grid into a JointAmplitude.
JointAmplitude make_joint_amplitude(const JointGrid& grid, Eigen::MatrixXcd f);

struct Marginals {
  std::vector<double> signal;  // row sums of |f|^2 dli
  std::vector<double> idler;   // column sums of |f|^2 dls
  double signal_fwhm;          // m
  double idler_fwhm;           // m
};

Marginals marginals(const JointAmplitude& jsa);

enum class SourceKind { amplitude, intensity };

struct SchmidtDecomposition {
  Eigen::VectorXd singular_values;  // descending, sum of squares = 1
  double K = 1.0;                   // 1 / sum lambda^4
  double purity = 1.0;              // 1 / K
  Eigen::MatrixXcd signal_modes;    // columns, on the signal axis
  Eigen::MatrixXcd idler_modes;     // columns, on the idler axis
};

/// Schmidt decomposition of an amplitude matrix.
SchmidtDecomposition schmidt(const Eigen::MatrixXcd& f, bool with_modes = false);

/// Schmidt analysis of a JointAmplitude, or of the square root of its JSI for SourceKind::intensity.
SchmidtDecomposition schmidt(const JointAmplitude& jsa, SourceKind kind = SourceKind::amplitude,
                             bool with_modes = false);

/// Schmidt analysis of a measured intensity matrix via elementwise sqrt. Rejects negative entries.
SchmidtDecomposition schmidt_intensity(const Eigen::MatrixXd& jsi, bool with_modes = false);

/// Reduced density matrix of the heralded signal photon, rho = F F^dagger with the idler traced out.
/// Normalized so that its trace is 1.
Eigen::MatrixXcd reduced_signal_density(const JointAmplitude& jsa);

/// Re Tr[rho_A U(tau) rho_B U(tau)^dagger], with U the signal delay phase exp(i omega tau).
/// The balanced-splitter coincidence probability is (1 - V) / 2.
double heralded_hom_overlap(const JointAmplitude& a, const JointAmplitude& b, double delay);
/// Same, from precomputed reduced densities on the signal axis of grid.
double heralded_hom_overlap(const Eigen::MatrixXcd& rho_a, const Eigen::MatrixXcd& rho_b, const JointGrid& grid,
                            double delay);

/// Normalized complex autocorrelation of the signal marginal spectrum at a delay.
std::complex<double> marginal_autocorrelation(const JointAmplitude& jsa, double delay);

/// A down-conversion source: pump pulse parameters and crystal.
struct SourceDesign {
  double pump_wavelength = 775 * kNm;
  double pump_fwhm = 0.6 * kNm;
  double pump_gdd = 0.0;
  PulseShape pump_shape = PulseShape::gaussian;
  CrystalSpec crystal;
  bool solve_degeneracy = true;  // tune the crystal temperature to degeneracy first
  std::size_t grid_points = 256;
  double grid_span = 0.0;        // m per axis; 0 selects 8x the larger marginal FWHM
};

struct DesignResult {
  JointAmplitude jsa;
  CrystalSpec crystal;  // after the degeneracy solve
  PulseEnvelope pump;
  Marginals marginals;
  SchmidtDecomposition schmidt;
};

DesignResult design_jsa(const SourceDesign& design);

/// Grid used by design_jsa, after any automatic span selection.
JointGrid design_grid(const SourceDesign& design, const CrystalSpec& solved_crystal);

enum class SweepParameter { pump_fwhm, pump_gdd, apodization_fwhm };

struct SweepRow {
  double value;
  double K;
  double signal_fwhm;
  double idler_fwhm;
};

struct SweepResult {
  std::vector<SweepRow> rows;
  std::size_t best = 0;  // index of the smallest K
};

/// K and marginal widths across parameter values on the base design's grid.
SweepResult purity_sweep(const SourceDesign& base, SweepParameter parameter, const std::vector<double>& values);

/// Evenly spaced values from lo to hi inclusive.
std::vector<double> linspace(double lo, double hi, std::size_t steps);

}  // namespace spdc
