#include "spdcsim/jsa.h"

#include <algorithm>
#include <sstream>

#include <Eigen/SVD>

namespace spdc {

namespace {

std::vector<double> uniform_axis(double center, double span, std::size_t n) {
  if (n < 4) throw InvalidInput("joint grid axes need at least 4 points");
  if (!(span > 0.0) || !(center > 0.5 * span)) throw InvalidInput("joint grid span must be positive and below 2x the center");
  std::vector<double> axis(n);
  const double step = span / static_cast<double>(n - 1);
  for (std::size_t k = 0; k < n; ++k) axis[k] = center - 0.5 * span + step * static_cast<double>(k);
  return axis;
}

// Linear interpolation of a pulse envelope in magnitude and unwrapped phase.
class PumpInterpolator {
 public:
  explicit PumpInterpolator(const PulseEnvelope& pump) : grid_(pump.grid) {
    const std::size_t n = pump.amplitude.size();
    magnitude_.resize(n);
    phase_.resize(n);
    double prev = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      magnitude_[k] = std::abs(pump.amplitude[k]);
      double ph = std::arg(pump.amplitude[k]);
      if (k > 0) {
        while (ph - prev > kPi) ph -= 2.0 * kPi;
        while (ph - prev < -kPi) ph += 2.0 * kPi;
      }
      phase_[k] = ph;
      prev = ph;
    }
  }

  std::complex<double> operator()(double frequency) const {
    const double x = (frequency - grid_.center_frequency) / grid_.step() + 0.5 * static_cast<double>(grid_.n_points);
    if (x < 0.0 || x > static_cast<double>(grid_.n_points - 1)) return {0.0, 0.0};
    const std::size_t j = std::min(static_cast<std::size_t>(x), grid_.n_points - 2);
    const double t = x - static_cast<double>(j);
    const double mag = (1.0 - t) * magnitude_[j] + t * magnitude_[j + 1];
    const double ph = (1.0 - t) * phase_[j] + t * phase_[j + 1];
    return std::polar(mag, ph);
  }

 private:
  FrequencyGrid grid_;
  std::vector<double> magnitude_;
  std::vector<double> phase_;
};

// Unnormalized JSA sample evaluator shared by the main build and the coverage check.
class JsaEvaluator {
 public:
  JsaEvaluator(const PulseEnvelope& pump, const CrystalSpec& crystal, bool unity_pmf)
      : pump_(pump), crystal_(crystal), unity_(unity_pmf) {
    if (!unity_) profile_ = nonlinearity_profile(crystal, 513);
    dz_ = unity_ ? 0.0 : profile_.z[1] - profile_.z[0];
  }

  std::complex<double> operator()(double ls, double li) const {
    const std::complex<double> alpha = pump_(kSpeedOfLight / ls + kSpeedOfLight / li);
    if (unity_ || alpha == 0.0) return alpha;
    const double dk = delta_k(crystal_, ls, li);
    const std::complex<double> phi = std::abs(dk) * dz_ < 0.25 * kPi ? pmf(profile_, dk) : pmf(crystal_, dk);
    return alpha * phi;
  }

 private:
  PumpInterpolator pump_;
  CrystalSpec crystal_;
  bool unity_;
  NonlinearityProfile profile_;
  double dz_ = 0.0;
};

// Weight outside the grid is sampled on a 4x coarser lattice over a window 3x the grid span.
void check_coverage(const JsaEvaluator& eval, const JointGrid& grid, double inside) {
  const double s0 = grid.signal.front(), s1 = grid.signal.back();
  const double i0 = grid.idler.front(), i1 = grid.idler.back();
  const double hs = 4.0 * grid.signal_step(), hi = 4.0 * grid.idler_step();
  const auto ns = static_cast<std::size_t>(std::ceil(3.0 * (s1 - s0) / hs));
  const auto ni = static_cast<std::size_t>(std::ceil(3.0 * (i1 - i0) / hi));
  const double sc = 0.5 * (s0 + s1), ic = 0.5 * (i0 + i1);
  std::vector<double> row(ns, 0.0);
  parallel_for(ns, [&](std::size_t a) {
    const double ls = sc + hs * (static_cast<double>(a) + 0.5 - 0.5 * static_cast<double>(ns));
    if (ls <= 0.0) return;
    const bool s_in = ls >= s0 && ls <= s1;
    for (std::size_t b = 0; b < ni; ++b) {
      const double li = ic + hi * (static_cast<double>(b) + 0.5 - 0.5 * static_cast<double>(ni));
      if (li <= 0.0 || (s_in && li >= i0 && li <= i1)) continue;
      row[a] += std::norm(eval(ls, li));
    }
  });
  double outside = 0.0;
  for (double r : row) outside += r;
  outside *= hs * hi;
  if (!(inside + outside > 0.0)) throw InvalidInput("build_jsa: joint spectrum vanishes on and around the grid");
  const double captured = inside / (inside + outside);
  if (captured < 0.99) {
    std::ostringstream msg;
    msg << "build_jsa: grid captures only " << 100.0 * captured
        << "% of the joint spectral weight (need >= 99%); widen or recenter the grid";
    throw InvalidInput(msg.str());
  }
}

}  // namespace

bool JointGrid::same_as(const JointGrid& other) const {
  auto close = [](const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t k = 0; k < a.size(); ++k) {
      if (std::abs(a[k] - b[k]) > 1e-9 * std::abs(a[k])) return false;
    }
    return true;
  };
  return close(signal, other.signal) && close(idler, other.idler);
}

JointGrid make_joint_grid(double signal_center, double signal_span, std::size_t n_signal, double idler_center,
                          double idler_span, std::size_t n_idler) {
  return {uniform_axis(signal_center, signal_span, n_signal), uniform_axis(idler_center, idler_span, n_idler)};
}

Eigen::MatrixXd JointAmplitude::jsi() const { return f.cwiseAbs2(); }

JointAmplitude make_joint_amplitude(const JointGrid& grid, Eigen::MatrixXcd f) {
  if (static_cast<std::size_t>(f.rows()) != grid.signal.size() || static_cast<std::size_t>(f.cols()) != grid.idler.size()) {
    throw InvalidInput("joint amplitude shape does not match the grid");
  }
  if (!f.allFinite()) throw InvalidInput("joint amplitude is not finite");
  const double norm = f.squaredNorm() * grid.signal_step() * grid.idler_step();
  if (!(norm > 0.0)) throw InvalidInput("joint amplitude is identically zero");
  f /= std::sqrt(norm);
  return {grid, std::move(f)};
}

JointAmplitude build_jsa(const PulseEnvelope& pump, const CrystalSpec& crystal, const JointGrid& grid,
                         const BuildOptions& options) {
  validate(crystal);
  const JsaEvaluator eval(pump, crystal, options.unity_pmf);
  const std::size_t ns = grid.signal.size(), ni = grid.idler.size();
  Eigen::MatrixXcd f(ns, ni);
  parallel_for(ns, [&](std::size_t a) {
    for (std::size_t b = 0; b < ni; ++b) f(a, b) = eval(grid.signal[a], grid.idler[b]);
  });
  if (options.check_coverage && !options.unity_pmf) {
    check_coverage(eval, grid, f.squaredNorm() * grid.signal_step() * grid.idler_step());
  }
  return make_joint_amplitude(grid, std::move(f));
}

Marginals marginals(const JointAmplitude& jsa) {
  const Eigen::MatrixXd j = jsa.jsi();
  Marginals m;
  m.signal.resize(j.rows());
  m.idler.resize(j.cols());
  for (Eigen::Index a = 0; a < j.rows(); ++a) m.signal[a] = j.row(a).sum() * jsa.grid.idler_step();
  for (Eigen::Index b = 0; b < j.cols(); ++b) m.idler[b] = j.col(b).sum() * jsa.grid.signal_step();
  m.signal_fwhm = fwhm_linear(jsa.grid.signal.data(), m.signal.data(), m.signal.size());
  m.idler_fwhm = fwhm_linear(jsa.grid.idler.data(), m.idler.data(), m.idler.size());
  return m;
}

SchmidtDecomposition schmidt(const Eigen::MatrixXcd& f, bool with_modes) {
  if (f.size() == 0 || !(f.squaredNorm() > 0.0)) throw InvalidInput("schmidt: matrix is empty or zero");
  const unsigned opts = with_modes ? (Eigen::ComputeThinU | Eigen::ComputeThinV) : 0u;
  Eigen::BDCSVD<Eigen::MatrixXcd> svd(f, opts);
  SchmidtDecomposition out;
  out.singular_values = svd.singularValues();
  out.singular_values /= out.singular_values.norm();
  const double sum4 = out.singular_values.array().pow(4).sum();
  out.K = 1.0 / sum4;
  out.purity = sum4;
  if (with_modes) {
    out.signal_modes = svd.matrixU();
    out.idler_modes = svd.matrixV().conjugate();
  }
  return out;
}

SchmidtDecomposition schmidt(const JointAmplitude& jsa, SourceKind kind, bool with_modes) {
  if (kind == SourceKind::amplitude) return schmidt(jsa.f, with_modes);
  return schmidt_intensity(jsa.jsi(), with_modes);
}

SchmidtDecomposition schmidt_intensity(const Eigen::MatrixXd& jsi, bool with_modes) {
  if ((jsi.array() < 0.0).any()) throw InvalidInput("schmidt: intensity matrix has negative entries");
  return schmidt(Eigen::MatrixXcd(jsi.cwiseSqrt().cast<std::complex<double>>()), with_modes);
}

Eigen::MatrixXcd reduced_signal_density(const JointAmplitude& jsa) {
  Eigen::MatrixXcd rho = jsa.f * jsa.f.adjoint();
  rho /= rho.trace().real();
  return rho;
}

double heralded_hom_overlap(const JointAmplitude& a, const JointAmplitude& b, double delay) {
  if (!a.grid.same_as(b.grid)) throw InvalidInput("heralded_hom_overlap: JSAs are on different grids");
  return heralded_hom_overlap(reduced_signal_density(a), reduced_signal_density(b), a.grid, delay);
}

double heralded_hom_overlap(const Eigen::MatrixXcd& ra, const Eigen::MatrixXcd& rb, const JointGrid& grid,
                            double delay) {
  const std::size_t n = grid.signal.size();
  if (static_cast<std::size_t>(ra.rows()) != n || static_cast<std::size_t>(rb.rows()) != n)
    throw InvalidInput("heralded_hom_overlap: density size does not match the grid");
  const double w0 = 2.0 * kPi * kSpeedOfLight / grid.signal[n / 2];
  Eigen::VectorXcd phase(n);
  for (std::size_t k = 0; k < n; ++k) {
    phase[k] = std::polar(1.0, (2.0 * kPi * kSpeedOfLight / grid.signal[k] - w0) * delay);
  }
  // Tr[rA U rB U^dagger] = sum_{s,s'} rA(s,s') U(s') rB(s',s) conj(U(s)).
  std::complex<double> acc{0.0, 0.0};
  for (Eigen::Index s = 0; s < static_cast<Eigen::Index>(n); ++s) {
    for (Eigen::Index t = 0; t < static_cast<Eigen::Index>(n); ++t) {
      acc += ra(s, t) * phase[t] * rb(t, s) * std::conj(phase[s]);
    }
  }
  return acc.real();
}

std::complex<double> marginal_autocorrelation(const JointAmplitude& jsa, double delay) {
  const Marginals m = marginals(jsa);
  const std::size_t n = m.signal.size();
  const double w0 = 2.0 * kPi * kSpeedOfLight / jsa.grid.signal[n / 2];
  std::complex<double> acc{0.0, 0.0};
  double total = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    acc += m.signal[k] * std::polar(1.0, (2.0 * kPi * kSpeedOfLight / jsa.grid.signal[k] - w0) * delay);
    total += m.signal[k];
  }
  return acc / total;
}

namespace {

CrystalSpec solved_crystal(const SourceDesign& design) {
  if (!design.solve_degeneracy) return design.crystal;
  return degeneracy_solve(design.crystal, design.pump_wavelength, DegeneracyParameter::temperature).crystal;
}

PulseEnvelope design_pump(const SourceDesign& design) {
  return make_envelope(design.pump_shape, design.pump_wavelength, design.pump_fwhm, design.pump_gdd,
                       default_grid(design.pump_wavelength, design.pump_fwhm));
}

}  // namespace

JointGrid design_grid(const SourceDesign& design, const CrystalSpec& crystal) {
  const double center = 2.0 * design.pump_wavelength;
  if (design.grid_span > 0.0) {
    return make_joint_grid(center, design.grid_span, design.grid_points, center, design.grid_span, design.grid_points);
  }
  // Coarse survey: the window is 8x the wider marginal FWHM, widened if needed until it
  // holds 99.5% of the surveyed weight. The point count grows to keep the step.
  constexpr std::size_t kSurvey = 241;
  const double survey_span = 60 * kNm;
  const JointGrid survey = make_joint_grid(center, survey_span, kSurvey, center, survey_span, kSurvey);
  BuildOptions opts;
  opts.check_coverage = false;
  const JointAmplitude coarse = build_jsa(design_pump(design), crystal, survey, opts);
  const Marginals m = marginals(coarse);
  const double base_span = 8.0 * std::max(m.signal_fwhm, m.idler_fwhm);
  const Eigen::MatrixXd w = coarse.jsi();
  const double total = w.sum();
  const std::size_t mid = kSurvey / 2;
  std::size_t half = 1;
  for (; half < mid; ++half) {
    const double inside = w.block(mid - half, mid - half, 2 * half + 1, 2 * half + 1).sum();
    if (inside >= 0.995 * total) break;
  }
  const double needed = 2.0 * static_cast<double>(half) * survey.signal_step();
  const double span = std::max(base_span, needed);
  auto points = static_cast<std::size_t>(std::ceil(static_cast<double>(design.grid_points) * span / base_span));
  points += points % 2;
  return make_joint_grid(center, span, points, center, span, points);
}

DesignResult design_jsa(const SourceDesign& design) {
  const CrystalSpec crystal = solved_crystal(design);
  const PulseEnvelope pump = design_pump(design);
  JointAmplitude jsa = build_jsa(pump, crystal, design_grid(design, crystal));
  Marginals m = marginals(jsa);
  SchmidtDecomposition s = schmidt(jsa);
  return {std::move(jsa), crystal, pump, std::move(m), std::move(s)};
}

std::vector<double> linspace(double lo, double hi, std::size_t steps) {
  if (steps < 2) throw InvalidInput("linspace needs at least 2 steps");
  std::vector<double> v(steps);
  for (std::size_t k = 0; k < steps; ++k) v[k] = lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(steps - 1);
  return v;
}

SweepResult purity_sweep(const SourceDesign& base, SweepParameter parameter, const std::vector<double>& values) {
  if (values.empty()) throw InvalidInput("purity_sweep: no sweep values");
  const CrystalSpec crystal = solved_crystal(base);
  const JointGrid grid = design_grid(base, crystal);
  SweepResult out;
  for (double v : values) {
    SourceDesign d = base;
    CrystalSpec c = crystal;
    switch (parameter) {
      case SweepParameter::pump_fwhm: d.pump_fwhm = v; break;
      case SweepParameter::pump_gdd: d.pump_gdd = v; break;
      case SweepParameter::apodization_fwhm: c.apodization.fwhm = v; break;
    }
    const JointAmplitude jsa = build_jsa(design_pump(d), c, grid);
    const Marginals m = marginals(jsa);
    out.rows.push_back({v, schmidt(jsa).K, m.signal_fwhm, m.idler_fwhm});
  }
  for (std::size_t k = 1; k < out.rows.size(); ++k) {
    if (out.rows[k].K < out.rows[out.best].K) out.best = k;
  }
  return out;
}

}  // namespace spdc
