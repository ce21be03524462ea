#include "spdcsim/spectra.h"

#include <algorithm>
#include <limits>
#include <memory>
#include <sstream>

#include <unsupported/Eigen/FFT>

namespace spdc {

namespace {

constexpr double kSech2Width = 1.762747174039086;  // 2 acosh(sqrt 2)

double shape_intensity(PulseShape shape, double x) {
  // x = (lambda - lambda0) / FWHM
  if (shape == PulseShape::gaussian) return std::exp(-4.0 * kLn2 * x * x);
  const double s = 1.0 / std::cosh(kSech2Width * x);
  return s * s;
}

void normalize(PulseEnvelope& env) {
  const double n = env.norm();
  if (!(n > 0.0) || !std::isfinite(n)) throw InvalidInput("envelope has zero or non-finite energy");
  const double scale = 1.0 / std::sqrt(n);
  for (auto& a : env.amplitude) a *= scale;
}

double fwhm_of(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.front() < x.back()) return fwhm_linear(x.data(), y.data(), x.size());
  std::vector<double> xr(x.rbegin(), x.rend());
  std::vector<double> yr(y.rbegin(), y.rend());
  return fwhm_linear(xr.data(), yr.data(), xr.size());
}

}  // namespace

FrequencyGrid make_grid(double center_frequency, double span, std::size_t n_points) {
  if (n_points < 16) throw InvalidInput("frequency grid needs at least 16 points");
  if (!(span > 0.0)) throw InvalidInput("frequency grid span must be positive");
  if (!(center_frequency > 0.5 * span)) throw InvalidInput("frequency grid extends to non-positive frequency");
  return {center_frequency, span, n_points};
}

FrequencyGrid default_grid(double center_wavelength, double fwhm_wavelength) {
  return make_grid(wavelength_to_frequency(center_wavelength),
                   8.0 * bandwidth_convert(center_wavelength, fwhm_wavelength), 1024);
}

std::vector<double> PulseEnvelope::frequencies() const {
  std::vector<double> out(grid.n_points);
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = grid.frequency(k);
  return out;
}

std::vector<double> PulseEnvelope::wavelengths() const {
  std::vector<double> out(grid.n_points);
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = grid.wavelength(k);
  return out;
}

std::vector<double> PulseEnvelope::intensity() const {
  std::vector<double> out(amplitude.size());
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = std::norm(amplitude[k]);
  return out;
}

double PulseEnvelope::norm() const {
  double s = 0.0;
  for (const auto& a : amplitude) s += std::norm(a);
  return s * grid.step();
}

PulseEnvelope make_envelope(PulseShape shape, double center_wavelength, double fwhm_wavelength, double gdd,
                            const FrequencyGrid& grid) {
  if (!(fwhm_wavelength > 0.0)) throw InvalidInput("envelope FWHM must be positive");
  if (shape == PulseShape::custom) throw InvalidInput("make_envelope: use make_custom_envelope for custom shapes");
  const double fwhm_nu = bandwidth_convert(center_wavelength, fwhm_wavelength);
  if (grid.span < 2.0 * fwhm_nu) {
    std::ostringstream msg;
    msg << "grid span " << grid.span / kTHz << " THz is narrower than 2x the envelope FWHM (" << fwhm_nu / kTHz
        << " THz)";
    throw InvalidInput(msg.str());
  }
  PulseEnvelope env;
  env.grid = grid;
  env.center_wavelength = center_wavelength;
  env.shape = shape;
  env.amplitude.resize(grid.n_points);
  for (std::size_t k = 0; k < grid.n_points; ++k) {
    const double x = (grid.wavelength(k) - center_wavelength) / fwhm_wavelength;
    env.amplitude[k] = std::sqrt(shape_intensity(shape, x));
  }
  normalize(env);
  return gdd == 0.0 ? env : apply_dispersion(env, {gdd, 0.0});
}

PulseEnvelope make_custom_envelope(const FrequencyGrid& grid, std::vector<std::complex<double>> amplitude,
                                   double center_wavelength) {
  if (amplitude.size() != grid.n_points) throw InvalidInput("custom envelope size does not match the grid");
  for (const auto& a : amplitude) {
    if (!std::isfinite(a.real()) || !std::isfinite(a.imag())) throw InvalidInput("custom envelope is not finite");
  }
  PulseEnvelope env{grid, std::move(amplitude), center_wavelength, PulseShape::custom};
  normalize(env);
  return env;
}

PulseEnvelope apply_dispersion(const PulseEnvelope& envelope, const DispersionSpec& dispersion) {
  PulseEnvelope out = envelope;
  const double w0 = 2.0 * kPi * wavelength_to_frequency(envelope.center_wavelength);
  for (std::size_t k = 0; k < out.amplitude.size(); ++k) {
    const double dw = 2.0 * kPi * envelope.grid.frequency(k) - w0;
    const double phase = 0.5 * dispersion.gdd * dw * dw + dispersion.tod * dw * dw * dw / 6.0;
    out.amplitude[k] *= std::polar(1.0, phase);
  }
  return out;
}

double bandwidth_convert(double center_wavelength, double fwhm_wavelength) {
  if (!(center_wavelength > 0.0)) throw InvalidInput("center wavelength must be positive");
  if (fwhm_wavelength < 0.0) throw InvalidInput("bandwidth must be non-negative");
  if (fwhm_wavelength >= 0.5 * center_wavelength) {
    throw InvalidInput("bandwidth too large for the narrowband conversion (>= lambda0 / 2)");
  }
  return kSpeedOfLight * fwhm_wavelength / (center_wavelength * center_wavelength);
}

double spectral_fwhm_frequency(const PulseEnvelope& envelope) {
  return fwhm_of(envelope.frequencies(), envelope.intensity());
}

double spectral_fwhm_wavelength(const PulseEnvelope& envelope) {
  // Sample values are used directly, without the nu^2 / c density Jacobian.
  return fwhm_of(envelope.wavelengths(), envelope.intensity());
}

TimeBandwidth time_bandwidth(const PulseEnvelope& envelope) {
  const std::size_t n = envelope.grid.n_points;
  const std::size_t big = 16 * n;
  std::vector<std::complex<double>> spectrum(big, {0.0, 0.0});
  // Place the centered spectrum so that index n/2 (zero offset) lands on bin 0.
  for (std::size_t k = 0; k < n; ++k) {
    const std::ptrdiff_t offset = static_cast<std::ptrdiff_t>(k) - static_cast<std::ptrdiff_t>(n / 2);
    spectrum[static_cast<std::size_t>((offset + static_cast<std::ptrdiff_t>(big)) % static_cast<std::ptrdiff_t>(big))] =
        envelope.amplitude[k];
  }
  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> field;
  fft.inv(field, spectrum);
  const double dt = 1.0 / (static_cast<double>(big) * envelope.grid.step());
  std::vector<double> t(big), power(big);
  for (std::size_t j = 0; j < big; ++j) {
    const std::size_t src = (j + big / 2) % big;
    t[j] = (static_cast<double>(j) - static_cast<double>(big / 2)) * dt;
    power[j] = std::norm(field[src]);
  }
  const double peak = *std::max_element(power.begin(), power.end());
  if (power.front() > 1e-4 * peak || power.back() > 1e-4 * peak) {
    throw InvalidInput("time_bandwidth: pulse fills the time window; refine the frequency grid");
  }
  const double duration = fwhm_linear(t.data(), power.data(), big);
  const double bandwidth = spectral_fwhm_frequency(envelope);
  return {duration, bandwidth, duration * bandwidth};
}

double transform_limited_tbp(PulseShape shape) {
  if (shape == PulseShape::gaussian) return 2.0 * kLn2 / kPi;
  if (shape == PulseShape::sech2) return kSech2Width * kSech2Width / (kPi * kPi);
  throw InvalidInput("no analytic transform limit for a custom shape");
}

double autocorrelation_factor(PulseShape shape) {
  if (shape == PulseShape::gaussian) return std::sqrt(2.0);
  if (shape == PulseShape::sech2) return 1.543;
  throw InvalidInput("no autocorrelation factor for a custom shape");
}

double gaussian_broadened_duration(double transform_limited_duration, double gdd) {
  if (!(transform_limited_duration > 0.0)) throw InvalidInput("duration must be positive");
  const double r = 4.0 * kLn2 * gdd / (transform_limited_duration * transform_limited_duration);
  return transform_limited_duration * std::sqrt(1.0 + r * r);
}

double gaussian_gdd_from_duration(double transform_limited_duration, double duration) {
  if (!(transform_limited_duration > 0.0)) throw InvalidInput("duration must be positive");
  if (duration < transform_limited_duration) {
    throw InvalidInput("duration is shorter than the transform limit");
  }
  const double ratio = duration / transform_limited_duration;
  return transform_limited_duration * transform_limited_duration / (4.0 * kLn2) * std::sqrt(ratio * ratio - 1.0);
}

double solve_gdd_for_duration(const PulseEnvelope& envelope, double target_duration) {
  auto duration_at = [&](double gdd) { return time_bandwidth(apply_dispersion(envelope, {gdd, 0.0})).duration_fwhm; };
  const double d0 = duration_at(0.0);
  if (target_duration < d0) throw InvalidInput("target duration is shorter than the envelope's unchirped duration");
  // Initial bracket from the Gaussian law, then expand.
  double hi = std::max(gaussian_gdd_from_duration(d0, target_duration) * 2.0, 1e-30);
  for (int it = 0; it < 60 && duration_at(hi) < target_duration; ++it) hi *= 2.0;
  double lo = 0.0;
  for (int it = 0; it < 100; ++it) {
    const double mid = 0.5 * (lo + hi);
    (duration_at(mid) < target_duration ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

double grating_stretcher_gdd(double groove_density, double incidence_angle, double defocus, int n_passes,
                             double wavelength) {
  if (!(groove_density > 0.0) || !(wavelength > 0.0)) throw InvalidInput("grating parameters must be positive");
  if (n_passes < 0 || n_passes % 2) throw InvalidInput("number of grating passes must be even and non-negative");
  const double sin_d = wavelength * groove_density - std::sin(incidence_angle);
  if (std::abs(sin_d) >= 1.0) throw InvalidInput("first diffraction order is evanescent for this geometry");
  const double cos_d = std::sqrt(1.0 - sin_d * sin_d);
  const double separation = 2.0 * defocus;
  const double per_pair = -wavelength * wavelength * wavelength * separation * groove_density * groove_density /
                          (2.0 * kPi * kSpeedOfLight * kSpeedOfLight * cos_d * cos_d * cos_d);
  return 0.5 * n_passes * per_pair;
}

SlitResult slit_filter(const PulseEnvelope& envelope, double center_wavelength, double passband_fwhm, SlitEdge edge) {
  const double wl_c = frequency_to_wavelength(envelope.grid.center_frequency);
  const double step_wl = wl_c * wl_c * envelope.grid.step() / kSpeedOfLight;
  if (!(passband_fwhm > 2.0 * step_wl)) throw InvalidInput("slit passband must exceed two grid steps");
  PulseEnvelope out = envelope;
  double before = 0.0, after = 0.0;
  for (std::size_t k = 0; k < out.amplitude.size(); ++k) {
    const double x = (envelope.grid.wavelength(k) - center_wavelength) / passband_fwhm;
    double t;
    if (edge == SlitEdge::hard) {
      t = std::abs(x) <= 0.5 ? 1.0 : 0.0;
    } else {
      t = std::exp(-2.0 * kLn2 * x * x);  // amplitude transmission
    }
    before += std::norm(out.amplitude[k]);
    out.amplitude[k] *= t;
    after += std::norm(out.amplitude[k]);
  }
  if (!(after > 0.0)) throw InvalidInput("slit passband transmits no spectral power");
  out.shape = PulseShape::custom;
  normalize(out);
  return {out, after / before};
}

double solve_slit_width(const PulseEnvelope& envelope, double center_wavelength, double target_fwhm, SlitEdge edge) {
  const double input = spectral_fwhm_wavelength(envelope);
  if (!(target_fwhm > 0.0) || target_fwhm >= input) {
    throw InvalidInput("target slit output FWHM must be positive and below the input FWHM");
  }
  auto fwhm_at = [&](double w) { return spectral_fwhm_wavelength(slit_filter(envelope, center_wavelength, w, edge).envelope); };
  double lo = 0.05 * target_fwhm;
  double hi = 20.0 * input;
  if (fwhm_at(lo) > target_fwhm) throw InvalidInput("target FWHM below the narrowest resolvable slit output");
  for (int it = 0; it < 80; ++it) {
    const double mid = 0.5 * (lo + hi);
    (fwhm_at(mid) < target_fwhm ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

namespace {

ShgResult shg_impl(const PulseEnvelope& envelope, const CrystalSpec* crystal) {
  const FrequencyGrid& g = envelope.grid;
  const std::size_t n = g.n_points;
  const FrequencyGrid out_grid{2.0 * g.center_frequency, g.span, n};
  std::vector<std::complex<double>> out(n, {0.0, 0.0});

  double amax = 0.0;
  for (const auto& a : envelope.amplitude) amax = std::max(amax, std::abs(a));
  const double cutoff = 1e-9 * amax;

  // Wavevectors on both grids; the mismatch of a pair is k_out - k_a - k_b - grating.
  std::vector<double> k_in(n, 0.0), k_out(n, 0.0);
  double grating = 0.0;
  std::unique_ptr<PmfTable> table;
  if (crystal) {
    validate(*crystal);
    const WavelengthRange r = sellmeier_range(crystal->material);
    for (std::size_t k = 0; k < n; ++k) {
      if (std::abs(envelope.amplitude[k]) > cutoff) {
        k_in[k] = wavevector(crystal->material, crystal->axes.signal, g.wavelength(k), crystal->temperature);
      }
      const double wl = out_grid.wavelength(k);
      if (wl >= r.min && wl <= r.max) {
        k_out[k] = wavevector(crystal->material, crystal->axes.pump, wl, crystal->temperature);
      }
    }
    grating = std::isinf(crystal->poling_period) ? 0.0 : crystal->qpm_order * 2.0 * kPi / crystal->poling_period;
    if (crystal->axes.signal != crystal->axes.idler) {
      throw InvalidInput("shg_convert: type-II SHG is not supported; signal and idler axes must match");
    }
  }

  auto dk_of = [&](std::size_t m, std::size_t a, std::size_t b) { return k_out[m] - k_in[a] - k_in[b] - grating; };

  if (crystal) {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (std::size_t m = 0; m < n; ++m) {
      for (std::size_t a = 0; a < n; ++a) {
        const std::ptrdiff_t b = static_cast<std::ptrdiff_t>(m + n / 2) - static_cast<std::ptrdiff_t>(a);
        if (b < 0 || b >= static_cast<std::ptrdiff_t>(n)) continue;
        if (std::abs(envelope.amplitude[a]) <= cutoff || std::abs(envelope.amplitude[b]) <= cutoff) continue;
        const double d = dk_of(m, a, static_cast<std::size_t>(b));
        lo = std::min(lo, d);
        hi = std::max(hi, d);
      }
    }
    if (!(hi > lo)) hi = lo + 1.0;
    const double pad = 0.01 * (hi - lo);
    table = std::make_unique<PmfTable>(*crystal, lo - pad, hi + pad, 8193);
    const double peak = std::abs(pmf(*crystal, 0.0));
    double best = 0.0;
    for (std::size_t j = 0; j < 8193; ++j) {
      const double d = lo + (hi - lo) * static_cast<double>(j) / 8192.0;
      best = std::max(best, std::abs((*table)(d)));
    }
    if (best < 1e-2 * peak) {
      std::ostringstream msg;
      msg << "shg_convert: phase-matching acceptance lies outside the input band (dk range [" << lo << ", " << hi
          << "] 1/m, max |PMF| / peak = " << best / peak << ")";
      throw InvalidInput(msg.str());
    }
  }

  parallel_for(n, [&](std::size_t m) {
    std::complex<double> acc{0.0, 0.0};
    for (std::size_t a = 0; a < n; ++a) {
      const std::ptrdiff_t b = static_cast<std::ptrdiff_t>(m + n / 2) - static_cast<std::ptrdiff_t>(a);
      if (b < 0 || b >= static_cast<std::ptrdiff_t>(n)) continue;
      const auto bb = static_cast<std::size_t>(b);
      if (std::abs(envelope.amplitude[a]) <= cutoff || std::abs(envelope.amplitude[bb]) <= cutoff) continue;
      std::complex<double> term = envelope.amplitude[a] * envelope.amplitude[bb];
      if (table) term *= (*table)(dk_of(m, a, bb));
      acc += term;
    }
    out[m] = acc * g.step();
  });

  ShgResult result{make_custom_envelope(out_grid, std::move(out), 0.5 * envelope.center_wavelength), 0.0};
  result.fwhm_wavelength = spectral_fwhm_wavelength(result.envelope);
  return result;
}

}  // namespace

ShgResult shg_convert(const PulseEnvelope& envelope, const CrystalSpec& shg_crystal) {
  return shg_impl(envelope, &shg_crystal);
}

ShgResult shg_autoconvolution(const PulseEnvelope& envelope) { return shg_impl(envelope, nullptr); }

}  // namespace spdc
