#include "spdcsim/phasematch.h"

#include <algorithm>
#include <array>
#include <limits>
#include <sstream>

namespace spdc {

namespace {

constexpr double kCelsiusOffset = 273.15;

// Emanueli & Arie thermo-optic polynomials, dn = n1 (T - 25) + n2 (T - 25)^2,
// n_k(lambda) = sum_m a_m / lambda^m with lambda in um.
constexpr std::array<double, 4> kKtpYLinear{6.2897e-6, 6.3061e-6, -6.0629e-6, 2.6486e-6};
constexpr std::array<double, 4> kKtpYQuadratic{-0.14445e-8, 2.2244e-8, -3.5770e-8, 1.3470e-8};
constexpr std::array<double, 4> kKtpZLinear{9.9587e-6, 9.9228e-6, -8.9603e-6, 4.1010e-6};
constexpr std::array<double, 4> kKtpZQuadratic{-1.1882e-8, 10.459e-8, -9.8136e-8, 3.1481e-8};

double inverse_power_series(const std::array<double, 4>& a, double lambda_um) {
  double sum = 0.0;
  double p = 1.0;
  for (double c : a) {
    sum += c * p;
    p /= lambda_um;
  }
  return sum;
}

double ktp_index(Axis axis, double lambda_um, double celsius) {
  const double l2 = lambda_um * lambda_um;
  double n0;
  const std::array<double, 4>* lin;
  const std::array<double, 4>* quad;
  if (axis == Axis::y) {
    n0 = std::sqrt(2.09930 + 0.922683 / (1.0 - 0.0467695 / l2) - 0.0138408 * l2);
    lin = &kKtpYLinear;
    quad = &kKtpYQuadratic;
  } else {
    n0 = std::sqrt(4.59423 + 0.06206 / (l2 - 0.04763) + 110.80672 / (l2 - 86.12171));
    lin = &kKtpZLinear;
    quad = &kKtpZQuadratic;
  }
  const double dt = celsius - 25.0;
  return n0 + inverse_power_series(*lin, lambda_um) * dt + inverse_power_series(*quad, lambda_um) * dt * dt;
}

struct GayerCoefficients {
  double a1, a2, a3, a4, a5, a6, b1, b2, b3, b4;
};

constexpr GayerCoefficients kLnExtraordinary{5.756, 0.0983, 0.2020, 189.32, 12.52, 1.32e-2,
                                             2.860e-6, 4.700e-8, 6.113e-8, 1.516e-4};
constexpr GayerCoefficients kLnOrdinary{5.653, 0.1185, 0.2091, 89.61, 10.85, 1.97e-2,
                                        7.941e-7, 3.134e-8, -4.641e-9, -2.188e-6};

double ln_index(Axis axis, double lambda_um, double celsius) {
  const GayerCoefficients& c = axis == Axis::z ? kLnExtraordinary : kLnOrdinary;
  const double f = (celsius - 24.5) * (celsius + 570.82);
  const double l2 = lambda_um * lambda_um;
  const double pole = c.a3 + c.b3 * f;
  const double n2 = c.a1 + c.b1 * f + (c.a2 + c.b2 * f) / (l2 - pole * pole) +
                    (c.a4 + c.b4 * f) / (l2 - c.a5 * c.a5) - c.a6 * l2;
  return std::sqrt(n2);
}

// Filon weights for theta = k h; series below theta = 1/6 avoids cancellation.
void filon_weights(double theta, double& alpha, double& beta, double& gamma) {
  if (std::abs(theta) < 1.0 / 6.0) {
    const double t2 = theta * theta;
    const double t3 = t2 * theta;
    alpha = t3 * (2.0 / 45.0 - t2 * (2.0 / 315.0 - t2 * 2.0 / 4725.0));
    beta = 2.0 / 3.0 + t2 * (2.0 / 15.0 - t2 * (4.0 / 105.0 - t2 * 2.0 / 567.0));
    gamma = 4.0 / 3.0 - t2 * (2.0 / 15.0 - t2 * (1.0 / 210.0 - t2 / 11340.0));
    return;
  }
  const double s = std::sin(theta);
  const double c = std::cos(theta);
  const double t3 = theta * theta * theta;
  alpha = (theta * theta + theta * s * c - 2.0 * s * s) / t3;
  beta = 2.0 * (theta * (1.0 + c * c) - 2.0 * s * c) / t3;
  gamma = 4.0 * (s - theta * c) / t3;
}

// integral over x in [x0, x0 + 2n h] of f(x) exp(i k x), f sampled at 2n + 1 points.
std::complex<double> filon_integral(const std::vector<double>& f, double x0, double h, double k) {
  const std::size_t last = f.size() - 1;
  double alpha, beta, gamma;
  filon_weights(k * h, alpha, beta, gamma);
  const std::complex<double> step = std::polar(1.0, k * h);
  std::complex<double> phase = std::polar(1.0, k * x0);
  std::complex<double> even{0.0, 0.0};
  std::complex<double> odd{0.0, 0.0};
  std::complex<double> first = f[0] * phase;
  std::complex<double> end;
  for (std::size_t j = 0; j <= last; ++j) {
    const std::complex<double> term = f[j] * phase;
    if (j % 2 == 0) {
      even += term;
    } else {
      odd += term;
    }
    if (j == last) end = term;
    // Renormalize periodically so the recurrence stays on the unit circle.
    phase *= step;
    if (j % 64 == 63) phase /= std::abs(phase);
  }
  even -= 0.5 * (end + first);
  // C + iS with C = sum f cos, S = sum f sin. The boundary term of Filon's rule is
  // alpha [f sin]_a^b for C and -alpha [f cos]_a^b for S, i.e. -i alpha [f e^{ikx}]_a^b.
  const std::complex<double> boundary = std::complex<double>(0.0, -1.0) * alpha * (end - first);
  return h * (boundary + beta * even + gamma * odd);
}

}  // namespace

std::string to_string(Material m) { return m == Material::KTP ? "KTP" : "LN_MgO"; }
std::string to_string(Axis a) { return a == Axis::y ? "y" : "z"; }

void validate(const CrystalSpec& crystal) {
  if (!(crystal.length > 0.0)) throw InvalidInput("crystal length must be positive");
  if (!(crystal.poling_period > 0.0)) throw InvalidInput("crystal poling period must be positive");
  if (!(crystal.temperature > 0.0)) throw InvalidInput("crystal temperature must be positive (K)");
  if (crystal.apodization.kind == ApodizationKind::gaussian_duty_cycle) {
    const double w = crystal.apodization.fwhm;
    if (!(w > 0.0) || w > 2.0 * crystal.length) {
      throw InvalidInput("apodization FWHM must satisfy 0 < fwhm <= 2 L");
    }
  }
}

WavelengthRange sellmeier_range(Material material) {
  if (material == Material::KTP) return {0.40 * kUm, 1.70 * kUm};
  return {0.50 * kUm, 4.00 * kUm};
}

double refractive_index(Material material, Axis axis, double wavelength, double temperature) {
  const WavelengthRange r = sellmeier_range(material);
  if (!(wavelength >= r.min && wavelength <= r.max)) {
    std::ostringstream msg;
    msg << "wavelength " << wavelength / kNm << " nm outside the " << to_string(material)
        << " Sellmeier range [" << r.min / kNm << ", " << r.max / kNm << "] nm";
    throw InvalidInput(msg.str());
  }
  const double lambda_um = wavelength / kUm;
  const double celsius = temperature - kCelsiusOffset;
  return material == Material::KTP ? ktp_index(axis, lambda_um, celsius)
                                   : ln_index(axis, lambda_um, celsius);
}

double wavevector(Material material, Axis axis, double wavelength, double temperature) {
  return 2.0 * kPi * refractive_index(material, axis, wavelength, temperature) / wavelength;
}

double group_index(Material material, Axis axis, double wavelength, double temperature) {
  const double h = 1e-3 * wavelength;
  const double up = refractive_index(material, axis, wavelength + h, temperature);
  const double down = refractive_index(material, axis, wavelength - h, temperature);
  return refractive_index(material, axis, wavelength, temperature) - wavelength * (up - down) / (2.0 * h);
}

double delta_k(const CrystalSpec& crystal, double signal_wavelength, double idler_wavelength) {
  const double pump_wavelength = 1.0 / (1.0 / signal_wavelength + 1.0 / idler_wavelength);
  const double kp = wavevector(crystal.material, crystal.axes.pump, pump_wavelength, crystal.temperature);
  const double ks = wavevector(crystal.material, crystal.axes.signal, signal_wavelength, crystal.temperature);
  const double ki = wavevector(crystal.material, crystal.axes.idler, idler_wavelength, crystal.temperature);
  const double grating = std::isinf(crystal.poling_period) ? 0.0 : 2.0 * kPi / crystal.poling_period;
  return kp - ks - ki - crystal.qpm_order * grating;
}

NonlinearityProfile nonlinearity_profile(const CrystalSpec& crystal, std::size_t n_samples) {
  validate(crystal);
  if (n_samples < 3) throw InvalidInput("nonlinearity profile needs at least 3 samples");
  if (n_samples % 2 == 0) ++n_samples;
  NonlinearityProfile p;
  p.z.resize(n_samples);
  p.g.resize(n_samples);
  p.duty_cycle.resize(n_samples);
  const double L = crystal.length;
  const double h = L / static_cast<double>(n_samples - 1);
  const Apodization& apo = crystal.apodization;
  for (std::size_t j = 0; j < n_samples; ++j) {
    const double z = h * static_cast<double>(j);
    p.z[j] = z;
    if (apo.kind == ApodizationKind::none) {
      p.g[j] = 1.0;
      p.duty_cycle[j] = 0.5;
      continue;
    }
    const double u = (z - 0.5 * L) / apo.fwhm;
    const double gauss = std::exp(-4.0 * kLn2 * u * u);
    if (apo.width_of == ApodizationWidthOf::nonlinearity) {
      p.g[j] = gauss;
      p.duty_cycle[j] = std::asin(std::min(1.0, gauss)) / kPi;
    } else {
      p.duty_cycle[j] = 0.5 * gauss;
      p.g[j] = std::sin(kPi * p.duty_cycle[j]);
    }
  }
  return p;
}

std::complex<double> pmf(const NonlinearityProfile& profile, double dk) {
  const std::size_t n = profile.z.size();
  if (n < 3 || n % 2 == 0) throw InvalidInput("pmf: profile needs an odd number (>= 3) of samples");
  const double h = profile.z[1] - profile.z[0];
  if (std::abs(dk) * h >= kPi / 4.0) {
    std::ostringstream msg;
    msg << "pmf: quadrature step " << h << " m too coarse for dk = " << dk << " 1/m (dk*dz must be < pi/4)";
    throw InvalidInput(msg.str());
  }
  const double length = profile.z.back() - profile.z.front();
  const double x0 = profile.z.front() - 0.5 * (profile.z.front() + profile.z.back());
  return filon_integral(profile.g, x0, h, dk) / length;
}

std::complex<double> pmf(const CrystalSpec& crystal, double dk) {
  const double L = crystal.length;
  std::size_t intervals = 512;
  const double needed = std::abs(dk) * L / (kPi / 4.0);
  if (needed >= static_cast<double>(intervals)) {
    intervals = static_cast<std::size_t>(std::ceil(needed)) + 2;
    if (intervals % 2) ++intervals;
  }
  return pmf(nonlinearity_profile(crystal, intervals + 1), dk);
}

PmfTable::PmfTable(const CrystalSpec& crystal, double dk_min, double dk_max, std::size_t n)
    : dk_min_(dk_min) {
  if (!(dk_max > dk_min) || n < 2) throw InvalidInput("PmfTable: empty dk range");
  step_ = (dk_max - dk_min) / static_cast<double>(n - 1);
  std::size_t intervals = 512;
  const double worst = std::max(std::abs(dk_min), std::abs(dk_max));
  const double needed = worst * crystal.length / (kPi / 4.0);
  if (needed >= static_cast<double>(intervals)) {
    intervals = static_cast<std::size_t>(std::ceil(needed)) + 2;
    if (intervals % 2) ++intervals;
  }
  const NonlinearityProfile profile = nonlinearity_profile(crystal, intervals + 1);
  values_.resize(n);
  parallel_for(n, [&](std::size_t j) { values_[j] = pmf(profile, dk_min + step_ * static_cast<double>(j)); });
}

std::complex<double> PmfTable::operator()(double dk) const {
  const double x = (dk - dk_min_) / step_;
  if (x < 0.0 || x > static_cast<double>(values_.size() - 1)) {
    throw InvalidInput("PmfTable: dk outside the tabulated range");
  }
  const std::size_t j = std::min(static_cast<std::size_t>(x), values_.size() - 2);
  const double t = x - static_cast<double>(j);
  return (1.0 - t) * values_[j] + t * values_[j + 1];
}

DegeneracySolution degeneracy_solve(const CrystalSpec& crystal, double pump_wavelength,
                                    DegeneracyParameter parameter, std::optional<double> lo,
                                    std::optional<double> hi) {
  validate(crystal);
  const double degenerate = 2.0 * pump_wavelength;
  const bool by_temperature = parameter == DegeneracyParameter::temperature;
  double a = lo.value_or(by_temperature ? 273.15 : 0.8 * crystal.poling_period);
  double b = hi.value_or(by_temperature ? 473.15 : 1.2 * crystal.poling_period);
  if (!(b > a) || !(a > 0.0)) throw InvalidInput("degeneracy_solve: invalid bracket");

  auto mismatch = [&](double v) {
    CrystalSpec c = crystal;
    if (by_temperature) {
      c.temperature = v;
    } else {
      c.poling_period = v;
    }
    return delta_k(c, degenerate, degenerate);
  };

  // Coarse scan for the first sign change, then bisection.
  constexpr int kScan = 64;
  double prev_v = a;
  double prev_f = mismatch(a);
  bool found = prev_f == 0.0;
  double left = a, right = a, f_left = prev_f;
  for (int j = 1; j <= kScan && !found; ++j) {
    const double v = a + (b - a) * j / kScan;
    const double f = mismatch(v);
    if ((prev_f < 0.0) != (f < 0.0) || f == 0.0) {
      left = prev_v;
      right = v;
      f_left = prev_f;
      found = true;
    }
    prev_v = v;
    prev_f = f;
  }
  if (!found) {
    std::ostringstream msg;
    msg << "degeneracy_solve: no sign change of dk in [" << a << ", " << b << "]; dk(lo) = " << mismatch(a)
        << " 1/m, dk(hi) = " << mismatch(b) << " 1/m";
    throw InvalidInput(msg.str());
  }
  for (int it = 0; it < 200 && right - left > 1e-13 * std::abs(right); ++it) {
    const double mid = 0.5 * (left + right);
    const double f = mismatch(mid);
    if ((f < 0.0) == (f_left < 0.0)) {
      left = mid;
      f_left = f;
    } else {
      right = mid;
    }
  }
  const double value = 0.5 * (left + right);
  DegeneracySolution out{value, std::abs(mismatch(value)), crystal};
  if (by_temperature) {
    out.crystal.temperature = value;
  } else {
    out.crystal.poling_period = value;
  }
  return out;
}

}  // namespace spdc
