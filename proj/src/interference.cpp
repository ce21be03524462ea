#include "spdcsim/interference.h"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <optional>
#include <random>
#include <sstream>

#include "spdcsim/common.h"

namespace spdc {

namespace {

constexpr double kGolden = 0.6180339887498949;

double wrap_half_turn(double theta) {
  // Into (-pi/2, pi/2].
  double t = std::remainder(theta, kPi);
  if (t <= -kPi / 2) t += kPi;
  return t;
}

double binomial_pmf(int k, int n, double p) {
  if (k < 0 || k > n) return 0.0;
  if (p <= 0.0) return k == 0 ? 1.0 : 0.0;
  if (p >= 1.0) return k == n ? 1.0 : 0.0;
  double log_c = std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
  return std::exp(log_c + k * std::log(p) + (n - k) * std::log1p(-p));
}

double factorial(int n) { return std::exp(std::lgamma(n + 1.0)); }

}  // namespace

// ---------------------------------------------------------------------------
// Polarization

void validate(const PolarizationModel& m) {
  if (!(m.mixed_fraction >= 0.0 && m.mixed_fraction <= 1.0)) throw InvalidInput("mixed_fraction must lie in [0, 1]");
  if (!(m.amplitude_imbalance >= -1.0 && m.amplitude_imbalance <= 1.0))
    throw InvalidInput("amplitude_imbalance must lie in [-1, 1]");
  if (!(m.dephasing >= 0.0 && m.dephasing <= 1.0)) throw InvalidInput("dephasing must lie in [0, 1]");
}

double basis_angle(Basis basis) {
  switch (basis) {
    case Basis::H: return kPi / 2;
    case Basis::V: return 0.0;
    case Basis::D: return kPi / 4;
    case Basis::A: return -kPi / 4;
  }
  return 0.0;
}

Eigen::Matrix4cd density_matrix(const PolarizationModel& m) {
  validate(m);
  // Basis order |HH>, |HV>, |VH>, |VV>.
  Eigen::Vector4cd psi = Eigen::Vector4cd::Zero();
  psi[1] = std::sqrt((1.0 + m.amplitude_imbalance) / 2.0);
  psi[2] = std::polar(std::sqrt((1.0 - m.amplitude_imbalance) / 2.0), m.phi);
  Eigen::Matrix4cd rho = (1.0 - m.mixed_fraction) * psi * psi.adjoint();
  rho(1, 2) *= 1.0 - m.dephasing;
  rho(2, 1) *= 1.0 - m.dephasing;
  rho += m.mixed_fraction / 4.0 * Eigen::Matrix4cd::Identity();
  return rho;
}

Eigen::Vector2cd analyzer_state(double theta, double retardance_error) {
  // Half-wave plate at -theta/2 in front of a polarizer passing V.
  const double a = -theta / 2.0;
  const double c = std::cos(a), s = std::sin(a);
  Eigen::Matrix2cd rot;
  rot << c, s, -s, c;
  Eigen::Matrix2cd retarder = Eigen::Matrix2cd::Zero();
  retarder(0, 0) = 1.0;
  retarder(1, 1) = std::polar(1.0, kPi + retardance_error);
  Eigen::Matrix2cd J = rot.transpose() * retarder * rot;
  Eigen::Vector2cd pass(0.0, 1.0);
  return J.adjoint() * pass;
}

double coincidence_probability(const PolarizationModel& model, double theta_a, double theta_b) {
  Eigen::Matrix4cd rho = density_matrix(model);
  Eigen::Vector2cd ta = analyzer_state(theta_a, model.waveplate_error_a);
  Eigen::Vector2cd tb = analyzer_state(theta_b, model.waveplate_error_b);
  Eigen::Vector4cd t;
  t << ta[0] * tb[0], ta[0] * tb[1], ta[1] * tb[0], ta[1] * tb[1];
  return (t.adjoint() * rho * t)(0, 0).real();
}

std::vector<double> coincidence_curve(const PolarizationModel& model, Basis fixed_basis,
                                      const std::vector<double>& scan_angles) {
  std::vector<double> out;
  out.reserve(scan_angles.size());
  const double theta_a = basis_angle(fixed_basis);
  for (double th : scan_angles) out.push_back(coincidence_probability(model, theta_a, th));
  return out;
}

Visibility visibility(double c_max, double c_min, VisibilityKind kind) {
  if (!(c_max >= 0.0 && c_min >= 0.0)) throw InvalidInput("visibility: counts must be >= 0");
  if (c_max == 0.0 && c_min == 0.0) throw InvalidInput("visibility: all-zero counts");
  if (c_min > c_max) throw InvalidInput("visibility: C_min exceeds C_max");
  if (kind == VisibilityKind::polarization) {
    double s = c_max + c_min;
    return {(c_max - c_min) / s, std::sqrt(4.0 * c_max * c_min / (s * s * s))};
  }
  return {(c_max - c_min) / c_max, std::sqrt(c_min * (c_max + c_min) / (c_max * c_max * c_max))};
}

Visibility visibility(const std::vector<double>& curve, VisibilityKind kind) {
  if (curve.size() < 2) throw InvalidInput("visibility: curve needs at least two points");
  double lo = *std::min_element(curve.begin(), curve.end());
  double hi = kind == VisibilityKind::hom ? 0.5 * (curve.front() + curve.back())
                                          : *std::max_element(curve.begin(), curve.end());
  return visibility(hi, lo, kind);
}

namespace {

template <class F>
double golden_search(F f, double lo, double hi, double tol) {
  // Minimizes f on [lo, hi].
  double x1 = hi - kGolden * (hi - lo), x2 = lo + kGolden * (hi - lo);
  double f1 = f(x1), f2 = f(x2);
  while (hi - lo > tol) {
    if (f1 < f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - kGolden * (hi - lo);
      f1 = f(x1);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + kGolden * (hi - lo);
      f2 = f(x2);
    }
  }
  return 0.5 * (lo + hi);
}

template <class F>
double bisect_root(F f, double lo, double hi, double tol) {
  double flo = f(lo);
  double fhi = f(hi);
  if (flo * fhi > 0.0) throw InvalidInput("calibrate_bases: no equal-rate crossing near the expected setting");
  while (hi - lo > tol) {
    double mid = 0.5 * (lo + hi);
    double fm = f(mid);
    if ((fm < 0.0) == (flo < 0.0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace

double basis_visibility(const PolarizationModel& model, Basis fixed_basis) {
  // Retardance errors add first harmonics, so the B scan covers a full turn of the setting.
  const double theta_a = basis_angle(fixed_basis);
  auto rate = [&](double t) { return coincidence_probability(model, theta_a, t); };
  const int n = 720;
  const double step = 2 * kPi / n;
  int k_min = 0, k_max = 0;
  std::vector<double> c(n);
  for (int k = 0; k < n; ++k) {
    c[k] = rate(k * step);
    if (c[k] < c[k_min]) k_min = k;
    if (c[k] > c[k_max]) k_max = k;
  }
  auto refine = [&](int k, double sign) {
    double x = golden_search([&](double t) { return sign * rate(t); }, (k - 1) * step, (k + 1) * step, 1e-12);
    return rate(x);
  };
  const double lo = std::min(c[k_min], refine(k_min, 1.0));
  const double hi = std::max(c[k_max], refine(k_max, -1.0));
  if (hi + lo <= 0.0) throw InvalidInput("basis_visibility: zero coincidence rate");
  return (hi - lo) / (hi + lo);
}

double fit_mixed_fraction(PolarizationModel model, Basis basis, double target_visibility) {
  model.mixed_fraction = 0.0;
  double v_hi = basis_visibility(model, basis);
  if (!(target_visibility >= 0.0 && target_visibility <= v_hi))
    throw InvalidInput("fit_mixed_fraction: target visibility above the noiseless value");
  double lo = 0.0, hi = 1.0;
  for (int iter = 0; iter < 200 && hi - lo > 1e-15; ++iter) {
    model.mixed_fraction = 0.5 * (lo + hi);
    (basis_visibility(model, basis) > target_visibility ? lo : hi) = model.mixed_fraction;
  }
  return 0.5 * (lo + hi);
}

double fit_dephasing(PolarizationModel model, Basis basis, double target_visibility) {
  model.dephasing = 0.0;
  const double v_hi = basis_visibility(model, basis);
  model.dephasing = 1.0;
  const double v_lo = basis_visibility(model, basis);
  if (!(target_visibility >= v_lo && target_visibility <= v_hi))
    throw InvalidInput("fit_dephasing: target visibility outside the reachable range");
  double lo = 0.0, hi = 1.0;
  for (int iter = 0; iter < 200 && hi - lo > 1e-15; ++iter) {
    model.dephasing = 0.5 * (lo + hi);
    (basis_visibility(model, basis) > target_visibility ? lo : hi) = model.dephasing;
  }
  return 0.5 * (lo + hi);
}

BasisCalibration calibrate_bases(const AnalyzerResponse& response) {
  const double a_H = basis_angle(Basis::H), a_V = basis_angle(Basis::V);
  const double tol = deg_to_rad(0.01) / 10.0;
  const int n = 180;
  std::vector<double> th(n), r(n);
  for (int k = 0; k < n; ++k) {
    th[k] = kPi * k / n;
    r[k] = response(a_H, th[k]);
  }
  // Sinusoid fit a + b cos 2theta + c sin 2theta; the samples are uniform over a period.
  double a = 0, b = 0, c = 0;
  for (int k = 0; k < n; ++k) {
    a += r[k] / n;
    b += 2.0 * r[k] * std::cos(2 * th[k]) / n;
    c += 2.0 * r[k] * std::sin(2 * th[k]) / n;
  }
  double ss = 0.0;
  for (int k = 0; k < n; ++k) {
    double e = r[k] - (a + b * std::cos(2 * th[k]) + c * std::sin(2 * th[k]));
    ss += e * e;
  }
  double range = *std::max_element(r.begin(), r.end()) - *std::min_element(r.begin(), r.end());
  double residual = range > 0.0 ? std::sqrt(ss / n) / range : 1.0;
  if (residual > 0.05) {
    std::ostringstream msg;
    msg << "calibrate_bases: analyzer response is not sinusoidal (fit residual " << residual * 100 << "% > 5%)";
    throw InvalidInput(msg.str());
  }

  std::size_t k_min = std::min_element(r.begin(), r.end()) - r.begin();
  std::size_t k_max = std::max_element(r.begin(), r.end()) - r.begin();
  const double step = kPi / n;
  auto rate_at_H = [&](double t) { return response(a_H, t); };
  double h = golden_search(rate_at_H, th[k_min] - 2 * step, th[k_min] + 2 * step, tol);
  double v = golden_search([&](double t) { return -rate_at_H(t); }, th[k_max] - 2 * step, th[k_max] + 2 * step, tol);

  auto diff = [&](double t) { return response(a_H, t) - response(a_V, t); };
  const double w = deg_to_rad(20.0);
  double d = bisect_root(diff, h - kPi / 4 - w, h - kPi / 4 + w, tol);
  double an = bisect_root(diff, h + kPi / 4 - w, h + kPi / 4 + w, tol);

  BasisCalibration out;
  out.angle_H = h - kPi * std::floor(h / kPi);  // [0, pi)
  out.angle_V = wrap_half_turn(v);
  out.angle_D = wrap_half_turn(d);
  out.angle_A = wrap_half_turn(an);
  out.naive_D = wrap_half_turn(out.angle_H - kPi / 4);
  out.naive_A = wrap_half_turn(out.angle_H + kPi / 4);
  out.fit_residual = residual;
  return out;
}

// ---------------------------------------------------------------------------
// Fock oracle

Eigen::MatrixXcd fock_state(std::size_t n, std::size_t cutoff) {
  if (n > cutoff) throw InvalidInput("fock_state: n exceeds the cutoff");
  Eigen::MatrixXcd rho = Eigen::MatrixXcd::Zero(cutoff + 1, cutoff + 1);
  rho(n, n) = 1.0;
  return rho;
}

Eigen::MatrixXcd coherent_state(double mean_photons, std::size_t cutoff) {
  Eigen::VectorXcd amp(cutoff + 1);
  double alpha = std::sqrt(mean_photons);
  for (std::size_t n = 0; n <= cutoff; ++n) {
    double log_a = -0.5 * mean_photons - 0.5 * std::lgamma(n + 1.0);
    amp[n] = n == 0 ? std::exp(log_a) : std::exp(log_a + n * std::log(alpha));
  }
  return amp * amp.adjoint();
}

namespace {

// <m, n-m| U |k, n-k> for a splitter with a^dag -> t c^dag + r d^dag, b^dag -> -r c^dag + t d^dag.
Eigen::MatrixXd splitter_block(int n, double T) {
  const double t = std::sqrt(T), r = std::sqrt(1.0 - T);
  Eigen::MatrixXd U = Eigen::MatrixXd::Zero(n + 1, n + 1);
  for (int k = 0; k <= n; ++k) {
    // (t x + r y)^k (-r x + t y)^(n-k)
    for (int i = 0; i <= k; ++i) {
      for (int j = 0; j <= n - k; ++j) {
        int m = i + j;  // power of x
        double coef = std::exp(std::lgamma(k + 1.0) - std::lgamma(i + 1.0) - std::lgamma(k - i + 1.0) +
                               std::lgamma(n - k + 1.0) - std::lgamma(j + 1.0) - std::lgamma(n - k - j + 1.0));
        coef *= std::pow(t, i) * std::pow(r, k - i) * std::pow(-r, j) * std::pow(t, n - k - j);
        U(m, k) += coef;
      }
    }
    for (int m = 0; m <= n; ++m)
      U(m, k) *= std::sqrt(factorial(m) * factorial(n - m) / (factorial(k) * factorial(n - k)));
  }
  return U;
}

double click(double eta, int n) { return 1.0 - std::pow(1.0 - eta, n); }

}  // namespace

FockOutcome fock_oracle(const Eigen::MatrixXcd& state_a, const Eigen::MatrixXcd& state_b, double splitter_ratio,
                        const DetectorModel& det_c, const DetectorModel& det_d) {
  if (state_a.rows() != state_a.cols() || state_b.rows() != state_b.cols())
    throw InvalidInput("fock_oracle: density matrices must be square");
  if (!(splitter_ratio >= 0.0 && splitter_ratio <= 1.0)) throw InvalidInput("fock_oracle: splitter ratio in [0, 1]");
  double tr_a = state_a.trace().real(), tr_b = state_b.trace().real();
  if (std::abs(tr_a - 1.0) > 1e-6 || std::abs(tr_b - 1.0) > 1e-6) {
    std::ostringstream msg;
    msg << "fock_oracle: input trace deviates from 1 (" << tr_a << ", " << tr_b << ")";
    throw InvalidInput(msg.str());
  }
  const int Na = static_cast<int>(state_a.rows()) - 1;
  const int Nb = static_cast<int>(state_b.rows()) - 1;
  FockOutcome out{0, 0, 0, 0, 0};
  for (int n = 0; n <= Na + Nb; ++n) {
    int k_lo = std::max(0, n - Nb), k_hi = std::min(n, Na);
    Eigen::MatrixXd U = splitter_block(n, splitter_ratio);
    // Input block rho_(k,k') = rho_a(k,k') rho_b(n-k, n-k').
    for (int m = 0; m <= n; ++m) {
      std::complex<double> p = 0.0;
      for (int k = k_lo; k <= k_hi; ++k)
        for (int kk = k_lo; kk <= k_hi; ++kk) p += U(m, k) * state_a(k, kk) * state_b(n - k, n - kk) * U(m, kk);
      double pm = p.real();
      double cc = click(det_c.efficiency, m), cd = click(det_d.efficiency, n - m);
      out.p11 += pm * cc * cd;
      out.p10 += pm * cc * (1 - cd);
      out.p01 += pm * (1 - cc) * cd;
      out.p00 += pm * (1 - cc) * (1 - cd);
      out.trace += pm;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Photons in four internal modes on a two-port splitter

namespace {

std::complex<double> ipow(std::complex<double> z, int n) {
  std::complex<double> r = 1.0;
  for (int k = 0; k < n; ++k) r *= z;
  return r;
}

// Permanent of the matrix with row and column r of A repeated m[r] times (Ryser over multiplicities).
std::complex<double> permanent_repeated(const Eigen::Matrix4cd& A, const std::array<int, 4>& m) {
  const int n = m[0] + m[1] + m[2] + m[3];
  std::complex<double> total = 0.0;
  std::array<int, 4> s{0, 0, 0, 0};
  while (true) {
    double w = 1.0;
    int size = 0;
    for (int k = 0; k < 4; ++k) {
      w *= std::exp(std::lgamma(m[k] + 1.0) - std::lgamma(s[k] + 1.0) - std::lgamma(m[k] - s[k] + 1.0));
      size += s[k];
    }
    std::complex<double> prod = 1.0;
    for (int r = 0; r < 4 && prod != 0.0; ++r) {
      if (m[r] == 0) continue;
      std::complex<double> row = 0.0;
      for (int k = 0; k < 4; ++k) row += static_cast<double>(s[k]) * A(r, k);
      prod *= ipow(row, m[r]);
    }
    total += ((size & 1) ? -w : w) * prod;
    int k = 0;
    while (k < 4 && s[k] == m[k]) s[k++] = 0;
    if (k == 4) break;
    ++s[k];
  }
  return (n & 1) ? -total : total;
}

}  // namespace

double two_port_coincidence(const std::array<int, 4>& counts, const Eigen::Matrix4cd& gram, double splitter_ratio,
                            double eta_c, double eta_d) {
  for (int c : counts)
    if (c < 0) throw InvalidInput("two_port_coincidence: negative photon count");
  if (counts[0] + counts[1] + counts[2] + counts[3] < 2) return 0.0;
  const double t = std::sqrt(splitter_ratio), r = std::sqrt(1.0 - splitter_ratio);
  // Output amplitudes: port a -> (t, r), port b -> (-r, t) on (c, d).
  const double out[2][2] = {{t, r}, {-r, t}};
  const int port[4] = {0, 0, 1, 1};
  // <prod (1 - eta_q)^{N_q}> = perm(V^dag M V) / perm(V^dag V), M the attenuated single-photon map.
  auto expectation = [&](double sc, double sd) {
    Eigen::Matrix4cd A;
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) {
        const double* pi = out[port[i]];
        const double* pj = out[port[j]];
        A(i, j) = (sc * pi[0] * pj[0] + sd * pi[1] * pj[1]) * gram(i, j);
      }
    return permanent_repeated(A, counts);
  };
  const std::complex<double> norm = expectation(1.0, 1.0);
  if (!(std::abs(norm) > 0.0)) throw InvalidInput("two_port_coincidence: input state has zero norm");
  double Ec = (expectation(1.0 - eta_c, 1.0) / norm).real();
  double Ed = (expectation(1.0, 1.0 - eta_d) / norm).real();
  double Ecd = (expectation(1.0 - eta_c, 1.0 - eta_d) / norm).real();
  return std::clamp(1.0 - Ec - Ed + Ecd, 0.0, 1.0);
}

// ---------------------------------------------------------------------------
// Successive-photon HOM

std::pair<double, double> mixture_weights(double purity) {
  if (!(purity >= 0.5 && purity <= 1.0)) throw InvalidInput("two-mode mixture needs purity in [0.5, 1]");
  double w1 = 0.5 * (1.0 + std::sqrt(std::max(0.0, 2.0 * purity - 1.0)));
  return {w1, 1.0 - w1};
}

std::vector<double> delay_grid(double half_width, std::size_t n) {
  if (n < 2) throw InvalidInput("delay_grid: need at least two points");
  return linspace(-half_width, half_width, n);
}

double hom_dip_fwhm(const JointAmplitude& jsa) {
  const Eigen::MatrixXcd rho = reduced_signal_density(jsa);
  const double v0 = heralded_hom_overlap(rho, rho, jsa.grid, 0.0);
  auto f = [&](double tau) { return heralded_hom_overlap(rho, rho, jsa.grid, tau) - 0.5 * v0; };
  double step = 0.1 * kPs, hi = step;
  while (f(hi) > 0.0) {
    hi *= 1.5;
    if (hi > 1e-9) throw InvalidInput("hom_dip_fwhm: dip does not fall to half depth within 1 ns");
  }
  double lo = hi / 1.5;
  if (f(lo) < 0.0) lo = 0.0;
  for (int it = 0; it < 60; ++it) {
    double mid = 0.5 * (lo + hi);
    (f(mid) > 0.0 ? lo : hi) = mid;
  }
  return lo + hi;
}

namespace {

struct SlotConfig {
  int m1;  // photons in Schmidt mode 1 reaching the interfering slot
  int m2;
  bool operator<(const SlotConfig& o) const { return m1 != o.m1 ? m1 < o.m1 : m2 < o.m2; }
};

struct HomModel {
  double w1, w2;
  double t;  // per-photon probability of reaching the interfering slot
  double q_a, q_b, q_0;  // per idler photon: herald detector a, b, lost
  HeraldKind herald;
  std::vector<double> dist;
  Eigen::MatrixXcd modes;  // two signal Schmidt modes as columns
  Eigen::VectorXd omega;   // angular frequency offsets on the signal axis
  double T;
  double eta_c, eta_d;
};

double herald_prob(const HomModel& m, int n) {
  if (m.herald == HeraldKind::single_click) return 1.0 - std::pow(m.q_0, n);
  return std::pow(m.q_0 + m.q_a, n) + std::pow(m.q_0 + m.q_b, n) - 2.0 * std::pow(m.q_0, n);
}

bool herald_sample(const HomModel& m, int n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  bool a = false, b = false;
  for (int k = 0; k < n; ++k) {
    double x = u(rng);
    if (x < m.q_a) a = true;
    else if (x < m.q_a + m.q_b) b = true;
  }
  return m.herald == HeraldKind::single_click ? (a || b) : (a != b);
}

// P(slot config, herald) per pulse.
std::map<SlotConfig, double> slot_distribution(const HomModel& m) {
  std::map<SlotConfig, double> out;
  const double p1 = m.w1 * m.t, p2 = m.w2 * m.t, p0 = 1.0 - m.t;
  for (int n = 1; n < static_cast<int>(m.dist.size()); ++n) {
    double base = m.dist[n] * herald_prob(m, n);
    if (base < 1e-300) continue;
    for (int j1 = 0; j1 <= n; ++j1) {
      for (int j2 = 0; j1 + j2 <= n; ++j2) {
        double log_multi = std::lgamma(n + 1.0) - std::lgamma(j1 + 1.0) - std::lgamma(j2 + 1.0) -
                           std::lgamma(n - j1 - j2 + 1.0);
        double w = std::exp(log_multi) * std::pow(p1, j1) * std::pow(p2, j2) * std::pow(p0, n - j1 - j2);
        if (base * w > 0.0) out[{j1, j2}] += base * w;
      }
    }
  }
  return out;
}

// Gram matrix of (u1, u2, U u1, U u2), U the delay.
Eigen::Matrix4cd mode_gram(const HomModel& m, double delay) {
  const Eigen::Index n = m.modes.rows();
  Eigen::MatrixXcd all(n, 4);
  for (Eigen::Index s = 0; s < n; ++s) {
    std::complex<double> ph = std::polar(1.0, m.omega[s] * delay);
    all(s, 0) = m.modes(s, 0);
    all(s, 1) = m.modes(s, 1);
    all(s, 2) = ph * m.modes(s, 0);
    all(s, 3) = ph * m.modes(s, 1);
  }
  return all.adjoint() * all;
}

class CoincidenceTable {
 public:
  CoincidenceTable(const HomModel& m, double delay) : model_(m), gram_(mode_gram(m, delay)) {}

  double operator()(const SlotConfig& a, const SlotConfig& b) {
    std::array<int, 4> key{a.m1, a.m2, b.m1, b.m2};
    auto it = cache_.find(key);
    if (it != cache_.end()) return it->second;
    double p = two_port_coincidence(key, gram_, model_.T, model_.eta_c, model_.eta_d);
    cache_[key] = p;
    return p;
  }

 private:
  const HomModel& model_;
  Eigen::Matrix4cd gram_;
  std::map<std::array<int, 4>, double> cache_;
};

HomModel make_model(const HomConfig& c, double& purity_used) {
  if (!(c.mu >= 0.0 && c.mu < 0.2)) throw InvalidInput("hom_experiment: mu must lie in [0, 0.2)");
  if (c.delay_grid.size() < 3) throw InvalidInput("hom_experiment: delay grid needs at least three points");
  HomModel m;
  SchmidtDecomposition sd = schmidt(c.jsa, SourceKind::amplitude, true);
  purity_used = c.purity.value_or(sd.purity);
  std::tie(m.w1, m.w2) = mixture_weights(purity_used);
  double K = c.modes_K > 0.0 ? c.modes_K : 1.0 / purity_used;
  m.dist = pair_dist(c.mu, K);
  m.t = 0.5 * c.eta_signal;
  m.q_a = c.eta_idler * 0.5 * c.herald_a.efficiency;
  m.q_b = c.eta_idler * 0.5 * c.herald_b.efficiency;
  m.q_0 = 1.0 - m.q_a - m.q_b;
  m.herald = c.herald;
  m.modes = sd.signal_modes.leftCols(2);
  const auto& sig = c.jsa.grid.signal;
  const double w0 = 2.0 * kPi * kSpeedOfLight / sig[sig.size() / 2];
  m.omega.resize(static_cast<Eigen::Index>(sig.size()));
  for (std::size_t k = 0; k < sig.size(); ++k) m.omega[k] = 2.0 * kPi * kSpeedOfLight / sig[k] - w0;
  m.T = c.splitter_ratio;
  m.eta_c = c.out_c.efficiency;
  m.eta_d = c.out_d.efficiency;
  return m;
}

void check_delay_grid(const HomConfig& c) {
  double fwhm = hom_dip_fwhm(c.jsa);
  int inside = 0;
  for (double d : c.delay_grid)
    if (std::abs(d) <= 0.5 * fwhm) ++inside;
  auto [lo, hi] = std::minmax_element(c.delay_grid.begin(), c.delay_grid.end());
  std::ostringstream msg;
  if (inside <= 3) {
    msg << "hom_experiment: delay grid has " << inside << " points inside the " << fwhm / kPs
        << " ps dip FWHM; need more than 3";
    throw InvalidInput(msg.str());
  }
  if (*hi - *lo < 3.0 * fwhm) {
    msg << "hom_experiment: delay grid spans " << (*hi - *lo) / kPs << " ps, less than 3 dip widths ("
        << 3 * fwhm / kPs << " ps)";
    throw InvalidInput(msg.str());
  }
}

std::size_t nearest_zero(const std::vector<double>& delays) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < delays.size(); ++k)
    if (std::abs(delays[k]) < std::abs(delays[best])) best = k;
  return best;
}

}  // namespace

HomResult hom_experiment(const HomConfig& config, HomMethod method, std::uint64_t pulses, std::uint64_t seed) {
  if (pulses < 2) throw InvalidInput("hom_experiment: need at least two pulses");
  check_delay_grid(config);
  HomResult res;
  HomModel m = make_model(config, res.purity);
  res.delays = config.delay_grid;
  const std::size_t nd = res.delays.size();
  res.fourfold.assign(nd, 0.0);
  res.counts.assign(nd, 0.0);
  const double pairs = static_cast<double>(pulses - 1);

  if (method == HomMethod::analytic) {
    auto slots = slot_distribution(m);
    double lead = 0.0;
    for (const auto& [a, pa] : slots) lead = std::max(lead, pa);
    const double cut = 1e-12 * lead * lead;  // relative to the leading configuration pair
    parallel_for(nd, [&](std::size_t d) {
      CoincidenceTable table(m, res.delays[d]);
      double p = 0.0;
      for (const auto& [a, pa] : slots)
        for (const auto& [b, pb] : slots)
          if (pa * pb > cut) p += pa * pb * table(a, b);
      res.fourfold[d] = p;
      res.counts[d] = p * pairs;
    });
  } else {
    // Per pulse: herald outcome and the photons routed to the long and short arms by Schmidt mode.
    struct Record {
      std::uint64_t index;
      SlotConfig longer, shorter;
    };
    struct BlockOut {
      std::vector<std::pair<Record, Record>> events;  // consecutive heralded pulses inside the block
      std::optional<Record> first, last;              // heralded pulses on the block edges
    };
    std::vector<double> cumulative(m.dist.size());
    double acc = 0.0;
    for (std::size_t n = 0; n < m.dist.size(); ++n) cumulative[n] = (acc += m.dist[n]);
    const double p_any = 1.0 - m.dist[0];
    const std::uint64_t n_blocks = (pulses + kPulsesPerBlock - 1) / kPulsesPerBlock;
    std::vector<BlockOut> blocks(n_blocks);
    parallel_for(n_blocks, [&](std::size_t b) {
      if (p_any <= 0.0) return;
      std::mt19937_64 rng(derive_seed(seed, 1, b));
      std::uniform_real_distribution<double> u(0.0, 1.0);
      std::geometric_distribution<std::uint64_t> skip(p_any);
      const std::uint64_t first = b * kPulsesPerBlock;
      const std::uint64_t last = std::min<std::uint64_t>(pulses, first + kPulsesPerBlock);
      BlockOut& out = blocks[b];
      std::optional<Record> prev;
      for (std::uint64_t k = first + skip(rng); k < last; k += 1 + skip(rng)) {
        double x = m.dist[0] + u(rng) * p_any;
        auto it = std::lower_bound(cumulative.begin() + 1, cumulative.end(), x);
        int n = it == cumulative.end() ? static_cast<int>(m.dist.size()) - 1
                                       : static_cast<int>(it - cumulative.begin());
        bool heralded = herald_sample(m, n, rng);
        Record rec{k, {0, 0}, {0, 0}};
        for (int p = 0; p < n; ++p) {
          bool mode1 = u(rng) < m.w1;
          double route = u(rng);
          SlotConfig* slot = route < m.t ? &rec.longer : (route < 2 * m.t ? &rec.shorter : nullptr);
          if (slot) ++(mode1 ? slot->m1 : slot->m2);
        }
        if (!heralded) continue;
        if (k == first) out.first = rec;
        if (k + 1 == last) out.last = rec;
        if (prev && prev->index + 1 == k) out.events.emplace_back(*prev, rec);
        prev = rec;
      }
    });
    std::vector<std::pair<Record, Record>> events;
    for (std::size_t b = 0; b < n_blocks; ++b) {
      if (b > 0 && blocks[b - 1].last && blocks[b].first) events.emplace_back(*blocks[b - 1].last, *blocks[b].first);
      events.insert(events.end(), blocks[b].events.begin(), blocks[b].events.end());
    }
    parallel_for(nd, [&](std::size_t d) {
      CoincidenceTable table(m, res.delays[d]);
      double count = 0.0;
      for (const auto& [early, late] : events) {
        double p = table(early.longer, late.shorter);
        if (p <= 0.0) continue;
        double draw = static_cast<double>(derive_seed(seed, 2 + d, early.index) >> 11) * 0x1.0p-53;
        if (draw < p) count += 1.0;
      }
      res.counts[d] = count;
      res.fourfold[d] = count / pairs;
    });
  }

  double c_max = 0.5 * (res.counts.front() + res.counts.back());
  double c_min = res.counts[nearest_zero(res.delays)];
  if (c_max <= 0.0) {
    res.V = 0.0;
    res.sigma_V = 1.0;
    return res;
  }
  // An empty observed dip bin is given one count of uncertainty.
  double c_sigma = method == HomMethod::monte_carlo ? std::min(std::max(c_min, 1.0), c_max) : std::min(c_min, c_max);
  Visibility v = visibility(c_max, c_sigma, VisibilityKind::hom);
  res.V = (c_max - c_min) / c_max;
  res.sigma_V = v.sigma;
  return res;
}

double hom_baseline_rate(const HomConfig& config) {
  check_delay_grid(config);
  double purity = 0.0;
  HomModel m = make_model(config, purity);
  auto slots = slot_distribution(m);
  double lead = 0.0;
  for (const auto& [a, pa] : slots) lead = std::max(lead, pa);
  const double cut = 1e-12 * lead * lead;
  double sum = 0.0;
  for (double delay : {config.delay_grid.front(), config.delay_grid.back()}) {
    CoincidenceTable table(m, delay);
    for (const auto& [a, pa] : slots)
      for (const auto& [b, pb] : slots)
        if (pa * pb > cut) sum += pa * pb * table(a, b);
  }
  return 0.5 * sum;
}

LineFit power_extrapolation(const std::vector<PowerPoint>& points) {
  if (points.size() < 3) throw InvalidInput("power_extrapolation: need at least 3 points");
  double S = 0, Sx = 0, Sxx = 0, Sy = 0, Sxy = 0;
  for (const auto& p : points) {
    if (!(p.sigma > 0.0)) throw InvalidInput("power_extrapolation: sigma must be > 0");
    double w = 1.0 / (p.sigma * p.sigma);
    S += w;
    Sx += w * p.x;
    Sxx += w * p.x * p.x;
    Sy += w * p.V;
    Sxy += w * p.x * p.V;
  }
  double det = S * Sxx - Sx * Sx;
  double scale = S * Sxx;
  if (!(std::abs(det) > 1e-12 * scale)) throw InvalidInput("power_extrapolation: singular design (abscissae not distinct)");
  LineFit fit;
  fit.intercept = (Sxx * Sy - Sx * Sxy) / det;
  fit.slope = (S * Sxy - Sx * Sy) / det;
  fit.sigma_intercept = std::sqrt(Sxx / det);
  fit.sigma_slope = std::sqrt(S / det);
  fit.chi2 = 0.0;
  for (const auto& p : points) {
    double e = (p.V - fit.intercept - fit.slope * p.x) / p.sigma;
    fit.chi2 += e * e;
  }
  return fit;
}

// ---------------------------------------------------------------------------
// LO HOM

namespace {

// <n| e^{u a^dag} (1+z)^N e^{u* a} |n>.
double normal_ordered_fock(int n, double z, double u2) {
  double s = 0.0;
  for (int k = 0; k <= n; ++k)
    s += std::pow(1.0 + z, k) * std::pow(u2, n - k) * std::exp(std::lgamma(n + 1.0) - std::lgamma(k + 1.0) -
                                                               2.0 * std::lgamma(n - k + 1.0));
  return s;
}

struct LoSetup {
  double T;
  double eta_c, eta_d;
  double mu_lo;
};

// Coincidence probability for m1 photons in the mode with LO amplitude overlap xi, m2 photons
// orthogonal to the LO, and a coherent LO on the other port. No-click expectations use the
// normal-ordered form of prod_q (1 - eta_q)^(N_q) after the splitter.
double lo_coincidence_analytic(const LoSetup& s, int m1, int m2, double xi) {
  const double t = std::sqrt(s.T), r = std::sqrt(1.0 - s.T);
  // Input port a (photon) -> (c, d) amplitudes (t, r); port b (LO) -> (-r, t).
  auto no_click = [&](double sc, double sd) {
    // Z = U^dag diag(s) U - I restricted to the ports.
    double Zaa = t * t * sc + r * r * sd - 1.0;
    double Zab = -t * r * sc + r * t * sd;
    double Zbb = r * r * sc + t * t * sd - 1.0;
    double u2 = Zab * Zab * s.mu_lo * xi * xi;
    return std::exp(Zbb * s.mu_lo) * normal_ordered_fock(m1, Zaa, u2) * std::pow(1.0 + Zaa, m2);
  };
  double Ec = no_click(1.0 - s.eta_c, 1.0);
  double Ed = no_click(1.0, 1.0 - s.eta_d);
  double Ecd = no_click(1.0 - s.eta_c, 1.0 - s.eta_d);
  return 1.0 - Ec - Ed + Ecd;
}

double lo_coincidence_oracle(const LoSetup& s, int m1, int m2, double xi, std::size_t cutoff) {
  DetectorModel dc, dd;
  dc.efficiency = s.eta_c;
  dd.efficiency = s.eta_d;
  double Ec = 0, Ed = 0, Ecd = 0;
  // The mode-1 photons split binomially into LO-matched and orthogonal parts.
  for (int i = 0; i <= m1; ++i) {
    double w = binomial_pmf(i, m1, xi * xi);
    if (w == 0.0) continue;
    int perp = m1 - i + m2;
    std::size_t cut = std::max<std::size_t>(cutoff, static_cast<std::size_t>(std::max(i, perp)));
    Eigen::MatrixXcd lo_c = coherent_state(s.mu_lo, cut);
    lo_c /= lo_c.trace().real();
    FockOutcome matched = fock_oracle(fock_state(i, cut), lo_c, s.T, dc, dd);
    FockOutcome other = fock_oracle(fock_state(perp, cut), fock_state(0, cut), s.T, dc, dd);
    double mc = matched.p00 + matched.p01, md = matched.p00 + matched.p10, mcd = matched.p00;
    double oc = other.p00 + other.p01, od = other.p00 + other.p10, ocd = other.p00;
    Ec += w * mc * oc;
    Ed += w * md * od;
    Ecd += w * mcd * ocd;
  }
  return 1.0 - Ec - Ed + Ecd;
}

struct LoEvaluation {
  double analytic;
  double oracle;
};

// Three-fold probability per heralded pulse at a given LO overlap.
LoEvaluation lo_threefold(const LoConfig& c, double mu_pump, double mu_lo, double xi, bool with_oracle) {
  auto [w1, w2] = mixture_weights(c.purity);
  double K = c.modes_K > 0.0 ? c.modes_K : 1.0 / c.purity;
  LoSetup s{c.splitter_ratio, c.out_c.efficiency, c.out_d.efficiency, mu_lo};
  const double h = c.eta_idler * c.herald.efficiency;
  std::vector<double> dist;
  if (mu_pump > 0.0) {
    dist = pair_dist(mu_pump, K);
  } else {
    dist = {0.0, 1.0};  // single pair, the zero-power limit
  }
  const double T = c.signal_transmission;
  const double p1 = w1 * T, p2 = w2 * T, p0 = 1.0 - T;
  double herald_total = 0.0;
  LoEvaluation acc{0.0, 0.0};
  for (int n = 1; n < static_cast<int>(dist.size()); ++n) {
    double base = dist[n] * (1.0 - std::pow(1.0 - h, n));
    herald_total += base;
    if (base < 1e-300) continue;
    for (int j1 = 0; j1 <= n; ++j1) {
      for (int j2 = 0; j1 + j2 <= n; ++j2) {
        double w = std::exp(std::lgamma(n + 1.0) - std::lgamma(j1 + 1.0) - std::lgamma(j2 + 1.0) -
                            std::lgamma(n - j1 - j2 + 1.0)) *
                   std::pow(p1, j1) * std::pow(p2, j2) * std::pow(p0, n - j1 - j2);
        if (base * w < 1e-18) continue;
        acc.analytic += base * w * lo_coincidence_analytic(s, j1, j2, xi);
        if (with_oracle) acc.oracle += base * w * lo_coincidence_oracle(s, j1, j2, xi, c.fock_cutoff);
      }
    }
  }
  acc.analytic /= herald_total;
  acc.oracle /= herald_total;
  return acc;
}

void validate(const LoConfig& c) {
  if (!(c.mu_lo >= 0.0)) throw InvalidInput("lo_hom: mu_lo must be >= 0");
  if (!(std::abs(c.mode_overlap) <= 1.0)) throw InvalidInput("lo_hom: |mode_overlap| must be <= 1");
  if (c.fock_cutoff < 4) throw InvalidInput("lo_hom: fock_cutoff must be >= 4");
  // Poisson tail beyond the cutoff.
  double head = 0.0;
  for (std::size_t n = 0; n <= c.fock_cutoff; ++n)
    head += std::exp(-c.mu_lo + n * std::log(std::max(c.mu_lo, 1e-300)) - std::lgamma(n + 1.0));
  if (c.mu_lo == 0.0) head = 1.0;
  double tail = 1.0 - head;
  if (tail >= 1e-8) {
    std::ostringstream msg;
    msg << "lo_hom: fock_cutoff " << c.fock_cutoff << " leaves LO tail mass " << tail << " >= 1e-8; raise the cutoff";
    throw InvalidInput(msg.str());
  }
  if (!(c.mu_pump >= 0.0 && c.mu_pump < 0.2)) throw InvalidInput("lo_hom: mu_pump must lie in [0, 0.2)");
  if (c.delay_grid.empty()) throw InvalidInput("lo_hom: empty delay grid");
}

}  // namespace

LoHomResult lo_hom(const LoConfig& config) {
  validate(config);
  mixture_weights(config.purity);
  LoHomResult res;
  res.delays = config.delay_grid;
  auto overlap_at = [&](double tau) {
    double g = config.delay_overlap ? config.delay_overlap(tau) : 1.0;
    return std::abs(config.mode_overlap) * g;
  };
  res.threefold.resize(res.delays.size());
  res.threefold_oracle.resize(res.delays.size());
  parallel_for(res.delays.size(), [&](std::size_t k) {
    LoEvaluation e = lo_threefold(config, config.mu_pump, config.mu_lo, overlap_at(res.delays[k]), true);
    res.threefold[k] = e.analytic;
    res.threefold_oracle[k] = e.oracle;
  });
  const double xi0 = overlap_at(0.0);
  auto dip_visibility = [&](double mu_pump, double mu_lo) {
    double base = lo_threefold(config, mu_pump, mu_lo, 0.0, false).analytic;
    double dip = lo_threefold(config, mu_pump, mu_lo, xi0, false).analytic;
    return (base - dip) / base;
  };
  res.V = dip_visibility(config.mu_pump, config.mu_lo);
  res.V_zero_power = dip_visibility(0.0, config.mu_lo);
  res.V_ideal_lo = dip_visibility(0.0, 1e-6);
  return res;
}

double solve_lo_overlap(LoConfig config, double target_V) {
  config.delay_grid = {0.0};
  config.delay_overlap = nullptr;
  config.mode_overlap = 1.0;
  if (lo_hom(config).V_zero_power < target_V)
    throw InvalidInput("solve_lo_overlap: target visibility exceeds the unit-overlap value");
  double lo = 0.0, hi = 1.0;
  for (int it = 0; it < 60; ++it) {
    config.mode_overlap = 0.5 * (lo + hi);
    (lo_hom(config).V_zero_power < target_V ? lo : hi) = config.mode_overlap;
  }
  return 0.5 * (lo + hi);
}

}  // namespace spdc
