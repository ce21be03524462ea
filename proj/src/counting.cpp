#include "spdcsim/counting.h"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <random>
#include <sstream>

#include <Eigen/Sparse>

#include "spdcsim/common.h"

namespace spdc {

namespace {

constexpr double kTailMass = 1e-9;

double jitter_sigma(const DetectorModel& det) { return det.jitter_fwhm / (2.0 * std::sqrt(2.0 * kLn2)); }

// Pulse slots after a click that fall strictly inside the dead time.
double dead_slots(double dead_time, double rep_rate) {
  double x = dead_time * rep_rate;
  if (x <= 0.0) return 0.0;
  return std::ceil(x) - 1.0;
}

struct PulseProbabilities {
  double p_s;  // singles per pulse, frame-integrated darks
  double p_i;
  double c;    // coincidence per pulse inside the window
};

// 1 - G(z) for the thermal pair-number generating function G(z) = (1 + mu (1 - z) / K)^-K.
double one_minus_pgf(double mu, double K, double z) {
  double x = mu * (1.0 - z);
  if (std::isinf(K)) return -std::expm1(-x);
  return -std::expm1(-K * std::log1p(x / K));
}

PulseProbabilities pulse_probabilities(const SourceStats& source, const DetectorModel& det_s,
                                       const DetectorModel& det_i, double window) {
  double T_s = source.eta_signal * det_s.efficiency;
  double T_i = source.eta_idler * det_i.efficiency;
  double mu = source.mu, K = source.modes_K;
  // Probabilities of at least one detected photon per arm, and in either arm.
  double a_s = one_minus_pgf(mu, K, 1.0 - T_s);
  double a_i = one_minus_pgf(mu, K, 1.0 - T_i);
  double a_any = one_minus_pgf(mu, K, (1.0 - T_s) * (1.0 - T_i));

  double frame = 1.0 / source.rep_rate;
  double pd_s = -std::expm1(-det_s.dark_rate * frame);
  double pd_i = -std::expm1(-det_i.dark_rate * frame);
  double pw_s = -std::expm1(-det_s.dark_rate * window);
  double pw_i = -std::expm1(-det_i.dark_rate * window);

  double c_pairs = a_s + a_i - a_any;
  // 1 - (1-pw_s) q_s - (1-pw_i) q_i + (1-pw_s)(1-pw_i) q_si with q = 1 - a.
  double c_all = c_pairs + pw_s * (1.0 - a_s) + pw_i * (1.0 - a_i) -
                 (pw_s + pw_i - pw_s * pw_i) * (1.0 - a_any);
  double sigma = std::hypot(jitter_sigma(det_s), jitter_sigma(det_i));
  double accept = sigma > 0.0 ? std::erf(0.5 * window / (std::sqrt(2.0) * sigma)) : 1.0;

  PulseProbabilities out;
  out.p_s = a_s + pd_s * (1.0 - a_s);
  out.p_i = a_i + pd_i * (1.0 - a_i);
  out.c = c_all - c_pairs * (1.0 - accept);
  return out;
}

struct Registered {
  double s;
  double i;
  double c;
};

// Registered clicks per pulse for two non-paralyzable detectors fed by independent pulses with
// joint click probabilities (c both, p_s - c signal only, p_i - c idler only). Detector x is dead
// for m_x pulse slots after a click. The state (a, b) counts remaining dead slots; states with both
// detectors dead count down deterministically, so the chain is embedded on states with a == 0 or
// b == 0 and the rates follow from renewal-reward.
Registered dead_time_rates(double p_s, double p_i, double c, int m_s, int m_i) {
  if (m_s == 0 && m_i == 0) return {p_s, p_i, c};
  // Index: (0, b) -> b for b in [0, m_i]; (a, 0) -> m_i + a for a in [1, m_s].
  const int n = m_s + m_i + 1;
  auto index = [&](int a, int b) { return a == 0 ? b : m_i + a; };

  std::vector<Eigen::Triplet<double>> entries;
  Eigen::VectorXd hold = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd r_s = Eigen::VectorXd::Zero(n), r_i = Eigen::VectorXd::Zero(n), r_c = Eigen::VectorXd::Zero(n);
  auto edge = [&](int from, double prob, int a, int b) {
    if (prob <= 0.0) return;
    int k = std::min(a, b);
    entries.emplace_back(index(a - k, b - k), from, prob);
    hold[from] += prob * (1.0 + k);
  };
  const double p11 = c, p10 = p_s - c, p01 = p_i - c, p00 = 1.0 - p_s - p_i + c;
  {
    int x = index(0, 0);
    r_s[x] = p_s;
    r_i[x] = p_i;
    r_c[x] = c;
    edge(x, p11, m_s, m_i);
    edge(x, p10, m_s, 0);
    edge(x, p01, 0, m_i);
    edge(x, p00, 0, 0);
  }
  for (int b = 1; b <= m_i; ++b) {  // signal live, idler dead
    int x = index(0, b);
    r_s[x] = p_s;
    edge(x, p_s, m_s, b - 1);
    edge(x, 1.0 - p_s, 0, b - 1);
  }
  for (int a = 1; a <= m_s; ++a) {  // idler live, signal dead
    int x = index(a, 0);
    r_i[x] = p_i;
    edge(x, p_i, a - 1, m_i);
    edge(x, 1.0 - p_i, a - 1, 0);
  }
  // Stationary vector of the column-stochastic embedded chain: (P - I) pi = 0 with sum(pi) = 1
  // replacing the first equation.
  Eigen::SparseMatrix<double> A(n, n);
  for (int j = 0; j < n; ++j) entries.emplace_back(j, j, -1.0);
  std::vector<Eigen::Triplet<double>> kept;
  kept.reserve(entries.size() + n);
  for (const auto& e : entries)
    if (e.row() != 0) kept.push_back(e);
  for (int j = 0; j < n; ++j) kept.emplace_back(0, j, 1.0);
  A.setFromTriplets(kept.begin(), kept.end());
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  lu.compute(A);
  if (lu.info() != Eigen::Success) throw InvalidInput("dead-time chain is singular");
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
  rhs[0] = 1.0;
  Eigen::VectorXd pi = lu.solve(rhs);
  double pulses = pi.dot(hold);
  return {pi.dot(r_s) / pulses, pi.dot(r_i) / pulses, pi.dot(r_c) / pulses};
}

}  // namespace

void validate(const DetectorModel& det) {
  if (!(det.efficiency >= 0.0 && det.efficiency <= 1.0)) throw InvalidInput("detector efficiency must lie in [0, 1]");
  if (!(det.dark_rate >= 0.0)) throw InvalidInput("detector dark rate must be >= 0");
  if (!(det.jitter_fwhm >= 0.0)) throw InvalidInput("detector jitter must be >= 0");
  if (!(det.dead_time >= 0.0)) throw InvalidInput("detector dead time must be >= 0");
}

void validate(const SourceStats& source) {
  if (!(source.mu >= 0.0)) throw InvalidInput("mu must be >= 0");
  if (!(source.modes_K >= 1.0)) throw InvalidInput("modes_K must be >= 1");
  if (!(source.eta_signal >= 0.0 && source.eta_signal <= 1.0)) throw InvalidInput("eta_signal must lie in [0, 1]");
  if (!(source.eta_idler >= 0.0 && source.eta_idler <= 1.0)) throw InvalidInput("eta_idler must lie in [0, 1]");
  if (!(source.rep_rate > 0.0)) throw InvalidInput("rep_rate must be > 0");
  if (!(source.power_calibration >= 0.0)) throw InvalidInput("power_calibration must be >= 0");
}

std::vector<double> pair_dist(double mu, double modes_K, std::size_t n_max) {
  if (!(mu >= 0.0) || !std::isfinite(mu)) throw InvalidInput("pair_dist: mu must be finite and >= 0");
  if (!(modes_K >= 1.0)) throw InvalidInput("pair_dist: modes_K must be >= 1");
  bool automatic = n_max == 0;
  std::size_t limit = automatic ? 100000 : n_max;
  bool poisson = std::isinf(modes_K);

  std::vector<double> p;
  p.reserve(std::min<std::size_t>(limit + 1, 64));
  double p0 = poisson ? std::exp(-mu) : std::exp(-modes_K * std::log1p(mu / modes_K));
  p.push_back(p0);
  double sum = p0;
  double ratio = poisson ? 0.0 : (mu / modes_K) / (1.0 + mu / modes_K);
  for (std::size_t n = 0; n < limit; ++n) {
    if (automatic && 1.0 - sum < kTailMass && static_cast<double>(n) > mu) break;
    double dn = static_cast<double>(n);
    double next = poisson ? p.back() * mu / (dn + 1.0) : p.back() * ratio * (dn + modes_K) / (dn + 1.0);
    p.push_back(next);
    sum += next;
  }
  if (1.0 - sum >= kTailMass) {
    std::ostringstream msg;
    msg << "pair_dist: tail mass " << (1.0 - sum) << " beyond n_max = " << (p.size() - 1)
        << " exceeds 1e-9; use a larger n_max";
    throw InvalidInput(msg.str());
  }
  return p;
}

double click_prob(const std::vector<double>& dist, double transmission, const DetectorModel& det, double gate) {
  double eta = transmission * det.efficiency;
  double none = 0.0;
  for (std::size_t n = 0; n < dist.size(); ++n) none += dist[n] * std::pow(1.0 - eta, static_cast<double>(n));
  double p_dark = -std::expm1(-det.dark_rate * gate);
  return 1.0 - (1.0 - p_dark) * none;
}

HeraldedEfficiency heralded_efficiency(double C, double S_s, double S_i) {
  if (C < 0.0 || S_s < 0.0 || S_i < 0.0) throw InvalidInput("heralded_efficiency: counts must be >= 0");
  if (S_s <= 0.0 || S_i <= 0.0) throw InvalidInput("heralded_efficiency: singles must be > 0");
  if (C > S_s || C > S_i) throw InvalidInput("heralded_efficiency: coincidences exceed singles");
  double H = C / std::sqrt(S_s * S_i);
  // S = C + A with C, A_s, A_i independent Poisson.
  double a = 1.0 - C / (2.0 * S_s) - C / (2.0 * S_i);
  double var = C / (S_s * S_i) * a * a + H * H * ((S_s - C) / (4.0 * S_s * S_s) + (S_i - C) / (4.0 * S_i * S_i));
  return {H, std::sqrt(var)};
}

RatePrediction predict_rates(const SourceStats& source, const DetectorModel& det_s, const DetectorModel& det_i,
                             double integration, double window) {
  validate(source);
  validate(det_s);
  validate(det_i);
  if (!(integration > 0.0)) throw InvalidInput("predict_rates: integration time must be > 0");
  if (!(window > 0.0)) throw InvalidInput("predict_rates: coincidence window must be > 0");

  PulseProbabilities pp = pulse_probabilities(source, det_s, det_i, window);
  double m_s = dead_slots(det_s.dead_time, source.rep_rate);
  double m_i = dead_slots(det_i.dead_time, source.rep_rate);
  if (m_s > 1e5 || m_i > 1e5) throw InvalidInput("predict_rates: dead time spans more than 1e5 pulses");
  Registered reg = dead_time_rates(pp.p_s, pp.p_i, pp.c, static_cast<int>(m_s), static_cast<int>(m_i));
  double s_obs = reg.s, i_obs = reg.i, c_obs = reg.c;

  double pulses = source.rep_rate * integration;
  RatePrediction out;
  out.singles_s = s_obs * pulses;
  out.singles_i = i_obs * pulses;
  out.coincidences = c_obs * pulses;
  out.H_predicted = out.singles_s > 0.0 && out.singles_i > 0.0
                        ? out.coincidences / std::sqrt(out.singles_s * out.singles_i)
                        : 0.0;
  if (source.power_calibration > 0.0) {
    out.pump_power_mW = source.mu / source.power_calibration;
    if (out.pump_power_mW > 0.0) out.pairs_per_s_per_mW = c_obs * source.rep_rate / out.pump_power_mW;
  }

  double load_s = pp.p_s * source.rep_rate * det_s.dead_time;
  double load_i = pp.p_i * source.rep_rate * det_i.dead_time;
  if (load_s > 0.5 || load_i > 0.5) {
    out.saturated = true;
    std::ostringstream msg;
    msg << "detector saturation: R*dead_time = " << std::max(load_s, load_i) << " > 0.5";
    out.warning = msg.str();
  }
  return out;
}

double g2_unheralded(double modes_K) {
  if (!(modes_K >= 1.0)) throw InvalidInput("g2_unheralded: modes_K must be >= 1");
  return 1.0 + 1.0 / modes_K;
}

namespace {

// mu giving a target coincidence rate, with everything else in source fixed.
double solve_mu_for_rate(SourceStats source, const DetectorModel& det_s, const DetectorModel& det_i,
                         double rate, double window) {
  auto rate_at = [&](double mu) {
    source.mu = mu;
    return predict_rates(source, det_s, det_i, 1.0, window).coincidences;
  };
  double lo = 0.0, hi = 1e-3;
  while (rate_at(hi) < rate) {
    lo = hi;
    hi *= 2.0;
    if (hi > 10.0) throw InvalidInput("coincidence rate unreachable for mu <= 10 with these detectors");
  }
  for (int iter = 0; iter < 200 && hi - lo > 1e-15 * hi; ++iter) {
    double mid = 0.5 * (lo + hi);
    (rate_at(mid) < rate ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

double calibrate_power(const SourceStats& source, const DetectorModel& det_s, const DetectorModel& det_i,
                       double pairs_per_s_per_mW, double power_mW, double window) {
  if (!(pairs_per_s_per_mW > 0.0) || !(power_mW > 0.0))
    throw InvalidInput("calibrate_power: brightness and power must be > 0");
  double mu = solve_mu_for_rate(source, det_s, det_i, pairs_per_s_per_mW * power_mW, window);
  return mu / power_mW;
}

OperatingPoint fit_operating_point(const SourceStats& base, const DetectorModel& det_s, const DetectorModel& det_i,
                                   double coincidence_rate, double H, double window) {
  if (!(coincidence_rate > 0.0) || !(H > 0.0 && H < 1.0))
    throw InvalidInput("fit_operating_point: need a positive rate and 0 < H < 1");
  double t_max = std::min(det_s.efficiency, det_i.efficiency);
  SourceStats s = base;
  auto evaluate = [&](double T) {
    s.eta_signal = T / det_s.efficiency;
    s.eta_idler = T / det_i.efficiency;
    s.mu = solve_mu_for_rate(s, det_s, det_i, coincidence_rate, window);
    return predict_rates(s, det_s, det_i, 1.0, window).H_predicted;
  };
  double lo = 1e-3 * t_max, hi = t_max;
  if (evaluate(hi) < H) throw InvalidInput("fit_operating_point: heralded efficiency unreachable with these detectors");
  for (int iter = 0; iter < 100 && hi - lo > 1e-13; ++iter) {
    double mid = 0.5 * (lo + hi);
    (evaluate(mid) < H ? lo : hi) = mid;
  }
  evaluate(0.5 * (lo + hi));
  return {s.mu, s.eta_signal, s.eta_idler};
}

void apply_dead_time(std::vector<double>& times, double dead_time) {
  if (times.empty() || dead_time <= 0.0) return;
  std::size_t kept = 1;
  double last = times[0];
  for (std::size_t k = 1; k < times.size(); ++k) {
    if (times[k] - last >= dead_time) {
      last = times[k];
      times[kept++] = last;
    }
  }
  times.resize(kept);
}

std::vector<TimeTagStream> simulate_timetags(const PairSourceSetup& setup, double duration, std::uint64_t seed) {
  const SourceStats& src = setup.source;
  validate(src);
  validate(setup.det_s);
  validate(setup.det_i);
  double n_pulses_real = std::floor(duration * src.rep_rate);
  if (!(n_pulses_real >= 1.0)) throw InvalidInput("simulate_timetags: duration * rep_rate must be >= 1");
  auto n_pulses = static_cast<std::uint64_t>(n_pulses_real);

  std::vector<double> dist = pair_dist(src.mu, src.modes_K);
  std::vector<double> cumulative(dist.size());
  double acc = 0.0;
  for (std::size_t n = 0; n < dist.size(); ++n) cumulative[n] = (acc += dist[n]);
  double p_any = 1.0 - dist[0];

  const double T_s = src.eta_signal * setup.det_s.efficiency;
  const double T_i = src.eta_idler * setup.det_i.efficiency;
  const double sig_s = jitter_sigma(setup.det_s);
  const double sig_i = jitter_sigma(setup.det_i);
  const double period = 1.0 / src.rep_rate;

  std::uint64_t n_blocks = (n_pulses + kPulsesPerBlock - 1) / kPulsesPerBlock;
  std::vector<std::vector<double>> block_s(n_blocks), block_i(n_blocks);

  parallel_for(n_blocks, [&](std::size_t b) {
    std::mt19937_64 rng(derive_seed(seed, 0, b));
    std::uniform_real_distribution<double> uniform(0.0, 1.0);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uint64_t first = b * kPulsesPerBlock;
    std::uint64_t last = std::min<std::uint64_t>(n_pulses, first + kPulsesPerBlock);
    auto& out_s = block_s[b];
    auto& out_i = block_i[b];

    if (p_any > 0.0) {
      std::geometric_distribution<std::uint64_t> skip(p_any);
      std::uint64_t k = first + skip(rng);
      while (k < last) {
        // Pair number conditioned on n >= 1.
        double u = dist[0] + uniform(rng) * p_any;
        auto it = std::lower_bound(cumulative.begin() + 1, cumulative.end(), u);
        std::size_t n = it == cumulative.end() ? dist.size() - 1 : static_cast<std::size_t>(it - cumulative.begin());
        double t0 = (static_cast<double>(k) + 0.5) * period;
        for (std::size_t pair = 0; pair < n; ++pair) {
          if (uniform(rng) < T_s) out_s.push_back(t0 + sig_s * normal(rng));
          if (uniform(rng) < T_i) out_i.push_back(t0 + sig_i * normal(rng));
        }
        k += 1 + skip(rng);
      }
    }

    double t_begin = static_cast<double>(first) * period;
    double t_span = static_cast<double>(last - first) * period;
    auto add_darks = [&](std::vector<double>& out, double rate) {
      if (rate <= 0.0) return;
      std::poisson_distribution<std::uint64_t> count(rate * t_span);
      std::uint64_t n = count(rng);
      for (std::uint64_t j = 0; j < n; ++j) out.push_back(t_begin + uniform(rng) * t_span);
    };
    add_darks(out_s, setup.det_s.dark_rate);
    add_darks(out_i, setup.det_i.dark_rate);
  });

  auto merge = [&](std::vector<std::vector<double>>& blocks, int channel, double dead_time) {
    TimeTagStream s;
    s.channel = channel;
    s.duration = static_cast<double>(n_pulses) * period;
    s.seed = seed;
    std::size_t total = 0;
    for (auto& v : blocks) total += v.size();
    s.times.reserve(total);
    for (auto& v : blocks) s.times.insert(s.times.end(), v.begin(), v.end());
    std::sort(s.times.begin(), s.times.end());
    apply_dead_time(s.times, dead_time);
    return s;
  };
  std::vector<TimeTagStream> out;
  out.push_back(merge(block_s, 1, setup.det_s.dead_time));
  out.push_back(merge(block_i, 2, setup.det_i.dead_time));
  return out;
}

CoincidenceCount coincidences(const TimeTagStream& a, const TimeTagStream& b, double window, double offset) {
  if (!(window > 0.0)) throw InvalidInput("coincidences: window must be > 0");
  double half = 0.5 * window;
  std::size_t i = 0, j = 0, count = 0;
  while (i < a.times.size() && j < b.times.size()) {
    double d = a.times[i] - b.times[j] - offset;
    if (std::abs(d) <= half) {
      ++count;
      ++i;
      ++j;
    } else if (d > half) {
      ++j;
    } else {
      ++i;
    }
  }
  double C = static_cast<double>(count);
  return {C, std::sqrt(C)};
}

void write_timetags(std::ostream& out, const std::vector<TimeTagStream>& streams, const std::string& config_hash) {
  std::uint64_t seed = streams.empty() ? 0 : streams.front().seed;
  out << "# spdcsim timetags seed=" << seed << " config_hash=" << config_hash << "\n";
  out << "channel\ttime_ps\n";
  std::vector<std::pair<double, int>> events;
  for (const auto& s : streams)
    for (double t : s.times) events.emplace_back(t, s.channel);
  std::sort(events.begin(), events.end());
  out << std::fixed << std::setprecision(3);
  for (const auto& [t, ch] : events) out << ch << '\t' << t / kPs << '\n';
  out << std::defaultfloat;
}

}  // namespace spdc
