#include "spdcsim/tof.h"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <random>
#include <sstream>

#include "spdcsim/common.h"

namespace spdc {

void validate(const TofSpec& spec) {
  if (!(spec.dispersion != 0.0) || !std::isfinite(spec.dispersion)) throw InvalidInput("tof: dispersion must be nonzero");
  if (!(spec.insertion_loss >= 0.0 && spec.insertion_loss < 1.0)) throw InvalidInput("tof: insertion_loss must lie in [0, 1)");
  if (!(spec.reference_wavelength > 0.0)) throw InvalidInput("tof: reference_wavelength must be > 0");
  if (!(spec.frame > 0.0)) throw InvalidInput("tof: frame must be > 0");
}

double arrival_time(const TofSpec& s, double wavelength) {
  return 0.5 * s.frame + s.dispersion * (wavelength - s.reference_wavelength);
}

JointIntensity intensity_of(const JointAmplitude& jsa) { return {jsa.grid, jsa.jsi()}; }

JointIntensity swap_arms(const JointIntensity& jsi) {
  return {JointGrid{jsi.grid.idler, jsi.grid.signal}, jsi.values.transpose()};
}

namespace {

// Time interval covered by a grid axis, cell edges included.
void check_no_wraparound(const std::vector<double>& axis, const TofSpec& s, const char* name) {
  const double step = axis[1] - axis[0];
  double t_a = arrival_time(s, axis.front() - 0.5 * step);
  double t_b = arrival_time(s, axis.back() + 0.5 * step);
  if (t_a > t_b) std::swap(t_a, t_b);
  const double tol = 1e-9 * s.frame;
  if (t_a < -tol || t_b > s.frame + tol) {
    std::ostringstream msg;
    msg << "tof: " << name << " grid maps to [" << t_a / kPs << ", " << t_b / kPs << "] ps, outside the "
        << s.frame / kPs << " ps frame (wraparound)";
    throw InvalidInput(msg.str());
  }
}

void check_jsi(const JointIntensity& jsi) {
  if (jsi.grid.signal.size() < 2 || jsi.grid.idler.size() < 2) throw InvalidInput("tof: JSI grid needs 2+ points per axis");
  if (static_cast<std::size_t>(jsi.values.rows()) != jsi.grid.signal.size() ||
      static_cast<std::size_t>(jsi.values.cols()) != jsi.grid.idler.size())
    throw InvalidInput("tof: JSI shape does not match its grid");
  if ((jsi.values.array() < 0.0).any() || !jsi.values.allFinite()) throw InvalidInput("tof: JSI must be finite and >= 0");
  if (!(jsi.values.sum() > 0.0)) throw InvalidInput("tof: JSI is identically zero");
}

double jitter_sigma(const DetectorModel& d) { return d.jitter_fwhm / (2.0 * std::sqrt(2.0 * kLn2)); }

std::size_t time_bin(double t, double frame, std::size_t bins) {
  double x = t - frame * std::floor(t / frame);
  auto k = static_cast<std::size_t>(x / frame * static_cast<double>(bins));
  return std::min(k, bins - 1);
}

// Fraction of each grid cell falling in each time bin, rows = bins.
Eigen::MatrixXd cell_to_bin(const std::vector<double>& axis, const TofSpec& s, std::size_t bins) {
  const double step = axis[1] - axis[0];
  const double width = s.frame / static_cast<double>(bins);
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(bins), static_cast<Eigen::Index>(axis.size()));
  for (std::size_t k = 0; k < axis.size(); ++k) {
    double a = arrival_time(s, axis[k] - 0.5 * step), b = arrival_time(s, axis[k] + 0.5 * step);
    if (a > b) std::swap(a, b);
    a = std::max(a, 0.0);
    b = std::min(b, s.frame);
    const double len = std::abs(s.dispersion * step);
    auto first = static_cast<std::size_t>(std::max(0.0, std::floor(a / width)));
    for (std::size_t bin = first; bin < bins && bin * width < b; ++bin) {
      double lo = std::max(a, bin * width), hi = std::min(b, (bin + 1) * width);
      if (hi > lo) A(static_cast<Eigen::Index>(bin), static_cast<Eigen::Index>(k)) = (hi - lo) / len;
    }
  }
  return A;
}

// Bin-to-bin transfer under wrapped Gaussian jitter, source position uniform inside its bin.
Eigen::MatrixXd jitter_matrix(double sigma, double frame, std::size_t bins) {
  const auto n = static_cast<Eigen::Index>(bins);
  if (sigma <= 0.0) return Eigen::MatrixXd::Identity(n, n);
  const double w = frame / static_cast<double>(bins);
  constexpr int kSub = 32;
  const auto reach = static_cast<long>(std::ceil(8.0 * sigma / w)) + 1;
  std::vector<double> kernel(static_cast<std::size_t>(2 * reach + 1), 0.0);
  auto cdf = [&](double x) { return 0.5 * std::erfc(-x / (sigma * std::sqrt(2.0))); };
  for (int m = 0; m < kSub; ++m) {
    const double x0 = (m + 0.5) / kSub * w;
    for (long d = -reach; d <= reach; ++d)
      kernel[static_cast<std::size_t>(d + reach)] += (cdf(d * w + w - x0) - cdf(d * w - x0)) / kSub;
  }
  Eigen::MatrixXd B = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index k = 0; k < n; ++k)
    for (long d = -reach; d <= reach; ++d) {
      Eigen::Index j = ((k + d) % n + n) % n;
      B(j, k) += kernel[static_cast<std::size_t>(d + reach)];
    }
  return B;
}

}  // namespace

TofHistogram simulate_tof(const JointIntensity& jsi, const TofSpec& spec_1, const TofSpec& spec_2,
                          const DetectorModel& det_1, const DetectorModel& det_2, std::uint64_t n_events,
                          std::uint64_t seed, std::size_t bins) {
  validate(spec_1);
  validate(spec_2);
  validate(det_1);
  validate(det_2);
  check_jsi(jsi);
  if (bins < 2) throw InvalidInput("tof: need at least 2 time bins");
  if (spec_1.frame != spec_2.frame) throw InvalidInput("tof: both arms must share the frame");
  check_no_wraparound(jsi.grid.signal, spec_1, "channel-1");
  check_no_wraparound(jsi.grid.idler, spec_2, "channel-2");

  const Eigen::Index n1 = jsi.values.rows(), n2 = jsi.values.cols();
  std::vector<double> cumulative(static_cast<std::size_t>(n1 * n2));
  double acc = 0.0;
  for (Eigen::Index i = 0; i < n1; ++i)
    for (Eigen::Index j = 0; j < n2; ++j) cumulative[static_cast<std::size_t>(i * n2 + j)] = (acc += jsi.values(i, j));
  for (double& c : cumulative) c /= acc;

  const double step_1 = jsi.grid.signal_step(), step_2 = jsi.grid.idler_step();
  const double keep_1 = (1.0 - spec_1.insertion_loss) * det_1.efficiency;
  const double keep_2 = (1.0 - spec_2.insertion_loss) * det_2.efficiency;
  const double sig_1 = jitter_sigma(det_1), sig_2 = jitter_sigma(det_2);
  const double frame = spec_1.frame;

  const std::uint64_t n_blocks = (n_events + kPulsesPerBlock - 1) / kPulsesPerBlock;
  struct Partial {
    std::vector<std::uint32_t> counts;
    std::uint64_t recorded = 0;
  };
  std::vector<Partial> parts(n_blocks);
  parallel_for(n_blocks, [&](std::size_t b) {
    std::mt19937_64 rng(derive_seed(seed, 3, b));
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::normal_distribution<double> g(0.0, 1.0);
    Partial& part = parts[b];
    part.counts.assign(bins * bins, 0);
    const std::uint64_t first = b * kPulsesPerBlock;
    const std::uint64_t last = std::min<std::uint64_t>(n_events, first + kPulsesPerBlock);
    for (std::uint64_t e = first; e < last; ++e) {
      double x = u(rng);
      auto cell = static_cast<std::size_t>(std::upper_bound(cumulative.begin(), cumulative.end(), x) - cumulative.begin());
      cell = std::min(cell, cumulative.size() - 1);
      const auto i = static_cast<std::size_t>(cell / static_cast<std::size_t>(n2));
      const auto j = static_cast<std::size_t>(cell % static_cast<std::size_t>(n2));
      double l1 = jsi.grid.signal[i] + (u(rng) - 0.5) * step_1;
      double l2 = jsi.grid.idler[j] + (u(rng) - 0.5) * step_2;
      double t1 = arrival_time(spec_1, l1), t2 = arrival_time(spec_2, l2);
      t1 += sig_1 * g(rng);
      t2 += sig_2 * g(rng);
      bool d1 = u(rng) < keep_1;
      bool d2 = u(rng) < keep_2;
      if (!(d1 && d2)) continue;
      ++part.counts[time_bin(t1, frame, bins) * bins + time_bin(t2, frame, bins)];
      ++part.recorded;
    }
  });

  TofHistogram h;
  h.counts = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(bins), static_cast<Eigen::Index>(bins));
  h.frame = frame;
  h.events = n_events;
  h.seed = seed;
  for (const auto& p : parts) {
    if (p.counts.empty()) continue;
    for (std::size_t r = 0; r < bins; ++r)
      for (std::size_t c = 0; c < bins; ++c)
        h.counts(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) += p.counts[r * bins + c];
    h.recorded += p.recorded;
  }
  return h;
}

Eigen::MatrixXd expected_histogram(const JointIntensity& jsi, const TofSpec& spec_1, const TofSpec& spec_2,
                                   std::size_t bins) {
  validate(spec_1);
  validate(spec_2);
  check_jsi(jsi);
  check_no_wraparound(jsi.grid.signal, spec_1, "channel-1");
  check_no_wraparound(jsi.grid.idler, spec_2, "channel-2");
  Eigen::MatrixXd A1 = cell_to_bin(jsi.grid.signal, spec_1, bins);
  Eigen::MatrixXd A2 = cell_to_bin(jsi.grid.idler, spec_2, bins);
  Eigen::MatrixXd p = A1 * jsi.values * A2.transpose();
  return p / p.sum();
}

Eigen::MatrixXd expected_histogram(const JointIntensity& jsi, const TofSpec& spec_1, const TofSpec& spec_2,
                                   const DetectorModel& det_1, const DetectorModel& det_2, std::size_t bins) {
  Eigen::MatrixXd p = expected_histogram(jsi, spec_1, spec_2, bins);
  Eigen::MatrixXd B1 = jitter_matrix(jitter_sigma(det_1), spec_1.frame, bins);
  Eigen::MatrixXd B2 = jitter_matrix(jitter_sigma(det_2), spec_2.frame, bins);
  p = B1 * p * B2.transpose();
  return p / p.sum();
}

namespace {

std::vector<double> matched_axis(const TofSpec& s, std::size_t bins) {
  std::vector<double> axis(bins);
  const double width = s.frame / static_cast<double>(bins);
  for (std::size_t k = 0; k < bins; ++k)
    axis[k] = s.reference_wavelength + ((static_cast<double>(k) + 0.5) * width - 0.5 * s.frame) / s.dispersion;
  if (s.dispersion < 0.0) std::reverse(axis.begin(), axis.end());
  return axis;
}

}  // namespace

JointGrid matched_grid(const TofSpec& spec_1, const TofSpec& spec_2, std::size_t bins) {
  validate(spec_1);
  validate(spec_2);
  return {matched_axis(spec_1, bins), matched_axis(spec_2, bins)};
}

ReconstructedJsi reconstruct_jsi(const TofHistogram& histogram, const TofSpec& spec_1, const TofSpec& spec_2) {
  validate(spec_1);
  validate(spec_2);
  const double total = histogram.counts.sum();
  if (!(total > 0.0)) throw InvalidInput("reconstruct_jsi: empty histogram");
  TofSpec s1 = spec_1, s2 = spec_2;
  s1.frame = s2.frame = histogram.frame;
  ReconstructedJsi out;
  out.jsi.grid = {matched_axis(s1, histogram.bins_1()), matched_axis(s2, histogram.bins_2())};
  Eigen::MatrixXd v = histogram.counts / total;
  if (s1.dispersion < 0.0) v = v.colwise().reverse().eval();
  if (s2.dispersion < 0.0) v = v.rowwise().reverse().eval();
  out.jsi.values = v;
  out.sigma = (v.array() / total).sqrt().matrix();
  return out;
}

double total_variation(const Eigen::MatrixXd& p, const Eigen::MatrixXd& q) {
  if (p.rows() != q.rows() || p.cols() != q.cols()) throw InvalidInput("total_variation: shape mismatch");
  const double sp = p.sum(), sq = q.sum();
  if (!(sp > 0.0 && sq > 0.0)) throw InvalidInput("total_variation: empty distribution");
  return 0.5 * (p / sp - q / sq).cwiseAbs().sum();
}

namespace {

// Frequency of each bin centre under a spec.
std::vector<double> bin_frequencies(const TofSpec& s, std::size_t bins, double frame) {
  std::vector<double> nu(bins);
  const double width = frame / static_cast<double>(bins);
  for (std::size_t k = 0; k < bins; ++k) {
    double lambda = s.reference_wavelength + ((static_cast<double>(k) + 0.5) * width - 0.5 * frame) / s.dispersion;
    nu[k] = kSpeedOfLight / lambda;
  }
  return nu;
}

// Count-weighted mean frequency on one channel (axis 0 = rows).
double centroid(const Eigen::MatrixXd& counts, const std::vector<double>& nu, int axis) {
  Eigen::VectorXd marginal = axis == 0 ? Eigen::VectorXd(counts.rowwise().sum()) : Eigen::VectorXd(counts.colwise().sum());
  double s = 0.0, w = 0.0;
  for (Eigen::Index k = 0; k < marginal.size(); ++k) {
    s += marginal[k] * nu[static_cast<std::size_t>(k)];
    w += marginal[k];
  }
  return s / w;
}

// Fractional bin index at which a channel sees frequency nu.
double bin_position(const TofSpec& s, double nu, std::size_t bins, double frame) {
  double t = arrival_time(s, kSpeedOfLight / nu);
  return t / (frame / static_cast<double>(bins)) - 0.5;
}

double bilinear(const Eigen::MatrixXd& m, double r, double c) {
  if (r < 0.0 || c < 0.0 || r > m.rows() - 1.0 || c > m.cols() - 1.0) return 0.0;
  auto r0 = static_cast<Eigen::Index>(std::floor(r)), c0 = static_cast<Eigen::Index>(std::floor(c));
  Eigen::Index r1 = std::min<Eigen::Index>(r0 + 1, m.rows() - 1), c1 = std::min<Eigen::Index>(c0 + 1, m.cols() - 1);
  double fr = r - r0, fc = c - c0;
  return (1 - fr) * ((1 - fc) * m(r0, c0) + fc * m(r0, c1)) + fr * ((1 - fc) * m(r1, c0) + fc * m(r1, c1));
}

}  // namespace

SwapCalibration swap_calibrate(const TofHistogram& histogram_ab, const TofHistogram& histogram_swapped,
                               const TofSpec& nominal_1, const TofSpec& nominal_2, double pump_wavelength) {
  validate(nominal_1);
  validate(nominal_2);
  if (!(pump_wavelength > 0.0)) throw InvalidInput("swap_calibrate: pump wavelength must be > 0");
  if (histogram_ab.counts.rows() != histogram_swapped.counts.rows() ||
      histogram_ab.counts.cols() != histogram_swapped.counts.cols() || histogram_ab.frame != histogram_swapped.frame)
    throw InvalidInput("swap_calibrate: histograms must share binning");
  if (!(histogram_ab.counts.sum() > 0.0) || !(histogram_swapped.counts.sum() > 0.0))
    throw InvalidInput("swap_calibrate: empty histogram");
  const double frame = histogram_ab.frame;
  const std::size_t b1 = histogram_ab.bins_1(), b2 = histogram_ab.bins_2();
  const double nu_half = 0.5 * kSpeedOfLight / pump_wavelength;

  // On each channel the direct and swapped centroids are mirror images about nu_p / 2.
  // A reference error is close to a uniform frequency shift; a few passes remove the residual.
  TofSpec s1 = nominal_1, s2 = nominal_2;
  s1.frame = s2.frame = frame;
  for (int pass = 0; pass < 4; ++pass) {
    auto nu1 = bin_frequencies(s1, b1, frame);
    auto nu2 = bin_frequencies(s2, b2, frame);
    double e1 = nu_half - 0.5 * (centroid(histogram_ab.counts, nu1, 0) + centroid(histogram_swapped.counts, nu1, 0));
    double e2 = nu_half - 0.5 * (centroid(histogram_ab.counts, nu2, 1) + centroid(histogram_swapped.counts, nu2, 1));
    s1.reference_wavelength = kSpeedOfLight / (kSpeedOfLight / s1.reference_wavelength + e1);
    s2.reference_wavelength = kSpeedOfLight / (kSpeedOfLight / s2.reference_wavelength + e2);
  }

  SwapCalibration out;
  out.reference_wavelength_1 = s1.reference_wavelength;
  out.reference_wavelength_2 = s2.reference_wavelength;
  out.reflection_time_1 = arrival_time(s1, kSpeedOfLight / nu_half);
  out.reflection_time_2 = arrival_time(s2, kSpeedOfLight / nu_half);
  auto nu1 = bin_frequencies(s1, b1, frame);
  auto nu2 = bin_frequencies(s2, b2, frame);
  out.higher_frequency_on_1 = centroid(histogram_ab.counts, nu1, 0) >= centroid(histogram_ab.counts, nu2, 1);

  // Mirror match: the swapped run should be the direct run with the photon frequencies exchanged.
  const Eigen::MatrixXd& ab = histogram_ab.counts;
  Eigen::MatrixXd predicted(ab.rows(), ab.cols());
  for (std::size_t r = 0; r < b1; ++r) {
    double col_in_ab = bin_position(s2, nu1[r], b2, frame);
    for (std::size_t c = 0; c < b2; ++c) {
      double row_in_ab = bin_position(s1, nu2[c], b1, frame);
      predicted(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = bilinear(ab, row_in_ab, col_in_ab);
    }
  }
  if (!(predicted.sum() > 0.0)) throw InvalidInput("swap_calibrate: histograms do not overlap after the swap");
  out.residual = total_variation(histogram_swapped.counts, predicted);
  if (out.residual > 0.1) {
    std::ostringstream msg;
    msg << "swap_calibrate: mirror-match residual " << out.residual * 100 << "% of histogram mass exceeds 10%";
    throw InvalidInput(msg.str());
  }
  return out;
}

void write_histogram(std::ostream& out, const TofHistogram& h, const std::string& header) {
  if (!header.empty()) out << header << "\n";
  out << "t1_ps,t2_ps,counts\n";
  out << std::fixed << std::setprecision(3);
  for (std::size_t r = 0; r < h.bins_1(); ++r)
    for (std::size_t c = 0; c < h.bins_2(); ++c)
      out << h.center_1(r) / kPs << ',' << h.center_2(c) / kPs << ','
          << std::setprecision(0) << h.counts(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c))
          << std::setprecision(3) << '\n';
  out << std::defaultfloat;
}

}  // namespace spdc
