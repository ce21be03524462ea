#include "doctest.h"

#include <cmath>
#include <random>
#include <sstream>

#include "fixtures.h"
#include "spdcsim/tof.h"

using namespace spdc;

namespace {

const DesignResult& design() {
  static const DesignResult r = design_jsa(testing::design_source(256));
  return r;
}

TofSpec lossless() {
  TofSpec s;
  s.insertion_loss = 0.0;
  return s;
}

DetectorModel detector(double jitter_ps, double eta = 1.0) {
  DetectorModel d;
  d.efficiency = eta;
  d.jitter_fwhm = jitter_ps * kPs;
  return d;
}

// Design JSI on the grid matched to the default spectrometer.
const JointIntensity& matched_design() {
  static const JointIntensity j = intensity_of(build_jsa(design().pump, design().crystal, matched_grid(TofSpec{}, TofSpec{})));
  return j;
}

JointIntensity delta_jsi(const JointGrid& grid, std::size_t i, std::size_t j) {
  Eigen::MatrixXd v = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(grid.signal.size()),
                                            static_cast<Eigen::Index>(grid.idler.size()));
  v(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = 1.0;
  return {grid, v};
}

double schmidt_K(const Eigen::MatrixXd& jsi) { return schmidt_intensity(jsi).K; }

}  // namespace

TEST_SUITE("tof") {

TEST_CASE("one nanometre maps to the dispersion in picoseconds") {
  TofSpec s;
  CHECK((arrival_time(s, s.reference_wavelength + 1 * kNm) - arrival_time(s, s.reference_wavelength)) / kPs ==
        doctest::Approx(1360.0).epsilon(1e-12));
  CHECK(arrival_time(s, s.reference_wavelength) == doctest::Approx(5 * kNs).epsilon(1e-15));
}

TEST_CASE("a 1 nm offset photon lands in the bin holding frame/2 + 1360 ps") {
  TofSpec s = lossless();
  JointGrid g = make_joint_grid(1551 * kNm, 0.004 * kNm, 5, 1550 * kNm, 0.004 * kNm, 5);
  auto h = simulate_tof(delta_jsi(g, 2, 2), s, s, detector(0), detector(0), 1000, 1);
  const std::size_t expected_bin = static_cast<std::size_t>((5000.0 + 1360.0) / 78.125);
  CHECK(h.counts.row(static_cast<Eigen::Index>(expected_bin)).sum() == 1000);
}

TEST_CASE("delta JSI at zero jitter and loss fills a single bin") {
  TofSpec s = lossless();
  JointGrid g = matched_grid(s, s);
  auto h = simulate_tof(delta_jsi(g, 70, 55), s, s, detector(0), detector(0), 5000, 2);
  CHECK(h.counts(70, 55) == 5000);
  CHECK(h.counts.sum() == 5000);
  CHECK(h.recorded == 5000);
}

TEST_CASE("a 2 nm band spans 2.72 ns inside the frame") {
  TofSpec s;
  double span = arrival_time(s, 1551 * kNm) - arrival_time(s, 1549 * kNm);
  CHECK(span / kNs == doctest::Approx(2.72).epsilon(1e-9));
  CHECK(span < s.frame);
  JointGrid g = make_joint_grid(1550 * kNm, 2 * kNm, 21, 1550 * kNm, 2 * kNm, 21);
  CHECK_NOTHROW(expected_histogram(delta_jsi(g, 10, 10), s, s));
}

TEST_CASE("grids that wrap around the frame are rejected") {
  TofSpec s;
  JointGrid g = make_joint_grid(1550 * kNm, 9 * kNm, 31, 1550 * kNm, 2 * kNm, 31);
  CHECK_THROWS_WITH_AS(simulate_tof(delta_jsi(g, 3, 3), s, s, detector(0), detector(0), 10, 1),
                       doctest::Contains("wraparound"), InvalidInput);
  TofSpec bad;
  bad.dispersion = 0.0;
  CHECK_THROWS_AS(validate(bad), InvalidInput);
}

TEST_CASE("matched grid cells map onto single time bins") {
  TofSpec s;
  JointGrid g = matched_grid(s, s);
  Eigen::MatrixXd p = expected_histogram(delta_jsi(g, 40, 90), s, s);
  CHECK(p(40, 90) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("negative dispersion reverses the wavelength order of the bins") {
  TofSpec s = lossless();
  s.dispersion = -s.dispersion;
  JointGrid g = matched_grid(s, s);
  CHECK(g.signal.front() < g.signal.back());
  auto h = simulate_tof(delta_jsi(g, 10, 100), s, s, detector(0), detector(0), 100, 4);
  CHECK(h.counts(117, 27) == 100);
  auto r = reconstruct_jsi(h, s, s);
  CHECK(r.jsi.values(10, 100) == doctest::Approx(1.0));
}

TEST_CASE("round trip at zero jitter: 1e6 events within 0.01 total variation" * doctest::may_fail()) {
  TofSpec s = lossless();
  auto h = simulate_tof(matched_design(), s, s, detector(0), detector(0), 1000000, 7);
  auto r = reconstruct_jsi(h, s, s);
  CHECK(total_variation(r.jsi.values, matched_design().values) < 0.01);
}

TEST_CASE("round-trip total variation shrinks like 1/sqrt(N) and drops below 0.01 by 1e7 events") {
  TofSpec s = lossless();
  std::vector<double> tv;
  for (std::uint64_t n : {100000ull, 1000000ull, 10000000ull}) {
    auto h = simulate_tof(matched_design(), s, s, detector(0), detector(0), n, 7);
    tv.push_back(total_variation(reconstruct_jsi(h, s, s).jsi.values, matched_design().values));
  }
  CHECK(tv[1] < tv[0]);
  CHECK(tv[2] < tv[1]);
  CHECK(tv[0] / tv[1] == doctest::Approx(std::sqrt(10.0)).epsilon(0.2));
  CHECK(tv[2] < 0.01);
}

TEST_CASE("shifting the reference wavelength shifts the reconstruction by the same amount") {
  TofSpec s;
  auto h = simulate_tof(matched_design(), s, s, detector(223), detector(223), 20000, 3);
  auto a = reconstruct_jsi(h, s, s);
  TofSpec shifted = s;
  shifted.reference_wavelength += 0.37 * kNm;
  auto b = reconstruct_jsi(h, shifted, s);
  for (std::size_t k = 0; k < a.jsi.grid.signal.size(); ++k)
    CHECK(b.jsi.grid.signal[k] - a.jsi.grid.signal[k] == doctest::Approx(0.37 * kNm).epsilon(1e-9));
  CHECK(b.jsi.grid.idler == a.jsi.grid.idler);
  CHECK(b.jsi.values == a.jsi.values);
}

TEST_CASE("reconstruction normalization and Poisson sigmas") {
  TofSpec s;
  auto h = simulate_tof(matched_design(), s, s, detector(0), detector(0), 50000, 8);
  auto r = reconstruct_jsi(h, s, s);
  const double N = h.counts.sum();
  CHECK(r.jsi.values.sum() == doctest::Approx(1.0).epsilon(1e-12));
  Eigen::Index i, j;
  h.counts.maxCoeff(&i, &j);
  CHECK(r.sigma(i, j) == doctest::Approx(std::sqrt(h.counts(i, j)) / N).epsilon(1e-12));
}

TEST_CASE("empty histograms are rejected") {
  TofHistogram h;
  h.counts = Eigen::MatrixXd::Zero(8, 8);
  CHECK_THROWS_AS(reconstruct_jsi(h, TofSpec{}, TofSpec{}), InvalidInput);
}

TEST_CASE("Schmidt K at zero jitter is within 1e-3 of the truth at 1e7 events") {
  TofSpec s = lossless();
  const double K_true = schmidt_K(matched_design().values);
  auto h = simulate_tof(matched_design(), s, s, detector(0), detector(0), 10000000, 12);
  CHECK(std::abs(schmidt_K(reconstruct_jsi(h, s, s).jsi.values) - K_true) < 1e-3);
}

TEST_CASE("infinite-count jitter bias on K vanishes monotonically as jitter goes to zero") {
  TofSpec s;
  const double K_true = schmidt_K(matched_design().values);
  std::vector<double> dK;
  for (double jitter : {223.0, 100.0, 0.0})
    dK.push_back(std::abs(schmidt_K(expected_histogram(matched_design(), s, s, detector(jitter), detector(jitter))) -
                          K_true));
  CHECK(dK[0] > dK[1]);
  CHECK(dK[1] > dK[2]);
  CHECK(dK[2] < 1e-12);
  CHECK(dK[0] < 1e-3);
}

TEST_CASE("Monte Carlo |dK| decreases monotonically as jitter goes to zero at 1e7 events" * doctest::may_fail()) {
  TofSpec s = lossless();
  const double K_true = schmidt_K(matched_design().values);
  std::vector<double> dK;
  for (double jitter : {223.0, 100.0, 0.0}) {
    auto h = simulate_tof(matched_design(), s, s, detector(jitter), detector(jitter), 10000000, 12);
    dK.push_back(std::abs(schmidt_K(reconstruct_jsi(h, s, s).jsi.values) - K_true));
  }
  CHECK(dK[0] >= dK[1]);
  CHECK(dK[1] >= dK[2]);
}

TEST_CASE("jittered simulation matches the blurred expected histogram") {
  TofSpec s;
  auto h = simulate_tof(matched_design(), s, s, detector(223, 0.9), detector(223, 0.9), 2000000, 31);
  Eigen::MatrixXd p = expected_histogram(matched_design(), s, s, detector(223), detector(223));
  const double N = h.counts.sum();
  double chi2 = 0.0;
  int dof = -1;
  for (Eigen::Index r = 0; r < p.rows(); ++r)
    for (Eigen::Index c = 0; c < p.cols(); ++c) {
      const double e = N * p(r, c);
      if (e < 10) continue;
      chi2 += (h.counts(r, c) - e) * (h.counts(r, c) - e) / e;
      ++dof;
    }
  CHECK(dof > 100);
  CHECK(chi2 < dof + 5 * std::sqrt(2.0 * dof));
}

TEST_CASE("loss thinning leaves the normalized shape unchanged") {
  TofSpec with_loss;
  TofSpec no_loss = lossless();
  const std::uint64_t n = 1000000;
  auto a = simulate_tof(matched_design(), with_loss, with_loss, detector(223), detector(223), n, 21);
  const double keep = std::pow(1.0 - with_loss.insertion_loss, 2);
  auto b = simulate_tof(matched_design(), no_loss, no_loss, detector(223), detector(223),
                        static_cast<std::uint64_t>(n * keep), 22);
  CHECK(std::abs(static_cast<double>(a.recorded) - static_cast<double>(b.recorded)) < 5 * std::sqrt(a.recorded));
  // Two-sample chi-square over populated bins.
  const double Na = a.counts.sum(), Nb = b.counts.sum();
  double chi2 = 0.0;
  int dof = -1;
  for (Eigen::Index r = 0; r < a.counts.rows(); ++r)
    for (Eigen::Index c = 0; c < a.counts.cols(); ++c) {
      double x = a.counts(r, c), y = b.counts(r, c);
      if (x + y < 10) continue;
      double d = x / Na - y / Nb;
      chi2 += d * d / (x / (Na * Na) + y / (Nb * Nb));
      ++dof;
    }
  CHECK(chi2 < dof + 5 * std::sqrt(2.0 * dof));
}

TEST_CASE("simulation is independent of the thread count") {
  TofSpec s;
  unsigned saved = thread_count();
  set_thread_count(1);
  auto a = simulate_tof(matched_design(), s, s, detector(223), detector(223), 3000000, 5);
  set_thread_count(4);
  auto b = simulate_tof(matched_design(), s, s, detector(223), detector(223), 3000000, 5);
  set_thread_count(saved);
  CHECK(a.counts == b.counts);
  CHECK(a.recorded == b.recorded);
}

TEST_CASE("swap calibration of a symmetric degenerate JSI") {
  // Gaussian blob symmetric under exchange, centred on twice the pump wavelength.
  JointGrid g = make_joint_grid(1550 * kNm, 6 * kNm, 101, 1550 * kNm, 6 * kNm, 101);
  Eigen::MatrixXd v(101, 101);
  for (int i = 0; i < 101; ++i)
    for (int j = 0; j < 101; ++j) {
      double x = (g.signal[i] - 1550 * kNm) / kNm, y = (g.idler[j] - 1550 * kNm) / kNm;
      v(i, j) = std::exp(-(x + y) * (x + y) / 0.5 - (x - y) * (x - y) / 2.0);
    }
  JointIntensity J{g, v};
  TofSpec s;
  auto ab = simulate_tof(J, s, s, detector(223, 0.9), detector(223, 0.9), 2000000, 1);
  auto sw = simulate_tof(swap_arms(J), s, s, detector(223, 0.9), detector(223, 0.9), 2000000, 2);
  CHECK(total_variation(ab.counts, sw.counts) < 0.05);
  auto cal = swap_calibrate(ab, sw, s, s, 775 * kNm);
  CHECK(std::abs(cal.reflection_time_1 - s.frame / 2) < ab.bin_width_1());
  CHECK(std::abs(cal.reflection_time_2 - s.frame / 2) < ab.bin_width_2());
}

TEST_CASE("swap calibration recovers offset references on the asymmetric design JSI") {
  JointIntensity J = intensity_of(build_jsa(design().pump, design().crystal,
                                            make_joint_grid(1550 * kNm, 6 * kNm, 105, 1550 * kNm, 6 * kNm, 105)));
  TofSpec true_1, true_2;
  true_1.reference_wavelength = 1550.3 * kNm;
  true_2.reference_wavelength = 1549.8 * kNm;
  auto ab = simulate_tof(J, true_1, true_2, detector(223, 0.9), detector(223, 0.9), 2000000, 1);
  auto sw = simulate_tof(swap_arms(J), true_1, true_2, detector(223, 0.9), detector(223, 0.9), 2000000, 2);
  auto cal = swap_calibrate(ab, sw, TofSpec{}, TofSpec{}, design().pump.center_wavelength);
  const double half_pump = 2.0 * design().pump.center_wavelength;
  CHECK(std::abs(cal.reflection_time_1 - arrival_time(true_1, half_pump)) < ab.bin_width_1());
  CHECK(std::abs(cal.reflection_time_2 - arrival_time(true_2, half_pump)) < ab.bin_width_2());
  const double bin_nm = ab.bin_width_1() / TofSpec{}.dispersion;
  CHECK(std::abs(cal.reference_wavelength_1 - true_1.reference_wavelength) < bin_nm);
  CHECK(std::abs(cal.reference_wavelength_2 - true_2.reference_wavelength) < bin_nm);
  CHECK(cal.residual < 0.1);
}

TEST_CASE("swap calibration rejects a shuffled histogram") {
  TofSpec s;
  auto ab = simulate_tof(matched_design(), s, s, detector(223), detector(223), 500000, 1);
  auto sw = simulate_tof(swap_arms(matched_design()), s, s, detector(223), detector(223), 500000, 2);
  std::mt19937_64 rng(3);
  std::vector<double> flat(sw.counts.data(), sw.counts.data() + sw.counts.size());
  std::shuffle(flat.begin(), flat.end(), rng);
  std::copy(flat.begin(), flat.end(), sw.counts.data());
  CHECK_THROWS_WITH_AS(swap_calibrate(ab, sw, s, s, design().pump.center_wavelength), doctest::Contains("residual"),
                       InvalidInput);
}

TEST_CASE("histogram CSV layout") {
  TofHistogram h;
  h.counts = Eigen::MatrixXd::Zero(2, 2);
  h.counts(1, 0) = 7;
  std::ostringstream out;
  write_histogram(out, h, "# header");
  CHECK(out.str() ==
        "# header\nt1_ps,t2_ps,counts\n2500.000,2500.000,0\n2500.000,7500.000,0\n7500.000,2500.000,7\n"
        "7500.000,7500.000,0\n");
}

}  // TEST_SUITE
