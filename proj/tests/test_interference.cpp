#include "doctest.h"

#include <cmath>
#include <random>

#include "fixtures.h"
#include "spdcsim/interference.h"

using namespace spdc;

namespace {

const JointAmplitude& design_jsa_128() {
  static const JointAmplitude jsa = design_jsa(testing::design_source(128)).jsa;
  return jsa;
}

HomConfig hom_config(double purity, double mu) {
  HomConfig c;
  c.jsa = design_jsa_128();
  c.purity = purity;
  c.mu = mu;
  c.delay_grid = delay_grid(2.5 * hom_dip_fwhm(c.jsa), 25);
  c.eta_signal = 0.74;
  c.eta_idler = 0.72;
  return c;
}

// Coincidences for real linear analyzers sin(t)|H> + cos(t)|V>, built without the library's Jones algebra.
double oracle_coincidence(double p, double phi, double ta, double tb) {
  using C = std::complex<double>;
  Eigen::Vector4cd psi(0.0, std::sqrt(0.5), std::polar(std::sqrt(0.5), phi), 0.0);
  Eigen::Matrix4cd rho = (1 - p) * psi * psi.adjoint() + p / 4 * Eigen::Matrix4cd::Identity();
  Eigen::Vector2cd a(std::sin(ta), std::cos(ta)), b(std::sin(tb), std::cos(tb));
  Eigen::Vector4cd t(a[0] * b[0], a[0] * b[1], a[1] * b[0], a[1] * b[1]);
  C v = (t.adjoint() * rho * t)(0, 0);
  return v.real();
}

double oracle_visibility(double p, double phi, double ta) {
  double lo = 1e9, hi = -1e9;
  for (int k = 0; k < 36000; ++k) {
    double c = oracle_coincidence(p, phi, ta, kPi * k / 36000.0);
    lo = std::min(lo, c);
    hi = std::max(hi, c);
  }
  return (hi - lo) / (hi + lo);
}

DetectorModel ideal() { return DetectorModel{}; }

DetectorModel with_efficiency(double eta) {
  DetectorModel d;
  d.efficiency = eta;
  return d;
}

Eigen::MatrixXcd random_density(std::mt19937_64& rng, std::size_t cutoff) {
  std::normal_distribution<double> g;
  Eigen::MatrixXcd a(cutoff + 1, cutoff + 1);
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j) a(i, j) = {g(rng), g(rng)};
  Eigen::MatrixXcd rho = a * a.adjoint();
  return rho / rho.trace().real();
}

double binomial(int k, int n, double p) {
  double c = 1.0;
  for (int i = 0; i < k; ++i) c = c * (n - i) / (i + 1);
  return c * std::pow(p, k) * std::pow(1 - p, n - k);
}

}  // namespace

TEST_SUITE("interference") {

// ---------------------------------------------------------------------------
// visibility

TEST_CASE("visibility of (1000, 10) by hand") {
  CHECK(visibility(1000, 10, VisibilityKind::polarization).V == doctest::Approx(990.0 / 1010.0).epsilon(1e-12));
  CHECK(std::abs(visibility(1000, 10, VisibilityKind::polarization).V - 0.9802) < 5e-5);
  CHECK(visibility(1000, 10, VisibilityKind::hom).V == doctest::Approx(0.990).epsilon(1e-12));
}

TEST_CASE("equal extremes give zero visibility") {
  CHECK(visibility(500, 500, VisibilityKind::polarization).V == 0.0);
  CHECK(visibility(500, 500, VisibilityKind::hom).V == 0.0);
}

TEST_CASE("visibility rejects all-zero and inverted inputs") {
  CHECK_THROWS_AS(visibility(0, 0, VisibilityKind::polarization), InvalidInput);
  CHECK_THROWS_AS(visibility(10, 20, VisibilityKind::hom), InvalidInput);
  CHECK_THROWS_AS(visibility(std::vector<double>{0.0, 0.0, 0.0}, VisibilityKind::hom), InvalidInput);
}

TEST_CASE("visibility sigma matches finite-difference Poisson propagation") {
  for (auto kind : {VisibilityKind::polarization, VisibilityKind::hom}) {
    const double M = 2000, m = 250, h = 1e-3;
    auto V = [&](double a, double b) { return visibility(a, b, kind).V; };
    double dM = (V(M + h, m) - V(M - h, m)) / (2 * h);
    double dm = (V(M, m + h) - V(M, m - h)) / (2 * h);
    double expected = std::sqrt(dM * dM * M + dm * dm * m);
    CHECK(visibility(M, m, kind).sigma == doctest::Approx(expected).epsilon(1e-6));
  }
}

TEST_CASE("HOM curve visibility uses the end points as baseline") {
  std::vector<double> curve{100, 98, 50, 10, 50, 98, 102};
  CHECK(visibility(curve, VisibilityKind::hom).V == doctest::Approx(91.0 / 101.0).epsilon(1e-12));
}

// ---------------------------------------------------------------------------
// polarization

TEST_CASE("ideal state has unit visibility in all four bases") {
  PolarizationModel m;
  for (Basis b : {Basis::H, Basis::V, Basis::D, Basis::A}) CHECK(std::abs(basis_visibility(m, b) - 1.0) < 1e-9);
}

TEST_CASE("fixed H: the scan minimum sits at 90 degrees") {
  PolarizationModel m;
  m.mixed_fraction = 0.01;
  std::vector<double> scan;
  for (int k = 0; k < 180; ++k) scan.push_back(deg_to_rad(k));
  auto c = coincidence_curve(m, Basis::H, scan);
  CHECK(std::min_element(c.begin(), c.end()) - c.begin() == 90);
}

TEST_CASE("analyzer curves have period pi for ideal plates and 2 pi with retardance error") {
  PolarizationModel m;
  m.phi = 0.3;
  m.mixed_fraction = 0.05;
  for (double th : {0.1, 0.7, 1.9}) {
    auto c = coincidence_curve(m, Basis::D, {th, th + kPi});
    CHECK(c[0] == doctest::Approx(c[1]).epsilon(1e-12));
  }
  m.waveplate_error_b = 0.07;
  for (double th : {0.1, 0.7, 1.9}) {
    auto c = coincidence_curve(m, Basis::D, {th, th + kPi, th + 2 * kPi});
    CHECK(c[0] == doctest::Approx(c[2]).epsilon(1e-12));
    CHECK(std::abs(c[0] - c[1]) > 1e-4);
  }
}

TEST_CASE("an elliptical fixed analyzer cannot be nulled by an ideal scan") {
  PolarizationModel m;
  m.waveplate_error_a = 0.1;
  const double v = basis_visibility(m, Basis::D);
  CHECK(v < 1.0 - 1e-4);
  CHECK(v > 0.95);
}

TEST_CASE("mixed fraction visibilities match the 4x4 density-matrix oracle") {
  for (double p : {0.0, 0.01, 0.05, 0.2}) {
    for (double phi : {0.0, 0.1143}) {
      PolarizationModel m;
      m.mixed_fraction = p;
      m.phi = phi;
      for (Basis b : {Basis::H, Basis::V, Basis::D, Basis::A})
        CHECK(basis_visibility(m, b) == doctest::Approx(oracle_visibility(p, phi, basis_angle(b))).epsilon(1e-6));
    }
  }
}

TEST_CASE("fitted mixed fraction for V_D = 0.991 reproduces V_A") {
  PolarizationModel m;
  m.mixed_fraction = fit_mixed_fraction(m, Basis::D, 0.991);
  CHECK(basis_visibility(m, Basis::D) == doctest::Approx(0.991).epsilon(1e-9));
  CHECK(std::abs(basis_visibility(m, Basis::A) - 0.991) < 0.002);
}

TEST_CASE("dephasing lowers only the superposition bases") {
  PolarizationModel m;
  m.dephasing = 0.02;
  CHECK(basis_visibility(m, Basis::H) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(basis_visibility(m, Basis::V) == doctest::Approx(1.0).epsilon(1e-9));
  // Fringe contrast in D equals the surviving coherence.
  CHECK(basis_visibility(m, Basis::D) == doctest::Approx(0.98).epsilon(1e-9));
  CHECK(basis_visibility(m, Basis::A) == doctest::Approx(0.98).epsilon(1e-9));
}

TEST_CASE("mixed fraction from H and V plus dephasing from D reproduces all four bases") {
  PolarizationModel m;
  m.mixed_fraction = fit_mixed_fraction(m, Basis::H, 0.9975);
  m.dephasing = fit_dephasing(m, Basis::D, 0.991);
  CHECK(basis_visibility(m, Basis::V) == doctest::Approx(0.9975).epsilon(1e-9));
  CHECK(basis_visibility(m, Basis::D) == doctest::Approx(0.991).epsilon(1e-9));
  CHECK(std::abs(basis_visibility(m, Basis::A) - 0.991) < 0.002);
  CHECK_THROWS_AS(fit_dephasing(m, Basis::H, 0.99), InvalidInput);
}

TEST_CASE("model validation") {
  PolarizationModel m;
  m.mixed_fraction = 1.5;
  CHECK_THROWS_AS(validate(m), InvalidInput);
  m.mixed_fraction = 0.0;
  m.dephasing = -0.1;
  CHECK_THROWS_AS(validate(m), InvalidInput);
  CHECK_THROWS_AS(fit_mixed_fraction(PolarizationModel{}, Basis::D, 1.2), InvalidInput);
}

// ---------------------------------------------------------------------------
// calibrate_bases

TEST_CASE("ideal analyzers calibrate to the nominal angles") {
  PolarizationModel m;
  m.mixed_fraction = 0.01;
  auto cal = calibrate_bases([&](double a, double b) { return coincidence_probability(m, a, b); });
  const double tol = deg_to_rad(0.05);
  CHECK(std::abs(cal.angle_H - kPi / 2) < tol);
  CHECK(std::abs(cal.angle_V) < tol);
  CHECK(std::abs(cal.angle_D - kPi / 4) < tol);
  CHECK(std::abs(cal.angle_A + kPi / 4) < tol);
}

TEST_CASE("repeated calibration is idempotent") {
  PolarizationModel m;
  m.mixed_fraction = 0.02;
  m.waveplate_error_b = 0.05;
  AnalyzerResponse r = [&](double a, double b) { return coincidence_probability(m, a, b); };
  auto c1 = calibrate_bases(r);
  auto c2 = calibrate_bases(r);
  const double tol = deg_to_rad(0.01);
  CHECK(std::abs(c1.angle_H - c2.angle_H) < tol);
  CHECK(std::abs(c1.angle_V - c2.angle_V) < tol);
  CHECK(std::abs(c1.angle_D - c2.angle_D) < tol);
  CHECK(std::abs(c1.angle_A - c2.angle_A) < tol);
}

TEST_CASE("non-sinusoidal analyzer response is rejected") {
  AnalyzerResponse square = [](double, double b) { return std::sin(2 * b) > 0 ? 1.0 : 0.0; };
  CHECK_THROWS_AS(calibrate_bases(square), InvalidInput);
}

TEST_CASE("equal-rate D setting is closer to |D> than the naive 45 degree offset" * doctest::may_fail()) {
  // Fidelity of the state passed by analyzer B with the ideal diagonal state.
  PolarizationModel m;
  m.waveplate_error_b = 0.1;
  auto cal = calibrate_bases([&](double a, double b) { return coincidence_probability(m, a, b); });
  Eigen::Vector2cd d(std::sqrt(0.5), std::sqrt(0.5));
  auto fidelity = [&](double th) { return std::norm(d.dot(analyzer_state(th, m.waveplate_error_b))); };
  CHECK(fidelity(cal.angle_D) > fidelity(cal.naive_D));
}

// ---------------------------------------------------------------------------
// fock_oracle

TEST_CASE("two single photons on a balanced splitter never coincide") {
  auto r = fock_oracle(fock_state(1, 4), fock_state(1, 4), 0.5, ideal(), ideal());
  CHECK(std::abs(r.p11) < 1e-15);
  CHECK(r.p10 + r.p01 == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("one photon and vacuum split evenly") {
  auto r = fock_oracle(fock_state(1, 4), fock_state(0, 4), 0.5, ideal(), ideal());
  CHECK(r.p11 == 0.0);
  CHECK(r.p10 == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(r.p01 == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("n photons and vacuum follow the binomial split") {
  for (int n : {2, 3, 5}) {
    for (double T : {0.3, 0.5}) {
      auto r = fock_oracle(fock_state(n, 6), fock_state(0, 6), T, ideal(), ideal());
      CHECK(r.p10 == doctest::Approx(binomial(n, n, T)).epsilon(1e-10));
      CHECK(r.p01 == doctest::Approx(binomial(0, n, T)).epsilon(1e-10));
      CHECK(r.p11 == doctest::Approx(1.0 - binomial(n, n, T) - binomial(0, n, T)).epsilon(1e-10));
    }
  }
}

TEST_CASE("fock_oracle conserves probability") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    auto a = random_density(rng, 4);
    auto b = random_density(rng, 3);
    auto r = fock_oracle(a, b, u(rng), with_efficiency(u(rng)), with_efficiency(u(rng)));
    CHECK(std::abs(r.p00 + r.p10 + r.p01 + r.p11 - 1.0) < 1e-9);
    CHECK(std::abs(r.trace - 1.0) < 1e-9);
  }
}

TEST_CASE("fock_oracle rejects unnormalized input") {
  Eigen::MatrixXcd bad = fock_state(1, 3) * 1.01;
  CHECK_THROWS_AS(fock_oracle(bad, fock_state(0, 3), 0.5, ideal(), ideal()), InvalidInput);
}

TEST_CASE("single photon against a weak coherent state, closed form") {
  // Ideal detectors on 50:50: the c output stays dark with probability e^{-mu/2} (1/2 + mu/4),
  // and both stay dark with probability 0, so P(cc) = 1 - e^{-mu/2} (1 + mu/2).
  const double mu = 0.0194;
  auto r = fock_oracle(fock_state(1, 10), coherent_state(mu, 10) / coherent_state(mu, 10).trace().real(), 0.5,
                       ideal(), ideal());
  CHECK(r.p11 == doctest::Approx(1.0 - std::exp(-mu / 2) * (1.0 + mu / 2)).epsilon(1e-9));
}

// ---------------------------------------------------------------------------
// two_port_coincidence

TEST_CASE("identical internal modes reproduce the Fock oracle") {
  Eigen::Matrix4cd same = Eigen::Matrix4cd::Ones();
  for (int a = 0; a <= 3; ++a) {
    for (int b = 0; b <= 3; ++b) {
      for (double eta : {1.0, 0.6}) {
        for (double T : {0.5, 0.35}) {
          auto r = fock_oracle(fock_state(a, 3), fock_state(b, 3), T, with_efficiency(eta), with_efficiency(0.8));
          double p = two_port_coincidence({a, 0, b, 0}, same, T, eta, 0.8);
          CHECK(p == doctest::Approx(r.p11).epsilon(1e-9));
        }
      }
    }
  }
}

TEST_CASE("orthogonal internal modes behave classically") {
  Eigen::Matrix4cd orth = Eigen::Matrix4cd::Identity();
  CHECK(two_port_coincidence({1, 0, 1, 0}, orth, 0.5, 1.0, 1.0) == doctest::Approx(0.5).epsilon(1e-12));
  // Two photons in port a, one in b, all distinguishable: 1 - P(all in c) - P(all in d).
  CHECK(two_port_coincidence({1, 1, 1, 0}, orth, 0.5, 1.0, 1.0) == doctest::Approx(0.75).epsilon(1e-12));
}

TEST_CASE("partial overlap gives the textbook HOM dip") {
  for (double g : {0.0, 0.3, 0.8, 1.0}) {
    Eigen::Matrix4cd gram = Eigen::Matrix4cd::Identity();
    gram(0, 2) = g;
    gram(2, 0) = g;
    CHECK(two_port_coincidence({1, 0, 1, 0}, gram, 0.5, 1.0, 1.0) == doctest::Approx(0.5 * (1 - g * g)).epsilon(1e-12));
  }
}

// ---------------------------------------------------------------------------
// hom_experiment

TEST_CASE("mixture weights reproduce the purity") {
  for (double P : {0.5, 0.7, 0.963, 1.0}) {
    auto [w1, w2] = mixture_weights(P);
    CHECK(w1 * w1 + w2 * w2 == doctest::Approx(P).epsilon(1e-12));
    CHECK(w1 >= w2);
  }
  CHECK_THROWS_AS(mixture_weights(0.3), InvalidInput);
}

TEST_CASE("pure photons at vanishing mu give unit visibility") {
  auto r = hom_experiment(hom_config(1.0, 1e-5), HomMethod::analytic, 1000000, 1);
  CHECK(r.V > 0.999);
}

TEST_CASE("baseline rate probe matches the analytic end points") {
  HomConfig c = hom_config(0.963, 0.01);
  auto r = hom_experiment(c, HomMethod::analytic, 2, 1);
  CHECK(hom_baseline_rate(c) == doctest::Approx(0.5 * (r.fourfold.front() + r.fourfold.back())).epsilon(1e-12));
}

TEST_CASE("zero-power visibility follows the mixture purity") {
  auto r = hom_experiment(hom_config(0.963, 1e-5), HomMethod::analytic, 1000000, 1);
  CHECK(std::abs(r.V - 0.963) < 0.002);
}

TEST_CASE("dip shape at low mu follows the JSA overlap") {
  HomConfig c = hom_config(1.0, 1e-5);
  auto r = hom_experiment(c, HomMethod::analytic, 1000000, 1);
  const double base = 0.5 * (r.fourfold.front() + r.fourfold.back());
  for (std::size_t k = 0; k < r.delays.size(); k += 3) {
    double expected = 1.0 - heralded_hom_overlap(c.jsa, c.jsa, r.delays[k]);
    CHECK(std::abs(r.fourfold[k] / base - expected) < 0.005);
  }
}

TEST_CASE("visibility is non-increasing in mu and quasi-PNR beats single-click") {
  double prev = 2.0;
  for (double mu : {0.001, 0.003, 0.01, 0.03, 0.05, 0.1}) {
    HomConfig c = hom_config(0.963, mu);
    c.herald = HeraldKind::dual_click_quasi_pnr;
    double v_pnr = hom_experiment(c, HomMethod::analytic, 1000000, 1).V;
    c.herald = HeraldKind::single_click;
    double v_sc = hom_experiment(c, HomMethod::analytic, 1000000, 1).V;
    CHECK(v_pnr <= prev);
    CHECK(v_pnr >= v_sc);
    prev = v_pnr;
  }
}

TEST_CASE("Monte Carlo and analytic four-folds agree within 3 sigma") {
  for (double mu : {0.01, 0.05}) {
    HomConfig c = hom_config(0.963, mu);
    auto a = hom_experiment(c, HomMethod::analytic, 10000000, 3);
    auto m = hom_experiment(c, HomMethod::monte_carlo, 10000000, 3);
    for (std::size_t k = 0; k < a.delays.size(); ++k) {
      INFO("mu=" << mu << " delay index " << k);
      CHECK(std::abs(m.counts[k] - a.counts[k]) <= 3.0 * std::sqrt(std::max(a.counts[k], 1.0)));
    }
    CHECK(std::abs(m.V - a.V) <= 3.0 * a.sigma_V);
  }
}

TEST_CASE("Monte Carlo is independent of the thread count") {
  HomConfig c = hom_config(0.963, 0.05);
  unsigned saved = thread_count();
  set_thread_count(1);
  auto r1 = hom_experiment(c, HomMethod::monte_carlo, 3000000, 9);
  set_thread_count(4);
  auto r4 = hom_experiment(c, HomMethod::monte_carlo, 3000000, 9);
  set_thread_count(saved);
  CHECK(r1.counts == r4.counts);
}

TEST_CASE("hom_experiment input checks") {
  HomConfig c = hom_config(0.963, 0.01);
  c.mu = 0.2;
  CHECK_THROWS_AS(hom_experiment(c, HomMethod::analytic, 1000, 1), InvalidInput);
  c.mu = 0.01;
  c.delay_grid = delay_grid(3 * hom_dip_fwhm(c.jsa), 9);
  CHECK_THROWS_AS(hom_experiment(c, HomMethod::analytic, 1000, 1), InvalidInput);
  c.delay_grid = delay_grid(0.5 * hom_dip_fwhm(c.jsa), 41);
  CHECK_THROWS_AS(hom_experiment(c, HomMethod::analytic, 1000, 1), InvalidInput);
}

// ---------------------------------------------------------------------------
// power_extrapolation

TEST_CASE("noiseless points on a line are fitted exactly") {
  std::vector<PowerPoint> pts;
  for (double x : {10.0, 20.0, 35.0, 50.0, 67.0}) pts.push_back({x, 0.963 - 4e-4 * x, 0.01 + 1e-4 * x});
  auto f = power_extrapolation(pts);
  CHECK(std::abs(f.intercept - 0.963) < 1e-12);
  CHECK(std::abs(f.slope + 4e-4) < 1e-12);
  CHECK(f.chi2 < 1e-20);
}

TEST_CASE("intercept uncertainty matches the normal-equation covariance") {
  std::vector<PowerPoint> pts{{1, 0.95, 0.01}, {2, 0.94, 0.02}, {4, 0.93, 0.015}, {7, 0.90, 0.03}};
  Eigen::MatrixXd X(4, 2);
  Eigen::VectorXd w(4);
  for (int i = 0; i < 4; ++i) {
    X(i, 0) = 1.0;
    X(i, 1) = pts[i].x;
    w[i] = 1.0 / (pts[i].sigma * pts[i].sigma);
  }
  Eigen::Matrix2d cov = (X.transpose() * w.asDiagonal() * X).inverse();
  auto f = power_extrapolation(pts);
  CHECK(f.sigma_intercept == doctest::Approx(std::sqrt(cov(0, 0))).epsilon(1e-10));
  CHECK(f.sigma_slope == doctest::Approx(std::sqrt(cov(1, 1))).epsilon(1e-10));
}

TEST_CASE("degenerate designs are rejected") {
  CHECK_THROWS_AS(power_extrapolation({{5, 0.9, 0.01}, {5, 0.91, 0.01}, {5, 0.92, 0.01}}), InvalidInput);
  CHECK_THROWS_AS(power_extrapolation({{1, 0.9, 0.01}, {2, 0.91, 0.01}}), InvalidInput);
  CHECK_THROWS_AS(power_extrapolation({{1, 0.9, 0.0}, {2, 0.91, 0.01}, {3, 0.9, 0.01}}), InvalidInput);
}

// ---------------------------------------------------------------------------
// lo_hom

TEST_CASE("ideal LO HOM approaches unit visibility") {
  LoConfig c;
  c.mu_lo = 1e-6;
  auto r = lo_hom(c);
  CHECK(r.V_zero_power > 0.9999);
  CHECK(r.V_ideal_lo > 0.9999);
}

TEST_CASE("orthogonal LO shows no dip") {
  LoConfig c;
  c.mode_overlap = 0.0;
  c.delay_grid = {-5 * kPs, 0.0, 5 * kPs};
  auto r = lo_hom(c);
  CHECK(std::abs(r.V) < 1e-12);
  CHECK(r.threefold[0] == doctest::Approx(r.threefold[1]).epsilon(1e-12));
}

TEST_CASE("analytic LO path agrees with the Fock oracle to 1e-6") {
  LoConfig c;
  c.purity = 0.963;
  c.mode_overlap = 0.95;
  c.mu_pump = 0.01;
  c.signal_transmission = 0.74;
  c.eta_idler = 0.72;
  c.out_c.efficiency = 0.9;
  c.out_d.efficiency = 0.85;
  c.herald.efficiency = 0.9;
  c.delay_overlap = [](double tau) { return std::exp(-tau * tau / (2 * 1e-24)); };
  c.delay_grid = {0.0, 1 * kPs, 3 * kPs};
  auto r = lo_hom(c);
  for (std::size_t k = 0; k < r.delays.size(); ++k) CHECK(std::abs(r.threefold[k] - r.threefold_oracle[k]) < 1e-6);
}

TEST_CASE("ideal-limit visibility equals the dominant weight times the overlap squared") {
  LoConfig c;
  c.purity = 0.9;
  c.mode_overlap = 0.8;
  c.mu_lo = 1e-6;
  auto r = lo_hom(c);
  CHECK(r.V_ideal_lo == doctest::Approx(mixture_weights(0.9).first * 0.64).epsilon(1e-4));
}

TEST_CASE("LO at 0.0194 photons per bin costs less than 0.01 of visibility at V0 = 0.886") {
  LoConfig c;
  c.purity = 0.963;
  c.mode_overlap = solve_lo_overlap(c, 0.886);
  auto r = lo_hom(c);
  CHECK(r.V_zero_power == doctest::Approx(0.886).epsilon(1e-6));
  CHECK(r.V_ideal_lo - r.V_zero_power > 0.0);
  CHECK(r.V_ideal_lo - r.V_zero_power < 0.01);
}

TEST_CASE("pump multi-pairs lower the LO visibility") {
  LoConfig c;
  c.purity = 0.963;
  c.mode_overlap = 0.95;
  c.signal_transmission = 0.74;
  c.mu_pump = 0.003;
  double v_low = lo_hom(c).V;
  c.mu_pump = 0.03;
  CHECK(lo_hom(c).V < v_low);
}

TEST_CASE("insufficient Fock cutoff is rejected") {
  LoConfig c;
  c.mu_lo = 1.0;
  CHECK_THROWS_WITH_AS(lo_hom(c), doctest::Contains("tail mass"), InvalidInput);
  c.mu_lo = 0.0194;
  c.fock_cutoff = 3;
  CHECK_THROWS_AS(lo_hom(c), InvalidInput);
  c.fock_cutoff = 6;
  c.mode_overlap = 1.2;
  CHECK_THROWS_AS(lo_hom(c), InvalidInput);
}

}  // TEST_SUITE
