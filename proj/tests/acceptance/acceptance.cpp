// Acceptance run: one line per criterion, exit 0 when every criterion outside the known-red set passes.

#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "spdcsim/cli.h"
#include "spdcsim/config.h"
#include "spdcsim/interference.h"
#include "spdcsim/jsa.h"
#include "spdcsim/spectra.h"
#include "spdcsim/tof.h"

using namespace spdc;
namespace fs = std::filesystem;

namespace {

// Tolerances, pinned.
constexpr double kTolK = 0.005;
constexpr double kTolBandwidthNm = 0.15;
constexpr double kApodizationFactor = 10.0;
constexpr double kTolPurity = 1e-9;
constexpr double kTolHomPurity = 1e-6;
constexpr double kTolTbpRel = 0.05;
constexpr double kTolResidualGddRel = 0.10;
constexpr double kTolMartinezRel = 0.25;
constexpr double kTolHeralded = 1e-5;  // 128600 / 189118 is 0.6800008
constexpr double kSigmaRates = 3.0;
constexpr double kTolPolIdeal = 1e-9;
constexpr double kTolPolA = 0.002;
constexpr double kSigmaClosedLoop = 2.0;
constexpr double kTolLoOracle = 1e-6;
constexpr double kMaxLoReduction = 0.01;
constexpr double kTolTofK = 1e-3;
constexpr double kMaxDesignSeconds = 10.0;
constexpr double kMaxRatesSeconds = 60.0;
constexpr std::size_t kRandomJsas = 24;

// Criteria that cannot be met as written; analysed in the decisions notes.
const std::set<int> kKnownRed = {12};

const std::string kFixture = std::string(SPDCSIM_SOURCE_DIR) + "/configs/published_source.config";

struct Verdict {
  bool pass;
  std::string detail;
};

std::string format(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

const ExperimentConfig& fixture() {
  static const ExperimentConfig c = load_config_file(kFixture);
  return c;
}

const DesignResult& design() {
  static const DesignResult d = run_design(fixture());
  return d;
}

const RatesOutcome& rates() {
  static const RatesOutcome r = run_rates(fixture(), design());
  return r;
}

// Tr[rho^2] from the contracted Gram matrix, no SVD.
double gram_purity(const Eigen::MatrixXcd& f) {
  const Eigen::MatrixXcd rho = f * f.adjoint();
  const double tr = rho.trace().real();
  return rho.cwiseAbs2().sum() / (tr * tr);
}

std::vector<JointAmplitude> random_jsas(std::size_t n) {
  std::mt19937_64 rng(777);
  std::uniform_int_distribution<int> size(4, 64), rank_of(1, 6);
  std::normal_distribution<double> g;
  std::vector<JointAmplitude> out;
  for (std::size_t t = 0; t < n; ++t) {
    const int ns = t == 0 ? 64 : size(rng), ni = t == 0 ? 64 : size(rng);
    Eigen::MatrixXcd f = Eigen::MatrixXcd::Zero(ns, ni);
    const int rank = rank_of(rng);
    for (int r = 0; r < rank; ++r) {
      Eigen::VectorXcd u(ns), v(ni);
      for (auto& x : u) x = {g(rng), g(rng)};
      for (auto& x : v) x = {g(rng), g(rng)};
      f += std::pow(0.6, r) * u * v.transpose();
    }
    for (Eigen::Index a = 0; a < ns; ++a)
      for (Eigen::Index b = 0; b < ni; ++b) f(a, b) += 0.05 * std::complex<double>(g(rng), g(rng));
    JointGrid grid = make_joint_grid(1550 * kNm, 10 * kNm, static_cast<std::size_t>(ns), 1550 * kNm, 10 * kNm,
                                     static_cast<std::size_t>(ni));
    out.push_back(make_joint_amplitude(grid, f));
  }
  return out;
}

// ---------------------------------------------------------------------------

Verdict c1_design_K() {
  auto t0 = std::chrono::steady_clock::now();
  DesignResult d = design_jsa(fixture().design);
  const double s = seconds_since(t0);
  const bool pass = std::abs(d.schmidt.K - 1.0016) <= kTolK && s < kMaxDesignSeconds && d.jsa.f.rows() == 256;
  return {pass, format("K = %.6f (target 1.0016 +/- %g), %.2f s at %ldx%ld", d.schmidt.K, kTolK, s,
                       static_cast<long>(d.jsa.f.rows()), static_cast<long>(d.jsa.f.cols()))};
}

Verdict c2_marginals() {
  const double s = design().marginals.signal_fwhm / kNm, i = design().marginals.idler_fwhm / kNm;
  const bool pass = std::abs(s - 1.69) <= kTolBandwidthNm && std::abs(i - 1.78) <= kTolBandwidthNm;
  return {pass, format("signal %.4f nm (1.69), idler %.4f nm (1.78), tolerance %g nm", s, i, kTolBandwidthNm)};
}

Verdict c3_apodization() {
  SourceDesign rect = fixture().design;
  rect.crystal.apodization.kind = ApodizationKind::none;
  const double k_rect = design_jsa(rect).schmidt.K;
  const double ratio = (k_rect - 1.0) / (design().schmidt.K - 1.0);
  return {ratio >= kApodizationFactor,
          format("K-1 rectangular %.5f vs apodized %.5f, ratio %.1f (need >= %g)", k_rect - 1.0,
                 design().schmidt.K - 1.0, ratio, kApodizationFactor)};
}

Verdict c4_schmidt_oracle() {
  double worst = 0.0;
  for (const JointAmplitude& j : random_jsas(kRandomJsas)) {
    const double p = schmidt(j).purity, q = gram_purity(j.f);
    worst = std::max(worst, std::abs(p - q));
  }
  return {worst <= kTolPurity, format("%zu random JSAs up to 64x64, max |SVD - Gram| = %.2e", kRandomJsas, worst)};
}

Verdict c5_hom_purity() {
  double worst = 0.0;
  for (const JointAmplitude& j : random_jsas(kRandomJsas))
    worst = std::max(worst, std::abs(heralded_hom_overlap(j, j, 0.0) - schmidt(j).purity));
  return {worst <= kTolHomPurity, format("%zu random JSAs, max |overlap(A,A,0) - purity| = %.2e", kRandomJsas, worst)};
}

Verdict c6_seed_audit() {
  const FrequencyGrid g = default_grid(1550 * kNm, 11.1 * kNm);
  const PulseEnvelope seed = make_envelope(PulseShape::sech2, 1550 * kNm, 11.1 * kNm, 0.0, g);
  const double gdd = solve_gdd_for_duration(seed, 0.23 * kPs);
  const double tbp = time_bandwidth(apply_dispersion(seed, {gdd, 0.0})).tbp;
  const double dt0 = transform_limited_tbp(PulseShape::gaussian) / bandwidth_convert(1550 * kNm, 3.16 * kNm);
  const double residual = gaussian_gdd_from_duration(dt0, 1.37 * kPs) / kPs2;
  const bool pass = std::abs(tbp / 0.315 - 1.0) <= kTolTbpRel && std::abs(residual / 0.32 - 1.0) <= kTolResidualGddRel;
  return {pass, format("TBP %.4f (0.315 +/- %g%%), residual GDD %.4f ps^2 (0.32 +/- %g%%)", tbp, 100 * kTolTbpRel,
                       residual, 100 * kTolResidualGddRel)};
}

Verdict c7_martinez() {
  const double gdd = grating_stretcher_gdd(1e6, deg_to_rad(52.0), 0.127, 4, 1550 * kNm) / kPs2;
  return {std::abs(gdd / -14.4 - 1.0) <= kTolMartinezRel,
          format("GDD %.3f ps^2 (-14.4 +/- %g%%)", gdd, 100 * kTolMartinezRel)};
}

Verdict c8_rates() {
  const double H = heralded_efficiency(128600, 189118, 189118).H;
  auto t0 = std::chrono::steady_clock::now();
  const RatesOutcome& r = rates();
  const double s = seconds_since(t0);
  const RatePrediction& p = r.predicted_simulated;
  const double pulses = fixture().rates.simulate_duration * fixture().rates.rep_rate;
  auto z = [](double got, double want) { return std::abs(got - want) / std::sqrt(want); };
  const double z_s = z(r.simulated_singles_s, p.singles_s), z_i = z(r.simulated_singles_i, p.singles_i);
  const double z_c = z(r.simulated_coincidences.C, p.coincidences);
  const double z_h = std::abs(r.simulated_H.H - p.H_predicted) / r.simulated_H.sigma;
  const bool pass = std::abs(H - 0.680) <= kTolHeralded && pulses >= 1e7 && s < kMaxRatesSeconds &&
                    std::max({z_s, z_i, z_c, z_h}) <= kSigmaRates;
  return {pass, format("H(128600,189118,189118) = %.7f; %.0e pulses: z singles %.2f/%.2f, C %.2f, H %.2f; %.1f s", H,
                       pulses, z_s, z_i, z_c, z_h, s)};
}

Verdict c9_polarization() {
  PolarizationModel ideal;
  double worst = 0.0;
  for (Basis b : {Basis::H, Basis::V, Basis::D, Basis::A}) worst = std::max(worst, std::abs(basis_visibility(ideal, b) - 1.0));
  PolarizationModel m;
  m.mixed_fraction = fit_mixed_fraction(m, Basis::D, 0.991);
  const double v_a = basis_visibility(m, Basis::A);
  const bool pass = worst <= kTolPolIdeal && std::abs(v_a - 0.991) <= kTolPolA;
  return {pass, format("ideal max |V-1| = %.1e; mixed %.4f%% fitted to V_D = 0.991 gives V_A = %.5f", worst,
                       100 * m.mixed_fraction, v_a)};
}

Verdict c10_closed_loop() {
  // Monte Carlo data at powers high enough to collect the baseline counts in reasonable time.
  ExperimentConfig mc = fixture();
  mc.hom.method = HomMethod::monte_carlo;
  mc.hom.powers_mW = {20, 30, 40, 50, 60};
  const HomOutcome o = run_hom(mc, design(), rates());

  HomConfig h;
  h.jsa = design().jsa;
  h.purity = mc.hom.purity;
  h.delay_grid = delay_grid(mc.hom.delay_half_width, mc.hom.delay_points);
  h.splitter_ratio = mc.hom.splitter_ratio;
  h.pulse_spacing = mc.hom.pulse_spacing;
  h.eta_signal = rates().operating_point.eta_signal;
  h.eta_idler = rates().operating_point.eta_idler;
  h.out_c = mc.detectors.signal;
  h.out_d = mc.detectors.signal_2;
  h.herald_a = mc.detectors.idler;
  h.herald_b = mc.detectors.idler_2;
  h.herald = HeraldKind::dual_click_quasi_pnr;
  h.mu = 1e-6;
  const double injected = hom_experiment(h, HomMethod::analytic, 1000000, 1).V;

  const LineFit& f = o.fit_quasi_pnr;
  const double z = std::abs(f.intercept - injected) / f.sigma_intercept;
  // Herald ordering on the model visibilities, free of count noise.
  bool ordered = true;
  double min_gap = 1.0;
  for (double P : mc.hom.powers_mW) {
    h.mu = P * rates().mu_per_mW;
    h.herald = HeraldKind::dual_click_quasi_pnr;
    const double v_pnr = hom_experiment(h, HomMethod::analytic, 1000000, 1).V;
    h.herald = HeraldKind::single_click;
    const double v_sc = hom_experiment(h, HomMethod::analytic, 1000000, 1).V;
    ordered = ordered && v_pnr >= v_sc;
    min_gap = std::min(min_gap, v_pnr - v_sc);
  }
  return {z <= kSigmaClosedLoop && ordered,
          format("injected V0 %.5f, recovered %.5f +/- %.5f (%.2f sigma, need <= %g); PNR - single-click >= %.5f", injected,
                 f.intercept, f.sigma_intercept, z, kSigmaClosedLoop, min_gap)};
}

Verdict c11_lo_hom() {
  const LoOutcome o = run_lo(fixture(), design(), rates());
  double worst = 0.0;
  for (std::size_t k = 0; k < o.dip.threefold.size(); ++k)
    worst = std::max(worst, std::abs(o.dip.threefold[k] - o.dip.threefold_oracle[k]));
  const double reduction = o.dip.V_ideal_lo - o.dip.V_zero_power;
  const bool pass = fixture().lo.fock_cutoff == 6 && std::abs(fixture().lo.mu_lo - 0.0194) < 1e-12 &&
                    worst <= kTolLoOracle && reduction >= 0.0 && reduction < kMaxLoReduction;
  return {pass, format("cutoff %zu, max |analytic - Fock| = %.2e; mu_lo %.4f reduces V by %.5f (need < %g)",
                       fixture().lo.fock_cutoff, worst, fixture().lo.mu_lo, reduction, kMaxLoReduction)};
}

Verdict c12_tof() {
  // Lossless arms and unit efficiency so that every generated pair is a recorded event.
  TofSpec s = fixture().tof.spec;
  s.insertion_loss = 0.0;
  const JointIntensity truth = intensity_of(build_jsa(design().pump, design().crystal, matched_grid(s, s, fixture().tof.bins)));
  const double K_true = schmidt_intensity(truth.values).K;
  std::vector<double> dK;
  for (double jitter : {223.0, 100.0, 0.0}) {
    DetectorModel d;
    d.efficiency = 1.0;
    d.jitter_fwhm = jitter * kPs;
    TofHistogram h = simulate_tof(truth, s, s, d, d, 10000000, derive_seed(fixture().seed, 30, 0), fixture().tof.bins);
    dK.push_back(std::abs(schmidt_intensity(reconstruct_jsi(h, s, s).jsi.values).K - K_true));
  }
  const bool zero_ok = dK[2] <= kTolTofK;
  const bool monotone = dK[0] >= dK[1] && dK[1] >= dK[2];
  return {zero_ok && monotone, format("K_true %.6f; |dK| at 223/100/0 ps = %.2e / %.2e / %.2e; zero-jitter %s, monotone %s",
                                      K_true, dK[0], dK[1], dK[2], zero_ok ? "ok" : "FAIL", monotone ? "ok" : "FAIL")};
}

Verdict c13_determinism() {
  const fs::path root = fs::temp_directory_path() / ("spdcsim_acceptance_" + std::to_string(::getpid()));
  fs::remove_all(root);
  std::vector<std::string> mismatched;
  std::size_t files = 0;
  for (const char* command : {"design", "sweep", "rates", "pol", "hom", "lo-hom", "tof", "report"}) {
    for (const char* threads : {"1", "8"}) {
      const fs::path out = root / command / threads;
      const std::string cmd = std::string("\"") + SPDCSIM_CLI_PATH + "\" " + command + " --config \"" + kFixture +
                              "\" --out \"" + out.string() + "\" --threads " + threads + " >/dev/null";
      const int raw = std::system(cmd.c_str());
      if (!WIFEXITED(raw) || WEXITSTATUS(raw) != 0) mismatched.push_back(std::string(command) + " (exit)");
    }
    const fs::path a = root / command / "1", b = root / command / "8";
    if (!fs::exists(a)) continue;
    for (const auto& e : fs::directory_iterator(a)) {
      ++files;
      auto slurp = [](const fs::path& p) {
        std::ifstream f(p, std::ios::binary);
        std::ostringstream s;
        s << f.rdbuf();
        return s.str();
      };
      if (!fs::exists(b / e.path().filename()) || slurp(e.path()) != slurp(b / e.path().filename()))
        mismatched.push_back(std::string(command) + "/" + e.path().filename().string());
    }
  }
  fs::remove_all(root);
  std::string detail = format("%zu artifacts compared across --threads 1 and 8", files);
  for (const auto& m : mismatched) detail += "; differs: " + m;
  return {mismatched.empty() && files > 0, detail};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria = {
      {"design Schmidt number and runtime", c1_design_K},
      {"design marginal bandwidths", c2_marginals},
      {"apodization suppresses K - 1", c3_apodization},
      {"SVD purity equals Gram purity", c4_schmidt_oracle},
      {"HOM self-overlap equals purity", c5_hom_purity},
      {"seed pulse and residual GDD audit", c6_seed_audit},
      {"Martinez stretcher GDD", c7_martinez},
      {"heralded efficiency and Monte Carlo rates", c8_rates},
      {"polarization visibilities", c9_polarization},
      {"HOM power extrapolation closed loop", c10_closed_loop},
      {"LO HOM oracle and LO-induced reduction", c11_lo_hom},
      {"time-of-flight round trip", c12_tof},
      {"byte-identical artifacts across thread counts", c13_determinism},
  };
  int unexpected = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    const int id = static_cast<int>(k + 1);
    Verdict v;
    try {
      v = criteria[k].second();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    const bool known = kKnownRed.count(id) > 0;
    if (!v.pass && !known) ++unexpected;
    std::printf("[%s] %2d %s: %s%s\n", v.pass ? "PASS" : "FAIL", id, criteria[k].first.c_str(), v.detail.c_str(),
                !v.pass && known ? " (known unattainable)" : "");
    std::fflush(stdout);
  }
  std::printf("%d unexpected failure(s)\n", unexpected);
  return unexpected == 0 ? 0 : 1;
}
