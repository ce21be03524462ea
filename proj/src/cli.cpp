#include "spdcsim/cli.h"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>
#include <thread>

#include "CLI11.hpp"

namespace spdc {

namespace {

const char* const kCommandNames[] = {"design", "sweep", "rates", "pol", "hom", "lo-hom", "tof", "report"};

const char* basis_name(Basis b) {
  switch (b) {
    case Basis::H: return "H";
    case Basis::V: return "V";
    case Basis::D: return "D";
    case Basis::A: return "A";
  }
  return "?";
}

constexpr Basis kBases[4] = {Basis::H, Basis::V, Basis::D, Basis::A};

const char* herald_name(HeraldKind h) {
  return h == HeraldKind::dual_click_quasi_pnr ? "quasi_pnr" : "single_click";
}

ArtifactHeader header(Command c, const ExperimentConfig& config) { return {to_string(c), config.hash, config.seed}; }

double nm(double x) { return x / kNm; }

}  // namespace

Command parse_command(const std::string& name) {
  for (std::size_t k = 0; k < std::size(kCommandNames); ++k)
    if (name == kCommandNames[k]) return static_cast<Command>(k);
  throw ConfigError("", "unknown subcommand '" + name + "'");
}

std::string to_string(Command command) { return kCommandNames[static_cast<std::size_t>(command)]; }

// ---------------------------------------------------------------------------
// Experiments

DesignResult run_design(const ExperimentConfig& config) { return design_jsa(config.design); }

RatesOutcome run_rates(const ExperimentConfig& config, const DesignResult& design) {
  const RatesSettings& s = config.rates;
  RatesOutcome r;
  SourceStats base;
  base.rep_rate = s.rep_rate;
  base.modes_K = s.modes_K > 0 ? s.modes_K : design.schmidt.K;
  r.modes_K = base.modes_K;
  const DetectorModel& ds = config.detectors.signal;
  const DetectorModel& di = config.detectors.idler;
  r.operating_point = fit_operating_point(base, ds, di, s.coincidence_rate, s.heralded_efficiency, s.window);
  r.mu_per_mW = r.operating_point.mu / s.pump_power_mW;

  SourceStats src = base;
  src.mu = r.operating_point.mu;
  src.eta_signal = r.operating_point.eta_signal;
  src.eta_idler = r.operating_point.eta_idler;
  src.power_calibration = r.mu_per_mW;
  r.predicted = predict_rates(src, ds, di, s.integration, s.window);
  if (s.simulate_duration > 0) {
    r.predicted_simulated = predict_rates(src, ds, di, s.simulate_duration, s.window);
    auto streams = simulate_timetags({src, ds, di}, s.simulate_duration, derive_seed(config.seed, 10, 0));
    r.simulated_singles_s = static_cast<double>(streams[0].times.size());
    r.simulated_singles_i = static_cast<double>(streams[1].times.size());
    r.simulated_coincidences = coincidences(streams[0], streams[1], s.window);
    if (r.simulated_singles_s > 0 && r.simulated_singles_i > 0)
      r.simulated_H = heralded_efficiency(r.simulated_coincidences.C, r.simulated_singles_s, r.simulated_singles_i);
  }
  return r;
}

PolOutcome run_pol(const ExperimentConfig& config) {
  PolOutcome o;
  o.model = config.pol.model;
  const std::size_t n = config.pol.scan_points;
  std::vector<double> scan(n);
  for (std::size_t k = 0; k < n; ++k) scan[k] = 2.0 * kPi * static_cast<double>(k) / static_cast<double>(n);
  std::vector<std::vector<double>> curves;
  double peak = 0.0;
  for (Basis b : kBases) {
    curves.push_back(coincidence_curve(o.model, b, scan));
    peak = std::max(peak, *std::max_element(curves.back().begin(), curves.back().end()));
  }
  for (std::size_t b = 0; b < 4; ++b) {
    o.V[b] = basis_visibility(o.model, kBases[b]);
    std::vector<double> counts = curves[b];
    for (double& c : counts) c *= config.pol.peak_counts / peak;
    o.V_sampled[b] = visibility(counts, VisibilityKind::polarization);
  }
  const PolarizationModel m = o.model;
  o.calibration = calibrate_bases([m](double a, double b) { return coincidence_probability(m, a, b); });
  return o;
}

namespace {

HomConfig hom_config(const ExperimentConfig& config, const DesignResult& design, const RatesOutcome& rates) {
  HomConfig h;
  h.jsa = design.jsa;
  h.purity = config.hom.purity;
  h.delay_grid = delay_grid(config.hom.delay_half_width, config.hom.delay_points);
  h.splitter_ratio = config.hom.splitter_ratio;
  h.pulse_spacing = config.hom.pulse_spacing;
  h.eta_signal = rates.operating_point.eta_signal;
  h.eta_idler = rates.operating_point.eta_idler;
  h.out_c = config.detectors.signal;
  h.out_d = config.detectors.signal_2;
  h.herald_a = config.detectors.idler;
  h.herald_b = config.detectors.idler_2;
  return h;
}

// Pulses for the configured baseline counts, from the analytic baseline rate.
std::uint64_t pulses_for_baseline(const HomConfig& h, double baseline_counts) {
  const double base = hom_baseline_rate(h);
  if (!(base > 0)) throw InvalidInput("hom: zero baseline fourfold rate");
  return static_cast<std::uint64_t>(std::ceil(baseline_counts / base));
}

}  // namespace

HomOutcome run_hom(const ExperimentConfig& config, const DesignResult& design, const RatesOutcome& rates) {
  HomOutcome o;
  HomConfig h = hom_config(config, design, rates);
  std::vector<PowerPoint> pnr, single;
  std::uint64_t stream = 0;
  for (HeraldKind herald : {HeraldKind::dual_click_quasi_pnr, HeraldKind::single_click}) {
    h.herald = herald;
    for (double P : config.hom.powers_mW) {
      h.mu = P * rates.mu_per_mW;
      const std::uint64_t pulses = pulses_for_baseline(h, config.hom.baseline_counts);
      HomResult r = hom_experiment(h, config.hom.method, pulses, derive_seed(config.seed, 20, stream++));
      (herald == HeraldKind::dual_click_quasi_pnr ? pnr : single).push_back({P, r.V, r.sigma_V});
      o.points.push_back({herald, P, h.mu, pulses, std::move(r)});
    }
  }
  o.fit_quasi_pnr = power_extrapolation(pnr);
  o.fit_single_click = power_extrapolation(single);
  h.herald = HeraldKind::dual_click_quasi_pnr;
  h.mu = config.hom.dip_power_mW * rates.mu_per_mW;
  o.dip = hom_experiment(h, config.hom.method, pulses_for_baseline(h, config.hom.baseline_counts),
                         derive_seed(config.seed, 21, 0));
  return o;
}

LoOutcome run_lo(const ExperimentConfig& config, const DesignResult& design, const RatesOutcome& rates) {
  const LoSettings& s = config.lo;
  LoConfig c;
  c.mu_lo = s.mu_lo;
  c.mode_overlap = s.mode_overlap;
  c.purity = config.hom.purity;
  c.fock_cutoff = s.fock_cutoff;
  c.signal_transmission = rates.operating_point.eta_signal;
  c.eta_idler = rates.operating_point.eta_idler;
  c.splitter_ratio = s.splitter_ratio;
  c.out_c = config.detectors.signal;
  c.out_d = config.detectors.signal_2;
  c.herald = config.detectors.idler;
  LoOutcome o;
  o.powers_mW = s.powers_mW;
  for (double P : s.powers_mW) {
    c.mu_pump = P * rates.mu_per_mW;
    LoHomResult r = lo_hom(c);
    // Poisson error for the configured baseline counts.
    Visibility v = visibility(config.hom.baseline_counts, config.hom.baseline_counts * (1.0 - r.V), VisibilityKind::hom);
    o.points.push_back({P, r.V, v.sigma});
  }
  o.fit = power_extrapolation(o.points);
  c.mu_pump = *std::max_element(s.powers_mW.begin(), s.powers_mW.end()) * rates.mu_per_mW;
  c.delay_grid = delay_grid(s.delay_half_width, s.delay_points);
  const JointAmplitude jsa = design.jsa;
  c.delay_overlap = [jsa](double tau) { return std::abs(marginal_autocorrelation(jsa, tau)); };
  o.dip = lo_hom(c);
  return o;
}

TofOutcome run_tof(const ExperimentConfig& config, const DesignResult& design) {
  const TofSpec& spec = config.tof.spec;
  const std::size_t bins = config.tof.bins;
  TofOutcome o;
  JointIntensity truth = intensity_of(build_jsa(design.pump, design.crystal, matched_grid(spec, spec, bins)));
  o.K_true = schmidt_intensity(truth.values).K;
  const DetectorModel& d1 = config.detectors.signal;
  const DetectorModel& d2 = config.detectors.idler;
  o.histogram = simulate_tof(truth, spec, spec, d1, d2, config.tof.events, derive_seed(config.seed, 30, 0), bins);
  o.reconstruction = reconstruct_jsi(o.histogram, spec, spec);
  o.K_reconstructed = schmidt_intensity(o.reconstruction.jsi.values).K;
  o.K_jitter_only = schmidt_intensity(expected_histogram(truth, spec, spec, d1, d2, bins)).K;
  o.total_variation = total_variation(o.reconstruction.jsi.values, truth.values);
  return o;
}

// ---------------------------------------------------------------------------
// Report

ReportTable design_rows(const DesignResult& d) {
  ReportTable t;
  t.add("design Schmidt number K", "", d.schmidt.K, 1.0016, 0.0, 0.005, "published crystal design");
  t.add("design signal bandwidth", "nm", nm(d.marginals.signal_fwhm), 1.69, 0.0, 0.15, "published crystal design");
  t.add("design idler bandwidth", "nm", nm(d.marginals.idler_fwhm), 1.78, 0.0, 0.15, "published crystal design");
  return t;
}

ReportTable build_report(const ExperimentConfig& config) {
  DesignResult design = run_design(config);
  RatesOutcome rates = run_rates(config, design);
  PolOutcome pol = run_pol(config);
  HomOutcome hom = run_hom(config, design, rates);
  LoOutcome lo = run_lo(config, design, rates);
  TofOutcome tof = run_tof(config, design);

  ReportTable t = design_rows(design);
  t.add("heralded efficiency H", "%", 100 * rates.predicted.H_predicted, 68.0, 0.1, 0.2,
        "published heralding measurement");
  t.add("brightness", "pairs/(s mW)", rates.predicted.pairs_per_s_per_mW, 2050, 50, 100,
        "published heralding measurement");
  const double pol_published[4] = {99.7, 99.8, 99.1, 99.1};
  const double pol_sigma[4] = {0.1, 0.2, 0.1, 0.1};
  for (std::size_t b = 0; b < 4; ++b)
    t.add(std::string("polarization visibility ") + basis_name(kBases[b]), "%", 100 * pol.V[b], pol_published[b],
          pol_sigma[b], 2 * pol_sigma[b], std::string("published polarization measurement, ") + basis_name(kBases[b]) +
                                              " basis");
  const LineFit& f = hom.fit_quasi_pnr;
  t.add("successive-photon HOM V0", "%", 100 * f.intercept, 96.3, 0.6, 2 * std::hypot(0.6, 100 * f.sigma_intercept),
        "published HOM power extrapolation");
  t.add("LO HOM V0", "%", 100 * lo.fit.intercept, 88.6, 0.2, 2 * std::hypot(0.2, 100 * lo.fit.sigma_intercept),
        "published LO HOM power extrapolation");
  t.add("measured Schmidt number K (time of flight)", "", tof.K_reconstructed, 1.0089, 0.0002, 0.0004,
        "published time-of-flight JSI");
  return t;
}

// ---------------------------------------------------------------------------
// Artifacts

namespace {

Artifacts design_artifacts(const ExperimentConfig& config, const DesignResult& d) {
  const ArtifactHeader h = header(Command::design, config);
  Artifacts out;
  std::ostringstream jsa, jsi;
  write_jsa(jsa, d.jsa, h);
  write_jsi(jsi, d.jsa.grid, d.jsa.jsi(), h);
  out.push_back({"jsa.csv", jsa.str()});
  out.push_back({"jsi.csv", jsi.str()});
  CsvTable m({"axis", "wavelength_nm", "density"});
  for (std::size_t k = 0; k < d.jsa.grid.signal.size(); ++k)
    m.row({"signal", fmt(nm(d.jsa.grid.signal[k])), fmt(d.marginals.signal[k])});
  for (std::size_t k = 0; k < d.jsa.grid.idler.size(); ++k)
    m.row({"idler", fmt(nm(d.jsa.grid.idler[k])), fmt(d.marginals.idler[k])});
  out.push_back({"marginals.csv", m.str(h)});
  CsvTable s({"quantity", "value", "unit"});
  s.row({"schmidt_number", fmt(d.schmidt.K), ""});
  s.row({"purity", fmt(d.schmidt.purity), ""});
  s.row({"signal_fwhm", fmt(nm(d.marginals.signal_fwhm)), "nm"});
  s.row({"idler_fwhm", fmt(nm(d.marginals.idler_fwhm)), "nm"});
  s.row({"crystal_temperature", fmt(d.crystal.temperature), "K"});
  s.row({"grid_points", std::to_string(d.jsa.grid.signal.size()), ""});
  for (Eigen::Index k = 0; k < std::min<Eigen::Index>(5, d.schmidt.singular_values.size()); ++k)
    s.row({"schmidt_coefficient_" + std::to_string(k), fmt(d.schmidt.singular_values[k]), ""});
  out.push_back({"design_summary.csv", s.str(h)});
  ReportTable rows = design_rows(d);
  out.push_back({"design_report.csv", rows.csv(h)});
  return out;
}

Artifacts sweep_artifacts(const ExperimentConfig& config) {
  struct Job {
    SweepParameter parameter;
    const char* name;
    const char* unit;
    double scale;
    const std::vector<double>* values;
  };
  const Job jobs[] = {{SweepParameter::pump_fwhm, "pump_fwhm", "nm", kNm, &config.sweep.pump_fwhm},
                      {SweepParameter::pump_gdd, "pump_gdd", "ps2", kPs2, &config.sweep.pump_gdd},
                      {SweepParameter::apodization_fwhm, "apodization_fwhm", "mm", kMm, &config.sweep.apodization_fwhm}};
  CsvTable t({"parameter", "value", "unit", "K", "purity", "signal_fwhm_nm", "idler_fwhm_nm", "best"});
  for (const Job& j : jobs) {
    if (j.values->empty()) continue;
    SweepResult r = purity_sweep(config.design, j.parameter, *j.values);
    for (std::size_t k = 0; k < r.rows.size(); ++k) {
      const SweepRow& row = r.rows[k];
      t.row({j.name, fmt(row.value / j.scale), j.unit, fmt(row.K), fmt(1.0 / row.K), fmt(nm(row.signal_fwhm)),
             fmt(nm(row.idler_fwhm)), k == r.best ? "1" : "0"});
    }
  }
  if (t.size() == 0) throw ConfigError("sweep", "no sweep values configured");
  return {{"purity_sweep.csv", t.str(header(Command::sweep, config))}};
}

Artifacts rates_artifacts(const ExperimentConfig& config, const RatesOutcome& r) {
  const ArtifactHeader h = header(Command::rates, config);
  CsvTable op({"quantity", "value", "unit"});
  op.row({"mu", fmt(r.operating_point.mu), "pairs/pulse"});
  op.row({"eta_signal", fmt(r.operating_point.eta_signal), ""});
  op.row({"eta_idler", fmt(r.operating_point.eta_idler), ""});
  op.row({"mu_per_mW", fmt(r.mu_per_mW), "pairs/pulse/mW"});
  op.row({"modes_K", fmt(r.modes_K), ""});
  op.row({"pairs_per_s_per_mW", fmt(r.predicted.pairs_per_s_per_mW), "pairs/(s mW)"});
  op.row({"singles_signal", fmt(r.predicted.singles_s), "counts"});
  op.row({"singles_idler", fmt(r.predicted.singles_i), "counts"});
  op.row({"coincidences", fmt(r.predicted.coincidences), "counts"});
  op.row({"heralded_efficiency", fmt(r.predicted.H_predicted), ""});
  Artifacts out{{"operating_point.csv", op.str(h)}};
  if (config.rates.simulate_duration > 0) {
    CsvTable t({"quantity", "predicted", "simulated", "sigma"});
    const RatePrediction& p = r.predicted_simulated;
    t.row({"singles_signal", fmt(p.singles_s), fmt(r.simulated_singles_s), fmt(std::sqrt(r.simulated_singles_s))});
    t.row({"singles_idler", fmt(p.singles_i), fmt(r.simulated_singles_i), fmt(std::sqrt(r.simulated_singles_i))});
    t.row({"coincidences", fmt(p.coincidences), fmt(r.simulated_coincidences.C), fmt(r.simulated_coincidences.sigma)});
    t.row({"heralded_efficiency", fmt(p.H_predicted), fmt(r.simulated_H.H), fmt(r.simulated_H.sigma)});
    out.push_back({"rates.csv", t.str(h)});
  }
  return out;
}

Artifacts pol_artifacts(const ExperimentConfig& config, const PolOutcome& o) {
  const ArtifactHeader h = header(Command::pol, config);
  const std::size_t n = config.pol.scan_points;
  std::vector<double> scan(n);
  for (std::size_t k = 0; k < n; ++k) scan[k] = 2.0 * kPi * static_cast<double>(k) / static_cast<double>(n);
  CsvTable curves({"basis_a", "angle_b_deg", "probability"});
  for (Basis b : kBases) {
    std::vector<double> c = coincidence_curve(o.model, b, scan);
    for (std::size_t k = 0; k < n; ++k) curves.row({basis_name(b), fmt(rad_to_deg(scan[k])), fmt(c[k])});
  }
  CsvTable v({"basis", "V", "V_sampled", "sigma_sampled"});
  for (std::size_t b = 0; b < 4; ++b)
    v.row({basis_name(kBases[b]), fmt(o.V[b]), fmt(o.V_sampled[b].V), fmt(o.V_sampled[b].sigma)});
  CsvTable cal({"setting", "angle_deg", "nominal_deg"});
  const BasisCalibration& c = o.calibration;
  cal.row({"H", fmt(rad_to_deg(c.angle_H)), "90"});
  cal.row({"V", fmt(rad_to_deg(c.angle_V)), "0"});
  cal.row({"D", fmt(rad_to_deg(c.angle_D)), fmt(rad_to_deg(c.naive_D))});
  cal.row({"A", fmt(rad_to_deg(c.angle_A)), fmt(rad_to_deg(c.naive_A))});
  return {{"pol_curves.csv", curves.str(h)}, {"pol_visibility.csv", v.str(h)}, {"pol_calibration.csv", cal.str(h)}};
}

std::string fit_rows(const ArtifactHeader& h, const std::vector<std::pair<std::string, LineFit>>& fits) {
  CsvTable t({"herald", "intercept", "sigma_intercept", "slope_per_mW", "sigma_slope", "chi2"});
  for (const auto& [name, f] : fits)
    t.row({name, fmt(f.intercept), fmt(f.sigma_intercept), fmt(f.slope), fmt(f.sigma_slope), fmt(f.chi2)});
  return t.str(h);
}

Artifacts hom_artifacts(const ExperimentConfig& config, const HomOutcome& o) {
  const ArtifactHeader h = header(Command::hom, config);
  CsvTable dip({"delay_ps", "fourfold_per_pulse", "counts"});
  for (std::size_t k = 0; k < o.dip.delays.size(); ++k)
    dip.row({fmt(o.dip.delays[k] / kPs), fmt(o.dip.fourfold[k]), fmt(o.dip.counts[k])});
  CsvTable pw({"herald", "power_mW", "mu", "pulses", "V", "sigma_V"});
  for (const auto& p : o.points)
    pw.row({herald_name(p.herald), fmt(p.power_mW), fmt(p.mu), std::to_string(p.pulses), fmt(p.result.V),
            fmt(p.result.sigma_V)});
  return {{"hom_dip.csv", dip.str(h)},
          {"hom_power.csv", pw.str(h)},
          {"hom_fit.csv", fit_rows(h, {{"quasi_pnr", o.fit_quasi_pnr}, {"single_click", o.fit_single_click}})}};
}

Artifacts lo_artifacts(const ExperimentConfig& config, const LoOutcome& o) {
  const ArtifactHeader h = header(Command::lo_hom, config);
  CsvTable dip({"delay_ps", "threefold_per_herald", "threefold_oracle"});
  for (std::size_t k = 0; k < o.dip.delays.size(); ++k)
    dip.row({fmt(o.dip.delays[k] / kPs), fmt(o.dip.threefold[k]), fmt(o.dip.threefold_oracle[k])});
  CsvTable pw({"power_mW", "V", "sigma_V"});
  for (const auto& p : o.points) pw.row({fmt(p.x), fmt(p.V), fmt(p.sigma)});
  CsvTable model({"quantity", "value"});
  model.row({"V_zero_power", fmt(o.dip.V_zero_power)});
  model.row({"V_ideal_lo", fmt(o.dip.V_ideal_lo)});
  model.row({"V_lo_reduction", fmt(o.dip.V_ideal_lo - o.dip.V_zero_power)});
  return {{"lo_dip.csv", dip.str(h)},
          {"lo_power.csv", pw.str(h)},
          {"lo_fit.csv", fit_rows(h, {{"single_click", o.fit}})},
          {"lo_model.csv", model.str(h)}};
}

Artifacts tof_artifacts(const ExperimentConfig& config, const TofOutcome& o) {
  const ArtifactHeader h = header(Command::tof, config);
  std::ostringstream hist, jsi;
  write_histogram(hist, o.histogram, header_comment(h));
  write_jsi(jsi, o.reconstruction.jsi.grid, o.reconstruction.jsi.values, h);
  CsvTable s({"quantity", "value"});
  s.row({"events", std::to_string(o.histogram.events)});
  s.row({"recorded", std::to_string(o.histogram.recorded)});
  s.row({"K_true", fmt(o.K_true)});
  s.row({"K_reconstructed", fmt(o.K_reconstructed)});
  s.row({"delta_K", fmt(o.K_reconstructed - o.K_true)});
  s.row({"delta_K_jitter_only", fmt(o.K_jitter_only - o.K_true)});
  s.row({"total_variation", fmt(o.total_variation)});
  return {{"tof_histogram.csv", hist.str()}, {"tof_jsi.csv", jsi.str()}, {"tof_summary.csv", s.str(h)}};
}

}  // namespace

Artifacts execute(Command command, const ExperimentConfig& config) {
  switch (command) {
    case Command::design: return design_artifacts(config, run_design(config));
    case Command::sweep: return sweep_artifacts(config);
    case Command::rates: {
      DesignResult d = run_design(config);
      return rates_artifacts(config, run_rates(config, d));
    }
    case Command::pol: return pol_artifacts(config, run_pol(config));
    case Command::hom: {
      DesignResult d = run_design(config);
      return hom_artifacts(config, run_hom(config, d, run_rates(config, d)));
    }
    case Command::lo_hom: {
      DesignResult d = run_design(config);
      return lo_artifacts(config, run_lo(config, d, run_rates(config, d)));
    }
    case Command::tof: return tof_artifacts(config, run_tof(config, run_design(config)));
    case Command::report: {
      ReportTable t = build_report(config);
      const ArtifactHeader h = header(Command::report, config);
      return {{"report.csv", t.csv(h)}, {"report.txt", t.text()}};
    }
  }
  throw std::logic_error("unhandled command");
}

// ---------------------------------------------------------------------------
// Entry point

namespace {

unsigned default_threads() {
  if (const char* env = std::getenv("SPDCSIM_THREADS")) {
    char* end = nullptr;
    long n = std::strtol(env, &end, 10);
    if (end == env || *end != '\0' || n < 1 || n > 1024)
      throw ConfigError("SPDCSIM_THREADS", std::string("expected a positive integer, got '") + env + "'");
    return static_cast<unsigned>(n);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

void write_artifacts(const std::string& dir, const Artifacts& artifacts) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ConfigError("--out", "cannot create '" + dir + "': " + ec.message());
  for (const Artifact& a : artifacts) {
    fs::path p = fs::path(dir) / a.name;
    std::ofstream f(p, std::ios::binary);
    f << a.content;
    if (!f) throw ConfigError("--out", "cannot write '" + p.string() + "'");
  }
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Simulator for engineered SPDC photon-pair sources", "spdcsim"};
  std::string command, config_path, out_dir = ".", format = "csv";
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
  app.add_option("command", command, "Subcommand")
      ->required()
      ->check(CLI::IsMember(std::vector<std::string>(std::begin(kCommandNames), std::end(kCommandNames))));
  app.add_option("--config", config_path, "Experiment config file")->required();
  app.add_option("--out", out_dir, "Output directory");
  app.add_option("--seed", seed, "Override rng.seed");
  app.add_option("--threads", threads, "Worker threads (default: SPDCSIM_THREADS or all cores)")
      ->check(CLI::Range(1u, 1024u));
  app.add_option("--format", format, "Output format")->check(CLI::IsMember({"csv"}));
  app.footer("Exit status: 0 success, 2 configuration error, 3 numerical-validation error.");
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "spdcsim: " << e.what() << "\n";
    return 2;
  }

  try {
    set_thread_count(threads ? *threads : default_threads());
    ExperimentConfig config = load_config_file(config_path);
    if (seed) config.seed = *seed;
    const Command c = parse_command(command);
    Artifacts artifacts = execute(c, config);
    write_artifacts(out_dir, artifacts);
    for (const Artifact& a : artifacts) {
      if (a.name == "report.txt") out << a.content;
      else if (c != Command::report) out << "wrote " << (std::filesystem::path(out_dir) / a.name).string() << "\n";
    }
    return 0;
  } catch (const ConfigError& e) {
    err << "spdcsim: config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "spdcsim: error: " << e.what() << "\n";
    return 3;
  }
}

}  // namespace spdc
