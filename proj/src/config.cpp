#include "spdcsim/config.h"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <set>
#include <sstream>

#include "spdcsim/csv.h"

namespace spdc {

namespace {

struct KeySpec {
  KeySpec(std::string k, Dimension d, bool r = false, std::string f = {}, bool l = false)
      : key(std::move(k)), dim(d), required(r), fallback(std::move(f)), list(l) {}
  std::string key;
  Dimension dim;
  bool required;
  std::string fallback;  // default, in file syntax; empty means none
  bool list;
};

std::vector<KeySpec> detector_keys(const std::string& role) {
  const std::string p = "detector." + role + ".";
  return {{p + "efficiency", Dimension::fraction, true},
          {p + "dark_rate", Dimension::frequency, false, "0 Hz"},
          {p + "jitter", Dimension::time, false, "0 ps"},
          {p + "dead_time", Dimension::time, false, "0 ns"},
          {p + "number_resolving", Dimension::flag, false, "false"}};
}

const std::vector<KeySpec>& schema() {
  static const std::vector<KeySpec> s = [] {
    std::vector<KeySpec> v = {
        {"pump.wavelength", Dimension::length, true},
        {"pump.fwhm", Dimension::length, true},
        {"pump.gdd", Dimension::gdd, false, "0 ps2"},
        {"pump.shape", Dimension::text, false, "gaussian"},
        {"crystal.material", Dimension::text, true},
        {"crystal.length", Dimension::length, true},
        {"crystal.poling_period", Dimension::length, true},
        {"crystal.qpm_order", Dimension::number, false, "1"},
        {"crystal.temperature", Dimension::temperature, false, "25 C"},
        {"crystal.solve_degeneracy", Dimension::flag, false, "true"},
        {"crystal.apodization", Dimension::text, false, "none"},
        {"crystal.apodization_fwhm", Dimension::length, false, "0 mm"},
        {"crystal.apodization_width_of", Dimension::text, false, "nonlinearity"},
        {"crystal.pump_axis", Dimension::text, false, "y"},
        {"crystal.signal_axis", Dimension::text, false, "y"},
        {"crystal.idler_axis", Dimension::text, false, "z"},
        {"grid.points", Dimension::number, false, "256"},
        {"grid.span", Dimension::length, false, "0 nm"},
        {"source.pump_power", Dimension::power, true},
        {"source.coincidence_rate", Dimension::frequency, true},
        {"source.heralded_efficiency", Dimension::fraction, true},
        {"source.rep_rate", Dimension::frequency, true},
        {"source.integration", Dimension::time, false, "1 s"},
        {"source.coincidence_window", Dimension::time, false, "1 ns"},
        {"source.modes_K", Dimension::number, false, "0"},
        {"source.simulate_duration", Dimension::time, false, "0.1 s"},
        {"sweep.pump_fwhm", Dimension::length, false, "", true},
        {"sweep.pump_gdd", Dimension::gdd, false, "", true},
        {"sweep.apodization_fwhm", Dimension::length, false, "", true},
        {"pol.phase", Dimension::angle, false, "0 deg"},
        {"pol.amplitude_imbalance", Dimension::number, false, "0"},
        {"pol.mixed_fraction", Dimension::fraction, false, "0 %"},
        {"pol.dephasing", Dimension::fraction, false, "0 %"},
        {"pol.waveplate_error_a", Dimension::angle, false, "0 deg"},
        {"pol.waveplate_error_b", Dimension::angle, false, "0 deg"},
        {"pol.scan_points", Dimension::number, false, "73"},
        {"pol.peak_counts", Dimension::number, false, "10000"},
        {"hom.purity", Dimension::fraction, true},
        {"hom.powers", Dimension::power, true, "", true},
        {"hom.dip_power", Dimension::power, false, "48.3 mW"},
        {"hom.delay_half_width", Dimension::time, false, "15 ps"},
        {"hom.delay_points", Dimension::number, false, "41"},
        {"hom.method", Dimension::text, false, "analytic"},
        {"hom.baseline_counts", Dimension::number, false, "2000"},
        {"hom.pulse_spacing", Dimension::time, false, "10 ns"},
        {"hom.splitter_ratio", Dimension::fraction, false, "50 %"},
        {"lo.mu_lo", Dimension::number, true},
        {"lo.mode_overlap", Dimension::number, true},
        {"lo.powers", Dimension::power, true, "", true},
        {"lo.fock_cutoff", Dimension::number, false, "6"},
        {"lo.delay_half_width", Dimension::time, false, "15 ps"},
        {"lo.delay_points", Dimension::number, false, "41"},
        {"lo.splitter_ratio", Dimension::fraction, false, "50 %"},
        {"tof.dispersion", Dimension::dispersion, true},
        {"tof.insertion_loss", Dimension::loss, true},
        {"tof.reference_wavelength", Dimension::length, true},
        {"tof.frame", Dimension::time, true},
        {"tof.bins", Dimension::number, false, "128"},
        {"tof.events", Dimension::number, false, "1e7"},
        {"rng.seed", Dimension::number, true},
    };
    for (const char* role : {"signal", "idler", "signal_2", "idler_2"})
      for (auto& k : detector_keys(role)) v.push_back(k);
    return v;
  }();
  return s;
}

const std::vector<std::string>& required_sections() {
  static const std::vector<std::string> s = {"pump",     "crystal",         "grid",           "source",
                                             "detector.signal", "detector.idler", "detector.signal_2",
                                             "detector.idler_2", "pol",         "hom",            "lo",
                                             "tof",      "rng"};
  return s;
}

std::string section_of(const std::string& key) { return key.substr(0, key.rfind('.')); }

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

const char* dimension_units(Dimension d) {
  switch (d) {
    case Dimension::length: return "nm, um, mm, cm, m";
    case Dimension::time: return "fs, ps, ns, us, ms, s";
    case Dimension::gdd: return "fs2, ps2, s2";
    case Dimension::frequency: return "Hz, kHz, MHz, GHz, THz";
    case Dimension::power: return "uW, mW, W";
    case Dimension::temperature: return "K, C";
    case Dimension::angle: return "deg, rad";
    case Dimension::fraction: return "%";
    case Dimension::loss: return "dB, %";
    case Dimension::dispersion: return "ps/nm, s/m";
    default: return "none";
  }
}

// Converts value with unit to SI, or throws.
double to_si(double x, const std::string& unit, Dimension d, const std::string& key) {
  struct U {
    const char* name;
    Dimension dim;
    double factor;
  };
  static const U table[] = {
      {"nm", Dimension::length, 1e-9},      {"um", Dimension::length, 1e-6},
      {"mm", Dimension::length, 1e-3},      {"cm", Dimension::length, 1e-2},
      {"m", Dimension::length, 1.0},        {"fs", Dimension::time, 1e-15},
      {"ps", Dimension::time, 1e-12},       {"ns", Dimension::time, 1e-9},
      {"us", Dimension::time, 1e-6},        {"ms", Dimension::time, 1e-3},
      {"s", Dimension::time, 1.0},          {"fs2", Dimension::gdd, 1e-30},
      {"ps2", Dimension::gdd, 1e-24},       {"s2", Dimension::gdd, 1.0},
      {"Hz", Dimension::frequency, 1.0},    {"kHz", Dimension::frequency, 1e3},
      {"MHz", Dimension::frequency, 1e6},   {"GHz", Dimension::frequency, 1e9},
      {"THz", Dimension::frequency, 1e12},  {"uW", Dimension::power, 1e-6},
      {"mW", Dimension::power, 1e-3},       {"W", Dimension::power, 1.0},
      {"K", Dimension::temperature, 1.0},   {"deg", Dimension::angle, kPi / 180.0},
      {"rad", Dimension::angle, 1.0},       {"%", Dimension::fraction, 0.01},
      {"%", Dimension::loss, 0.01},         {"ps/nm", Dimension::dispersion, 1e-12 / 1e-9},
      {"s/m", Dimension::dispersion, 1.0},
  };
  if (d == Dimension::number) {
    if (!unit.empty()) throw ConfigError(key, "takes a plain number, got unit '" + unit + "'");
    return x;
  }
  if (unit.empty()) throw ConfigError(key, std::string("missing unit, expected one of: ") + dimension_units(d));
  if (d == Dimension::temperature && unit == "C") return x + 273.15;
  if (d == Dimension::loss && unit == "dB") return 1.0 - std::pow(10.0, -x / 10.0);
  for (const auto& u : table)
    if (u.dim == d && unit == u.name) return x * u.factor;
  throw ConfigError(key, "unit '" + unit + "' not valid here, expected one of: " + dimension_units(d));
}

ConfigEntry parse_value(const KeySpec& spec, const std::string& raw, int line) {
  ConfigEntry e;
  e.line = line;
  if (raw.empty()) throw ConfigError(spec.key, "empty value");
  if (spec.dim == Dimension::text) {
    if (raw.find_first_of(" \t,") != std::string::npos) throw ConfigError(spec.key, "expected a single word");
    e.text = raw;
    return e;
  }
  if (spec.dim == Dimension::flag) {
    if (raw != "true" && raw != "false") throw ConfigError(spec.key, "expected true or false");
    e.text = raw;
    return e;
  }
  std::vector<std::string> items;
  std::stringstream ss(raw);
  for (std::string item; std::getline(ss, item, ',');) items.push_back(trim(item));
  if (items.size() > 1 && !spec.list) throw ConfigError(spec.key, "expected a single value");
  std::vector<double> raw_numbers;
  std::string unit;
  for (std::size_t k = 0; k < items.size(); ++k) {
    const std::string& it = items[k];
    double x = 0.0;
    auto [ptr, ec] = std::from_chars(it.data(), it.data() + it.size(), x);
    if (ec != std::errc() || !std::isfinite(x)) throw ConfigError(spec.key, "malformed number '" + it + "'");
    std::string rest = trim(std::string_view(ptr, static_cast<std::size_t>(it.data() + it.size() - ptr)));
    if (k + 1 < items.size() && !rest.empty())
      throw ConfigError(spec.key, "unit goes after the last list value only");
    if (k + 1 == items.size()) unit = rest;
    raw_numbers.push_back(x);
  }
  for (double x : raw_numbers) e.numbers.push_back(to_si(x, unit, spec.dim, spec.key));
  return e;
}

const KeySpec* find_spec(const std::string& key) {
  for (const auto& s : schema())
    if (s.key == key) return &s;
  return nullptr;
}

}  // namespace

ConfigMap parse_config(std::istream& in) {
  ConfigMap out;
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    auto hash = line.find('#');
    std::string body = trim(std::string_view(line).substr(0, hash));
    if (body.empty()) continue;
    auto eq = body.find('=');
    if (eq == std::string::npos)
      throw ConfigError("", "line " + std::to_string(n) + ": expected 'key = value'");
    std::string key = trim(std::string_view(body).substr(0, eq));
    std::string value = trim(std::string_view(body).substr(eq + 1));
    const KeySpec* spec = find_spec(key);
    if (!spec) throw ConfigError(key, "unknown key (line " + std::to_string(n) + ")");
    if (out.count(key)) throw ConfigError(key, "duplicate key (line " + std::to_string(n) + ")");
    out[key] = parse_value(*spec, value, n);
  }
  std::set<std::string> present;
  for (const auto& [k, v] : out) present.insert(section_of(k));
  for (const auto& sec : required_sections())
    if (!present.count(sec)) throw ConfigError(sec, "missing required section");
  for (const auto& spec : schema()) {
    if (out.count(spec.key)) continue;
    if (spec.required) throw ConfigError(spec.key, "missing required key");
    if (!spec.fallback.empty()) out[spec.key] = parse_value(spec, spec.fallback, 0);
  }
  return out;
}

std::string canonical_text(const ConfigMap& entries) {
  std::string s;
  for (const auto& [k, v] : entries) {
    s += k + " = ";
    if (!v.text.empty()) s += v.text;
    for (std::size_t i = 0; i < v.numbers.size(); ++i) s += (i ? ", " : "") + fmt(v.numbers[i]);
    s += '\n';
  }
  return s;
}

namespace {

class Reader {
 public:
  explicit Reader(const ConfigMap& m) : m_(m) {}

  bool has(const std::string& key) const { return m_.count(key) > 0; }
  const ConfigEntry& at(const std::string& key) const {
    auto it = m_.find(key);
    if (it == m_.end()) throw ConfigError(key, "missing required key");
    return it->second;
  }
  double num(const std::string& key) const { return at(key).numbers.at(0); }
  std::vector<double> list(const std::string& key) const { return has(key) ? at(key).numbers : std::vector<double>{}; }
  const std::string& text(const std::string& key) const { return at(key).text; }
  bool flag(const std::string& key) const { return at(key).text == "true"; }
  std::uint64_t count(const std::string& key, double min = 0) const {
    double x = num(key);
    if (!(x >= min) || x != std::floor(x) || x > 9.007199254740992e15)
      throw ConfigError(key, "expected an integer >= " + fmt(min));
    return static_cast<std::uint64_t>(x);
  }
  double in_range(const std::string& key, double lo, double hi) const {
    double x = num(key);
    if (!(x >= lo && x <= hi)) throw ConfigError(key, "must lie in [" + fmt(lo) + ", " + fmt(hi) + "]");
    return x;
  }
  double positive(const std::string& key) const {
    double x = num(key);
    if (!(x > 0)) throw ConfigError(key, "must be positive");
    return x;
  }
  double non_negative(const std::string& key) const {
    double x = num(key);
    if (!(x >= 0)) throw ConfigError(key, "must be non-negative");
    return x;
  }
  template <class E>
  E choice(const std::string& key, std::initializer_list<std::pair<const char*, E>> options) const {
    const std::string& t = text(key);
    std::string names;
    for (const auto& [name, value] : options) {
      if (t == name) return value;
      names += (names.empty() ? "" : ", ") + std::string(name);
    }
    throw ConfigError(key, "'" + t + "' is not one of: " + names);
  }

 private:
  const ConfigMap& m_;
};

DetectorModel read_detector(const Reader& r, const std::string& role) {
  const std::string p = "detector." + role + ".";
  DetectorModel d;
  d.efficiency = r.in_range(p + "efficiency", 0.0, 1.0);
  d.dark_rate = r.non_negative(p + "dark_rate");
  d.jitter_fwhm = r.non_negative(p + "jitter");
  d.dead_time = r.non_negative(p + "dead_time");
  d.number_resolving = r.flag(p + "number_resolving");
  return d;
}

std::vector<double> powers_mW(const Reader& r, const std::string& key) {
  std::vector<double> p = r.list(key);
  for (double& x : p) {
    if (!(x > 0)) throw ConfigError(key, "powers must be positive");
    x /= 1e-3;
  }
  return p;
}

}  // namespace

ExperimentConfig build_config(const ConfigMap& entries) {
  Reader r(entries);
  ExperimentConfig c;

  SourceDesign& d = c.design;
  d.pump_wavelength = r.positive("pump.wavelength");
  d.pump_fwhm = r.positive("pump.fwhm");
  d.pump_gdd = r.num("pump.gdd");
  d.pump_shape = r.choice<PulseShape>("pump.shape", {{"gaussian", PulseShape::gaussian}, {"sech2", PulseShape::sech2}});
  CrystalSpec& x = d.crystal;
  x.material = r.choice<Material>("crystal.material", {{"KTP", Material::KTP}, {"LN_MgO", Material::LN_MgO}});
  x.length = r.positive("crystal.length");
  x.poling_period = r.positive("crystal.poling_period");
  double order = r.num("crystal.qpm_order");
  if (order == 0 || order != std::floor(order) || std::abs(order) > 99)
    throw ConfigError("crystal.qpm_order", "expected a non-zero integer");
  x.qpm_order = static_cast<int>(order);
  x.temperature = r.positive("crystal.temperature");
  d.solve_degeneracy = r.flag("crystal.solve_degeneracy");
  x.apodization.kind = r.choice<ApodizationKind>(
      "crystal.apodization", {{"none", ApodizationKind::none}, {"gaussian_duty_cycle", ApodizationKind::gaussian_duty_cycle}});
  x.apodization.fwhm = r.non_negative("crystal.apodization_fwhm");
  if (x.apodization.kind != ApodizationKind::none && x.apodization.fwhm <= 0)
    throw ConfigError("crystal.apodization_fwhm", "must be positive when apodization is enabled");
  x.apodization.width_of = r.choice<ApodizationWidthOf>(
      "crystal.apodization_width_of",
      {{"nonlinearity", ApodizationWidthOf::nonlinearity}, {"duty_cycle", ApodizationWidthOf::duty_cycle}});
  x.axes.pump = r.choice<Axis>("crystal.pump_axis", {{"y", Axis::y}, {"z", Axis::z}});
  x.axes.signal = r.choice<Axis>("crystal.signal_axis", {{"y", Axis::y}, {"z", Axis::z}});
  x.axes.idler = r.choice<Axis>("crystal.idler_axis", {{"y", Axis::y}, {"z", Axis::z}});
  d.grid_points = r.count("grid.points", 16);
  d.grid_span = r.non_negative("grid.span");

  RatesSettings& s = c.rates;
  s.pump_power_mW = r.positive("source.pump_power") / 1e-3;
  s.coincidence_rate = r.positive("source.coincidence_rate");
  s.heralded_efficiency = r.in_range("source.heralded_efficiency", 1e-6, 1.0);
  s.rep_rate = r.positive("source.rep_rate");
  s.integration = r.positive("source.integration");
  s.window = r.positive("source.coincidence_window");
  s.modes_K = r.num("source.modes_K");
  if (s.modes_K != 0 && !(s.modes_K >= 1)) throw ConfigError("source.modes_K", "must be 0 (use design K) or >= 1");
  s.simulate_duration = r.non_negative("source.simulate_duration");

  c.sweep.pump_fwhm = r.list("sweep.pump_fwhm");
  c.sweep.pump_gdd = r.list("sweep.pump_gdd");
  c.sweep.apodization_fwhm = r.list("sweep.apodization_fwhm");

  c.detectors.signal = read_detector(r, "signal");
  c.detectors.idler = read_detector(r, "idler");
  c.detectors.signal_2 = read_detector(r, "signal_2");
  c.detectors.idler_2 = read_detector(r, "idler_2");

  PolarizationModel& p = c.pol.model;
  p.phi = r.num("pol.phase");
  p.amplitude_imbalance = r.in_range("pol.amplitude_imbalance", -1.0, 1.0);
  p.mixed_fraction = r.in_range("pol.mixed_fraction", 0.0, 1.0);
  p.dephasing = r.in_range("pol.dephasing", 0.0, 1.0);
  p.waveplate_error_a = r.num("pol.waveplate_error_a");
  p.waveplate_error_b = r.num("pol.waveplate_error_b");
  c.pol.scan_points = r.count("pol.scan_points", 8);
  c.pol.peak_counts = r.positive("pol.peak_counts");

  HomSettings& h = c.hom;
  h.purity = r.in_range("hom.purity", 0.5, 1.0);
  h.powers_mW = powers_mW(r, "hom.powers");
  h.dip_power_mW = r.positive("hom.dip_power") / 1e-3;
  h.delay_half_width = r.positive("hom.delay_half_width");
  h.delay_points = r.count("hom.delay_points", 5);
  h.method = r.choice<HomMethod>("hom.method", {{"analytic", HomMethod::analytic}, {"monte_carlo", HomMethod::monte_carlo}});
  h.baseline_counts = r.positive("hom.baseline_counts");
  h.pulse_spacing = r.positive("hom.pulse_spacing");
  h.splitter_ratio = r.in_range("hom.splitter_ratio", 0.0, 1.0);

  LoSettings& l = c.lo;
  l.mu_lo = r.non_negative("lo.mu_lo");
  l.mode_overlap = r.in_range("lo.mode_overlap", 0.0, 1.0);
  l.powers_mW = powers_mW(r, "lo.powers");
  l.fock_cutoff = r.count("lo.fock_cutoff", 1);
  l.delay_half_width = r.positive("lo.delay_half_width");
  l.delay_points = r.count("lo.delay_points", 5);
  l.splitter_ratio = r.in_range("lo.splitter_ratio", 0.0, 1.0);

  TofSettings& t = c.tof;
  t.spec.dispersion = r.num("tof.dispersion");
  if (t.spec.dispersion == 0) throw ConfigError("tof.dispersion", "must be non-zero");
  t.spec.insertion_loss = r.in_range("tof.insertion_loss", 0.0, 0.999999);
  t.spec.reference_wavelength = r.positive("tof.reference_wavelength");
  t.spec.frame = r.positive("tof.frame");
  t.bins = r.count("tof.bins", 4);
  t.events = r.count("tof.events", 1);

  c.seed = r.count("rng.seed");
  c.hash = hex64(fnv1a(canonical_text(entries)));
  return c;
}

ExperimentConfig load_config(std::istream& in) { return build_config(parse_config(in)); }

ExperimentConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("", "cannot read config file '" + path + "'");
  return load_config(in);
}

}  // namespace spdc
