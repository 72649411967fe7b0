#include "cslight/scenario.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "cslight/units.hpp"

#ifndef CSLIGHT_PRESET_DIR
#define CSLIGHT_PRESET_DIR "presets"
#endif
#ifndef CSLIGHT_VERSION
#define CSLIGHT_VERSION "0.0.0"
#endif

namespace cslight::scenario {

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

std::string version() { return CSLIGHT_VERSION; }

std::string format_number(double value) {
  if (std::isnan(value)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", value == 0.0 ? 0.0 : value);
  return buf;
}

void CsvTable::add(const std::vector<double>& values) {
  std::vector<std::string> row;
  row.reserve(values.size());
  for (const double v : values) row.push_back(format_number(v));
  add_text(std::move(row));
}

void CsvTable::add_text(std::vector<std::string> values) {
  if (values.size() != header.size()) throw std::logic_error("CSV row width does not match the header");
  rows.push_back(std::move(values));
}

std::string CsvTable::str() const {
  std::string out;
  auto line = [&out](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out += ',';
      out += cells[i];
    }
    out += '\n';
  };
  line(header);
  for (const auto& r : rows) line(r);
  return out;
}

std::string to_string(Kind kind) {
  switch (kind) {
    case Kind::scan: return "scan";
    case Kind::delay_sweep: return "delay_sweep";
    case Kind::propagate: return "propagate";
    case Kind::lindblad_check: return "lindblad_check";
    case Kind::tune: return "tune";
    case Kind::gas_law: return "gas_law";
    case Kind::ablation_law: return "ablation_law";
    case Kind::decompose: return "decompose";
  }
  return "scan";
}

namespace {

Kind parse_kind(const std::string& s, const std::string& key) {
  static const std::map<std::string, Kind> kinds{
      {"scan", Kind::scan},         {"delay_sweep", Kind::delay_sweep},   {"propagate", Kind::propagate},
      {"lindblad_check", Kind::lindblad_check}, {"tune", Kind::tune}, {"gas_law", Kind::gas_law},
      {"ablation_law", Kind::ablation_law},     {"decompose", Kind::decompose}};
  const auto it = kinds.find(s);
  if (it == kinds.end()) throw ScenarioError("scenario key '" + key + "': unknown kind '" + s + "'");
  return it->second;
}

// Strict reader over one JSON object: every key must be consumed.
class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail("", "expected an object");
  }

  [[noreturn]] void fail(const std::string& key, const std::string& what) const {
    throw ScenarioError("scenario key '" + full(key) + "': " + what);
  }

  std::string full(const std::string& key) const {
    if (key.empty()) return path_.empty() ? "<root>" : path_;
    return path_.empty() ? key : path_ + "." + key;
  }

  bool has(const std::string& key) const { return j_.contains(key) && !j_.at(key).is_null(); }

  const json* raw(const std::string& key) {
    used_.insert(key);
    return has(key) ? &j_.at(key) : nullptr;
  }

  double number(const std::string& key, double def) {
    const auto v = opt_number(key);
    return v ? *v : def;
  }

  double required_number(const std::string& key) {
    const auto v = opt_number(key);
    if (!v) fail(key, "required number is missing");
    return *v;
  }

  std::optional<double> opt_number(const std::string& key) {
    const json* v = raw(key);
    if (!v) return std::nullopt;
    if (!v->is_number()) fail(key, "expected a number");
    const double d = v->get<double>();
    if (!std::isfinite(d)) fail(key, "expected a finite number");
    return d;
  }

  double positive(const std::string& key, double def) {
    const double v = number(key, def);
    if (!(v > 0.0)) fail(key, "must be positive");
    return v;
  }

  double non_negative(const std::string& key, double def) {
    const double v = number(key, def);
    if (!(v >= 0.0)) fail(key, "must be non-negative");
    return v;
  }

  std::string text(const std::string& key, const std::string& def) {
    const json* v = raw(key);
    if (!v) return def;
    if (!v->is_string()) fail(key, "expected a string");
    return v->get<std::string>();
  }

  bool boolean(const std::string& key, bool def) {
    const json* v = raw(key);
    if (!v) return def;
    if (!v->is_boolean()) fail(key, "expected true or false");
    return v->get<bool>();
  }

  std::uint64_t unsigned_integer(const std::string& key, std::uint64_t def) {
    const json* v = raw(key);
    if (!v) return def;
    if (!v->is_number_integer() || v->get<long long>() < 0) fail(key, "expected a non-negative integer");
    return v->get<std::uint64_t>();
  }

  std::vector<double> numbers(const std::string& key) {
    const json* v = raw(key);
    if (!v) return {};
    if (!v->is_array()) fail(key, "expected an array of numbers");
    std::vector<double> out;
    for (const auto& e : *v) {
      if (!e.is_number()) fail(key, "expected an array of numbers");
      out.push_back(e.get<double>());
    }
    return out;
  }

  /// Either an explicit list or {start, stop, step}.
  std::vector<double> range(const std::string& key) {
    const json* v = raw(key);
    if (!v) return {};
    if (v->is_array()) return numbers(key);
    Reader r(*v, full(key));
    const double start = r.required_number("start");
    const double stop = r.required_number("stop");
    const double step = r.required_number("step");
    r.finish();
    if (!(step > 0.0)) r.fail("step", "must be positive");
    if (stop < start) r.fail("stop", "must not be below start");
    std::vector<double> out;
    const auto n = static_cast<std::size_t>(std::floor((stop - start) / step + 1e-9)) + 1;
    for (std::size_t i = 0; i < n; ++i) out.push_back(start + step * static_cast<double>(i));
    return out;
  }

  std::optional<Reader> child(const std::string& key) {
    const json* v = raw(key);
    if (!v) return std::nullopt;
    return Reader(*v, full(key));
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!used_.count(it.key())) fail(it.key(), "unknown key");
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> used_;
};

template <class F>
void checked(const std::string& key, F&& f) {
  try {
    f();
  } catch (const ScenarioError&) {
    throw;
  } catch (const std::exception& e) {
    throw ScenarioError("scenario key '" + key + "': " + e.what());
  }
}

void parse_medium(Reader& top, Scenario& s) {
  auto& c = s.propagation.conditions;
  c.temperature = units::celsius(top.number("temperature_C", 110.0));
  if (!(c.temperature > 0.0)) top.fail("temperature_C", "must be above absolute zero");
  c.length = units::cm(top.positive("cell_length_cm", 10.0));
  auto r = top.child("medium");
  if (!r) {
    checked("medium", [&] { c.validate(); });
    return;
  }
  if (const auto d = r->opt_number("density_override_m3")) {
    if (!(*d >= 0.0)) r->fail("density_override_m3", "must be non-negative");
    c.density_override = *d;
  }
  if (const auto d = r->opt_number("doppler_sigma_override_MHz")) {
    if (!(*d >= 0.0)) r->fail("doppler_sigma_override_MHz", "must be non-negative");
    c.doppler_sigma_override = units::mhz(*d);
  }
  const std::string model = r->text("vapor_model", atomic::default_vapor_pressure_model().name);
  const auto m = atomic::find_vapor_pressure_model(model);
  if (!m) r->fail("vapor_model", "unknown vapor-pressure model '" + model + "'");
  c.vapor_model = *m;
  const std::string damping = r->text("damping", "half_width");
  if (damping == "half_width") {
    s.propagation.medium.damping = medium::DampingConvention::half_width;
  } else if (damping == "full_width") {
    s.propagation.medium.damping = medium::DampingConvention::full_width;
  } else {
    r->fail("damping", "expected half_width or full_width");
  }
  const std::string method = r->text("doppler_method", "faddeeva");
  if (method == "faddeeva") {
    s.propagation.medium.doppler_method = medium::DopplerMethod::faddeeva;
  } else if (method == "quadrature") {
    s.propagation.medium.doppler_method = medium::DopplerMethod::quadrature;
  } else {
    r->fail("doppler_method", "expected faddeeva or quadrature");
  }
  const auto w = r->numbers("ground_weights");
  if (!w.empty()) {
    if (w.size() != 2 || !(w[0] >= 0.0) || !(w[1] >= 0.0)) r->fail("ground_weights", "expected two non-negative weights");
    s.propagation.medium.ground_weights = {w[0], w[1]};
  }
  r->finish();
  checked("medium", [&] { c.validate(); });
}

void parse_source(Reader& top, Scenario& s) {
  auto r = top.child("pulse");
  if (!r) {
    s.propagation.source = pulse::EmissionModel::gaussian_laser(units::mhz(220.0));
    return;
  }
  const std::string type = r->text("kind", "laser");
  if (type == "laser") {
    const double bw = units::mhz(r->positive("bandwidth_MHz", 220.0));
    checked(r->full("bandwidth_MHz"), [&] { s.propagation.source = pulse::EmissionModel::gaussian_laser(bw); });
  } else if (type == "qd") {
    const double tau = units::ns(r->positive("lifetime_ns", 1.52));
    double sigma = 0.0;
    const auto fv = r->opt_number("voigt_fwhm_MHz");
    const auto sg = r->opt_number("sigma_ib_MHz");
    if (fv && sg) r->fail("voigt_fwhm_MHz", "give either voigt_fwhm_MHz or sigma_ib_MHz, not both");
    if (fv) {
      checked(r->full("voigt_fwhm_MHz"), [&] { sigma = pulse::inhomogeneous_sigma_for_voigt(units::mhz(*fv), tau); });
    } else if (sg) {
      if (!(*sg >= 0.0)) r->fail("sigma_ib_MHz", "must be non-negative");
      sigma = units::mhz(*sg);
    }
    const double offset = units::ghz(r->number("side_peak_offset_GHz", -24.0));
    const double weight = r->number("side_peak_weight", 0.0);
    if (!(weight >= 0.0 && weight < 1.0)) r->fail("side_peak_weight", "must lie in [0, 1)");
    if (r->boolean("side_peak_weight_is_fitted", false)) {
      s.notes.push_back("side_peak_weight is a fitted scenario parameter");
    }
    checked(r->full(""), [&] { s.propagation.source = pulse::EmissionModel::quantum_dot(tau, sigma, offset, weight); });
  } else {
    r->fail("kind", "expected laser or qd");
  }
  r->finish();
}

void parse_grid(Reader& top, Scenario& s) {
  auto& g = s.propagation.grid;
  if (auto r = top.child("grid")) {
    g.dt = units::ps(r->positive("dt_ps", 50.0));
    g.span = units::ns(r->positive("span_ns", 400.0));
    g.lead_fraction = r->number("lead_fraction", 0.25);
    r->finish();
  }
  checked("grid", [&] { g.validate(); });
  if (auto r = top.child("instrument")) {
    s.propagation.instrument.sigma_jitter = units::ns(r->non_negative("sigma_jitter_ns", 1.0));
    s.propagation.instrument.sigma_detector = units::ns(r->non_negative("sigma_detector_ns", 0.2));
    r->finish();
  }
}

// Detuning in the reported convention, "midpoint" allowed.
std::optional<double> detuning_value(Reader& r, const std::string& key, const Scenario& s) {
  const json* v = r.raw(key);
  if (!v) return std::nullopt;
  if (v->is_string()) {
    if (v->get<std::string>() != "midpoint") r.fail(key, "expected a number or \"midpoint\"");
    return s.propagation.from_com(s.propagation.table.hyperfine_midpoint());
  }
  if (!v->is_number()) r.fail(key, "expected a number or \"midpoint\"");
  return units::ghz(v->get<double>());
}

void parse_sweep(Reader& top, Scenario& s) {
  auto r = top.child("sweep");
  switch (s.kind) {
    case Kind::scan: {
      if (!r) top.fail("sweep", "scan scenarios need a sweep.detuning_GHz range");
      auto d = r->child("detuning_GHz");
      if (!d) r->fail("detuning_GHz", "required range is missing");
      s.scan_start = units::ghz(d->required_number("start"));
      s.scan_stop = units::ghz(d->required_number("stop"));
      s.scan_step = units::ghz(d->required_number("step"));
      d->finish();
      if (!(s.scan_step > 0.0)) r->fail("detuning_GHz.step", "must be positive");
      if (s.scan_stop < s.scan_start) r->fail("detuning_GHz.stop", "must not be below start");
      break;
    }
    case Kind::delay_sweep: {
      if (!r) top.fail("sweep", "delay_sweep scenarios need sweep.temperatures_C");
      for (const double t : r->range("temperatures_C")) {
        if (!(units::celsius(t) > 0.0)) r->fail("temperatures_C", "temperatures must be above absolute zero");
        s.temperatures.push_back(units::celsius(t));
      }
      if (s.temperatures.empty()) r->fail("temperatures_C", "at least one temperature is required");
      s.sweep_detuning = detuning_value(*r, "detuning_GHz", s);
      s.decompose = r->boolean("decompose", true);
      break;
    }
    case Kind::propagate:
    case Kind::decompose: {
      s.detuning = s.propagation.from_com(s.propagation.table.hyperfine_midpoint());
      if (r) {
        if (const auto d = detuning_value(*r, "detuning_GHz", s)) s.detuning = *d;
      }
      break;
    }
    default:
      if (r) top.fail("sweep", "not used by this scenario kind");
  }
  if (r) r->finish();
}

void parse_lindblad(Reader& top, Scenario& s) {
  auto r = top.child("lindblad");
  if (s.kind != Kind::lindblad_check) {
    if (r) top.fail("lindblad", "only used by lindblad_check scenarios");
    return;
  }
  auto& cfg = s.lindblad;
  cfg.conditions = s.propagation.conditions;
  cfg.medium = s.propagation.medium;
  if (!r) top.fail("lindblad", "lindblad_check scenarios need a lindblad block");
  cfg.bandwidth = units::mhz(r->positive("bandwidth_MHz", 50.0));
  cfg.grid.dt = units::ps(r->positive("dt_ps", 62.5));
  cfg.grid.span = units::ns(r->positive("span_ns", 1000.0));
  cfg.grid.lead_fraction = r->number("lead_fraction", 0.05);
  cfg.solver.z_steps = r->unsigned_integer("z_steps", 256);
  if (cfg.solver.z_steps < 64) r->fail("z_steps", "must be at least 64");
  cfg.velocity_nodes = r->unsigned_integer("velocity_nodes", 1);
  if (cfg.velocity_nodes != 1 && cfg.velocity_nodes < 7) r->fail("velocity_nodes", "must be 1 or at least 7");
  cfg.solver.peak_rabi = r->positive("peak_rabi", 1e-4);
  cfg.solver.iterations = static_cast<int>(r->unsigned_integer("iterations", 3));
  if (cfg.solver.iterations < 1) r->fail("iterations", "must be positive");
  cfg.solver.check_positivity = r->boolean("check_positivity", false);
  for (const double d : r->range("detunings_GHz")) s.lindblad_detunings.push_back(units::ghz(d));
  if (s.lindblad_detunings.empty()) r->fail("detunings_GHz", "at least one detuning is required");
  r->finish();
  checked("lindblad", [&] { cfg.grid.validate(); });
}

double f4_line_frequency(const atomic::TransitionTable& t) { return t.com_frequency + t.ground_transition(4); }

void parse_tuning(Reader& top, Scenario& s) {
  auto r = top.child("tuning");
  const bool needs = s.kind == Kind::tune || s.kind == Kind::gas_law || s.kind == Kind::ablation_law;
  if (!needs) {
    if (r) top.fail("tuning", "only used by tuning scenarios");
    return;
  }
  if (!r) top.fail("tuning", "tuning scenarios need a tuning block");
  const double line = f4_line_frequency(s.propagation.table);
  auto absolute = [&](const std::string& ghz_key, const std::string& nm_key, double def_ghz) {
    const auto g = r->opt_number(ghz_key);
    const auto nm = r->opt_number(nm_key);
    if (g && nm) r->fail(ghz_key, "give either " + ghz_key + " or " + nm_key + ", not both");
    if (nm) {
      if (!(*nm > 0.0)) r->fail(nm_key, "must be positive");
      return constants::speed_of_light / (*nm * 1e-9);
    }
    return line + units::ghz(g ? *g : def_ghz);
  };
  auto& qd = s.qd;
  qd.frequency = absolute("start_GHz", "start_nm", -172.0);
  s.target = absolute("target_GHz", "target_nm", 0.0);
  s.tolerance = units::ghz(r->positive("tolerance_GHz", 0.5));
  qd.gas_slope = units::ghz(r->positive("gas_slope_GHz_per_mln", 7.85));
  qd.gas_budget = r->positive("gas_budget_mln", 60.0);
  if (const json* laws = r->raw("ablation")) {
    if (!laws->is_array() || laws->empty()) r->fail("ablation", "expected a non-empty array of laws");
    qd.ablation.clear();
    for (std::size_t i = 0; i < laws->size(); ++i) {
      Reader lr((*laws)[i], r->full("ablation[" + std::to_string(i) + "]"));
      tuning::AblationLaw law;
      law.power = lr.positive("power_mW", 10.0);
      law.a = units::ghz(lr.positive("a_GHz", 100.0 / 60.0));
      law.b = lr.positive("b", 0.5);
      if (law.b > 1.0) lr.fail("b", "must lie in (0, 1]");
      if (const auto c = lr.opt_number("ceiling_GHz")) {
        if (!(*c > 0.0)) lr.fail("ceiling_GHz", "must be positive");
        law.ceiling = units::ghz(*c);
      }
      lr.finish();
      qd.ablation.push_back(law);
    }
  }
  if (auto p = r->child("policy")) {
    auto& pol = s.policy;
    pol.coarse_threshold = units::ghz(p->positive("coarse_threshold_GHz", 5.0));
    pol.coarse_margin = units::ghz(p->non_negative("coarse_margin_GHz", 2.0));
    pol.fine_gas_step = units::ghz(p->positive("fine_gas_step_GHz", 1.18));
    pol.fine_laser_step = units::ghz(p->positive("fine_laser_step_GHz", 0.73));
    pol.laser_power = p->positive("laser_power_mW", 10.0);
    pol.max_steps = p->unsigned_integer("max_steps", 60);
    if (pol.max_steps == 0) p->fail("max_steps", "must be positive");
    p->finish();
  }
  if (auto n = r->child("noise")) {
    auto& nm = s.noise;
    nm.enabled = n->boolean("enabled", true);
    nm.gas_sigma = units::ghz(n->non_negative("gas_sigma_GHz", 0.57));
    nm.laser_sigma = units::ghz(n->non_negative("laser_sigma_GHz", 0.44));
    nm.spectrometer_sigma = units::ghz(n->non_negative("spectrometer_sigma_GHz", 2.0));
    nm.cavity_sigma = units::mhz(n->non_negative("cavity_sigma_MHz", 50.0));
    n->finish();
  }
  for (const double v : r->numbers("gas_slopes_GHz_per_mln")) {
    if (!(v > 0.0)) r->fail("gas_slopes_GHz_per_mln", "slopes must be positive");
    s.gas_slopes.push_back(units::ghz(v));
  }
  for (const double v : r->range("gas_amounts_mln")) {
    if (!(v >= 0.0)) r->fail("gas_amounts_mln", "amounts must be non-negative");
    s.gas_amounts.push_back(v);
  }
  for (const double v : r->range("exposures_s")) {
    if (!(v >= 0.0)) r->fail("exposures_s", "exposures must be non-negative");
    s.exposures.push_back(v);
  }
  s.start_wavelength = r->positive("start_wavelength_nm", 894.6) * 1e-9;
  r->finish();
  checked("tuning", [&] { qd.validate(); });
  if (s.kind == Kind::tune && std::abs(s.target - qd.frequency) > s.policy.max_retune) {
    top.fail("tuning", "target lies more than 400 GHz from the start frequency");
  }
  if (s.kind == Kind::gas_law && (s.gas_slopes.empty() || s.gas_amounts.empty())) {
    top.fail("tuning", "gas_law scenarios need gas_slopes_GHz_per_mln and gas_amounts_mln");
  }
  if (s.kind == Kind::ablation_law && s.exposures.empty()) top.fail("tuning", "ablation_law scenarios need exposures_s");
}

std::pair<std::size_t, std::size_t> line_column(const std::string& text, std::size_t byte) {
  std::size_t line = 1;
  std::size_t col = 1;
  for (std::size_t i = 0; i < std::min(byte > 0 ? byte - 1 : 0, text.size()); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ScenarioError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

Scenario parse_scenario(const json& doc) {
  Reader top(doc, "");
  Scenario s;
  s.echo = doc;
  s.name = top.text("name", "");
  if (s.name.empty()) top.fail("name", "required string is missing");
  for (const char c : s.name) {
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-')) {
      top.fail("name", "use letters, digits, '_' or '-' only");
    }
  }
  s.description = top.text("description", "");
  s.kind = parse_kind(top.text("kind", ""), "kind");
  s.seed = top.unsigned_integer("seed", 1);
  if (const json* n = top.raw("notes")) {
    if (!n->is_array()) top.fail("notes", "expected an array of strings");
    for (const auto& e : *n) {
      if (!e.is_string()) top.fail("notes", "expected an array of strings");
      s.notes.push_back(e.get<std::string>());
    }
  }
  const std::string conv = top.text("detuning_convention", "f4_line");
  if (conv == "f4_line") {
    s.propagation.convention = pulse::DetuningConvention::f4_line;
  } else if (conv == "d1_com") {
    s.propagation.convention = pulse::DetuningConvention::d1_com;
  } else {
    top.fail("detuning_convention", "expected f4_line or d1_com");
  }
  const std::string method = top.text("delay_method", "peak");
  checked("delay_method", [&] { s.propagation.delay_method = pulse::parse_delay_method(method); });
  parse_medium(top, s);
  parse_source(top, s);
  parse_grid(top, s);
  parse_sweep(top, s);
  parse_lindblad(top, s);
  parse_tuning(top, s);
  top.finish();
  return s;
}

Scenario parse_scenario(const std::string& text, const std::string& source) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    const auto [line, col] = line_column(text, e.byte);
    std::string what = e.what();
    const auto pos = what.find("syntax error");
    throw ScenarioError(source + ":" + std::to_string(line) + ":" + std::to_string(col) + ": parse error: " +
                        (pos == std::string::npos ? what : what.substr(pos)));
  }
  return parse_scenario(doc);
}

Scenario load_scenario(const std::string& path) { return parse_scenario(read_file(path), path); }

// ------------------------------------------------------------------ execution

fit::Histogram1D profile_histogram(const pulse::PointResult& result, double window_start_ns, double window_stop_ns) {
  const auto& cell = result.cell.total;
  const auto& ref = result.reference.total;
  const double t_ref = pulse::peak_time(ref);
  const double ref_peak = *std::max_element(ref.values.begin(), ref.values.end());
  fit::Histogram1D h;
  h.bin_width = units::to_ns(cell.dt);
  bool started = false;
  for (std::size_t i = 0; i < cell.size(); ++i) {
    const double t = units::to_ns(cell.time(i) - t_ref);
    if (t < window_start_ns || t > window_stop_ns) continue;
    if (!started) {
      h.bin_start = t - 0.5 * h.bin_width;
      started = true;
    }
    h.counts.push_back(std::max(cell.values[i], 0.0) / ref_peak);
  }
  if (!started) throw std::invalid_argument("profile window is outside the time grid");
  return h;
}

PointDecomposition decompose_point(const pulse::PointResult& result, double window_start_ns, double window_stop_ns) {
  pulse::PointResult ref = result;
  ref.cell = result.reference;
  fit::Histogram1D href = profile_histogram(ref, window_start_ns, window_stop_ns);
  PointDecomposition d;
  d.reference = fit::fit_lorentzian(href);
  const double origin = d.reference.param("center");
  d.profile = profile_histogram(result, window_start_ns, window_stop_ns);
  d.profile.bin_start -= origin;
  d.fit = fit::decompose_side_peak(d.profile, 0.0, href.total() * href.bin_width, d.reference.param("half_width"));
  return d;
}

namespace {

struct Passivity {
  double max_transmission = 0.0;
  double min_transmission = 1e300;
  void add(double t) {
    max_transmission = std::max(max_transmission, t);
    min_transmission = std::min(min_transmission, t);
  }
  void write(json& j) const {
    j["min_transmission"] = min_transmission;
    j["max_transmission"] = max_transmission;
    j["passive"] = max_transmission <= 1.0 + 1e-6;
  }
};

RunOutput run_scan(const Scenario& s) {
  RunOutput out;
  CsvTable csv{{"detuning_GHz", "transmission", "delay_ns", "fwhm_ns", "multimodal_flag"}, {}};
  Passivity pass;
  const auto results = pulse::scan_detuning(s.propagation, s.scan_start, s.scan_stop, s.scan_step);
  for (const auto& r : results) {
    csv.add({units::to_ghz(r.detuning), r.transmission, units::to_ns(r.delay), units::to_ns(r.output_fwhm),
             r.multimodal ? 1.0 : 0.0});
    pass.add(r.transmission);
  }
  out.files.push_back({s.name + ".csv", csv.str()});
  out.summary["points"] = results.size();
  pass.write(out.summary);
  return out;
}

RunOutput run_delay_sweep(const Scenario& s) {
  RunOutput out;
  CsvTable csv{{"temperature_C", "transmission", "delay_ns", "fwhm_ns", "multimodal_flag", "side_peak_ns",
                "components_merged", "side_shift_ns"},
               {}};
  Passivity pass;
  const double detuning = s.sweep_detuning ? *s.sweep_detuning
                                           : s.propagation.from_com(s.propagation.table.hyperfine_midpoint());
  const auto points = pulse::delay_vs_temperature(s.propagation, s.temperatures, detuning);
  bool increasing = true;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto& r = points[i].result;
    double side = std::nan(""), merged = std::nan("");
    if (s.decompose) {
      const auto f = decompose_point(r).fit;
      side = f.param("side_center");
      merged = f.flags.at("components_merged") ? 1.0 : 0.0;
    }
    // peak shift of the simulated side component itself, no fitting involved
    const double shift = s.propagation.source.side_peak_weight > 0.0
                             ? pulse::peak_time(r.cell.side) - pulse::peak_time(r.reference.side)
                             : std::nan("");
    csv.add({units::to_celsius(points[i].temperature), r.transmission, units::to_ns(r.delay),
             units::to_ns(r.output_fwhm), r.multimodal ? 1.0 : 0.0, side, merged,
             units::to_ns(shift)});
    pass.add(r.transmission);
    if (i > 0 && !(r.delay > points[i - 1].result.delay)) increasing = false;
  }
  out.files.push_back({s.name + ".csv", csv.str()});
  out.summary["detuning_GHz"] = units::to_ghz(detuning);
  out.summary["strictly_increasing"] = increasing;
  out.summary["last_delay_ns"] = units::to_ns(points.back().result.delay);
  pass.write(out.summary);
  return out;
}

RunOutput run_propagate(const Scenario& s) {
  RunOutput out;
  const auto r = pulse::simulate_point(s.propagation, s.detuning);
  CsvTable csv{{"time_ns", "reference", "cell_total", "cell_main", "cell_side"}, {}};
  for (std::size_t i = 0; i < r.cell.total.size(); ++i) {
    csv.add({units::to_ns(r.cell.total.time(i)), r.reference.total.values[i], r.cell.total.values[i],
             r.cell.main.values[i], r.cell.side.values[i]});
  }
  out.files.push_back({s.name + ".csv", csv.str()});
  out.summary["detuning_GHz"] = units::to_ghz(s.detuning);
  out.summary["transmission"] = r.transmission;
  out.summary["delay_ns"] = units::to_ns(r.delay);
  out.summary["main_delay_ns"] = units::to_ns(r.main_delay);
  out.summary["fwhm_ns"] = units::to_ns(r.output_fwhm);
  out.summary["multimodal"] = r.multimodal;
  Passivity pass;
  pass.add(r.transmission);
  pass.write(out.summary);
  return out;
}

RunOutput run_decompose(const Scenario& s) {
  RunOutput out;
  const auto r = pulse::simulate_point(s.propagation, s.detuning);
  const auto d = decompose_point(r);
  const auto& h = d.profile;
  const auto& f = d.fit;
  CsvTable csv{{"time_ns", "intensity"}, {}};
  for (std::size_t i = 0; i < h.size(); ++i) csv.add({h.center(i), h.counts[i]});
  out.files.push_back({s.name + "_profile.csv", csv.str()});
  out.files.push_back({s.name + "_fit.txt", f.report()});
  out.summary["transmission"] = r.transmission;
  out.summary["side_center_ns"] = f.param("side_center");
  out.summary["side_share"] = f.param("side_share");
  out.summary["main_share"] = f.param("main_share");
  out.summary["components_merged"] = f.flags.at("components_merged");
  Passivity pass;
  pass.add(r.transmission);
  pass.write(out.summary);
  return out;
}

RunOutput run_lindblad(const Scenario& s) {
  RunOutput out;
  CsvTable summary{{"detuning_GHz", "lindblad_transmission", "linear_transmission", "abs_difference",
                    "max_profile_deviation", "max_trace_error"},
                   {}};
  CsvTable profiles{{"detuning_GHz", "time_ns", "lindblad", "linear", "deviation"}, {}};
  double worst = 0.0;
  double trace = 0.0;
  Passivity pass;
  for (const double d : s.lindblad_detunings) {
    const auto p = lindblad::compare_models(s.lindblad, s.propagation.to_com(d));
    const double diff = std::abs(p.lindblad_transmission - p.linear_transmission);
    summary.add({units::to_ghz(d), p.lindblad_transmission, p.linear_transmission, diff, p.max_profile_deviation,
                 p.diagnostics.max_trace_error});
    for (std::size_t i = 0; i < p.linear_profile.size(); i += 4) {
      profiles.add({units::to_ghz(d), units::to_ns(p.linear_profile.time(i)), p.lindblad_profile.values[i],
                    p.linear_profile.values[i], p.lindblad_profile.values[i] - p.linear_profile.values[i]});
    }
    worst = std::max(worst, diff);
    trace = std::max(trace, p.diagnostics.max_trace_error);
    pass.add(p.lindblad_transmission);
    pass.add(p.linear_transmission);
  }
  out.files.push_back({s.name + ".csv", summary.str()});
  out.files.push_back({s.name + "_profiles.csv", profiles.str()});
  out.summary["max_transmission_difference"] = worst;
  out.summary["max_trace_error"] = trace;
  pass.write(out.summary);
  return out;
}

RunOutput run_tune(const Scenario& s) {
  RunOutput out;
  const auto plan = tuning::tune_to_target(s.qd, s.target, s.tolerance, s.policy, s.noise, s.seed);
  CsvTable csv{{"step", "action", "amount_mln", "power_mW", "duration_s", "instrument", "measured_error_GHz",
                "true_error_GHz"},
               {}};
  for (std::size_t i = 0; i < plan.actions.size(); ++i) {
    const auto& a = plan.actions[i];
    const bool m = a.kind == tuning::ActionKind::measure;
    csv.add_text({std::to_string(i + 1), tuning::to_string(a.kind), format_number(a.amount), format_number(a.power),
                  format_number(a.duration), m ? tuning::to_string(a.instrument) : "",
                  m ? format_number(units::to_ghz(a.measured - s.target)) : "",
                  format_number(units::to_ghz(a.true_frequency - s.target))});
  }
  out.files.push_back({s.name + ".csv", csv.str()});
  out.summary["converged"] = plan.converged;
  out.summary["steps"] = plan.steps;
  out.summary["achieved_detuning_GHz"] = units::to_ghz(plan.achieved_detuning);
  out.summary["final_error_GHz"] = units::to_ghz(plan.final_state.frequency - s.target);
  out.summary["gas_used_mln"] = plan.final_state.cumulative_gas;
  if (!plan.failure.empty()) out.summary["failure"] = plan.failure;
  return out;
}

RunOutput run_gas_law(const Scenario& s) {
  RunOutput out;
  CsvTable csv{{"gas_slope_GHz_per_mln", "gas_mln", "shift_GHz", "wavelength_nm"}, {}};
  const double f0 = constants::speed_of_light / s.start_wavelength;
  for (const double slope : s.gas_slopes) {
    for (const double amount : s.gas_amounts) {
      tuning::QDTuningState st = s.qd;
      st.frequency = f0;
      st.gas_slope = slope;
      st.gas_budget = std::max(st.gas_budget, amount);
      st = tuning::apply_gas(st, amount);
      csv.add({units::to_ghz(slope), amount, units::to_ghz(st.frequency - f0), st.wavelength() * 1e9});
    }
  }
  out.files.push_back({s.name + ".csv", csv.str()});
  return out;
}

RunOutput run_ablation_law(const Scenario& s) {
  RunOutput out;
  CsvTable csv{{"power_mW", "exposure_s", "shift_GHz", "wavelength_nm"}, {}};
  const double f0 = constants::speed_of_light / s.start_wavelength;
  std::vector<double> exposures = s.exposures;
  std::sort(exposures.begin(), exposures.end());
  for (const auto& law : s.qd.ablation) {
    tuning::QDTuningState st = s.qd;
    st.frequency = f0;
    double t = 0.0;
    for (const double e : exposures) {
      st = tuning::apply_laser(st, law.power, e - t);
      t = e;
      csv.add({law.power, e, units::to_ghz(st.frequency - f0), st.wavelength() * 1e9});
    }
  }
  out.files.push_back({s.name + ".csv", csv.str()});
  return out;
}

}  // namespace

RunOutput execute(const Scenario& s) {
  try {
    switch (s.kind) {
      case Kind::scan: return run_scan(s);
      case Kind::delay_sweep: return run_delay_sweep(s);
      case Kind::propagate: return run_propagate(s);
      case Kind::decompose: return run_decompose(s);
      case Kind::lindblad_check: return run_lindblad(s);
      case Kind::tune: return run_tune(s);
      case Kind::gas_law: return run_gas_law(s);
      case Kind::ablation_law: return run_ablation_law(s);
    }
  } catch (const ScenarioError&) {
    throw;
  } catch (const std::exception& e) {
    throw ScenarioError("scenario '" + s.name + "' (" + to_string(s.kind) + "): " + e.what());
  }
  throw ScenarioError("unhandled scenario kind");
}

void add_manifest(RunOutput& output, const Scenario& s, double wall_seconds) {
  json m;
  m["name"] = s.name;
  m["kind"] = to_string(s.kind);
  m["version"] = version();
  m["seed"] = s.seed;
  m["wall_time_s"] = wall_seconds;
  json files = json::array();
  for (const auto& f : output.files) files.push_back(f.name);
  m["outputs"] = files;
  m["notes"] = s.notes;
  m["summary"] = output.summary;
  m["inputs"] = s.echo;
  output.files.push_back({s.name + ".manifest.json", m.dump(2) + "\n"});
}

void write_outputs(const std::string& directory, const RunOutput& output) {
  const fs::path dir(directory.empty() ? "." : directory);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ScenarioError("cannot create output directory '" + dir.string() + "': " + ec.message());
  std::vector<std::pair<fs::path, fs::path>> staged;
  auto cleanup = [&] {
    for (const auto& [tmp, dst] : staged) fs::remove(tmp, ec);
  };
  for (const auto& f : output.files) {
    const fs::path dst = dir / f.name;
    const fs::path tmp = dir / ("." + f.name + ".tmp");
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) {
      cleanup();
      throw ScenarioError("cannot write '" + tmp.string() + "'");
    }
    staged.emplace_back(tmp, dst);
    os << f.content;
    os.close();
    if (!os) {
      cleanup();
      throw ScenarioError("write failed for '" + tmp.string() + "'");
    }
  }
  for (const auto& [tmp, dst] : staged) {
    fs::rename(tmp, dst, ec);
    if (ec) {
      cleanup();
      throw ScenarioError("cannot move output into place: " + ec.message());
    }
  }
}

std::string output_directory() {
  const char* env = std::getenv("CSLIGHT_OUT_DIR");
  return env && *env ? env : ".";
}

json load_document(const std::string& path_or_preset) {
  std::string path = path_or_preset;
  if (!fs::exists(path)) {
    const auto preset = find_preset(path_or_preset);
    if (!preset) throw ScenarioError("no scenario file or preset named '" + path_or_preset + "'");
    path = *preset;
  }
  const std::string text = read_file(path);
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    const auto [line, col] = line_column(text, e.byte);
    std::string what = e.what();
    const auto pos = what.find("syntax error");
    throw ScenarioError(path + ":" + std::to_string(line) + ":" + std::to_string(col) + ": parse error: " +
                        (pos == std::string::npos ? what : what.substr(pos)));
  }
}

std::vector<std::string> run_document(const json& doc, const std::string& directory) {
  const auto t0 = std::chrono::steady_clock::now();
  const Scenario s = parse_scenario(doc);
  RunOutput out = execute(s);
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  add_manifest(out, s, wall);
  write_outputs(directory, out);
  std::vector<std::string> names;
  for (const auto& f : out.files) names.push_back((fs::path(directory) / f.name).string());
  return names;
}

std::vector<std::string> run_scenario(const std::string& path_or_preset, const std::string& directory) {
  return run_document(load_document(path_or_preset), directory);
}

CsvTable susceptibility_table(const pulse::PropagationScenario& sc, double start, double stop, double step) {
  const auto grid = medium::FrequencyGrid::spanning(sc.to_com(start), sc.to_com(stop), step);
  const auto chi = medium::chi_doppler(grid, sc.conditions, sc.table, sc.medium);
  const auto h = medium::transfer_function(grid, sc.conditions, sc.table, sc.medium);
  const auto vac = medium::vacuum_transfer(grid, sc.conditions.length);
  CsvTable csv{{"detuning_Hz", "re_chi", "im_chi", "transmittance", "phase_rad"}, {}};
  for (std::size_t i = 0; i < chi.size(); ++i) {
    const auto rel = h.values[i] * std::conj(vac.values[i]);
    csv.add({sc.from_com(chi.frequency(i)), chi.values[i].real(), chi.values[i].imag(), std::norm(h.values[i]),
             std::arg(rel)});
  }
  return csv;
}

// ------------------------------------------------------------------ presets

std::string preset_directory() {
  const char* env = std::getenv("CSLIGHT_PRESET_DIR");
  return env && *env ? env : CSLIGHT_PRESET_DIR;
}

std::vector<PresetInfo> list_presets() {
  std::vector<PresetInfo> out;
  const fs::path dir(preset_directory());
  if (!fs::is_directory(dir)) return out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.path().extension() != ".json") continue;
    const auto doc = json::parse(read_file(entry.path().string()), nullptr, false);
    PresetInfo info;
    info.name = entry.path().stem().string();
    info.path = entry.path().string();
    if (doc.is_object() && doc.contains("description") && doc["description"].is_string()) {
      info.description = doc["description"].get<std::string>();
    }
    out.push_back(info);
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.name < b.name; });
  return out;
}

std::optional<std::string> find_preset(const std::string& name) {
  static const std::map<std::string, std::string> aliases{
      {"fig4e_scan", "fig4e_scan_laser"}, {"fig4e_laser", "fig4e_scan_laser"}, {"fig4e_qd", "fig4e_scan_qd"}};
  const auto it = aliases.find(name);
  const std::string resolved = it == aliases.end() ? name : it->second;
  const fs::path p = fs::path(preset_directory()) / (resolved + ".json");
  if (fs::exists(p)) return p.string();
  return std::nullopt;
}

// ------------------------------------------------------------------ CSV input

namespace {

std::vector<std::pair<double, double>> read_two_columns(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ScenarioError("cannot open '" + path + "'");
  std::vector<std::pair<double, double>> rows;
  std::string line;
  std::size_t lineno = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw ScenarioError(path + ":" + std::to_string(lineno) + ": expected two columns");
    const std::string a = line.substr(0, comma);
    const std::string b = line.substr(comma + 1);
    char* end = nullptr;
    const double x = std::strtod(a.c_str(), &end);
    const bool numeric = end != a.c_str();
    if (!numeric) {
      if (header_seen || !rows.empty()) throw ScenarioError(path + ":" + std::to_string(lineno) + ": non-numeric value");
      header_seen = true;
      continue;
    }
    const double y = std::strtod(b.c_str(), &end);
    if (end == b.c_str()) throw ScenarioError(path + ":" + std::to_string(lineno) + ": non-numeric value");
    rows.emplace_back(x, y);
  }
  return rows;
}

}  // namespace

fit::Histogram1D read_histogram_csv(const std::string& path) {
  const auto rows = read_two_columns(path);
  if (rows.size() < 2) throw ScenarioError(path + ": need at least two bins");
  const double w = (rows.back().first - rows.front().first) / static_cast<double>(rows.size() - 1);
  if (!(w > 0.0)) throw ScenarioError(path + ": bin centers must increase");
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (std::abs(rows[i].first - rows[i - 1].first - w) > 1e-6 * w) {
      throw ScenarioError(path + ": bin centers must be uniformly spaced");
    }
  }
  fit::Histogram1D h{rows.front().first - 0.5 * w, w, {}};
  for (const auto& r : rows) h.counts.push_back(r.second);
  return h;
}

std::vector<std::pair<double, double>> read_series_csv(const std::string& path) {
  auto rows = read_two_columns(path);
  for (auto& r : rows) r.first *= constants::pi / 180.0;
  return rows;
}

}  // namespace cslight::scenario
