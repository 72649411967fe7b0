// Command-line front end. Every subcommand except `fit`, `presets` and
// `transitions` builds a scenario document and runs it through the same
// validator as scenario files.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "cslight/atomic_data.hpp"
#include "cslight/fit_toolkit.hpp"
#include "cslight/scenario.hpp"
#include "cslight/units.hpp"

namespace sc = cslight::scenario;
using json = nlohmann::ordered_json;

namespace {

struct Overrides {
  std::string scenario;
  std::string name;
  std::optional<std::uint64_t> seed;
  std::optional<double> temperature_c;
  std::optional<double> length_cm;
  std::optional<double> density;
  std::optional<double> doppler_mhz;
  std::string source;
  std::optional<double> bandwidth_mhz;
  std::optional<double> lifetime_ns;
  std::optional<double> voigt_fwhm_mhz;
  std::optional<double> sigma_ib_mhz;
  std::optional<double> side_weight;
  std::optional<double> side_offset_ghz;
  std::optional<double> dt_ps;
  std::optional<double> span_ns;
  std::string delay_method;
  std::string convention;
};

void add_common(CLI::App* cmd, Overrides& o) {
  cmd->add_option("scenario", o.scenario, "Scenario file or preset name used as the starting point");
  cmd->add_option("--name", o.name, "Output name stem");
  cmd->add_option("--temperature-c", o.temperature_c, "Cell temperature (deg C)");
  cmd->add_option("--length-cm", o.length_cm, "Cell length (cm)");
  cmd->add_option("--density", o.density, "Number-density override (m^-3)");
  cmd->add_option("--doppler-sigma-mhz", o.doppler_mhz, "Doppler sigma override (MHz); 0 disables");
  cmd->add_option("--source", o.source, "laser or qd")->check(CLI::IsMember({"laser", "qd"}));
  cmd->add_option("--bandwidth-mhz", o.bandwidth_mhz, "Laser spectral FWHM (MHz)");
  cmd->add_option("--lifetime-ns", o.lifetime_ns, "QD radiative lifetime (ns)");
  cmd->add_option("--voigt-fwhm-mhz", o.voigt_fwhm_mhz, "QD main-line Voigt FWHM (MHz)");
  cmd->add_option("--sigma-ib-mhz", o.sigma_ib_mhz, "QD inhomogeneous Gaussian sigma (MHz)");
  cmd->add_option("--side-weight", o.side_weight, "QD side-peak photon fraction");
  cmd->add_option("--side-offset-ghz", o.side_offset_ghz, "QD side-peak offset (GHz)");
  cmd->add_option("--dt-ps", o.dt_ps, "Time step (ps)");
  cmd->add_option("--span-ns", o.span_ns, "Time window (ns)");
  cmd->add_option("--delay-method", o.delay_method, "peak, centroid or cross_correlation");
  cmd->add_option("--convention", o.convention, "f4_line or d1_com")->check(CLI::IsMember({"f4_line", "d1_com"}));
}

json base_document(const Overrides& o, const std::string& kind, const std::string& default_name) {
  json doc = o.scenario.empty() ? json::object() : sc::load_document(o.scenario);
  if (!doc.is_object()) throw sc::ScenarioError("scenario document must be an object");
  doc["kind"] = kind;
  if (!o.name.empty()) {
    doc["name"] = o.name;
  } else if (!doc.contains("name")) {
    doc["name"] = default_name;
  }
  if (o.seed) doc["seed"] = *o.seed;
  if (o.temperature_c) doc["temperature_C"] = *o.temperature_c;
  if (o.length_cm) doc["cell_length_cm"] = *o.length_cm;
  if (o.density) doc["medium"]["density_override_m3"] = *o.density;
  if (o.doppler_mhz) doc["medium"]["doppler_sigma_override_MHz"] = *o.doppler_mhz;
  if (!o.source.empty() && (!doc.contains("pulse") || doc["pulse"].value("kind", "laser") != o.source)) {
    doc["pulse"] = json{{"kind", o.source}};
  }
  auto pulse_key = [&](const char* key, const std::optional<double>& v) {
    if (v) doc["pulse"][key] = *v;
  };
  pulse_key("bandwidth_MHz", o.bandwidth_mhz);
  pulse_key("lifetime_ns", o.lifetime_ns);
  if (o.voigt_fwhm_mhz) {
    doc["pulse"].erase("sigma_ib_MHz");
    doc["pulse"]["voigt_fwhm_MHz"] = *o.voigt_fwhm_mhz;
  }
  if (o.sigma_ib_mhz) {
    doc["pulse"].erase("voigt_fwhm_MHz");
    doc["pulse"]["sigma_ib_MHz"] = *o.sigma_ib_mhz;
  }
  pulse_key("side_peak_weight", o.side_weight);
  pulse_key("side_peak_offset_GHz", o.side_offset_ghz);
  if (o.dt_ps) doc["grid"]["dt_ps"] = *o.dt_ps;
  if (o.span_ns) doc["grid"]["span_ns"] = *o.span_ns;
  if (!o.delay_method.empty()) doc["delay_method"] = o.delay_method;
  if (!o.convention.empty()) doc["detuning_convention"] = o.convention;
  return doc;
}

// Keys that belong to other kinds are dropped so a preset can seed any subcommand.
void keep_only(json& doc, std::initializer_list<const char*> blocks) {
  for (const char* k : {"sweep", "lindblad", "tuning"}) {
    bool keep = false;
    for (const char* b : blocks) keep = keep || std::string(b) == k;
    if (!keep) doc.erase(k);
  }
}

void print_written(const std::vector<std::string>& files) {
  for (const auto& f : files) std::cout << f << "\n";
}

json range_json(double start, double stop, double step) { return json{{"start", start}, {"stop", stop}, {"step", step}}; }

std::string stem(const std::string& path) { return std::filesystem::path(path).stem().string(); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Slow-light simulator for quantum-dot photons in hot cesium vapor"};
  app.require_subcommand(1);
  app.set_version_flag("--version", sc::version());

  // scan
  Overrides scan_o;
  std::optional<double> scan_start, scan_stop, scan_step;
  auto* scan = app.add_subcommand("scan", "Transmission, delay and width vs carrier detuning");
  add_common(scan, scan_o);
  scan->add_option("--start-ghz", scan_start, "First detuning (GHz)");
  scan->add_option("--stop-ghz", scan_stop, "Last detuning (GHz)");
  scan->add_option("--step-ghz", scan_step, "Detuning step (GHz)");

  // delay-sweep
  Overrides sweep_o;
  std::optional<double> t_start, t_stop, t_step, sweep_detuning;
  bool no_decompose = false;
  auto* sweep = app.add_subcommand("delay-sweep", "Delay vs cell temperature at a fixed detuning");
  add_common(sweep, sweep_o);
  sweep->add_option("--t-start", t_start, "First temperature (deg C)");
  sweep->add_option("--t-stop", t_stop, "Last temperature (deg C)");
  sweep->add_option("--t-step", t_step, "Temperature step (deg C)");
  sweep->add_option("--detuning-ghz", sweep_detuning, "Carrier detuning (GHz); hyperfine midpoint by default");
  sweep->add_flag("--no-decompose", no_decompose, "Skip the side-peak decomposition column");

  // propagate
  Overrides prop_o;
  std::optional<double> prop_detuning;
  auto* prop = app.add_subcommand("propagate", "Output time profiles at one detuning");
  add_common(prop, prop_o);
  prop->add_option("--detuning-ghz", prop_detuning, "Carrier detuning (GHz); hyperfine midpoint by default");

  // lindblad-check
  Overrides lb_o;
  std::optional<double> lb_start, lb_stop, lb_step;
  std::optional<std::uint64_t> lb_z, lb_nodes;
  auto* lb = app.add_subcommand("lindblad-check", "Compare the linear and density-matrix propagation routes");
  add_common(lb, lb_o);
  lb->add_option("--start-ghz", lb_start, "First detuning (GHz)");
  lb->add_option("--stop-ghz", lb_stop, "Last detuning (GHz)");
  lb->add_option("--step-ghz", lb_step, "Detuning step (GHz)");
  lb->add_option("--z-steps", lb_z, "Spatial slices");
  lb->add_option("--velocity-nodes", lb_nodes, "Doppler velocity classes (1 = Doppler off)");

  // chi
  Overrides chi_o;
  double chi_start = -20.0, chi_stop = 20.0, chi_step_mhz = 10.0;
  auto* chi = app.add_subcommand("chi", "Susceptibility and cell transfer function as CSV");
  add_common(chi, chi_o);
  chi->add_option("--start-ghz", chi_start, "First detuning (GHz)");
  chi->add_option("--stop-ghz", chi_stop, "Last detuning (GHz)");
  chi->add_option("--step-mhz", chi_step_mhz, "Detuning step (MHz)")->check(CLI::PositiveNumber);

  // fit
  auto* fit = app.add_subcommand("fit", "Fit measured histograms");
  fit->require_subcommand(1);
  std::string fit_input;
  double rep_period = 12.5;
  int side_peaks = 12;
  double side_hint = 0.0, reference_area = 0.0;
  std::vector<CLI::App*> fitters;
  for (const char* kind : {"voigt", "emg", "g2", "fss", "decompose"}) {
    auto* f = fit->add_subcommand(kind, std::string("Fit a ") + kind + " dataset");
    f->add_option("input", fit_input, "CSV input (two columns, header row optional)")->required();
    fitters.push_back(f);
  }
  fitters[2]->add_option("--rep-period", rep_period, "Excitation period, same unit as the time column");
  fitters[2]->add_option("--side-peaks", side_peaks, "Side peaks on each side of zero delay");
  fitters[4]->add_option("--side-hint", side_hint, "Initial side-component position");
  fitters[4]->add_option("--reference-area", reference_area, "Area that shares are quoted against");

  // tune
  std::optional<double> target_ghz, target_nm, start_ghz, start_nm, tol_ghz;
  std::optional<std::uint64_t> tune_seed;
  std::string qd_profile, tune_name = "tune";
  auto* tune = app.add_subcommand("tune", "Closed-loop gas and laser tuning of a quantum dot");
  auto* tg = tune->add_option("--target-ghz", target_ghz, "Target relative to the F=4 ground transition (GHz)");
  tune->add_option("--target-nm", target_nm, "Absolute target wavelength (nm)")->excludes(tg);
  auto* sg = tune->add_option("--start-ghz", start_ghz, "Start relative to the F=4 ground transition (GHz)");
  tune->add_option("--start-nm", start_nm, "Absolute start wavelength (nm)")->excludes(sg);
  tune->add_option("--tolerance-ghz", tol_ghz, "Convergence tolerance (GHz)");
  tune->add_option("--seed", tune_seed, "Noise seed");
  tune->add_option("--qd-profile", qd_profile, "JSON file with the tuning block of a scenario")
      ->check(CLI::ExistingFile);
  tune->add_option("--name", tune_name, "Output name stem");

  // presets, run, transitions
  auto* presets = app.add_subcommand("presets", "List the bundled scenarios");
  std::string run_target;
  std::optional<std::uint64_t> run_seed;
  auto* run = app.add_subcommand("run", "Run a scenario file or preset");
  run->add_option("scenario", run_target, "Scenario file or preset name")->required();
  run->add_option("--seed", run_seed, "Override the scenario seed");
  auto* transitions = app.add_subcommand("transitions", "Print the D1 transition table as JSON");

  CLI11_PARSE(app, argc, argv);

  const std::string out_dir = sc::output_directory();
  try {
    if (*scan) {
      json doc = base_document(scan_o, "scan", "scan");
      keep_only(doc, {"sweep"});
      auto& r = doc["sweep"]["detuning_GHz"];
      if (!r.is_object()) r = range_json(-40.0, 40.0, 0.25);
      if (scan_start) r["start"] = *scan_start;
      if (scan_stop) r["stop"] = *scan_stop;
      if (scan_step) r["step"] = *scan_step;
      print_written(sc::run_document(doc, out_dir));
    } else if (*sweep) {
      json doc = base_document(sweep_o, "delay_sweep", "delay_sweep");
      keep_only(doc, {"sweep"});
      auto& s = doc["sweep"];
      if (t_start || t_stop || t_step || !s.contains("temperatures_C")) {
        json tr = s.contains("temperatures_C") && s["temperatures_C"].is_object() ? s["temperatures_C"]
                                                                                   : range_json(25.0, 140.0, 5.0);
        if (t_start) tr["start"] = *t_start;
        if (t_stop) tr["stop"] = *t_stop;
        if (t_step) tr["step"] = *t_step;
        s["temperatures_C"] = tr;
      }
      if (sweep_detuning) s["detuning_GHz"] = *sweep_detuning;
      if (no_decompose) s["decompose"] = false;
      print_written(sc::run_document(doc, out_dir));
    } else if (*prop) {
      json doc = base_document(prop_o, "propagate", "propagate");
      keep_only(doc, {"sweep"});
      if (doc.contains("sweep")) {
        json keep = json::object();
        if (doc["sweep"].contains("detuning_GHz") && !doc["sweep"]["detuning_GHz"].is_object()) {
          keep["detuning_GHz"] = doc["sweep"]["detuning_GHz"];
        }
        doc["sweep"] = keep;
      }
      if (prop_detuning) doc["sweep"]["detuning_GHz"] = *prop_detuning;
      print_written(sc::run_document(doc, out_dir));
    } else if (*lb) {
      json doc = base_document(lb_o, "lindblad_check", "lindblad_check");
      keep_only(doc, {"lindblad"});
      auto& l = doc["lindblad"];
      if (!l.contains("detunings_GHz")) l["detunings_GHz"] = range_json(-6.0, 6.0, 0.5);
      if (lb_start || lb_stop || lb_step) {
        json r = l["detunings_GHz"].is_object() ? l["detunings_GHz"] : range_json(-6.0, 6.0, 0.5);
        if (lb_start) r["start"] = *lb_start;
        if (lb_stop) r["stop"] = *lb_stop;
        if (lb_step) r["step"] = *lb_step;
        l["detunings_GHz"] = r;
      }
      if (lb_z) l["z_steps"] = *lb_z;
      if (lb_nodes) l["velocity_nodes"] = *lb_nodes;
      print_written(sc::run_document(doc, out_dir));
    } else if (*chi) {
      json doc = base_document(chi_o, "propagate", "chi");
      keep_only(doc, {});
      const sc::Scenario s = sc::parse_scenario(doc);
      sc::RunOutput out;
      out.files.push_back({s.name + ".csv", sc::susceptibility_table(s.propagation, cslight::units::ghz(chi_start),
                                                                     cslight::units::ghz(chi_stop),
                                                                     cslight::units::mhz(chi_step_mhz))
                                                .str()});
      sc::write_outputs(out_dir, out);
      std::cout << (std::filesystem::path(out_dir) / out.files[0].name).string() << "\n";
    } else if (*fit) {
      namespace fit_ns = cslight::fit;
      fit_ns::FitResult res;
      std::string kind;
      if (*fitters[0]) {
        kind = "voigt";
        res = fit_ns::fit_voigt(sc::read_histogram_csv(fit_input));
      } else if (*fitters[1]) {
        kind = "emg";
        res = fit_ns::fit_emg(sc::read_histogram_csv(fit_input));
      } else if (*fitters[2]) {
        kind = "g2";
        res = fit_ns::compute_g2(sc::read_histogram_csv(fit_input), rep_period, side_peaks);
      } else if (*fitters[3]) {
        kind = "fss";
        res = fit_ns::fit_fss(sc::read_series_csv(fit_input));
      } else {
        kind = "decompose";
        res = fit_ns::decompose_side_peak(sc::read_histogram_csv(fit_input), side_hint, reference_area);
      }
      const std::string text = res.report();
      sc::RunOutput out;
      out.files.push_back({stem(fit_input) + "_" + kind + "_fit.txt", text});
      sc::write_outputs(out_dir, out);
      std::cout << text;
    } else if (*tune) {
      json doc{{"name", tune_name}, {"kind", "tune"}};
      json t = json::object();
      if (!qd_profile.empty()) {
        t = sc::load_document(qd_profile);
        if (t.contains("tuning")) t = json(t["tuning"]);
      }
      auto set_exclusive = [&t](const char* key, const char* other, const std::optional<double>& v) {
        if (!v) return;
        t.erase(other);
        t[key] = *v;
      };
      set_exclusive("target_GHz", "target_nm", target_ghz);
      set_exclusive("target_nm", "target_GHz", target_nm);
      set_exclusive("start_GHz", "start_nm", start_ghz);
      set_exclusive("start_nm", "start_GHz", start_nm);
      if (tol_ghz) t["tolerance_GHz"] = *tol_ghz;
      doc["tuning"] = t;
      if (tune_seed) doc["seed"] = *tune_seed;
      print_written(sc::run_document(doc, out_dir));
    } else if (*presets) {
      for (const auto& p : sc::list_presets()) std::cout << p.name << "\t" << p.description << "\n";
    } else if (*run) {
      json doc = sc::load_document(run_target);
      if (run_seed) doc["seed"] = *run_seed;
      print_written(sc::run_document(doc, out_dir));
    } else if (*transitions) {
      std::cout << cslight::atomic::transition_table_json(cslight::atomic::transition_table()) << "\n";
    }
  } catch (const sc::ScenarioError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
