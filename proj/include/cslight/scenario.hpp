#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cslight/fit_toolkit.hpp"
#include "cslight/lindblad.hpp"
#include "cslight/pulse_engine.hpp"
#include "cslight/tuning_sim.hpp"

namespace cslight::scenario {

class ScenarioError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string version();

/// Fixed 9-significant-digit formatting used for every numeric output.
std::string format_number(double value);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  void add(const std::vector<double>& values);
  void add_text(std::vector<std::string> values);
  std::string str() const;
};

enum class Kind { scan, delay_sweep, propagate, lindblad_check, tune, gas_law, ablation_law, decompose };
std::string to_string(Kind kind);

struct Scenario {
  std::string name;
  std::string description;
  Kind kind = Kind::scan;
  std::uint64_t seed = 1;
  nlohmann::ordered_json echo;
  std::vector<std::string> notes;

  pulse::PropagationScenario propagation;

  // scan
  double scan_start = 0.0;
  double scan_stop = 0.0;
  double scan_step = 0.0;
  // delay sweep
  std::vector<double> temperatures;
  std::optional<double> sweep_detuning;  ///< reported convention; midpoint when empty
  bool decompose = true;
  // propagate / decompose
  double detuning = 0.0;
  // lindblad check
  lindblad::ComparisonConfig lindblad;
  std::vector<double> lindblad_detunings;  ///< reported convention
  // tune
  tuning::QDTuningState qd;
  double target = 0.0;  ///< Hz, absolute optical frequency
  double tolerance = 0.5e9;
  tuning::TuningPolicy policy;
  tuning::NoiseModel noise;
  // phenomenology curves
  std::vector<double> gas_slopes;
  std::vector<double> gas_amounts;
  double start_wavelength = 894.6e-9;
  std::vector<tuning::AblationLaw> laws;
  std::vector<double> exposures;
};

/// Parses and validates a scenario document. Parse failures report line and
/// column; validation failures name the offending key.
Scenario parse_scenario(const std::string& text, const std::string& source = "<scenario>");
Scenario parse_scenario(const nlohmann::ordered_json& doc);
Scenario load_scenario(const std::string& path);

struct OutputFile {
  std::string name;
  std::string content;
};

struct RunOutput {
  std::vector<OutputFile> files;
  nlohmann::ordered_json summary;
};

/// Runs the scenario in memory; nothing touches the filesystem.
RunOutput execute(const Scenario& scenario);

/// Adds the run manifest (inputs echo, version, seed, wall time) to the outputs.
void add_manifest(RunOutput& output, const Scenario& scenario, double wall_seconds);

/// Writes every file through a temporary name and renames it into place. Any
/// failure removes the temporaries and leaves the directory untouched.
void write_outputs(const std::string& directory, const RunOutput& output);

/// Output directory from CSLIGHT_OUT_DIR, else the current directory.
std::string output_directory();

/// Reads a scenario file, or a preset by name, as a JSON document.
nlohmann::ordered_json load_document(const std::string& path_or_preset);

/// Parse, execute and write. Returns the written file names.
std::vector<std::string> run_document(const nlohmann::ordered_json& doc, const std::string& directory);
std::vector<std::string> run_scenario(const std::string& path_or_preset, const std::string& directory);

/// chi and the cell response on a detuning grid given in the scenario convention.
/// Columns: detuning_Hz, re_chi, im_chi, transmittance, phase_rad (medium phase, vacuum removed).
CsvTable susceptibility_table(const pulse::PropagationScenario& scenario, double start, double stop, double step);

struct PresetInfo {
  std::string name;
  std::string description;
  std::string path;
};

std::string preset_directory();
std::vector<PresetInfo> list_presets();
/// Resolves a preset name (or alias) to its file; std::nullopt when unknown.
std::optional<std::string> find_preset(const std::string& name);

// CSV readers for the fitting front end.
fit::Histogram1D read_histogram_csv(const std::string& path);
std::vector<std::pair<double, double>> read_series_csv(const std::string& path);

/// Output profile sampled into a histogram with times relative to the reference peak (ns).
fit::Histogram1D profile_histogram(const pulse::PointResult& result, double window_start_ns, double window_stop_ns);

struct PointDecomposition {
  fit::Histogram1D profile;  ///< ns, origin at the reference pulse's Lorentzian center
  fit::FitResult reference;  ///< single-Lorentzian fit of the reference pulse
  fit::FitResult fit;
};

/// Four-Lorentzian decomposition of a simulated output. The reference pulse fixes
/// the time origin and the side component's width; shares are quoted against its area.
PointDecomposition decompose_point(const pulse::PointResult& result, double window_start_ns = -30.0,
                                   double window_stop_ns = 120.0);

}  // namespace cslight::scenario
