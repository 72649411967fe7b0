#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace cslight::tuning {

class BudgetExceeded : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Red-shift law at one laser power: shift = a t^b on the cumulative exposure t.
struct AblationLaw {
  double power = 10.0;    ///< mW
  double a = 100e9 / 60.0;  ///< Hz / s^b (100 GHz after one hour at b = 0.5)
  double b = 0.5;
  std::optional<double> ceiling;  ///< Hz, saturation of the total shift at this power

  double shift(double exposure) const;
  /// Exposure that produces the given total shift; throws if beyond the ceiling.
  double exposure_for(double shift) const;
};

enum class ActionKind { inject, ablate, measure };
enum class Instrument { spectrometer, scanning_cavity };

std::string to_string(ActionKind kind);
std::string to_string(Instrument instrument);
Instrument parse_instrument(const std::string& name);

struct Action {
  ActionKind kind = ActionKind::measure;
  double amount = 0.0;    ///< mln of gas (inject)
  double power = 0.0;     ///< mW (ablate)
  double duration = 0.0;  ///< s (ablate)
  Instrument instrument = Instrument::spectrometer;
  double measured = 0.0;        ///< Hz (measure)
  double true_frequency = 0.0;  ///< Hz after the action
};

struct QDTuningState {
  double frequency = 0.0;      ///< Hz, emission frequency
  double gas_slope = 7.85e9;   ///< Hz per mln
  std::vector<AblationLaw> ablation{AblationLaw{}};
  double gas_budget = 60.0;    ///< mln before window condensation
  double cumulative_gas = 0.0;
  std::map<double, double> cumulative_exposure;  ///< s per power level
  std::vector<Action> history;

  double wavelength() const;
  void validate() const;
  /// Law at a power, interpolated linearly in (a, b, ceiling) between calibrated levels.
  AblationLaw law_at(double power) const;
  double exposure_at(double power) const;
};

struct NoiseModel {
  bool enabled = true;
  double gas_sigma = 0.57e9;           ///< Hz per injection
  double laser_sigma = 0.44e9;         ///< Hz per ablation
  double spectrometer_sigma = 2.0e9;   ///< Hz
  double cavity_sigma = 50e6;          ///< Hz
};

class NoiseSource {
 public:
  NoiseSource(NoiseModel model, std::uint64_t seed) : model_(model), rng_(seed) {}
  const NoiseModel& model() const { return model_; }
  double gaussian(double sigma);

 private:
  NoiseModel model_;
  std::mt19937_64 rng_;
};

/// Blue shift by gas_slope x amount plus granularity noise. Throws BudgetExceeded
/// when the cumulative gas would pass the budget.
QDTuningState apply_gas(const QDTuningState& state, double amount, NoiseSource* noise = nullptr);

/// Red shift from the increment of a t^b on the cumulative exposure at this power.
QDTuningState apply_laser(const QDTuningState& state, double power, double duration, NoiseSource* noise = nullptr);

double measure(const QDTuningState& state, Instrument instrument, NoiseSource* noise = nullptr);

struct TuningPolicy {
  double coarse_threshold = 5e9;  ///< Hz, switch to cavity feedback below this error
  double coarse_margin = 2e9;     ///< Hz, coarse moves stop this far short of the target
  double fine_gas_step = 1.18e9;  ///< Hz, largest fine injection
  double fine_laser_step = 0.73e9;  ///< Hz, largest fine ablation
  double laser_power = 10.0;      ///< mW
  std::size_t max_steps = 60;
  double max_retune = 400e9;      ///< Hz
};

struct TuningPlan {
  std::vector<Action> actions;
  double achieved_detuning = 0.0;  ///< Hz, last measured minus target
  std::size_t steps = 0;
  bool converged = false;
  std::string failure;
  QDTuningState final_state;
  std::optional<double> coarse_exit_error;  ///< Hz, measured error when the fine phase began
};

/// Two-stage closed loop: coarse spectrometer-guided moves, then capped fine
/// steps under cavity feedback until two consecutive readings are in tolerance.
TuningPlan tune_to_target(const QDTuningState& state, double target, double tolerance, const TuningPolicy& policy,
                          const NoiseModel& noise, std::uint64_t seed);

}  // namespace cslight::tuning
