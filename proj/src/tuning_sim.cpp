#include "cslight/tuning_sim.hpp"

#include <algorithm>
#include <cmath>

#include "cslight/units.hpp"

namespace cslight::tuning {

double AblationLaw::shift(double exposure) const {
  if (exposure <= 0.0) return 0.0;
  const double s = a * std::pow(exposure, b);
  return ceiling ? std::min(s, *ceiling) : s;
}

double AblationLaw::exposure_for(double target_shift) const {
  if (target_shift <= 0.0) return 0.0;
  if (ceiling && target_shift > *ceiling) throw std::runtime_error("ablation saturated at this power level");
  return std::pow(target_shift / a, 1.0 / b);
}

std::string to_string(ActionKind kind) {
  switch (kind) {
    case ActionKind::inject: return "inject";
    case ActionKind::ablate: return "ablate";
    case ActionKind::measure: return "measure";
  }
  return "measure";
}

std::string to_string(Instrument instrument) {
  return instrument == Instrument::spectrometer ? "spectrometer" : "scanning_cavity";
}

Instrument parse_instrument(const std::string& name) {
  if (name == "spectrometer") return Instrument::spectrometer;
  if (name == "scanning_cavity" || name == "cavity") return Instrument::scanning_cavity;
  throw std::invalid_argument("unknown instrument '" + name + "'");
}

double QDTuningState::wavelength() const { return constants::speed_of_light / frequency; }

void QDTuningState::validate() const {
  if (!(frequency > 0.0)) throw std::invalid_argument("emission frequency must be positive");
  if (!(gas_slope > 0.0)) throw std::invalid_argument("gas slope must be positive");
  if (!(gas_budget > 0.0)) throw std::invalid_argument("gas budget must be positive");
  if (ablation.empty()) throw std::invalid_argument("at least one ablation law is required");
  for (const auto& law : ablation) {
    if (!(law.power > 0.0)) throw std::invalid_argument("ablation power must be positive");
    if (!(law.a > 0.0)) throw std::invalid_argument("ablation coefficient a must be positive");
    if (!(law.b > 0.0 && law.b <= 1.0)) throw std::invalid_argument("ablation exponent b must lie in (0, 1]");
    if (law.ceiling && !(*law.ceiling > 0.0)) throw std::invalid_argument("ablation ceiling must be positive");
  }
}

AblationLaw QDTuningState::law_at(double power) const {
  std::vector<AblationLaw> laws = ablation;
  std::sort(laws.begin(), laws.end(), [](const auto& x, const auto& y) { return x.power < y.power; });
  if (power <= laws.front().power) return {power, laws.front().a, laws.front().b, laws.front().ceiling};
  if (power >= laws.back().power) return {power, laws.back().a, laws.back().b, laws.back().ceiling};
  for (std::size_t i = 0; i + 1 < laws.size(); ++i) {
    const auto& lo = laws[i];
    const auto& hi = laws[i + 1];
    if (power <= hi.power) {
      const double f = (power - lo.power) / (hi.power - lo.power);
      AblationLaw law{power, lo.a + f * (hi.a - lo.a), lo.b + f * (hi.b - lo.b), std::nullopt};
      if (lo.ceiling && hi.ceiling) law.ceiling = *lo.ceiling + f * (*hi.ceiling - *lo.ceiling);
      return law;
    }
  }
  return laws.back();
}

double QDTuningState::exposure_at(double power) const {
  const auto it = cumulative_exposure.find(power);
  return it == cumulative_exposure.end() ? 0.0 : it->second;
}

double NoiseSource::gaussian(double sigma) {
  if (!model_.enabled || sigma <= 0.0) return 0.0;
  return std::normal_distribution<double>(0.0, sigma)(rng_);
}

QDTuningState apply_gas(const QDTuningState& state, double amount, NoiseSource* noise) {
  if (!(amount >= 0.0)) throw std::invalid_argument("gas amount must be >= 0");
  QDTuningState s = state;
  if (amount == 0.0) return s;
  if (s.cumulative_gas + amount > s.gas_budget * (1.0 + 1e-12)) {
    throw BudgetExceeded("gas budget exhausted: window condensation limit reached");
  }
  s.cumulative_gas += amount;
  s.frequency += s.gas_slope * amount + (noise ? noise->gaussian(noise->model().gas_sigma) : 0.0);
  Action a;
  a.kind = ActionKind::inject;
  a.amount = amount;
  a.true_frequency = s.frequency;
  s.history.push_back(a);
  return s;
}

QDTuningState apply_laser(const QDTuningState& state, double power, double duration, NoiseSource* noise) {
  if (!(duration >= 0.0)) throw std::invalid_argument("exposure duration must be >= 0");
  if (!(power > 0.0)) throw std::invalid_argument("laser power must be positive");
  QDTuningState s = state;
  if (duration == 0.0) return s;
  const AblationLaw law = s.law_at(power);
  const double before = s.exposure_at(power);
  const double after = before + duration;
  s.cumulative_exposure[power] = after;
  s.frequency -= law.shift(after) - law.shift(before);
  s.frequency += noise ? noise->gaussian(noise->model().laser_sigma) : 0.0;
  Action a;
  a.kind = ActionKind::ablate;
  a.power = power;
  a.duration = duration;
  a.true_frequency = s.frequency;
  s.history.push_back(a);
  return s;
}

double measure(const QDTuningState& state, Instrument instrument, NoiseSource* noise) {
  if (!noise) return state.frequency;
  const auto& m = noise->model();
  return state.frequency + noise->gaussian(instrument == Instrument::spectrometer ? m.spectrometer_sigma : m.cavity_sigma);
}

namespace {

struct Controller {
  QDTuningState state;
  TuningPlan plan;
  NoiseSource noise;
  const TuningPolicy& policy;
  double target;

  Controller(const QDTuningState& s, double t, const TuningPolicy& p, const NoiseModel& n, std::uint64_t seed)
      : state(s), noise(n, seed), policy(p), target(t) {}

  bool budget_left() const { return plan.actions.size() < policy.max_steps; }

  double read(Instrument instrument) {
    Action a;
    a.kind = ActionKind::measure;
    a.instrument = instrument;
    a.measured = measure(state, instrument, &noise);
    a.true_frequency = state.frequency;
    state.history.push_back(a);
    plan.actions.push_back(a);
    return a.measured;
  }

  // Moves the emission by `shift` (positive = blue) using gas or the laser.
  void move(double shift) {
    if (shift > 0.0) {
      state = apply_gas(state, shift / state.gas_slope, &noise);
    } else if (shift < 0.0) {
      const AblationLaw law = state.law_at(policy.laser_power);
      const double before = state.exposure_at(policy.laser_power);
      const double needed = law.exposure_for(law.shift(before) - shift) - before;
      state = apply_laser(state, policy.laser_power, needed, &noise);
    } else {
      return;
    }
    plan.actions.push_back(state.history.back());
  }
};

}  // namespace

TuningPlan tune_to_target(const QDTuningState& initial, double target, double tolerance, const TuningPolicy& policy,
                          const NoiseModel& noise, std::uint64_t seed) {
  initial.validate();
  if (!(tolerance > 0.0)) throw std::invalid_argument("tolerance must be positive");
  if (std::abs(target - initial.frequency) > policy.max_retune) {
    throw std::invalid_argument("target lies outside the reachable tuning range");
  }
  Controller c(initial, target, policy, noise, seed);
  auto finish = [&](bool ok, std::string why) {
    c.plan.converged = ok;
    c.plan.failure = std::move(why);
    c.plan.steps = c.plan.actions.size();
    c.plan.final_state = c.state;
    return c.plan;
  };
  if (std::abs(target - initial.frequency) <= tolerance) return finish(true, "");

  try {
    double measured = c.read(Instrument::spectrometer);
    while (std::abs(target - measured) > policy.coarse_threshold) {
      if (!c.budget_left()) return finish(false, "non-convergence at max steps");
      const double err = target - measured;
      c.move(err - std::copysign(policy.coarse_margin, err));
      if (!c.budget_left()) return finish(false, "non-convergence at max steps");
      measured = c.read(Instrument::spectrometer);
    }
    c.plan.coarse_exit_error = measured - target;

    if (!c.budget_left()) return finish(false, "non-convergence at max steps");
    measured = c.read(Instrument::scanning_cavity);
    bool previous_ok = std::abs(measured - target) <= tolerance;
    while (true) {
      if (previous_ok) {
        if (!c.budget_left()) return finish(false, "non-convergence at max steps");
        measured = c.read(Instrument::scanning_cavity);
        c.plan.achieved_detuning = measured - target;
        if (std::abs(measured - target) <= tolerance) return finish(true, "");
        previous_ok = false;
        continue;
      }
      if (!c.budget_left()) return finish(false, "non-convergence at max steps");
      const double err = target - measured;
      const double cap = err > 0.0 ? policy.fine_gas_step : policy.fine_laser_step;
      c.move(std::copysign(std::min(std::abs(err), cap), err));
      if (!c.budget_left()) return finish(false, "non-convergence at max steps");
      measured = c.read(Instrument::scanning_cavity);
      c.plan.achieved_detuning = measured - target;
      previous_ok = std::abs(measured - target) <= tolerance;
    }
  } catch (const BudgetExceeded& e) {
    return finish(false, e.what());
  } catch (const std::runtime_error& e) {
    return finish(false, e.what());
  }
}

}  // namespace cslight::tuning
