#include <catch_amalgamated.hpp>

#include <cmath>

#include "cslight/tuning_sim.hpp"

using namespace cslight;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

constexpr double f0 = 335.116e12;

tuning::QDTuningState start_state() {
  tuning::QDTuningState s;
  s.frequency = f0;
  return s;
}

tuning::NoiseModel quiet() {
  tuning::NoiseModel n;
  n.enabled = false;
  return n;
}

}  // namespace

TEST_CASE("zero gas or exposure leaves the dot untouched", "[tuning][property]") {
  const auto s = start_state();
  const auto a = tuning::apply_gas(s, 0.0);
  const auto b = tuning::apply_laser(s, 10.0, 0.0);
  CHECK(a.frequency == s.frequency);
  CHECK(b.frequency == s.frequency);
  CHECK(a.history.empty());
  CHECK(b.history.empty());
  CHECK(a.cumulative_gas == 0.0);
}

TEST_CASE("gas injection matches the calibrated slopes", "[tuning]") {
  auto s = start_state();
  s.gas_slope = 7.85e9;
  CHECK_THAT(tuning::apply_gas(s, 20.0).frequency - f0, WithinRel(157e9, 1e-12));
  s.gas_slope = 15.65e9;
  CHECK_THAT(tuning::apply_gas(s, 20.0).frequency - f0, WithinRel(313e9, 1e-12));
  const auto two = tuning::apply_gas(tuning::apply_gas(s, 3.0), 4.5);
  CHECK_THAT(two.frequency - f0, WithinRel(7.5 * 15.65e9, 1e-12));
  CHECK_THAT(two.cumulative_gas, WithinRel(7.5, 1e-15));
  CHECK(two.history.size() == 2);
  CHECK_THROWS(tuning::apply_gas(s, -1.0));
}

TEST_CASE("ablation is a saturating red shift following a t^b law", "[tuning][property]") {
  const tuning::AblationLaw law;
  for (const double t : {10.0, 300.0, 3600.0}) {
    CHECK_THAT(law.shift(2 * t) / law.shift(t), WithinRel(std::pow(2.0, law.b), 1e-12));
  }
  CHECK_THAT(law.shift(3600.0), WithinRel(100e9, 1e-12));
  CHECK_THAT(law.exposure_for(law.shift(1234.0)), WithinRel(1234.0, 1e-12));

  const auto s = start_state();
  const auto once = tuning::apply_laser(s, 10.0, 1000.0);
  const auto twice = tuning::apply_laser(tuning::apply_laser(s, 10.0, 400.0), 10.0, 600.0);
  CHECK(once.frequency < s.frequency);
  CHECK_THAT(once.frequency, WithinAbs(twice.frequency, 1.0));
  CHECK_THAT(s.frequency - once.frequency, WithinRel(law.shift(1000.0), 1e-9));

  tuning::AblationLaw capped;
  capped.ceiling = 20e9;
  CHECK(capped.shift(1e6) == 20e9);
  CHECK_THROWS(capped.exposure_for(25e9));
}

TEST_CASE("ablation laws interpolate between calibrated powers", "[tuning]") {
  auto s = start_state();
  s.ablation = {{5.0, 1e9, 0.4, std::nullopt}, {20.0, 4e9, 0.6, std::nullopt}};
  const auto mid = s.law_at(12.5);
  CHECK_THAT(mid.a, WithinRel(2.5e9, 1e-12));
  CHECK_THAT(mid.b, WithinRel(0.5, 1e-12));
  CHECK(s.law_at(1.0).a == 1e9);
  CHECK(s.law_at(50.0).b == 0.6);
}

TEST_CASE("noise draws have the configured widths", "[tuning]") {
  const tuning::NoiseModel model;
  for (const double sigma : {model.gas_sigma, model.laser_sigma, model.spectrometer_sigma, model.cavity_sigma}) {
    tuning::NoiseSource src(model, 11);
    double s1 = 0.0, s2 = 0.0;
    const int n = 10000;
    for (int i = 0; i < n; ++i) {
      const double x = src.gaussian(sigma);
      s1 += x;
      s2 += x * x;
    }
    const double sd = std::sqrt(s2 / n - (s1 / n) * (s1 / n));
    CHECK_THAT(sd, WithinRel(sigma, 0.05));
  }
  tuning::NoiseSource off(quiet(), 1);
  CHECK(off.gaussian(1e9) == 0.0);
}

TEST_CASE("the cavity resolves a 1 GHz difference, the spectrometer does not", "[tuning]") {
  auto a = start_state();
  auto b = start_state();
  b.frequency += 1e9;
  int cavity_ok = 0, spec_ok = 0;
  const int seeds = 1000;
  for (int seed = 0; seed < seeds; ++seed) {
    tuning::NoiseSource n(tuning::NoiseModel{}, static_cast<std::uint64_t>(seed));
    const double ca = tuning::measure(a, tuning::Instrument::scanning_cavity, &n);
    const double cb = tuning::measure(b, tuning::Instrument::scanning_cavity, &n);
    const double sa = tuning::measure(a, tuning::Instrument::spectrometer, &n);
    const double sb = tuning::measure(b, tuning::Instrument::spectrometer, &n);
    cavity_ok += std::abs(cb - ca - 1e9) < 0.5e9 ? 1 : 0;
    spec_ok += std::abs(sb - sa - 1e9) < 0.5e9 ? 1 : 0;
  }
  CHECK(cavity_ok > 0.99 * seeds);
  CHECK(spec_ok < 0.5 * seeds);
  CHECK(tuning::measure(a, tuning::Instrument::spectrometer) == a.frequency);
}

TEST_CASE("a start inside the tolerance needs no actions", "[tuning]") {
  const auto s = start_state();
  const auto plan = tuning::tune_to_target(s, f0 + 0.2e9, 0.5e9, {}, {}, 1);
  CHECK(plan.converged);
  CHECK(plan.actions.empty());
  CHECK(plan.steps == 0);
}

TEST_CASE("tuning 172 GHz converges and is deterministic per seed", "[tuning]") {
  const auto s = start_state();
  const double target = f0 + 172e9;
  const auto a = tuning::tune_to_target(s, target, 0.5e9, {}, {}, 7);
  const auto b = tuning::tune_to_target(s, target, 0.5e9, {}, {}, 7);
  REQUIRE(a.converged);
  CHECK(std::abs(a.final_state.frequency - target) < 1.5e9);
  CHECK(std::abs(a.achieved_detuning) <= 0.5e9);
  REQUIRE(a.actions.size() == b.actions.size());
  for (std::size_t i = 0; i < a.actions.size(); ++i) {
    CHECK(a.actions[i].kind == b.actions[i].kind);
    CHECK(a.actions[i].true_frequency == b.actions[i].true_frequency);
    CHECK(a.actions[i].measured == b.actions[i].measured);
  }
  CHECK(a.actions.back().kind == tuning::ActionKind::measure);
  CHECK(a.actions.back().instrument == tuning::Instrument::scanning_cavity);
}

TEST_CASE("noise-free coarse phase approaches the target monotonically", "[tuning][property]") {
  for (const double offset : {172e9, -90e9, 40e9}) {
    const auto s = start_state();
    const double target = f0 + offset;
    const auto plan = tuning::tune_to_target(s, target, 0.5e9, {}, quiet(), 1);
    REQUIRE(plan.converged);
    double last = std::abs(offset);
    for (const auto& act : plan.actions) {
      if (act.kind == tuning::ActionKind::measure) continue;
      const double err = std::abs(act.true_frequency - target);
      CHECK(err <= last + 1e-3);
      last = err;
    }
    CHECK(std::abs(plan.final_state.frequency - target) <= 0.5e9);
  }
}

TEST_CASE("an exhausted gas budget stops the loop with a reason", "[tuning]") {
  auto s = start_state();
  s.gas_budget = 5.0;
  const auto plan = tuning::tune_to_target(s, f0 + 172e9, 0.5e9, {}, {}, 3);
  CHECK_FALSE(plan.converged);
  CHECK(plan.failure.find("budget") != std::string::npos);
  CHECK_THROWS_AS(tuning::apply_gas(s, 6.0), tuning::BudgetExceeded);
}

TEST_CASE("noisy runs recover from overshoot in both directions", "[tuning]") {
  int with_both = 0;
  for (std::uint64_t seed = 1; seed <= 40; ++seed) {
    const auto plan = tuning::tune_to_target(start_state(), f0 + 172e9, 0.5e9, {}, {}, seed);
    INFO("seed " << seed);
    CHECK(plan.converged);
    bool gas = false, laser = false;
    for (const auto& a : plan.actions) {
      gas = gas || a.kind == tuning::ActionKind::inject;
      laser = laser || a.kind == tuning::ActionKind::ablate;
    }
    with_both += gas && laser ? 1 : 0;
  }
  CHECK(with_both > 0);
}

TEST_CASE("gas then matching ablation returns to the start", "[tuning][property]") {
  const auto s = start_state();
  const auto up = tuning::apply_gas(s, 4.0);
  const tuning::AblationLaw law = s.law_at(10.0);
  const double t = law.exposure_for(up.frequency - s.frequency);
  const auto back = tuning::apply_laser(up, 10.0, t);
  CHECK_THAT(back.frequency, WithinAbs(s.frequency, 1e-3));
}

TEST_CASE("out-of-range targets and bad inputs are rejected", "[tuning]") {
  const auto s = start_state();
  CHECK_THROWS(tuning::tune_to_target(s, f0 + 1e12, 0.5e9, {}, {}, 1));
  CHECK_THROWS(tuning::tune_to_target(s, f0 + 10e9, 0.0, {}, {}, 1));
  CHECK(tuning::parse_instrument("cavity") == tuning::Instrument::scanning_cavity);
  CHECK_THROWS(tuning::parse_instrument("ruler"));
}
