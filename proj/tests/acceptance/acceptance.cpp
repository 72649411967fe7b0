// End-to-end acceptance checks. Each criterion prints one PASS/FAIL line; the
// exit status is nonzero if any of them fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <complex>
#include <cstdio>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "cslight/fft.hpp"
#include "cslight/faddeeva.hpp"
#include "cslight/fit_toolkit.hpp"
#include "cslight/lindblad.hpp"
#include "cslight/scenario.hpp"
#include "cslight/units.hpp"

using namespace cslight;
namespace sc = cslight::scenario;
using Clock = std::chrono::steady_clock;

namespace {

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  std::size_t col(const std::string& name) const {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw std::runtime_error("missing column " + name);
    return static_cast<std::size_t>(it - header.begin());
  }
  std::vector<double> column(const std::string& name) const {
    const auto c = col(name);
    std::vector<double> v;
    for (const auto& r : rows) v.push_back(r[c]);
    return v;
  }
};

Table parse_csv(const std::string& text) {
  Table t;
  std::istringstream in(text);
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (first) {
      t.header = cells;
      first = false;
      continue;
    }
    std::vector<double> row;
    for (const auto& c : cells) row.push_back(c.empty() ? std::nan("") : std::strtod(c.c_str(), nullptr));
    t.rows.push_back(row);
  }
  return t;
}

struct Run {
  sc::Scenario scenario;
  sc::RunOutput output;
  double seconds = 0.0;

  const std::string& file(const std::string& suffix) const {
    for (const auto& f : output.files) {
      if (f.name == scenario.name + suffix) return f.content;
    }
    throw std::runtime_error("no output " + suffix);
  }
};

Run run_preset(const std::string& name) {
  Run r;
  const auto t0 = Clock::now();
  r.scenario = sc::parse_scenario(sc::load_document(name));
  r.output = sc::execute(r.scenario);
  r.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
  return r;
}

int failures = 0;

void report(int id, bool pass, const std::string& title, const std::string& detail) {
  std::printf("criterion %d: %s  %s | %s\n", id, pass ? "PASS" : "FAIL", title.c_str(), detail.c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

std::string fmt(const char* f, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char* f, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

double nearest(const Table& t, const std::string& xcol, const std::string& ycol, double x) {
  const auto xs = t.column(xcol);
  const auto ys = t.column(ycol);
  std::size_t best = 0;
  for (std::size_t i = 1; i < xs.size(); ++i) {
    if (std::abs(xs[i] - x) < std::abs(xs[best] - x)) best = i;
  }
  return ys[best];
}

// Fraction of 100 seeded trials within 3x CI; shared by criterion 7.
double coverage(const std::function<bool(std::uint64_t)>& trial) {
  int hits = 0;
  for (int s = 0; s < 100; ++s) hits += trial(static_cast<std::uint64_t>(1000 + s)) ? 1 : 0;
  return hits / 100.0;
}

bool within(const fit::FitResult& r, const std::string& name, double truth) {
  return std::abs(r.param(name) - truth) <= 3.0 * r.ci(name);
}

}  // namespace

int main() {
  std::map<std::string, Run> runs;
  std::printf("running presets\n");
  for (const auto& p : sc::list_presets()) {
    runs.emplace(p.name, run_preset(p.name));
    std::printf("  %-20s %7.1f s\n", p.name.c_str(), runs.at(p.name).seconds);
  }
  std::fflush(stdout);
  const auto& table = runs.at("fig4e_scan_laser").scenario.propagation.table;

  {  // 1
    const auto& r = runs.at("fig4e_scan_laser");
    const auto t = parse_csv(r.file(".csv"));
    const double res3 = units::to_ghz(table.ground_transition(3) - table.ground_transition(4));
    const double t4 = nearest(t, "detuning_GHz", "transmission", 0.0);
    const double t3 = nearest(t, "detuning_GHz", "transmission", res3);
    const double lo = nearest(t, "detuning_GHz", "transmission", -40.0);
    const double hi = nearest(t, "detuning_GHz", "transmission", 40.0);
    const bool bw = std::abs(r.scenario.propagation.source.bandwidth - 220e6) < 1.0 &&
                    std::abs(units::to_celsius(r.scenario.propagation.conditions.temperature) - 110.0) < 1e-9;
    const bool pass = bw && t4 < 0.02 && t3 < 0.02 && lo > 0.95 && hi > 0.95 && r.seconds < 60.0;
    report(1, pass, "resonant laser absorption",
           fmt("T(F=4)=%.3g T(F=3)=%.3g T(-40)=%.4f T(+40)=%.4f runtime %.1f s", t4, t3, lo, hi, r.seconds));
  }

  {  // 2
    const auto& r = runs.at("fig4e_scan_qd");
    const auto& src = r.scenario.propagation.source;
    const auto t = parse_csv(r.file(".csv"));
    const auto tr = t.column("transmission");
    const double tmin = *std::min_element(tr.begin(), tr.end());
    const bool params = std::abs(src.voigt_fwhm() - 900e6) < 1e3 && src.side_peak_weight >= 0.15 &&
                        src.side_peak_weight <= 0.20 && std::abs(src.side_peak_offset + 24e9) < 1.0;
    bool fitted_note = false;
    for (const auto& n : r.scenario.notes) fitted_note = fitted_note || n.find("fitted") != std::string::npos;
    report(2, params && fitted_note && tmin >= 0.15 && tmin <= 0.30, "QD transmission floor",
           fmt("min T=%.4f, side weight %.2f (fitted), f_V=%.1f MHz", tmin, src.side_peak_weight,
               src.voigt_fwhm() * 1e-6));
  }

  {  // 3
    const auto& r = runs.at("fig5b_delay");
    const auto t = parse_csv(r.file(".csv"));
    const double d140 = nearest(t, "temperature_C", "delay_ns", 140.0);
    const bool increasing = r.output.summary.at("strictly_increasing").get<bool>();
    const bool midpoint = std::abs(r.output.summary.at("detuning_GHz").get<double>() -
                                   units::to_ghz(r.scenario.propagation.from_com(table.hyperfine_midpoint()))) < 1e-9;
    // density override that puts the 140 C delay on 18.7 ns
    auto prop = r.scenario.propagation;
    prop.conditions.temperature = units::celsius(140.0);
    const double mid = prop.from_com(table.hyperfine_midpoint());
    const auto t0 = Clock::now();
    double lo = std::log(1e18), hi = std::log(atomic::number_density(units::celsius(140.0)));
    double cal_density = 0.0, cal_delay = 0.0;
    for (int it = 0; it < 40; ++it) {
      const double m = 0.5 * (lo + hi);
      prop.conditions.density_override = std::exp(m);
      const double d = units::to_ns(pulse::simulate_point(prop, mid).delay);
      cal_density = std::exp(m);
      cal_delay = d;
      if (std::abs(d - 18.7) < 0.01 * 18.7) break;
      (d < 18.7 ? lo : hi) = m;
    }
    const double cal_s = std::chrono::duration<double>(Clock::now() - t0).count();
    const bool nominal = std::abs(d140 - 18.7) <= 0.2 * 18.7;
    const bool calibrated = std::abs(cal_delay - 18.7) <= 0.05 * 18.7;
    report(3, nominal && increasing && midpoint && calibrated && r.seconds < 120.0, "slow-light delay at 140 C",
           fmt("default model %.2f ns (target 18.7 +-20%%), strictly increasing %s, calibrated density %.4g m^-3 "
               "gives %.2f ns (+-5%%), runtime %.1f s + %.1f s calibration",
               d140, increasing ? "yes" : "no", cal_density, cal_delay, r.seconds, cal_s));
  }

  {  // 4
    auto prop = runs.at("fig4e_scan_qd").scenario.propagation;
    prop.conditions.temperature = units::celsius(110.0);
    const auto r = pulse::simulate_point(prop, 30e9);
    prop.delay_method = pulse::DelayMethod::centroid;
    const auto c = pulse::simulate_point(prop, 30e9);
    const double d = units::to_ns(r.delay);
    report(4, d >= 0.8 && d <= 2.5 && r.transmission > 0.9, "far-detuned delay at +30 GHz",
           fmt("peak delay %.3f ns (window 0.8-2.5), T=%.4f; centroid delay %.3f ns for reference", d,
               r.transmission, units::to_ns(c.delay)));
  }

  {  // 5
    const auto& r = runs.at("fig5b_delay");
    const auto t = parse_csv(r.file(".csv"));
    const auto temps = t.column("temperature_C");
    const auto side = t.column("side_peak_ns");
    const auto merged = t.column("components_merged");
    const auto shift = t.column("side_shift_ns");
    double worst = 0.0, worst_t = 0.0, resolved = 0.0;
    int n_merged = 0;
    for (std::size_t i = 0; i < side.size(); ++i) {
      const double e = std::isfinite(side[i]) ? std::abs(side[i]) : INFINITY;
      if (!(e <= worst)) {
        worst = e;
        worst_t = temps[i];
      }
      if (merged[i] > 0.5) {
        ++n_merged;
      } else {
        resolved = std::max(resolved, e);
      }
    }
    const bool covers = !temps.empty() && temps.front() <= 25.0 && temps.back() >= 140.0;
    report(5, covers && worst <= 0.3, "side-peak immobility 25-140 C",
           fmt("max |side center| %.3f ns at %.0f C over %zu temperatures (bound 0.3 ns); %d flagged merged, "
               "max over resolved %.3f ns; unfitted side-component shift at %.0f C is %.3f ns",
               worst, worst_t, side.size(), n_merged, resolved, temps.back(), shift.back()));
  }

  {  // 6
    const auto& r = runs.at("lindblad_check");
    const auto t = parse_csv(r.file(".csv"));
    const auto d = t.column("detuning_GHz");
    const auto lb = t.column("lindblad_transmission");
    const auto ln = t.column("linear_transmission");
    double worst = 0.0;
    for (std::size_t i = 0; i < lb.size(); ++i) worst = std::max(worst, std::abs(lb[i] - ln[i]) / ln[i]);
    const auto& cfg = r.scenario.lindblad;
    const bool setup = d.front() <= -6.0 && d.back() >= 6.0 && cfg.velocity_nodes == 1 &&
                       cfg.conditions.doppler_sigma_override && *cfg.conditions.doppler_sigma_override == 0.0 &&
                       cfg.solver.peak_rabi <= 1e-3;
    report(6, setup && worst <= 0.03, "linear vs Lindblad cross-validation",
           fmt("worst relative transmission difference %.3g over %zu points in [%.1f, %.1f] GHz", worst, d.size(),
               d.front(), d.back()));
  }

  {  // 7
    std::vector<std::string> parts;
    bool pass = true;
    auto add = [&](const std::string& name, double cov) {
      parts.push_back(fmt("%s %.2f", name.c_str(), cov));
      pass = pass && cov >= 0.95;
    };
    fit::VoigtScanSpec vs;
    vs.center = 0.4;
    vs.f_gaussian = 0.84;
    vs.f_lorentzian = 0.10;
    vs.amplitude = 2000.0;
    vs.offset = 20.0;
    vs.start = -4.0;
    vs.stop = 4.0;
    const double fv = special::voigt_fwhm(0.10, 0.84);
    add("voigt", coverage([&](std::uint64_t s) {
          const auto r = fit::fit_voigt(fit::synthetic_voigt_scan(vs, s));
          return r.converged && within(r, "f_V", fv) && within(r, "center", vs.center);
        }));
    const fit::EmgSpec es;
    add("emg", coverage([&](std::uint64_t s) {
          const auto r = fit::fit_emg(fit::synthetic_emg(es, s));
          return r.converged && within(r, "lifetime", es.lifetime) && within(r, "sigma", es.sigma);
        }));
    const fit::G2Spec gs;
    add("g2", coverage([&](std::uint64_t s) {
          return within(fit::compute_g2(fit::synthetic_g2(gs, s), gs.rep_period, gs.n_side_peaks), "g2_0",
                        gs.center_ratio);
        }));
    const fit::FssSpec fs;
    add("fss", coverage([&](std::uint64_t s) {
          return within(fit::fit_fss(fit::synthetic_fss(fs, s)), "fss_amplitude", fs.fss);
        }));
    fit::SidePeakSpec ss;
    ss.gaussian_noise = 2.0;
    add("decompose", coverage([&](std::uint64_t s) {
          return within(fit::decompose_side_peak(fit::synthetic_side_peak_profile(ss, s), 0.0), "side_center",
                        ss.side.center);
        }));
    double worst_rule = 0.0;
    for (int k = 0; k <= 40; ++k) {
      const double ratio = std::pow(10.0, -2.0 + 4.0 * k / 40.0);
      const double sigma = 1.0 / atomic::fwhm_per_sigma;
      const double gamma = 0.5 * ratio;
      const double peak = special::voigt(0.0, sigma, gamma);
      double a = 0.0, b = 10.0 * (1.0 + ratio);
      for (int i = 0; i < 200; ++i) {
        const double m = 0.5 * (a + b);
        (special::voigt(m, sigma, gamma) > 0.5 * peak ? a : b) = m;
      }
      worst_rule = std::max(worst_rule, std::abs(special::voigt_fwhm(ratio, 1.0) / (a + b) - 1.0));
    }
    pass = pass && worst_rule <= 2e-4;
    std::string detail;
    for (const auto& p : parts) detail += p + ", ";
    report(7, pass, "fit-recovery suite", detail + fmt("FWHM rule worst %.3g (bound 2e-4)", worst_rule));
  }

  {  // 8
    const auto& preset = runs.at("tune_172ghz").scenario;
    int ok = 0, back_ok = 0;
    std::size_t worst_steps = 0;
    double worst_return = 0.0;
    const double granularity = std::max(preset.policy.fine_gas_step, preset.policy.fine_laser_step);
    for (std::uint64_t seed = 0; seed < 1000; ++seed) {
      const auto plan = tuning::tune_to_target(preset.qd, preset.target, 0.5e9, preset.policy, preset.noise, seed);
      const bool good = plan.converged && plan.actions.size() <= 60;
      ok += good ? 1 : 0;
      worst_steps = std::max(worst_steps, plan.actions.size());
      if (!good) continue;
      auto there = plan.final_state;
      there.history.clear();
      const auto back = tuning::tune_to_target(there, preset.qd.frequency, 0.5e9, preset.policy, preset.noise,
                                               seed + 7919);
      const double err = std::abs(back.final_state.frequency - preset.qd.frequency);
      worst_return = std::max(worst_return, err);
      back_ok += back.converged && err <= granularity ? 1 : 0;
    }
    const bool retune = std::abs(preset.target - preset.qd.frequency - 172e9) < 1e6;
    report(8, retune && ok >= 990 && back_ok == ok, "tuning convergence",
           fmt("%d/1000 seeds within 0.5 GHz in <= 60 actions (worst %zu); round trip back within %.2f GHz for "
               "%d/%d (worst %.3f GHz)",
               ok, worst_steps, granularity * 1e-9, back_ok, ok, worst_return * 1e-9));
  }

  {  // 9
    std::mt19937_64 rng(9);
    std::normal_distribution<double> g;
    double fft_err = 0.0;
    for (const std::size_t n : {1024u, 6400u, 16000u}) {
      ComplexVector x(n);
      for (auto& v : x) v = {g(rng), g(rng)};
      auto y = x;
      fft_plan(n).forward(y);
      fft_plan(n).inverse(y);
      double e = 0.0, m = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        e = std::max(e, std::abs(y[i] - x[i]));
        m = std::max(m, std::abs(x[i]));
      }
      fft_err = std::max(fft_err, e / m);
    }
    double max_t = 0.0;
    int checked = 0;
    bool passive = true;
    for (const auto& [name, r] : runs) {
      if (!r.output.summary.contains("max_transmission")) continue;
      ++checked;
      max_t = std::max(max_t, r.output.summary.at("max_transmission").get<double>());
      passive = passive && r.output.summary.at("passive").get<bool>();
    }
    const double trace = runs.at("lindblad_check").output.summary.at("max_trace_error").get<double>();

    const auto sys = lindblad::ThreeLevelSystem::from_table(table);
    atomic::VaporConditions c;
    c.temperature = units::celsius(110.0);
    c.length = 0.1;
    c.density_override = 3e17;
    c.doppler_sigma_override = 0.0;
    const double carrier = 0.5 * (table.line(4, 3).offset + table.line(4, 4).offset);
    double tr[3];
    int k = 0;
    for (const double dt : {250e-12, 125e-12, 62.5e-12}) {
      const auto p = pulse::gaussian_pulse(carrier, 50e6, {dt, 200e-9, 0.1});
      tr[k++] = lindblad::copropagate(p, c, sys, 256).output.energy() / p.energy();
    }
    const double ratio = (tr[0] - tr[1]) / (tr[1] - tr[2]);
    const bool pass = fft_err <= 1e-12 && passive && max_t <= 1.0 + 1e-6 && checked >= 5 && trace <= 1e-9 &&
                      ratio > 3.5 && ratio < 4.5;
    report(9, pass, "numerical hygiene",
           fmt("FFT round trip %.2g, max transmission %.6f over %d presets, Lindblad trace error %.2g, "
               "time-refinement ratio %.2f (second order = 4)",
               fft_err, max_t, checked, trace, ratio));
  }

  std::printf("%d criterion(s) failed\n", failures);
  return failures == 0 ? 0 : 1;
}
