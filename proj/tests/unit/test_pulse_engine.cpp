#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <complex>
#include <numeric>

#include "cslight/pulse_engine.hpp"
#include "cslight/units.hpp"

using namespace cslight;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;
using cd = std::complex<double>;

namespace {

pulse::PropagationScenario laser_scenario(double bandwidth = 220e6) {
  pulse::PropagationScenario s;
  s.conditions.temperature = units::celsius(110.0);
  s.conditions.length = 0.1;
  s.source = pulse::EmissionModel::gaussian_laser(bandwidth);
  return s;
}

double spectral_fwhm(const medium::ComplexSpectrum& s) {
  std::vector<double> p(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) p[i] = std::norm(s.values[i]);
  pulse::IntensityProfile prof{s.grid_start, s.grid_step, p};
  return pulse::profile_fwhm(prof);
}

}  // namespace

TEST_CASE("a 220 MHz transform-limited pulse lasts about 2 ns", "[pulse]") {
  CHECK_THAT(pulse::gaussian_duration(220e6), WithinRel(2.0 * std::log(2.0) / (M_PI * 220e6), 1e-14));
  CHECK_THAT(pulse::gaussian_duration(220e6), WithinAbs(2.0e-9, 0.01e-9));
  const pulse::TimeGrid grid;
  const auto p = pulse::gaussian_pulse(0.0, 220e6, grid);
  CHECK_THAT(p.energy(), WithinRel(1.0, 1e-12));
  CHECK_THAT(pulse::profile_fwhm(pulse::intensity(p)), WithinRel(pulse::gaussian_duration(220e6), 1e-3));
  CHECK_THAT(pulse::peak_time(pulse::intensity(p)), WithinAbs(0.0, 1e-13));
}

TEST_CASE("pulse power spectrum has the requested FWHM to one bin", "[pulse]") {
  const pulse::TimeGrid grid;
  for (const double bw : {50e6, 220e6, 600e6}) {
    const auto spec = pulse::pulse_spectrum(pulse::gaussian_pulse(3e9, bw, grid));
    CHECK_THAT(spectral_fwhm(spec), WithinAbs(bw, grid.frequency_step()));
    // Parseval with the dt-scaled transform
    double e = 0.0;
    for (const auto& v : spec.values) e += std::norm(v) * spec.grid_step;
    CHECK_THAT(e, WithinRel(1.0, 1e-10));
    const auto peak = std::max_element(spec.values.begin(), spec.values.end(),
                                       [](cd a, cd b) { return std::norm(a) < std::norm(b); });
    CHECK_THAT(spec.frequency(static_cast<std::size_t>(peak - spec.values.begin())), WithinAbs(3e9, 1.0));
  }
}

TEST_CASE("frequency shift theorem", "[pulse][property]") {
  const pulse::TimeGrid grid;
  auto p = pulse::gaussian_pulse(0.0, 220e6, grid);
  const double f0 = 40 * grid.frequency_step();
  const auto base = pulse::pulse_spectrum(p);
  for (std::size_t i = 0; i < p.size(); ++i) p.samples[i] *= std::polar(1.0, 2 * M_PI * f0 * p.time(i));
  const auto shifted = pulse::pulse_spectrum(p);
  for (std::size_t j = 40; j < base.size(); ++j) {
    CHECK(std::abs(std::abs(shifted.values[j]) - std::abs(base.values[j - 40])) < 1e-12);
  }
}

TEST_CASE("unit transfer function leaves the pulse unchanged", "[pulse][property]") {
  const pulse::TimeGrid grid;
  const auto p = pulse::gaussian_pulse(1e9, 220e6, grid);
  const auto fg = pulse::aligned_frequency_grid(grid, 1e9, 0.0, 0.0);
  medium::ComplexSpectrum one{fg.start, fg.step, std::vector<cd>(fg.count, cd(1.0, 0.0))};
  const auto out = pulse::propagate(p, one);
  double scale = 0.0;
  for (const auto& v : p.samples) scale = std::max(scale, std::abs(v));
  for (std::size_t i = 0; i < p.size(); ++i) CHECK(std::abs(out.samples[i] - p.samples[i]) < 1e-12 * scale);
  // same result through interpolation on an unaligned, finer grid
  const auto fine = medium::FrequencyGrid::spanning(fg.start - 1e6, fg.frequency(fg.count - 1) + 1e6, 0.7e6);
  medium::ComplexSpectrum one_fine{fine.start, fine.step, std::vector<cd>(fine.count, cd(1.0, 0.0))};
  const auto out2 = pulse::propagate(p, one_fine);
  for (std::size_t i = 0; i < p.size(); ++i) CHECK(std::abs(out2.samples[i] - p.samples[i]) < 1e-12 * scale);
}

TEST_CASE("linear spectral phase is a pure time shift", "[pulse][property]") {
  const pulse::TimeGrid grid;
  const double carrier = -2e9;
  const auto p = pulse::gaussian_pulse(carrier, 220e6, grid);
  const auto fg = pulse::aligned_frequency_grid(grid, carrier, 0.0, 0.0);
  const double tau = 7.3e-9;
  medium::ComplexSpectrum h{fg.start, fg.step, {}};
  for (std::size_t i = 0; i < fg.count; ++i) {
    h.values.push_back(std::polar(1.0, -2 * M_PI * (fg.frequency(i) - carrier) * tau));
  }
  const auto out = pulse::propagate(p, h);
  const auto in_i = pulse::intensity(p), out_i = pulse::intensity(out);
  CHECK_THAT(pulse::peak_time(out_i) - pulse::peak_time(in_i), WithinAbs(tau, 1e-12));
  CHECK_THAT(pulse::centroid_time(out_i) - pulse::centroid_time(in_i), WithinAbs(tau, 1e-12));
  CHECK_THAT(out.energy(), WithinRel(p.energy(), 1e-12));
}

TEST_CASE("a passive cell never adds energy", "[pulse][property]") {
  auto s = laser_scenario();
  for (const double d : {-40e9, -10e9, -0.6e9, 0.0, 0.5e9, 4.6e9, 9.2e9, 20e9, 40e9}) {
    const double com = s.to_com(d);
    const auto fg = pulse::aligned_frequency_grid(s.grid, com, 0.0, 0.0);
    const auto h = medium::transfer_function(fg, s.conditions, s.table);
    const auto p = pulse::gaussian_pulse(com, 220e6, s.grid);
    CHECK(pulse::propagate(p, h).energy() <= p.energy() * (1.0 + 1e-12));
  }
}

TEST_CASE("coverage gaps in the transfer function are rejected", "[pulse]") {
  const pulse::TimeGrid grid;
  const auto p = pulse::gaussian_pulse(0.0, 220e6, grid);
  const auto narrow = medium::FrequencyGrid::spanning(-50e6, 50e6, grid.frequency_step());
  medium::ComplexSpectrum h{narrow.start, narrow.step, std::vector<cd>(narrow.count, cd(1.0))};
  CHECK_THROWS_AS(pulse::propagate(p, h), pulse::SpectralCoverageError);
}

TEST_CASE("quadrature nodes are normalized and symmetric", "[pulse][property]") {
  for (const double sigma : {10e6, 382e6, 1e9}) {
    const double step = 2.5e6;
    const auto nodes = pulse::gaussian_nodes(sigma, 0.25 * sigma, step);
    double w = 0.0, m1 = 0.0, m2 = 0.0;
    for (const auto& n : nodes) {
      w += n.weight;
      m1 += n.weight * n.offset;
      m2 += n.weight * n.offset * n.offset;
      const double k = n.offset / step;
      CHECK_THAT(k, WithinAbs(std::round(k), 1e-9));
    }
    CHECK_THAT(w, WithinAbs(1.0, 1e-14));
    CHECK_THAT(m1, WithinAbs(0.0, 1e-6 * sigma));
    CHECK_THAT(std::sqrt(m2), WithinRel(sigma, 0.01));
    CHECK(nodes.front().offset <= -4.0 * sigma);
  }
  const auto single = pulse::gaussian_nodes(0.0, 1.0, 1.0);
  REQUIRE(single.size() == 1);
  CHECK(single[0].weight == 1.0);
}

TEST_CASE("inhomogeneous sigma reproduces a 900 MHz Voigt FWHM", "[pulse]") {
  const double tau = 1.52e-9;
  const double sigma = pulse::inhomogeneous_sigma_for_voigt(900e6, tau);
  const double f_l = 1.0 / (2 * M_PI * tau);
  const double f_g = std::sqrt(std::pow(900e6 - 0.5346 * f_l, 2) - 0.2166 * f_l * f_l);
  CHECK_THAT(sigma, WithinRel(f_g / (2 * std::sqrt(2 * std::log(2.0))), 1e-12));
  const auto qd = pulse::EmissionModel::quantum_dot(tau, sigma);
  CHECK_THAT(qd.voigt_fwhm(), WithinRel(900e6, 1e-12));
  CHECK_THAT(qd.lorentzian_fwhm, WithinRel(104.7e6, 1e-3));
}

TEST_CASE("QD realization: exponential decay with the side component split off", "[pulse]") {
  pulse::TimeGrid grid;
  const auto qd = pulse::EmissionModel::quantum_dot(1.52e-9, 0.0, -24e9, 0.18);
  const auto parts = pulse::qd_pulse_realization(qd, 1e9, grid);
  REQUIRE(parts.size() == 2);
  CHECK_THAT(parts[0].weight + parts[1].weight, WithinRel(1.0, 1e-15));
  CHECK(parts[1].side);
  CHECK_THAT(parts[1].pulse.carrier_detuning - parts[0].pulse.carrier_detuning, WithinRel(-24e9, 1e-15));
  const auto inten = pulse::intensity(parts[0].pulse);
  const auto i0 = static_cast<std::size_t>(std::llround(-grid.t_start() / grid.dt));
  const auto i1 = i0 + static_cast<std::size_t>(std::llround(1.52e-9 / grid.dt * 2));
  CHECK_THAT(inten.values[i1] / inten.values[i0], WithinRel(std::exp(-static_cast<double>(i1 - i0) * grid.dt / 1.52e-9), 1e-9));
  CHECK(inten.values[i0 - 1] == 0.0);
  CHECK_THROWS(pulse::EmissionModel::quantum_dot(1.52e-9, 0.0, 0.0, 1.0));
}

TEST_CASE("instrument convolution keeps the area and broadens a delta to 1.02 ns", "[pulse]") {
  pulse::IntensityProfile delta{-100e-9, 25e-12, std::vector<double>(16000, 0.0)};
  delta.values[8000] = 1.0 / delta.dt;
  const auto out = pulse::instrument_convolve(delta, 1e-9, 200e-12);
  CHECK_THAT(out.area(), WithinRel(1.0, 1e-12));
  const double c = pulse::centroid_time(out);
  double var = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) var += out.values[i] * std::pow(out.time(i) - c, 2) * out.dt;
  CHECK_THAT(std::sqrt(var), WithinRel(std::hypot(1e-9, 200e-12), 1e-6));
  CHECK_THAT(std::hypot(1e-9, 200e-12), WithinAbs(1.02e-9, 0.001e-9));
  CHECK_THAT(c, WithinAbs(delta.time(8000), 1e-15));
}

TEST_CASE("narrowband delay matches the group delay and all estimators agree", "[pulse]") {
  auto s = laser_scenario(20e6);
  s.grid = {0.25e-9, 1e-6, 0.25};
  s.instrument = {0.0, 0.0};
  for (const double d : {-3e9, 5e9, 15e9}) {
    const double gd = pulse::group_delay(s, s.to_com(d));
    s.delay_method = pulse::DelayMethod::peak;
    const auto peak = pulse::simulate_point(s, d);
    CHECK_THAT(peak.delay, WithinRel(gd, 0.05));
    s.delay_method = pulse::DelayMethod::centroid;
    const auto cen = pulse::simulate_point(s, d);
    s.delay_method = pulse::DelayMethod::cross_correlation;
    const auto xc = pulse::simulate_point(s, d);
    CHECK_THAT(cen.delay, WithinRel(peak.delay, 0.10));
    CHECK_THAT(xc.delay, WithinRel(peak.delay, 0.10));
    CHECK_FALSE(peak.multimodal);
  }
}

TEST_CASE("far-detuned endpoints are transparent", "[pulse]") {
  const auto s = laser_scenario();
  for (const double d : {-40e9, 40e9}) {
    const auto r = pulse::simulate_point(s, d);
    CHECK_THAT(r.transmission, WithinAbs(1.0, 0.01));
    CHECK(r.transmission <= 1.0 + 1e-9);
    const double gd = pulse::group_delay(s, s.to_com(d));
    CHECK(gd > 0.0);
    CHECK_THAT(r.delay, WithinRel(gd, 0.1));
  }
}

TEST_CASE("detuning conventions round-trip", "[pulse]") {
  auto s = laser_scenario();
  CHECK_THAT(s.to_com(0.0), WithinAbs(-4.0218e9, 1e5));
  CHECK_THAT(s.from_com(s.to_com(1.234e9)), WithinAbs(1.234e9, 1e-6));
  s.convention = pulse::DetuningConvention::d1_com;
  CHECK(s.to_com(2e9) == 2e9);
}

TEST_CASE("profile statistics on simple shapes", "[pulse]") {
  pulse::IntensityProfile p{0.0, 0.01, std::vector<double>(1001, 0.0)};
  for (std::size_t i = 0; i < p.size(); ++i) p.values[i] = std::exp(-std::pow(p.time(i) - 4.0, 2) / 2.0);
  CHECK_THAT(pulse::peak_time(p), WithinAbs(4.0, 1e-6));
  // the window clips the left tail at 4 sigma and the right at 6 sigma
  CHECK_THAT(pulse::centroid_time(p), WithinAbs(4.0, 2e-4));
  CHECK_THAT(pulse::profile_fwhm(p), WithinRel(2.3548200450309493, 1e-4));
  CHECK_FALSE(pulse::is_multimodal(p));
  for (std::size_t i = 0; i < p.size(); ++i) p.values[i] += 0.6 * std::exp(-std::pow(p.time(i) - 8.0, 2) / 0.5);
  CHECK(pulse::is_multimodal(p));
  pulse::IntensityProfile flat{0.0, 1.0, std::vector<double>(10, 0.0)};
  CHECK_THROWS(pulse::peak_time(flat));
  CHECK(pulse::parse_delay_method("xcorr") == pulse::DelayMethod::cross_correlation);
  CHECK_THROWS(pulse::parse_delay_method("median"));
}
