#include "cslight/pulse_engine.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cslight/faddeeva.hpp"
#include "cslight/fft.hpp"
#include "cslight/units.hpp"

namespace cslight::pulse {

using cd = std::complex<double>;
constexpr double two_pi = 2.0 * constants::pi;
constexpr double ln2 = 0.69314718055994530942;

std::size_t TimeGrid::count() const {
  return static_cast<std::size_t>(std::llround(span / dt));
}

void TimeGrid::validate() const {
  if (!(dt > 0.0)) throw std::invalid_argument("time step must be positive");
  if (!(span > dt)) throw std::invalid_argument("time span must exceed the time step");
  if (!(lead_fraction >= 0.0 && lead_fraction < 1.0)) throw std::invalid_argument("lead fraction must be in [0, 1)");
}

double PulseEnvelope::energy() const {
  double acc = 0.0;
  for (const auto& a : samples) acc += std::norm(a);
  return acc * dt;
}

double IntensityProfile::area() const {
  return std::accumulate(values.begin(), values.end(), 0.0) * dt;
}

IntensityProfile& IntensityProfile::operator+=(const IntensityProfile& other) {
  if (values.empty()) {
    *this = other;
    return *this;
  }
  if (other.values.size() != values.size()) throw std::invalid_argument("profile grids differ");
  for (std::size_t i = 0; i < values.size(); ++i) values[i] += other.values[i];
  return *this;
}

IntensityProfile IntensityProfile::scaled(double factor) const {
  IntensityProfile out = *this;
  for (auto& v : out.values) v *= factor;
  return out;
}

IntensityProfile intensity(const PulseEnvelope& pulse) {
  IntensityProfile out{pulse.t_start, pulse.dt, std::vector<double>(pulse.size())};
  for (std::size_t i = 0; i < pulse.size(); ++i) out.values[i] = std::norm(pulse.samples[i]);
  return out;
}

EmissionModel EmissionModel::gaussian_laser(double bandwidth) {
  EmissionModel m;
  m.kind = EmissionKind::gaussian_laser;
  m.bandwidth = bandwidth;
  m.validate();
  return m;
}

EmissionModel EmissionModel::quantum_dot(double lifetime, double inhomogeneous_sigma, double side_peak_offset,
                                         double side_peak_weight) {
  EmissionModel m;
  m.kind = EmissionKind::qd_two_component;
  m.lifetime = lifetime;
  m.lorentzian_fwhm = lifetime > 0.0 ? 1.0 / (two_pi * lifetime) : 0.0;
  m.inhomogeneous_sigma = inhomogeneous_sigma;
  m.side_peak_offset = side_peak_offset;
  m.side_peak_weight = side_peak_weight;
  m.validate();
  return m;
}

void EmissionModel::validate() const {
  if (kind == EmissionKind::gaussian_laser) {
    if (!(bandwidth > 0.0)) throw std::invalid_argument("laser bandwidth must be positive");
  } else {
    if (!(lifetime > 0.0)) throw std::invalid_argument("QD lifetime must be positive");
  }
  if (!(inhomogeneous_sigma >= 0.0)) throw std::invalid_argument("inhomogeneous sigma must be >= 0");
  if (!(side_peak_weight >= 0.0 && side_peak_weight < 1.0)) {
    throw std::invalid_argument("side-peak weight must lie in [0, 1)");
  }
}

double EmissionModel::voigt_fwhm() const {
  const double gaussian = atomic::fwhm_per_sigma * inhomogeneous_sigma;
  const double lorentzian = kind == EmissionKind::qd_two_component ? lorentzian_fwhm : 0.0;
  if (kind == EmissionKind::gaussian_laser) {
    return std::hypot(bandwidth, gaussian);  // Gaussian x Gaussian
  }
  return special::voigt_fwhm(lorentzian, gaussian);
}

double inhomogeneous_sigma_for_voigt(double voigt_fwhm, double lifetime) {
  const double lorentzian = 1.0 / (two_pi * lifetime);
  return special::gaussian_fwhm_for_voigt(voigt_fwhm, lorentzian) / atomic::fwhm_per_sigma;
}

double gaussian_duration(double bandwidth) { return 2.0 * ln2 / (constants::pi * bandwidth); }

namespace {

void normalize(PulseEnvelope& p) {
  const double e = p.energy();
  if (!(e > 0.0)) throw std::invalid_argument("pulse has no energy on this grid");
  const double s = 1.0 / std::sqrt(e);
  for (auto& a : p.samples) a *= s;
}

void require_span(const TimeGrid& grid, double intensity_fwhm) {
  if (grid.span < 20.0 * intensity_fwhm) {
    throw std::invalid_argument("time grid too short: span must be at least 20x the pulse duration");
  }
}

PulseEnvelope blank(const TimeGrid& grid, double carrier) {
  grid.validate();
  PulseEnvelope p;
  p.t_start = grid.t_start();
  p.dt = grid.dt;
  p.samples.assign(grid.count(), cd(0.0));
  p.carrier_detuning = carrier;
  return p;
}

// Index of H for optical detuning nu, or a negative value if outside the grid.
struct TransferLookup {
  const medium::ComplexSpectrum& h;
  bool aligned = false;

  TransferLookup(const medium::ComplexSpectrum& transfer, double carrier, double df) : h(transfer) {
    if (h.values.empty()) throw std::invalid_argument("empty transfer function");
    const double ratio = h.grid_step / df;
    const double offset = (carrier - h.grid_start) / df;
    aligned = std::abs(ratio - 1.0) < 1e-9 && std::abs(offset - std::round(offset)) < 1e-6;
  }

  bool at(double nu, cd& out) const {
    const double x = (nu - h.grid_start) / h.grid_step;
    const double last = static_cast<double>(h.size() - 1);
    if (x < -1e-6 || x > last + 1e-6) return false;
    if (aligned) {
      out = h.values[static_cast<std::size_t>(std::clamp(std::llround(x), 0LL, static_cast<long long>(last)))];
    } else {
      out = h.interpolate(std::clamp(nu, h.grid_start, h.grid_stop()));
    }
    return true;
  }
};

ComplexVector apply_transfer(const ComplexVector& input_spectrum, double carrier,
                             const medium::ComplexSpectrum& transfer, double dt) {
  const std::size_t n = input_spectrum.size();
  const double df = 1.0 / (static_cast<double>(n) * dt);
  const TransferLookup lookup(transfer, carrier, df);
  ComplexVector out(n);
  double total = 0.0;
  double missing = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double power = std::norm(input_spectrum[k]);
    total += power;
    cd h;
    if (lookup.at(carrier + fft_frequency(k, n, dt), h)) {
      out[k] = input_spectrum[k] * h;
    } else {
      missing += power;
      out[k] = 0.0;
    }
  }
  if (total > 0.0 && missing > 1e-4 * total) {
    throw SpectralCoverageError("transfer function does not cover the pulse spectrum");
  }
  fft_plan(n).inverse(out);
  return out;
}

ComplexVector forward_spectrum(const PulseEnvelope& pulse) {
  ComplexVector spec(pulse.samples);
  fft_plan(spec.size()).forward(spec);
  return spec;
}

}  // namespace

PulseEnvelope gaussian_pulse(double center_detuning, double bandwidth, const TimeGrid& grid) {
  if (!(bandwidth > 0.0)) throw std::invalid_argument("bandwidth must be positive");
  const double duration = gaussian_duration(bandwidth);
  require_span(grid, duration);
  PulseEnvelope p = blank(grid, center_detuning);
  const double a = 2.0 * ln2 / (duration * duration);
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double t = p.time(i);
    p.samples[i] = std::exp(-a * t * t);
  }
  normalize(p);
  return p;
}

std::vector<WeightedPulse> qd_pulse_realization(const EmissionModel& model, double central_detuning,
                                                const TimeGrid& grid) {
  if (model.kind != EmissionKind::qd_two_component) throw std::invalid_argument("model is not a QD emission model");
  if (!(model.lifetime > 0.0)) throw std::invalid_argument("QD lifetime must be positive");
  require_span(grid, model.lifetime * ln2);
  PulseEnvelope main = blank(grid, central_detuning);
  for (std::size_t i = 0; i < main.size(); ++i) {
    const double t = main.time(i);
    if (t >= -1e-6 * grid.dt) main.samples[i] = std::exp(-0.5 * t / model.lifetime);
  }
  normalize(main);
  std::vector<WeightedPulse> out;
  const double w = model.side_peak_weight;
  out.push_back({1.0 - w, false, main});
  if (w > 0.0) {
    PulseEnvelope side = main;
    side.carrier_detuning = central_detuning + model.side_peak_offset;
    out.push_back({w, true, std::move(side)});
  }
  return out;
}

medium::ComplexSpectrum pulse_spectrum(const PulseEnvelope& pulse) {
  const std::size_t n = pulse.size();
  ComplexVector spec = forward_spectrum(pulse);
  medium::ComplexSpectrum out;
  const double df = 1.0 / (static_cast<double>(n) * pulse.dt);
  const std::size_t half = n / 2;  // bins with negative frequency come first
  out.grid_step = df;
  out.grid_start = pulse.carrier_detuning - static_cast<double>(half) * df;
  out.values.resize(n);
  for (std::size_t j = 0; j < n; ++j) {
    const std::size_t k = (j + n - half) % n;
    out.values[j] = spec[k] * pulse.dt;
  }
  return out;
}

PulseEnvelope propagate(const PulseEnvelope& pulse, const medium::ComplexSpectrum& transfer) {
  PulseEnvelope out = pulse;
  out.samples = apply_transfer(forward_spectrum(pulse), pulse.carrier_detuning, transfer, pulse.dt);
  return out;
}

medium::FrequencyGrid aligned_frequency_grid(const TimeGrid& grid, double carrier, double margin_low,
                                             double margin_high) {
  grid.validate();
  const std::size_t n = grid.count();
  const double df = grid.frequency_step();
  const auto low_bins = static_cast<long long>(n / 2) + static_cast<long long>(std::ceil(margin_low / df)) + 1;
  const auto high_bins = static_cast<long long>((n - 1) / 2) + static_cast<long long>(std::ceil(margin_high / df)) + 1;
  medium::FrequencyGrid g;
  g.start = carrier - static_cast<double>(low_bins) * df;
  g.step = df;
  g.count = static_cast<std::size_t>(low_bins + high_bins + 1);
  return g;
}

std::vector<QuadratureNode> gaussian_nodes(double sigma, double max_spacing, double step) {
  if (!(sigma > 0.0)) return {{0.0, 1.0}};
  if (!(step > 0.0)) throw std::invalid_argument("node step must be positive");
  const double multiple = std::max(1.0, std::floor(max_spacing / step));
  const double spacing = multiple * step;
  const auto half = static_cast<long long>(std::ceil(4.0 * sigma / spacing));
  std::vector<QuadratureNode> nodes;
  double total = 0.0;
  for (long long i = -half; i <= half; ++i) {
    const double x = static_cast<double>(i) * spacing;
    const double w = std::exp(-0.5 * x * x / (sigma * sigma));
    nodes.push_back({x, w});
    total += w;
  }
  for (auto& n : nodes) n.weight /= total;
  return nodes;
}

ComponentProfiles inhomogeneous_average(const EmissionModel& model, double nominal_detuning,
                                        const medium::ComplexSpectrum& transfer, const TimeGrid& grid) {
  model.validate();
  grid.validate();
  std::vector<WeightedPulse> components;
  double max_spacing = 0.0;
  if (model.kind == EmissionKind::qd_two_component) {
    components = qd_pulse_realization(model, nominal_detuning, grid);
    max_spacing = std::min(0.5 * model.lorentzian_fwhm, 0.25 * model.inhomogeneous_sigma);
  } else {
    components.push_back({1.0, false, gaussian_pulse(nominal_detuning, model.bandwidth, grid)});
    max_spacing = 0.25 * model.inhomogeneous_sigma;
  }
  const auto nodes = gaussian_nodes(model.inhomogeneous_sigma, max_spacing, grid.frequency_step());

  ComponentProfiles out;
  const std::size_t n = grid.count();
  const IntensityProfile zero{grid.t_start(), grid.dt, std::vector<double>(n, 0.0)};
  out.main = zero;
  out.side = zero;
  for (const auto& comp : components) {
    const ComplexVector spectrum = forward_spectrum(comp.pulse);
    auto& target = comp.side ? out.side : out.main;
    for (const auto& node : nodes) {
      const ComplexVector field =
          apply_transfer(spectrum, comp.pulse.carrier_detuning + node.offset, transfer, grid.dt);
      const double w = comp.weight * node.weight;
      for (std::size_t i = 0; i < n; ++i) target.values[i] += w * std::norm(field[i]);
    }
  }
  out.total = out.main;
  out.total += out.side;
  return out;
}

IntensityProfile instrument_convolve(const IntensityProfile& profile, double sigma_jitter, double sigma_detector) {
  if (!(sigma_jitter >= 0.0) || !(sigma_detector >= 0.0)) throw std::invalid_argument("instrument widths must be >= 0");
  if (sigma_jitter == 0.0 && sigma_detector == 0.0) return profile;
  const std::size_t n = profile.size();
  ComplexVector buf(profile.values.begin(), profile.values.end());
  const auto& plan = fft_plan(n);
  plan.forward(buf);
  for (const double sigma : {sigma_jitter, sigma_detector}) {
    for (std::size_t k = 0; k < n; ++k) {
      const double f = fft_frequency(k, n, profile.dt);
      buf[k] *= std::exp(-2.0 * constants::pi * constants::pi * sigma * sigma * f * f);
    }
  }
  plan.inverse(buf);
  IntensityProfile out{profile.t_start, profile.dt, std::vector<double>(n)};
  for (std::size_t i = 0; i < n; ++i) out.values[i] = buf[i].real();
  return out;
}

double transmission(const IntensityProfile& cell, const IntensityProfile& reference) {
  if (cell.size() != reference.size() || std::abs(cell.dt - reference.dt) > 1e-12 * reference.dt) {
    throw std::invalid_argument("cell and reference profiles must share a grid");
  }
  const double ref = reference.area();
  if (!(ref > 0.0)) throw std::invalid_argument("reference profile has zero energy");
  return cell.area() / ref;
}

std::string to_string(DelayMethod method) {
  switch (method) {
    case DelayMethod::peak: return "peak";
    case DelayMethod::centroid: return "centroid";
    case DelayMethod::cross_correlation: return "cross_correlation";
  }
  return "peak";
}

DelayMethod parse_delay_method(const std::string& name) {
  if (name == "peak") return DelayMethod::peak;
  if (name == "centroid") return DelayMethod::centroid;
  if (name == "cross_correlation" || name == "xcorr") return DelayMethod::cross_correlation;
  throw std::invalid_argument("unknown delay method '" + name + "'");
}

namespace {

void require_non_flat(const IntensityProfile& p) {
  if (p.values.empty()) throw std::invalid_argument("empty profile");
  const auto [lo, hi] = std::minmax_element(p.values.begin(), p.values.end());
  if (!(*hi - *lo > 1e-300) || !(*hi > 0.0)) throw std::invalid_argument("flat profile: no arrival time");
}

// Sub-bin position of a maximum from a parabola through three samples.
double parabolic_offset(double ym, double y0, double yp) {
  const double denom = ym - 2.0 * y0 + yp;
  if (denom == 0.0) return 0.0;
  return std::clamp(0.5 * (ym - yp) / denom, -0.5, 0.5);
}

}  // namespace

double peak_time(const IntensityProfile& p) {
  require_non_flat(p);
  const auto it = std::max_element(p.values.begin(), p.values.end());
  const auto i = static_cast<std::size_t>(it - p.values.begin());
  double frac = 0.0;
  if (i > 0 && i + 1 < p.size()) frac = parabolic_offset(p.values[i - 1], p.values[i], p.values[i + 1]);
  return p.time(i) + frac * p.dt;
}

double centroid_time(const IntensityProfile& p) {
  require_non_flat(p);
  double m0 = 0.0;
  double m1 = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    m0 += p.values[i];
    m1 += p.values[i] * p.time(i);
  }
  return m1 / m0;
}

double profile_fwhm(const IntensityProfile& p) {
  require_non_flat(p);
  const auto it = std::max_element(p.values.begin(), p.values.end());
  const auto peak = static_cast<std::size_t>(it - p.values.begin());
  const double half = 0.5 * *it;
  std::size_t lo = peak;
  while (lo > 0 && p.values[lo - 1] >= half) --lo;
  std::size_t hi = peak;
  while (hi + 1 < p.size() && p.values[hi + 1] >= half) ++hi;
  auto crossing = [&](std::size_t inside, std::size_t outside) {
    const double a = p.values[inside];
    const double b = p.values[outside];
    const double frac = (a - half) / (a - b);
    return p.time(inside) + (p.time(outside) - p.time(inside)) * frac;
  };
  const double left = lo > 0 ? crossing(lo, lo - 1) : p.time(lo);
  const double right = hi + 1 < p.size() ? crossing(hi, hi + 1) : p.time(hi);
  return right - left;
}

bool is_multimodal(const IntensityProfile& p) {
  require_non_flat(p);
  const double global = *std::max_element(p.values.begin(), p.values.end());
  std::vector<std::size_t> peaks;
  for (std::size_t i = 1; i + 1 < p.size(); ++i) {
    if (p.values[i] >= 0.2 * global && p.values[i] > p.values[i - 1] && p.values[i] >= p.values[i + 1]) {
      peaks.push_back(i);
    }
  }
  for (std::size_t a = 0; a + 1 < peaks.size(); ++a) {
    const auto i = peaks[a];
    const auto j = peaks[a + 1];
    const double valley = *std::min_element(p.values.begin() + static_cast<long>(i), p.values.begin() + static_cast<long>(j) + 1);
    if (valley < 0.8 * std::min(p.values[i], p.values[j])) return true;
  }
  return false;
}

DelayEstimate delay(const IntensityProfile& cell, const IntensityProfile& reference, DelayMethod method) {
  if (cell.size() != reference.size()) throw std::invalid_argument("cell and reference profiles must share a grid");
  require_non_flat(cell);
  require_non_flat(reference);
  DelayEstimate est;
  est.method = method;
  est.multimodal = is_multimodal(cell);
  switch (method) {
    case DelayMethod::peak:
      est.value = peak_time(cell) - peak_time(reference);
      break;
    case DelayMethod::centroid:
      est.value = centroid_time(cell) - centroid_time(reference);
      break;
    case DelayMethod::cross_correlation: {
      const std::size_t n = cell.size();
      ComplexVector a(cell.values.begin(), cell.values.end());
      ComplexVector b(reference.values.begin(), reference.values.end());
      const auto& plan = fft_plan(n);
      plan.forward(a);
      plan.forward(b);
      for (std::size_t k = 0; k < n; ++k) a[k] *= std::conj(b[k]);
      plan.inverse(a);
      std::size_t best = 0;
      for (std::size_t k = 1; k < n; ++k) {
        if (a[k].real() > a[best].real()) best = k;
      }
      const double ym = a[(best + n - 1) % n].real();
      const double yp = a[(best + 1) % n].real();
      double lag = static_cast<double>(best) + parabolic_offset(ym, a[best].real(), yp);
      if (lag > 0.5 * static_cast<double>(n)) lag -= static_cast<double>(n);
      est.value = lag * cell.dt;
      break;
    }
  }
  return est;
}

double PropagationScenario::to_com(double reported) const {
  return convention == DetuningConvention::f4_line ? reported + table.ground_transition(4) : reported;
}

double PropagationScenario::from_com(double com) const {
  return convention == DetuningConvention::f4_line ? com - table.ground_transition(4) : com;
}

PointResult simulate_point(const PropagationScenario& scenario, double reported_detuning) {
  scenario.conditions.validate();
  scenario.source.validate();
  const double com = scenario.to_com(reported_detuning);
  const auto& src = scenario.source;
  const double spread = 4.0 * src.inhomogeneous_sigma + 2.0 * scenario.grid.frequency_step();
  const double side = src.kind == EmissionKind::qd_two_component && src.side_peak_weight > 0.0 ? src.side_peak_offset : 0.0;
  const auto fgrid = aligned_frequency_grid(scenario.grid, com, spread + std::max(0.0, -side),
                                            spread + std::max(0.0, side));
  const auto h_cell = medium::transfer_function(fgrid, scenario.conditions, scenario.table, scenario.medium);
  const auto h_ref = medium::vacuum_transfer(fgrid, scenario.conditions.length);

  const auto& ins = scenario.instrument;
  auto convolve = [&](const ComponentProfiles& raw) {
    ComponentProfiles c;
    c.main = instrument_convolve(raw.main, ins.sigma_jitter, ins.sigma_detector);
    c.side = instrument_convolve(raw.side, ins.sigma_jitter, ins.sigma_detector);
    c.total = c.main;
    c.total += c.side;
    return c;
  };

  PointResult r;
  r.detuning = reported_detuning;
  r.cell = convolve(inhomogeneous_average(src, com, h_cell, scenario.grid));
  r.reference = convolve(inhomogeneous_average(src, com, h_ref, scenario.grid));
  r.transmission = transmission(r.cell.total, r.reference.total);
  r.main_transmission = transmission(r.cell.main, r.reference.main);
  const auto est = delay(r.cell.total, r.reference.total, scenario.delay_method);
  r.delay = est.value;
  r.multimodal = est.multimodal;
  r.main_delay = delay(r.cell.main, r.reference.main, scenario.delay_method).value;
  r.output_fwhm = profile_fwhm(r.cell.total);
  return r;
}

std::vector<PointResult> scan_detuning(const PropagationScenario& scenario, double start, double stop, double step) {
  if (!(step > 0.0)) throw std::invalid_argument("scan step must be positive");
  if (stop < start) throw std::invalid_argument("scan stop < start");
  std::vector<PointResult> out;
  const auto n = static_cast<std::size_t>(std::floor((stop - start) / step + 1e-9)) + 1;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back(simulate_point(scenario, start + step * static_cast<double>(i)));
  }
  return out;
}

std::vector<TemperaturePoint> delay_vs_temperature(const PropagationScenario& scenario,
                                                   const std::vector<double>& temperatures) {
  return delay_vs_temperature(scenario, temperatures, scenario.from_com(scenario.table.hyperfine_midpoint()));
}

std::vector<TemperaturePoint> delay_vs_temperature(const PropagationScenario& scenario,
                                                   const std::vector<double>& temperatures,
                                                   double reported_detuning) {
  if (temperatures.empty()) throw std::invalid_argument("temperature list is empty");
  std::vector<TemperaturePoint> out;
  for (const double t : temperatures) {
    PropagationScenario s = scenario;
    s.conditions.temperature = t;
    out.push_back({t, simulate_point(s, reported_detuning)});
  }
  return out;
}

double group_delay(const PropagationScenario& scenario, double com_detuning) {
  const medium::Susceptibility chi(scenario.conditions, scenario.table, scenario.medium);
  const double h = 1e6;
  const double k = medium::wavenumber(scenario.table);
  const double slope = (chi.doppler(com_detuning + h).real() - chi.doppler(com_detuning - h).real()) / (2.0 * two_pi * h);
  return 0.5 * k * scenario.conditions.length * slope;
}

}  // namespace cslight::pulse
