#include "cslight/vapor_medium.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "cslight/faddeeva.hpp"
#include "cslight/units.hpp"

namespace cslight::medium {

using cd = std::complex<double>;
constexpr double two_pi = 2.0 * constants::pi;

cd ComplexSpectrum::interpolate(double frequency) const {
  if (values.empty()) throw std::out_of_range("empty spectrum");
  const double x = (frequency - grid_start) / grid_step;
  const double last = static_cast<double>(values.size() - 1);
  if (x < -1e-9 || x > last + 1e-9) throw std::out_of_range("frequency outside spectrum grid");
  const double xc = std::clamp(x, 0.0, last);
  const auto i = std::min(static_cast<std::size_t>(xc), values.size() - 1);
  if (i + 1 >= values.size()) return values.back();
  const double frac = xc - static_cast<double>(i);
  return values[i] * (1.0 - frac) + values[i + 1] * frac;
}

FrequencyGrid FrequencyGrid::spanning(double start, double stop, double step) {
  if (!(step > 0.0)) throw std::invalid_argument("frequency step must be positive");
  if (stop < start) throw std::invalid_argument("frequency grid stop < start");
  const auto n = static_cast<std::size_t>(std::floor((stop - start) / step + 1e-9)) + 1;
  return {start, step, n};
}

void FrequencyGrid::validate() const {
  if (count == 0) throw std::invalid_argument("empty frequency grid");
  if (!(step > 0.0)) throw std::invalid_argument("frequency step must be positive");
}

double line_damping(const atomic::TransitionLine& line, DampingConvention convention) {
  return convention == DampingConvention::half_width ? 0.5 * line.gamma : line.gamma;
}

double wavenumber(const atomic::TransitionTable& table) {
  return two_pi * table.com_frequency / constants::speed_of_light;
}

cd doppler_lorentzian_faddeeva(double delta, double gamma, double sigma) {
  if (sigma <= 0.0) return 1.0 / cd(gamma, -delta);
  const double scale = 1.0 / (M_SQRT2 * sigma);
  return std::sqrt(constants::pi / 2.0) / sigma * special::faddeeva(cd(delta * scale, gamma * scale));
}

cd doppler_lorentzian_quadrature(double delta, double gamma, double sigma, std::size_t points) {
  if (sigma <= 0.0) return 1.0 / cd(gamma, -delta);
  if (points == 0) {
    const double h = std::min(gamma / 4.0, sigma / 20.0);
    points = static_cast<std::size_t>(std::ceil(12.0 * sigma / h)) + 1;
  }
  const double lo = -6.0 * sigma;
  const double h = 12.0 * sigma / static_cast<double>(points - 1);
  const double norm = 1.0 / (sigma * std::sqrt(two_pi));
  cd acc = 0.0;
  for (std::size_t i = 0; i < points; ++i) {
    const double s = lo + h * static_cast<double>(i);
    const double w = (i == 0 || i + 1 == points) ? 0.5 : 1.0;
    acc += w * std::exp(-0.5 * s * s / (sigma * sigma)) / cd(gamma, -(delta - s));
  }
  return acc * h * norm;
}

Susceptibility::Susceptibility(const atomic::VaporConditions& conditions,
                               const atomic::TransitionTable& table, const MediumOptions& options)
    : method_(options.doppler_method) {
  conditions.validate();
  density_ = conditions.density();
  sigma_ = conditions.doppler_sigma(table);
  const double hbar_eps0 = constants::planck_reduced * constants::vacuum_permittivity;
  for (const auto& l : table.lines) {
    Term t;
    t.offset = l.offset;
    t.weight = density_ * options.ground_weight(l.f_ground) * l.dipole * l.dipole / hbar_eps0;
    t.gamma = line_damping(l, options.damping);
    terms_.push_back(t);
  }
}

cd Susceptibility::bare(double detuning) const {
  cd acc = 0.0;
  for (const auto& t : terms_) {
    const double delta = two_pi * (detuning - t.offset);
    acc += t.weight / cd(t.gamma, -delta);
  }
  return cd(0.0, 1.0) * acc;
}

cd Susceptibility::doppler(double detuning) const {
  if (sigma_ <= 0.0) return bare(detuning);
  const double sigma_w = two_pi * sigma_;
  cd acc = 0.0;
  for (const auto& t : terms_) {
    const double delta = two_pi * (detuning - t.offset);
    acc += t.weight * (method_ == DopplerMethod::faddeeva
                           ? doppler_lorentzian_faddeeva(delta, t.gamma, sigma_w)
                           : doppler_lorentzian_quadrature(delta, t.gamma, sigma_w));
  }
  return cd(0.0, 1.0) * acc;
}

namespace {

template <class F>
ComplexSpectrum sample(const FrequencyGrid& grid, F&& f) {
  grid.validate();
  ComplexSpectrum out{grid.start, grid.step, {}};
  out.values.resize(grid.count);
  for (std::size_t i = 0; i < grid.count; ++i) out.values[i] = f(grid.frequency(i));
  return out;
}

}  // namespace

ComplexSpectrum chi_bare(const FrequencyGrid& grid, const atomic::VaporConditions& conditions,
                         const atomic::TransitionTable& table, const MediumOptions& options) {
  grid.validate();
  const Susceptibility chi(conditions, table, options);
  return sample(grid, [&](double nu) { return chi.bare(nu); });
}

ComplexSpectrum chi_doppler(const FrequencyGrid& grid, const atomic::VaporConditions& conditions,
                            const atomic::TransitionTable& table, const MediumOptions& options) {
  grid.validate();
  const Susceptibility chi(conditions, table, options);
  return sample(grid, [&](double nu) { return chi.doppler(nu); });
}

ComplexSpectrum transfer_function(const FrequencyGrid& grid, const atomic::VaporConditions& conditions,
                                  const atomic::TransitionTable& table, const MediumOptions& options) {
  grid.validate();
  const Susceptibility chi(conditions, table, options);
  const double k = wavenumber(table);
  const double length = conditions.length;
  return sample(grid, [&](double nu) {
    const cd x = chi.doppler(nu);
    const double amplitude = std::exp(-0.5 * k * x.imag() * length);
    const double phase = -(0.5 * k * x.real() + two_pi * nu / constants::speed_of_light) * length;
    return std::polar(amplitude, phase);
  });
}

ComplexSpectrum vacuum_transfer(const FrequencyGrid& grid, double length) {
  return sample(grid, [&](double nu) {
    return std::polar(1.0, -two_pi * nu * length / constants::speed_of_light);
  });
}

}  // namespace cslight::medium
