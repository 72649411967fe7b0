#pragma once

#include <array>
#include <complex>
#include <cstddef>
#include <vector>

#include "cslight/atomic_data.hpp"

namespace cslight::medium {

/// Uniform frequency grid carrying complex samples. Frequencies are detunings
/// from the D1 center of mass in Hz.
struct ComplexSpectrum {
  double grid_start = 0.0;
  double grid_step = 0.0;
  std::vector<std::complex<double>> values;

  std::size_t size() const { return values.size(); }
  double frequency(std::size_t i) const { return grid_start + grid_step * static_cast<double>(i); }
  double grid_stop() const { return frequency(values.empty() ? 0 : values.size() - 1); }
  /// Linear interpolation; throws std::out_of_range outside the grid.
  std::complex<double> interpolate(double frequency) const;
};

struct FrequencyGrid {
  double start = 0.0;
  double step = 0.0;
  std::size_t count = 0;

  static FrequencyGrid spanning(double start, double stop, double step);
  double frequency(std::size_t i) const { return start + step * static_cast<double>(i); }
  void validate() const;
};

/// Lorentzian denominator gamma_j: half of the tabulated S * Gamma_D1, or all of it.
enum class DampingConvention { half_width, full_width };

enum class DopplerMethod { faddeeva, quadrature };

struct MediumOptions {
  DampingConvention damping = DampingConvention::half_width;
  DopplerMethod doppler_method = DopplerMethod::faddeeva;
  /// Fraction of atoms in F=3 and F=4 (thermal equipopulation over 16 sublevels).
  std::array<double, 2> ground_weights{7.0 / 16.0, 9.0 / 16.0};

  double ground_weight(int f) const { return f == 3 ? ground_weights[0] : ground_weights[1]; }
};

double line_damping(const atomic::TransitionLine& line, DampingConvention convention);

/// Per-point susceptibility evaluator. Holds the density and Doppler width of
/// one set of conditions so repeated evaluation does not recompute them.
class Susceptibility {
 public:
  Susceptibility(const atomic::VaporConditions& conditions, const atomic::TransitionTable& table,
                 const MediumOptions& options = {});

  /// Four-Lorentzian sum without Doppler broadening.
  std::complex<double> bare(double detuning) const;
  /// Doppler-averaged sum (complex Voigt per line).
  std::complex<double> doppler(double detuning) const;

  double density() const { return density_; }
  double sigma() const { return sigma_; }

 private:
  struct Term {
    double offset;
    double weight;  // population * mu^2 / (hbar eps0), s^-1 m^3 scaled by density
    double gamma;
  };
  std::vector<Term> terms_;
  double density_ = 0.0;
  double sigma_ = 0.0;
  DopplerMethod method_;
};

ComplexSpectrum chi_bare(const FrequencyGrid& grid, const atomic::VaporConditions& conditions,
                         const atomic::TransitionTable& table, const MediumOptions& options = {});

ComplexSpectrum chi_doppler(const FrequencyGrid& grid, const atomic::VaporConditions& conditions,
                            const atomic::TransitionTable& table, const MediumOptions& options = {});

/// Single-pass transfer function of the cell,
/// H = exp(-k Im chi L / 2) exp(-i (k Re chi / 2 + 2 pi nu / c) L).
ComplexSpectrum transfer_function(const FrequencyGrid& grid, const atomic::VaporConditions& conditions,
                                  const atomic::TransitionTable& table, const MediumOptions& options = {});

/// Vacuum propagation over the same length.
ComplexSpectrum vacuum_transfer(const FrequencyGrid& grid, double length);

/// Doppler-averaged complex Lorentzian of one line by trapezoidal quadrature over +-6 sigma.
/// Returns <1/(gamma - i(Delta - s))> with s ~ N(0, sigma^2); all arguments in rad/s.
std::complex<double> doppler_lorentzian_quadrature(double delta, double gamma, double sigma,
                                                   std::size_t points = 0);

/// Same average through the scaled complex error function.
std::complex<double> doppler_lorentzian_faddeeva(double delta, double gamma, double sigma);

double wavenumber(const atomic::TransitionTable& table);

}  // namespace cslight::medium
