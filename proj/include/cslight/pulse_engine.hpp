#pragma once

#include <complex>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "cslight/atomic_data.hpp"
#include "cslight/vapor_medium.hpp"

namespace cslight::pulse {

class SpectralCoverageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Sampling of the retarded-time window. Pulses start or peak at t = 0, which
/// sits `lead_fraction` of the span after the window start.
struct TimeGrid {
  double dt = 50e-12;
  double span = 400e-9;
  double lead_fraction = 0.25;

  std::size_t count() const;
  double t_start() const { return -lead_fraction * span; }
  double frequency_step() const { return 1.0 / (static_cast<double>(count()) * dt); }
  void validate() const;
};

/// Complex field envelope on a uniform time grid. Sample n is the envelope at
/// t_start + n dt; spectral component at baseband frequency f corresponds to the
/// optical detuning carrier_detuning + f (envelope ~ e^{+2 pi i f t}).
struct PulseEnvelope {
  double t_start = 0.0;
  double dt = 0.0;
  std::vector<std::complex<double>> samples;
  double carrier_detuning = 0.0;

  std::size_t size() const { return samples.size(); }
  double time(std::size_t i) const { return t_start + dt * static_cast<double>(i); }
  double span() const { return dt * static_cast<double>(samples.size()); }
  double energy() const;
};

struct IntensityProfile {
  double t_start = 0.0;
  double dt = 0.0;
  std::vector<double> values;

  std::size_t size() const { return values.size(); }
  double time(std::size_t i) const { return t_start + dt * static_cast<double>(i); }
  double area() const;
  IntensityProfile& operator+=(const IntensityProfile& other);
  IntensityProfile scaled(double factor) const;
};

IntensityProfile intensity(const PulseEnvelope& pulse);

enum class EmissionKind { gaussian_laser, qd_two_component };

struct EmissionModel {
  EmissionKind kind = EmissionKind::gaussian_laser;
  double bandwidth = 0.0;            ///< Hz, power-spectrum FWHM (laser)
  double lifetime = 0.0;             ///< s (QD)
  double lorentzian_fwhm = 0.0;      ///< Hz, 1 / (2 pi lifetime)
  double inhomogeneous_sigma = 0.0;  ///< Hz
  double side_peak_offset = 0.0;     ///< Hz
  double side_peak_weight = 0.0;     ///< fraction of photons in the side component

  static EmissionModel gaussian_laser(double bandwidth);
  static EmissionModel quantum_dot(double lifetime, double inhomogeneous_sigma, double side_peak_offset = 0.0,
                                   double side_peak_weight = 0.0);
  void validate() const;
  /// FWHM of the Lorentzian-times-Gaussian spectrum of the main component.
  double voigt_fwhm() const;
};

/// Gaussian sigma that gives the main QD component a Voigt FWHM of `voigt_fwhm`.
double inhomogeneous_sigma_for_voigt(double voigt_fwhm, double lifetime);

/// Transform-limited Gaussian whose power spectrum has FWHM `bandwidth`.
PulseEnvelope gaussian_pulse(double center_detuning, double bandwidth, const TimeGrid& grid);

/// Intensity FWHM of a transform-limited Gaussian with the given spectral FWHM.
double gaussian_duration(double bandwidth);

struct WeightedPulse {
  double weight = 1.0;
  bool side = false;
  PulseEnvelope pulse;
};

/// Lifetime-limited QD emission: e^{-t / 2 tau} for t >= 0, unit energy. With a
/// side-peak weight the result holds two mutually incoherent components.
std::vector<WeightedPulse> qd_pulse_realization(const EmissionModel& model, double central_detuning,
                                                const TimeGrid& grid);

/// Spectrum of the envelope returned by the forward transform, indexed by optical detuning.
medium::ComplexSpectrum pulse_spectrum(const PulseEnvelope& pulse);

/// Output envelope = inverse transform of (input spectrum x H). H is sampled
/// directly when its grid coincides with the pulse bins and interpolated otherwise.
PulseEnvelope propagate(const PulseEnvelope& pulse, const medium::ComplexSpectrum& transfer);

/// Grid of detunings aligned with the FFT bins of a pulse at `carrier`, padded by
/// `margin_low` below and `margin_high` above the baseband window.
medium::FrequencyGrid aligned_frequency_grid(const TimeGrid& grid, double carrier, double margin_low,
                                             double margin_high);

struct QuadratureNode {
  double offset = 0.0;
  double weight = 0.0;
};

/// Evenly spaced nodes over +-4 sigma with normalized Gaussian weights. Spacing is a
/// multiple of `step` no larger than `max_spacing`. sigma = 0 gives one node.
std::vector<QuadratureNode> gaussian_nodes(double sigma, double max_spacing, double step);

struct ComponentProfiles {
  IntensityProfile total;
  IntensityProfile main;
  IntensityProfile side;
};

/// Averaged output intensity over the inhomogeneous distribution of the
/// emitter's central frequency. The transfer function must cover every node.
ComponentProfiles inhomogeneous_average(const EmissionModel& model, double nominal_detuning,
                                        const medium::ComplexSpectrum& transfer, const TimeGrid& grid);

/// Two successive Gaussian convolutions in time.
IntensityProfile instrument_convolve(const IntensityProfile& profile, double sigma_jitter, double sigma_detector);

/// Ratio of integrated intensities. Values above one are returned unchanged;
/// callers flag them.
double transmission(const IntensityProfile& cell, const IntensityProfile& reference);

enum class DelayMethod { peak, centroid, cross_correlation };
std::string to_string(DelayMethod method);
DelayMethod parse_delay_method(const std::string& name);

struct DelayEstimate {
  double value = 0.0;
  DelayMethod method = DelayMethod::peak;
  bool multimodal = false;
};

DelayEstimate delay(const IntensityProfile& cell, const IntensityProfile& reference,
                    DelayMethod method = DelayMethod::peak);

double peak_time(const IntensityProfile& profile);
double centroid_time(const IntensityProfile& profile);
double profile_fwhm(const IntensityProfile& profile);
/// True when the profile has two or more separated maxima above 20% of the global one.
bool is_multimodal(const IntensityProfile& profile);

struct InstrumentResponse {
  double sigma_jitter = 1e-9;
  double sigma_detector = 200e-12;
};

enum class DetuningConvention { f4_line, d1_com };

struct PropagationScenario {
  atomic::VaporConditions conditions;
  atomic::TransitionTable table = atomic::transition_table();
  medium::MediumOptions medium;
  EmissionModel source;
  TimeGrid grid;
  InstrumentResponse instrument;
  DelayMethod delay_method = DelayMethod::peak;
  DetuningConvention convention = DetuningConvention::f4_line;

  /// Converts a reported detuning to the internal D1 center-of-mass detuning.
  double to_com(double reported) const;
  double from_com(double com) const;
};

struct PointResult {
  double detuning = 0.0;  ///< as reported under the scenario convention
  double transmission = 0.0;
  double delay = 0.0;
  double output_fwhm = 0.0;
  bool multimodal = false;
  double main_transmission = 0.0;
  double main_delay = 0.0;
  ComponentProfiles cell;
  ComponentProfiles reference;
};

/// Full pipeline at one carrier detuning (given in the scenario convention).
PointResult simulate_point(const PropagationScenario& scenario, double reported_detuning);

std::vector<PointResult> scan_detuning(const PropagationScenario& scenario, double start, double stop,
                                       double step);

struct TemperaturePoint {
  double temperature = 0.0;
  PointResult result;
};

/// Carrier parked at the hyperfine midpoint unless `reported_detuning` is given.
std::vector<TemperaturePoint> delay_vs_temperature(const PropagationScenario& scenario,
                                                   const std::vector<double>& temperatures);
std::vector<TemperaturePoint> delay_vs_temperature(const PropagationScenario& scenario,
                                                   const std::vector<double>& temperatures,
                                                   double reported_detuning);

/// Group delay d(arg H)/d(omega) of the medium relative to vacuum, at one detuning (COM).
double group_delay(const PropagationScenario& scenario, double com_detuning);

}  // namespace cslight::pulse
