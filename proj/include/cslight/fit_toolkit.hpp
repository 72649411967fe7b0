#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace cslight::fit {

struct Histogram1D {
  double bin_start = 0.0;
  double bin_width = 0.0;
  std::vector<double> counts;

  std::size_t size() const { return counts.size(); }
  double center(std::size_t i) const { return bin_start + bin_width * (static_cast<double>(i) + 0.5); }
  double stop() const { return bin_start + bin_width * static_cast<double>(counts.size()); }
  double total() const;
  void validate() const;
};

struct FitResult {
  std::vector<std::string> order;  ///< parameter names in report order
  std::map<std::string, double> params;
  std::map<std::string, double> ci95;
  std::map<std::string, bool> flags;
  std::vector<double> per_peak_areas;
  double residual_norm = 0.0;  ///< |r| / |y| of the (weighted) residual vector
  bool converged = false;

  void set(const std::string& name, double value, double ci = 0.0);
  double param(const std::string& name) const;
  double ci(const std::string& name) const;
  /// Plain-text report, one "name value ci95" line per parameter.
  std::string report() const;
};

/// Offset plus a peak-normalized Voigt; x in the histogram's units.
double voigt_model(double x, double center, double sigma, double gamma, double amplitude, double offset);

/// Fits center, Gaussian sigma, Lorentzian half width, amplitude and offset. Reports
/// f_G, f_L (FWHMs) and f_V from the combination rule.
FitResult fit_voigt(const Histogram1D& scan);

/// Exponentially modified Gaussian with rate 1/lifetime; amplitude is the
/// asymptotic height of the undelayed exponential.
double emg_model(double t, double amplitude, double t0, double sigma, double lifetime);

/// Poisson-weighted EMG fit; reports lifetime, sigma, amplitude and t0.
FitResult fit_emg(const Histogram1D& decay);

/// Gaussian convolved with a two-sided exponential, peak height `height` before convolution.
double g2_peak_model(double t, double height, double center, double sigma, double decay);

/// g2(0) from a coincidence histogram: fitted peaks, FWHM windows, center area over
/// the mean side-peak area. per_peak_areas lists the side peaks from -n to n.
FitResult compute_g2(const Histogram1D& coincidences, double rep_period, int n_side_peaks);

/// Linear least squares of E = offset + a sin 2theta + b cos 2theta; reports the
/// peak-to-peak amplitude FSS = 2 sqrt(a^2 + b^2) and the phase.
FitResult fit_fss(const std::vector<std::pair<double, double>>& energy_vs_angle);

double lorentzian_peak(double t, double height, double center, double half_width);

/// Single Lorentzian on the histogram; reports center, half_width and height.
FitResult fit_lorentzian(const Histogram1D& profile);

/// Four time-domain Lorentzians: a side component near `side_hint` and three main
/// components. Areas are summed over the histogram window; shares are relative to
/// `reference_area` when it is positive and to the data area otherwise. A positive
/// `side_half_width` pins the side component's width instead of fitting it.
FitResult decompose_side_peak(const Histogram1D& profile, double side_hint = 0.0, double reference_area = 0.0,
                              double side_half_width = 0.0);

// Synthetic generators used for self-validation. All noise is seeded.

struct VoigtScanSpec {
  double center = 0.0;
  double f_gaussian = 0.0;
  double f_lorentzian = 0.0;
  double amplitude = 1000.0;
  double offset = 0.0;
  double start = 0.0;
  double stop = 0.0;
  std::size_t bins = 200;
  bool poisson = true;
  double gaussian_noise = 0.0;
};
Histogram1D synthetic_voigt_scan(const VoigtScanSpec& spec, std::uint64_t seed);

struct EmgSpec {
  double lifetime = 1.52e-9;
  double sigma = 0.3e-9;
  double t0 = 5e-9;
  double peak_counts = 1e4;
  double bin_width = 50e-12;
  double start = 0.0;
  double stop = 25e-9;
  bool poisson = true;
};
Histogram1D synthetic_emg(const EmgSpec& spec, std::uint64_t seed);

struct G2Spec {
  double rep_period = 12.5e-9;
  int n_side_peaks = 12;
  double side_area = 2000.0;  ///< expected counts per side peak
  double center_ratio = 0.13;
  double sigma = 0.1e-9;
  double decay = 0.6e-9;
  double bin_width = 156.25e-12;
  double offset = 0.0;  ///< shift of every peak
  bool poisson = true;
};
Histogram1D synthetic_g2(const G2Spec& spec, std::uint64_t seed);

struct FssSpec {
  double fss = 5.5;
  double phase = 0.3;
  double offset = 0.0;
  double noise = 0.1;
  std::size_t angles = 36;
  double angle_start = 0.0;
  double angle_step = 10.0 * 3.14159265358979323846 / 180.0;
};
std::vector<std::pair<double, double>> synthetic_fss(const FssSpec& spec, std::uint64_t seed);

struct LorentzianComponent {
  double height = 0.0;
  double center = 0.0;
  double half_width = 0.0;
};
struct SidePeakSpec {
  LorentzianComponent side{100.0, 0.0, 1.0e-9};
  std::vector<LorentzianComponent> main{{200.0, 8e-9, 1.2e-9}, {120.0, 12e-9, 1.5e-9}, {60.0, 17e-9, 2.0e-9}};
  double start = -20e-9;
  double stop = 60e-9;
  double bin_width = 0.1e-9;
  double gaussian_noise = 0.0;
};
Histogram1D synthetic_side_peak_profile(const SidePeakSpec& spec, std::uint64_t seed);
/// Exact window area of one component of the synthetic profile.
double lorentzian_window_area(const LorentzianComponent& c, double start, double stop);

}  // namespace cslight::fit
