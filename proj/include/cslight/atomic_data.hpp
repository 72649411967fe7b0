#pragma once

#include <optional>
#include <string>
#include <vector>

namespace cslight::atomic {

/// One hyperfine component F -> F' of the Cs D1 line.
struct TransitionLine {
  int f_ground = 0;
  int f_excited = 0;
  double offset = 0.0;    ///< Hz, relative to the D1 center of mass
  double strength = 0.0;  ///< relative strength S_{F,F'}
  double dipole = 0.0;    ///< C m, sqrt(S) * mu_D1
  double gamma = 0.0;     ///< rad/s, S * Gamma_D1
};

struct TransitionTable {
  std::vector<TransitionLine> lines;
  double com_frequency = 0.0;   ///< Hz
  double com_wavelength = 0.0;  ///< m (vacuum)
  double gamma_d1 = 0.0;        ///< rad/s
  double mu_d1 = 0.0;           ///< C m
  double ground_splitting = 0.0;
  double excited_splitting = 0.0;

  /// Position of a ground level relative to the ground-state center of mass.
  double ground_level(int f) const;
  /// Position of an excited level relative to the excited-state center of mass.
  double excited_level(int f_excited) const;
  /// F -> 6P1/2 (excited center of mass) transition, relative to the D1 center of mass.
  double ground_transition(int f) const;
  /// Midpoint between the F=3 and F=4 ground transitions.
  double hyperfine_midpoint() const;

  const TransitionLine& line(int f_ground, int f_excited) const;
  /// Subset of lines starting from one ground level.
  TransitionTable restricted_to_ground(int f) const;
};

/// Cs D1 data. Strengths, Gamma_D1 and mu_D1 as tabulated for the D1 line;
/// splittings from the standard Cs reference data.
TransitionTable transition_table();

/// Dipole column as literally tabulated (multiples of mu_D1). It does not agree
/// with the strength column; kept for reference only and not used by the model.
struct TabulatedDipoleFactor {
  int f_ground;
  int f_excited;
  double factor_squared;
};
std::vector<TabulatedDipoleFactor> tabulated_dipole_column();

/// Saturated vapor-pressure law, Pa as a function of temperature (K).
struct VaporPressureModel {
  std::string name;
  double (*pressure)(double temperature) = nullptr;
};

double cs_liquid_vapor_pressure(double temperature);
double cs_solid_vapor_pressure(double temperature);
/// Solid below the 301.59 K melting point, liquid above.
double cs_two_phase_vapor_pressure(double temperature);

VaporPressureModel default_vapor_pressure_model();
std::optional<VaporPressureModel> find_vapor_pressure_model(const std::string& name);
std::vector<std::string> vapor_pressure_model_names();

struct VaporConditions {
  double temperature = 0.0;  ///< K
  double length = 0.0;       ///< m
  std::optional<double> density_override;        ///< m^-3
  std::optional<double> doppler_sigma_override;  ///< Hz; zero disables Doppler broadening
  VaporPressureModel vapor_model = default_vapor_pressure_model();

  void validate() const;
  double density() const;
  double doppler_sigma(const TransitionTable& table) const;
};

/// P_vap(T) / (k_B T).
double number_density(double temperature, const VaporPressureModel& model = default_vapor_pressure_model());

/// 1-sigma width (Hz) of the one-dimensional Doppler shift distribution at the D1 carrier.
double doppler_sigma(double temperature);
double doppler_sigma(double temperature, const TransitionTable& table);

inline constexpr double cs133_mass = 2.20694650e-25;  // kg
inline constexpr double fwhm_per_sigma = 2.3548200450309493;  // 2 sqrt(2 ln 2)

std::string transition_table_json(const TransitionTable& table);

}  // namespace cslight::atomic
