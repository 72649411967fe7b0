#include "cslight/atomic_data.hpp"

#include <cmath>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "cslight/units.hpp"

namespace cslight::atomic {

namespace {

constexpr double d1_frequency = 335.116048807e12;   // Hz
constexpr double ground_hfs = 9.192631770e9;        // Hz, defines the SI second
constexpr double excited_hfs = 1.167680e9;          // Hz, 6P1/2
constexpr double gamma_d1_value = 2.0 * constants::pi * 4.5612e6;
constexpr double mu_d1_ea0 = 3.1822;
constexpr double cs_melting_point = 301.59;  // K

struct StrengthEntry {
  int f;
  int fp;
  double s;
};
constexpr StrengthEntry strengths[] = {
    {3, 3, 1.0 / 4.0}, {3, 4, 3.0 / 4.0}, {4, 3, 7.0 / 12.0}, {4, 4, 5.0 / 12.0}};

void require_positive_temperature(double temperature) {
  if (!(temperature > 0.0) || !std::isfinite(temperature)) {
    throw std::invalid_argument("temperature must be positive and finite");
  }
}

}  // namespace

double TransitionTable::ground_level(int f) const {
  // F=3 has 7 sublevels, F=4 has 9; the center of mass weights them accordingly.
  if (f == 3) return -9.0 / 16.0 * ground_splitting;
  if (f == 4) return 7.0 / 16.0 * ground_splitting;
  throw std::invalid_argument("ground F must be 3 or 4");
}

double TransitionTable::excited_level(int f_excited) const {
  if (f_excited == 3) return -9.0 / 16.0 * excited_splitting;
  if (f_excited == 4) return 7.0 / 16.0 * excited_splitting;
  throw std::invalid_argument("excited F' must be 3 or 4");
}

double TransitionTable::ground_transition(int f) const { return -ground_level(f); }

double TransitionTable::hyperfine_midpoint() const {
  return 0.5 * (ground_transition(3) + ground_transition(4));
}

const TransitionLine& TransitionTable::line(int f_ground, int f_excited) const {
  for (const auto& l : lines) {
    if (l.f_ground == f_ground && l.f_excited == f_excited) return l;
  }
  throw std::out_of_range("no such hyperfine line");
}

TransitionTable TransitionTable::restricted_to_ground(int f) const {
  TransitionTable out = *this;
  out.lines.clear();
  for (const auto& l : lines) {
    if (l.f_ground == f) out.lines.push_back(l);
  }
  return out;
}

TransitionTable transition_table() {
  TransitionTable table;
  table.com_frequency = d1_frequency;
  table.com_wavelength = constants::speed_of_light / d1_frequency;
  table.gamma_d1 = gamma_d1_value;
  table.mu_d1 = mu_d1_ea0 * constants::elementary_charge * constants::bohr_radius;
  table.ground_splitting = ground_hfs;
  table.excited_splitting = excited_hfs;
  for (const auto& e : strengths) {
    TransitionLine l;
    l.f_ground = e.f;
    l.f_excited = e.fp;
    l.offset = table.excited_level(e.fp) - table.ground_level(e.f);
    l.strength = e.s;
    l.dipole = std::sqrt(e.s) * table.mu_d1;
    l.gamma = e.s * table.gamma_d1;
    table.lines.push_back(l);
  }
  return table;
}

std::vector<TabulatedDipoleFactor> tabulated_dipole_column() {
  return {{3, 3, 7.0 / 12.0}, {3, 4, 7.0 / 4.0}, {4, 3, 7.0 / 4.0}, {4, 4, 5.0 / 4.0}};
}

double cs_liquid_vapor_pressure(double temperature) {
  require_positive_temperature(temperature);
  const double log10_torr = 8.22127 - 4006.048 / temperature - 0.00060194 * temperature -
                            0.19623 * std::log10(temperature);
  return std::pow(10.0, log10_torr) * constants::torr;
}

double cs_solid_vapor_pressure(double temperature) {
  require_positive_temperature(temperature);
  const double log10_torr = 2.881 + 4.711 - 3999.0 / temperature;
  return std::pow(10.0, log10_torr) * constants::torr;
}

double cs_two_phase_vapor_pressure(double temperature) {
  return temperature < cs_melting_point ? cs_solid_vapor_pressure(temperature)
                                        : cs_liquid_vapor_pressure(temperature);
}

VaporPressureModel default_vapor_pressure_model() {
  return {"cs_liquid", &cs_liquid_vapor_pressure};
}

std::optional<VaporPressureModel> find_vapor_pressure_model(const std::string& name) {
  if (name == "cs_liquid") return VaporPressureModel{name, &cs_liquid_vapor_pressure};
  if (name == "cs_solid") return VaporPressureModel{name, &cs_solid_vapor_pressure};
  if (name == "cs_two_phase") return VaporPressureModel{name, &cs_two_phase_vapor_pressure};
  return std::nullopt;
}

std::vector<std::string> vapor_pressure_model_names() {
  return {"cs_liquid", "cs_solid", "cs_two_phase"};
}

double number_density(double temperature, const VaporPressureModel& model) {
  require_positive_temperature(temperature);
  return model.pressure(temperature) / (constants::boltzmann * temperature);
}

double doppler_sigma(double temperature, const TransitionTable& table) {
  require_positive_temperature(temperature);
  return table.com_frequency / constants::speed_of_light *
         std::sqrt(constants::boltzmann * temperature / cs133_mass);
}

double doppler_sigma(double temperature) { return doppler_sigma(temperature, transition_table()); }

void VaporConditions::validate() const {
  require_positive_temperature(temperature);
  if (!(length > 0.0) || !std::isfinite(length)) {
    throw std::invalid_argument("cell length must be positive");
  }
  if (density_override && !(*density_override >= 0.0)) {
    throw std::invalid_argument("density override must be non-negative");
  }
  if (doppler_sigma_override && !(*doppler_sigma_override >= 0.0)) {
    throw std::invalid_argument("Doppler width override must be non-negative");
  }
  if (!vapor_model.pressure) throw std::invalid_argument("vapor-pressure model not set");
}

double VaporConditions::density() const {
  if (density_override) return *density_override;
  return number_density(temperature, vapor_model);
}

double VaporConditions::doppler_sigma(const TransitionTable& table) const {
  if (doppler_sigma_override) return *doppler_sigma_override;
  return atomic::doppler_sigma(temperature, table);
}

std::string transition_table_json(const TransitionTable& table) {
  nlohmann::ordered_json j;
  j["com_frequency_Hz"] = table.com_frequency;
  j["com_wavelength_nm"] = table.com_wavelength * 1e9;
  j["gamma_d1_rad_per_s"] = table.gamma_d1;
  j["mu_d1_Cm"] = table.mu_d1;
  j["ground_splitting_Hz"] = table.ground_splitting;
  j["excited_splitting_Hz"] = table.excited_splitting;
  auto& arr = j["lines"] = nlohmann::ordered_json::array();
  for (const auto& l : table.lines) {
    arr.push_back({{"F", l.f_ground},
                   {"F_prime", l.f_excited},
                   {"offset_Hz", l.offset},
                   {"strength", l.strength},
                   {"dipole_Cm", l.dipole},
                   {"gamma_rad_per_s", l.gamma}});
  }
  auto& tab = j["tabulated_dipole_factor_squared"] = nlohmann::ordered_json::array();
  for (const auto& d : tabulated_dipole_column()) {
    tab.push_back({{"F", d.f_ground}, {"F_prime", d.f_excited}, {"mu_over_mu_d1_squared", d.factor_squared}});
  }
  return j.dump(2);
}

}  // namespace cslight::atomic
