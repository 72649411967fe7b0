#pragma once

#include <numbers>

// Physical constants (SI, CODATA 2018) and the unit converters used at the
// CLI boundary. Everything inside the library is SI: s, Hz, m, K.

namespace cslight {

namespace constants {
inline constexpr double pi = std::numbers::pi;
inline constexpr double speed_of_light = 299792458.0;            // m/s
inline constexpr double planck_reduced = 1.054571817e-34;        // J s
inline constexpr double vacuum_permittivity = 8.8541878128e-12;  // F/m
inline constexpr double boltzmann = 1.380649e-23;                // J/K
inline constexpr double elementary_charge = 1.602176634e-19;     // C
inline constexpr double bohr_radius = 5.29177210903e-11;         // m
inline constexpr double torr = 133.322368421;                    // Pa
inline constexpr double zero_celsius = 273.15;                   // K
}  // namespace constants

namespace units {
constexpr double ghz(double v) { return v * 1e9; }
constexpr double mhz(double v) { return v * 1e6; }
constexpr double ns(double v) { return v * 1e-9; }
constexpr double ps(double v) { return v * 1e-12; }
constexpr double cm(double v) { return v * 1e-2; }
constexpr double celsius(double v) { return v + constants::zero_celsius; }

constexpr double to_ghz(double hz) { return hz * 1e-9; }
constexpr double to_mhz(double hz) { return hz * 1e-6; }
constexpr double to_ns(double s) { return s * 1e9; }
constexpr double to_celsius(double kelvin) { return kelvin - constants::zero_celsius; }
}  // namespace units

}  // namespace cslight
