#pragma once

#include <complex>
#include <cstddef>
#include <vector>

#include <Eigen/Dense>

#include "cslight/atomic_data.hpp"
#include "cslight/pulse_engine.hpp"
#include "cslight/vapor_medium.hpp"

namespace cslight::lindblad {

/// One ground level (F=4) coupled to both excited levels F'=3 and F'=4.
/// Level indices: 0 = ground, 1 = F'=3, 2 = F'=4.
struct ThreeLevelSystem {
  double mu12 = 0.0;     ///< C m, ground -> F'=3
  double mu13 = 0.0;     ///< C m, ground -> F'=4
  double gamma2 = 0.0;   ///< rad/s, coherence damping of level 2 (population decays at 2 gamma2)
  double gamma3 = 0.0;   ///< rad/s
  double offset2 = 0.0;  ///< Hz, transition frequency relative to the D1 center of mass
  double offset3 = 0.0;  ///< Hz
  double population_fraction = 1.0;  ///< share of atoms in the modeled ground level
  double wavenumber = 0.0;           ///< rad/m
  double gamma_d1 = 0.0;             ///< rad/s, sets the field scale

  /// Builds the F=4 subsystem with the same damping convention and ground weight as the linear model.
  static ThreeLevelSystem from_table(const atomic::TransitionTable& table, const medium::MediumOptions& options = {});
  double excited_splitting() const { return offset3 - offset2; }
  void validate() const;
};

using DensityMatrix = Eigen::Matrix3cd;

DensityMatrix ground_state();

/// Rotating-frame Hamiltonian in angular-frequency units (H / hbar) for a physical
/// field amplitude (V/m) and a carrier at `carrier_detuning` (Hz, center of mass).
Eigen::Matrix3cd hamiltonian(std::complex<double> field, const ThreeLevelSystem& system, double carrier_detuning);

/// -i[H, rho] + sum_i 2 gamma_i (sigma_1i rho sigma_i1 - 1/2 {sigma_ii, rho}).
DensityMatrix lindblad_rhs(const DensityMatrix& rho, std::complex<double> field, const ThreeLevelSystem& system,
                           double carrier_detuning);

struct SolverOptions {
  std::size_t z_steps = 256;
  int iterations = 3;
  /// Peak Rabi frequency of the strongest transition in units of Gamma_D1.
  double peak_rabi = 1e-4;
  double divergence_threshold = 1e-3;
  bool check_positivity = false;
};

struct Diagnostics {
  double max_trace_error = 0.0;
  double max_hermiticity_error = 0.0;
  double min_eigenvalue = 0.0;  ///< only filled when positivity checking is enabled
  double energy_growth = 0.0;   ///< max over slices of E(z) / E(0) - 1
  std::size_t lattice_points = 0;
};

struct CopropagationResult {
  pulse::PulseEnvelope output;
  Diagnostics diagnostics;
};

/// Co-propagates the field with the atoms on the (z, retarded time) lattice. The
/// solver works in the physical phase convention internally and returns an
/// envelope in the same convention as the input. Throws std::runtime_error when
/// the slice energy grows by more than the divergence threshold.
CopropagationResult copropagate(const pulse::PulseEnvelope& pulse, const atomic::VaporConditions& conditions,
                                const ThreeLevelSystem& system, std::size_t z_steps);
CopropagationResult copropagate(const pulse::PulseEnvelope& pulse, const atomic::VaporConditions& conditions,
                                const ThreeLevelSystem& system, const SolverOptions& options);

/// Evenly spaced Doppler shifts over +-4 sigma with normalized Gaussian weights.
/// A single node sits at zero shift.
std::vector<pulse::QuadratureNode> velocity_nodes(double sigma, std::size_t count);

/// Same lattice with one atom ensemble per velocity node; the polarization driving
/// the field is the weighted sum over nodes.
CopropagationResult doppler_average_copropagate(const pulse::PulseEnvelope& pulse,
                                                const atomic::VaporConditions& conditions,
                                                const ThreeLevelSystem& system, std::size_t velocity_nodes,
                                                const SolverOptions& options = {});

/// Linear transfer-function output restricted to the F=4 lines, with the vacuum
/// phase removed so it shares the retarded-time frame of the lattice solver.
pulse::PulseEnvelope linear_two_line_output(const pulse::PulseEnvelope& pulse,
                                            const atomic::VaporConditions& conditions,
                                            const atomic::TransitionTable& table,
                                            const medium::MediumOptions& options = {});

struct ComparisonPoint {
  double detuning = 0.0;  ///< Hz, carrier relative to the D1 center of mass
  double lindblad_transmission = 0.0;
  double linear_transmission = 0.0;
  double max_profile_deviation = 0.0;  ///< max |I_lindblad - I_linear| / max I_linear
  Diagnostics diagnostics;
  pulse::IntensityProfile lindblad_profile;
  pulse::IntensityProfile linear_profile;
};

struct ComparisonConfig {
  atomic::VaporConditions conditions;
  double bandwidth = 50e6;  ///< Hz, Gaussian probe
  pulse::TimeGrid grid{62.5e-12, 1e-6, 0.05};
  std::size_t velocity_nodes = 1;
  SolverOptions solver;
  medium::MediumOptions medium;
};

ComparisonPoint compare_models(const ComparisonConfig& config, double com_detuning);

}  // namespace cslight::lindblad
