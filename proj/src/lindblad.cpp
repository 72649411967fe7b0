#include "cslight/lindblad.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "cslight/units.hpp"

namespace cslight::lindblad {

using cd = std::complex<double>;
constexpr double two_pi = 2.0 * constants::pi;
constexpr cd I{0.0, 1.0};

ThreeLevelSystem ThreeLevelSystem::from_table(const atomic::TransitionTable& table,
                                              const medium::MediumOptions& options) {
  const auto& l3 = table.line(4, 3);
  const auto& l4 = table.line(4, 4);
  ThreeLevelSystem s;
  s.mu12 = l3.dipole;
  s.mu13 = l4.dipole;
  s.gamma2 = medium::line_damping(l3, options.damping);
  s.gamma3 = medium::line_damping(l4, options.damping);
  s.offset2 = l3.offset;
  s.offset3 = l4.offset;
  s.population_fraction = options.ground_weight(4);
  s.wavenumber = medium::wavenumber(table);
  s.gamma_d1 = table.gamma_d1;
  s.validate();
  return s;
}

void ThreeLevelSystem::validate() const {
  if (!(gamma2 > 0.0 && gamma3 > 0.0)) throw std::invalid_argument("decay rates must be positive");
  if (!(mu12 > 0.0 && mu13 > 0.0)) throw std::invalid_argument("dipole moments must be positive");
  if (!(population_fraction > 0.0 && population_fraction <= 1.0)) {
    throw std::invalid_argument("population fraction must lie in (0, 1]");
  }
  if (!(wavenumber > 0.0)) throw std::invalid_argument("wavenumber must be positive");
}

DensityMatrix ground_state() {
  DensityMatrix rho = DensityMatrix::Zero();
  rho(0, 0) = 1.0;
  return rho;
}

Eigen::Matrix3cd hamiltonian(cd field, const ThreeLevelSystem& s, double carrier_detuning) {
  const cd omega2 = s.mu12 * field / constants::planck_reduced;
  const cd omega3 = s.mu13 * field / constants::planck_reduced;
  Eigen::Matrix3cd h = Eigen::Matrix3cd::Zero();
  h(1, 1) = -two_pi * (carrier_detuning - s.offset2);
  h(2, 2) = -two_pi * (carrier_detuning - s.offset3);
  h(1, 0) = -0.5 * omega2;
  h(0, 1) = -0.5 * std::conj(omega2);
  h(2, 0) = -0.5 * omega3;
  h(0, 2) = -0.5 * std::conj(omega3);
  return h;
}

DensityMatrix lindblad_rhs(const DensityMatrix& rho, cd field, const ThreeLevelSystem& s, double carrier_detuning) {
  const Eigen::Matrix3cd h = hamiltonian(field, s, carrier_detuning);
  DensityMatrix d = -I * (h * rho - rho * h);
  const double rates[2] = {2.0 * s.gamma2, 2.0 * s.gamma3};
  for (int i = 1; i <= 2; ++i) {
    Eigen::Matrix3cd jump = Eigen::Matrix3cd::Zero();
    jump(0, i) = std::sqrt(rates[i - 1]);
    const Eigen::Matrix3cd jd = jump.adjoint();
    const Eigen::Matrix3cd n = jd * jump;
    d += jump * rho * jd - 0.5 * (n * rho + rho * n);
  }
  return d;
}

namespace {

// Unique elements of a Hermitian 3x3 density matrix.
struct Atom {
  cd r11{1.0, 0.0};
  cd r22{0.0, 0.0};
  cd r33{0.0, 0.0};
  cd r21{0.0, 0.0};
  cd r31{0.0, 0.0};
  cd r32{0.0, 0.0};
};

// Per-node factors of the exact free evolution over half a time step.
struct NodeRates {
  cd h21, h31, h32;  // coherence rotation and decay
  double q2, q3;     // surviving excited population
};

NodeRates node_rates(const ThreeLevelSystem& s, double carrier, double shift, double dt) {
  const double d2 = two_pi * (carrier - s.offset2 - shift);
  const double d3 = two_pi * (carrier - s.offset3 - shift);
  const double h = 0.5 * dt;
  NodeRates r;
  r.h21 = std::exp(cd(-s.gamma2, d2) * h);
  r.h31 = std::exp(cd(-s.gamma3, d3) * h);
  r.h32 = std::exp(cd(-(s.gamma2 + s.gamma3), d3 - d2) * h);
  r.q2 = std::exp(-2.0 * s.gamma2 * h);
  r.q3 = std::exp(-2.0 * s.gamma3 * h);
  return r;
}

// Spontaneous decay and free precession; an amplitude-damping channel, so
// positivity and trace survive for any step.
void free_half(Atom& a, const NodeRates& r) {
  a.r21 *= r.h21;
  a.r31 *= r.h31;
  a.r32 *= r.h32;
  const cd lost = a.r22 * (1.0 - r.q2) + a.r33 * (1.0 - r.q3);
  a.r22 *= r.q2;
  a.r33 *= r.q3;
  a.r11 += lost;
}

// Exact unitary of the constant coupling H = -(W/2)(|b><1| + |1><b|), with
// |b> the bright superposition of the two excited levels.
struct Coupling {
  bool active = false;
  cd u[3][3];
};

Coupling coupling_unitary(cd om2, cd om3, double dt) {
  Coupling k;
  const double w = std::sqrt(std::norm(om2) + std::norm(om3));
  if (w == 0.0) return k;
  k.active = true;
  const cd b2 = om2 / w, b3 = om3 / w;
  const double phi = 0.5 * w * dt;
  const double c = std::cos(phi), cm1 = c - 1.0;
  const cd is = I * std::sin(phi);
  const cd u[3][3] = {{c, is * std::conj(b2), is * std::conj(b3)},
                      {is * b2, 1.0 + cm1 * std::norm(b2), cm1 * b2 * std::conj(b3)},
                      {is * b3, cm1 * b3 * std::conj(b2), 1.0 + cm1 * std::norm(b3)}};
  std::copy(&u[0][0], &u[0][0] + 9, &k.u[0][0]);
  return k;
}

void couple(Atom& a, const Coupling& k) {
  if (!k.active) return;
  const auto& u = k.u;
  const cd m[3][3] = {{a.r11, std::conj(a.r21), std::conj(a.r31)},
                      {a.r21, a.r22, std::conj(a.r32)},
                      {a.r31, a.r32, a.r33}};
  cd t[3][3];
  for (int r = 0; r < 3; ++r) {
    for (int q = 0; q < 3; ++q) t[r][q] = u[r][0] * m[0][q] + u[r][1] * m[1][q] + u[r][2] * m[2][q];
  }
  auto el = [&](int r, int q) {
    return t[r][0] * std::conj(u[q][0]) + t[r][1] * std::conj(u[q][1]) + t[r][2] * std::conj(u[q][2]);
  };
  a.r11 = el(0, 0);
  a.r22 = el(1, 1);
  a.r33 = el(2, 2);
  a.r21 = el(1, 0);
  a.r31 = el(2, 0);
  a.r32 = el(2, 1);
}

// Strang splitting: half free step, coupling at the midpoint field, half free
// step. `half` is the state after the first free half step.
Atom atom_step(const Atom& half, const Coupling& k, const NodeRates& r) {
  Atom n = half;
  couple(n, k);
  free_half(n, r);
  return n;
}

DensityMatrix to_matrix(const Atom& a) {
  DensityMatrix m;
  m << a.r11, std::conj(a.r21), std::conj(a.r31),
       a.r21, a.r22, std::conj(a.r32),
       a.r31, a.r32, a.r33;
  return m;
}

CopropagationResult run_lattice(const pulse::PulseEnvelope& pulse, const atomic::VaporConditions& conditions,
                                const ThreeLevelSystem& s, const std::vector<pulse::QuadratureNode>& nodes,
                                const SolverOptions& opt) {
  s.validate();
  conditions.validate();
  if (opt.z_steps < 64) throw std::invalid_argument("z_steps must be at least 64");
  if (opt.iterations < 1) throw std::invalid_argument("iteration count must be positive");
  if (pulse.size() < 2) throw std::invalid_argument("pulse needs at least two samples");

  const double density = conditions.density();
  const std::size_t nt = pulse.size();
  const std::size_t nz = opt.z_steps;
  const std::size_t nv = nodes.size();
  const double dt = pulse.dt;
  const double dz = conditions.length / static_cast<double>(nz);
  const double kappa = s.wavenumber * density * s.population_fraction / constants::vacuum_permittivity;
  const cd coupling = I * kappa * dz * 0.5;
  const double hbar = constants::planck_reduced;

  // Physical field = scale * conj(envelope).
  double peak = 0.0;
  for (const auto& a : pulse.samples) peak = std::max(peak, std::abs(a));
  if (!(peak > 0.0)) throw std::invalid_argument("pulse has no amplitude");
  const double scale = opt.peak_rabi * s.gamma_d1 * hbar / (std::max(s.mu12, s.mu13) * peak);

  // Coherences rotating faster than the sampling can follow fold back onto the carrier.
  const double nyquist = 0.45 / dt;
  for (const auto& node : nodes) {
    for (const double off : {s.offset2, s.offset3}) {
      if (std::abs(pulse.carrier_detuning - off - node.offset) > nyquist) {
        throw std::invalid_argument("time step too coarse for this detuning: reduce dt below 0.45 / |detuning|");
      }
    }
  }

  std::vector<NodeRates> rates;
  rates.reserve(nv);
  for (const auto& node : nodes) rates.push_back(node_rates(s, pulse.carrier_detuning, node.offset, dt));

  std::vector<Atom> atoms((nz + 1) * nv);
  std::vector<Atom> trial(nv);
  std::vector<Atom> half(nv);
  std::vector<cd> field_old(nz + 1, scale * std::conj(pulse.samples[0]));
  std::vector<cd> field_new(nz + 1);
  std::vector<double> slice_energy(nz + 1, 0.0);
  for (std::size_t j = 0; j <= nz; ++j) slice_energy[j] += std::norm(field_old[j]);

  auto polarization = [&](const Atom* a) {
    cd p = 0.0;
    for (std::size_t v = 0; v < nv; ++v) p += nodes[v].weight * (s.mu12 * a[v].r21 + s.mu13 * a[v].r31);
    return p;
  };

  Diagnostics diag;
  diag.min_eigenvalue = 0.0;
  pulse::PulseEnvelope out = pulse;
  out.samples[0] = pulse.samples[0];

  for (std::size_t n = 0; n + 1 < nt; ++n) {
    const cd input = scale * std::conj(pulse.samples[n + 1]);
    cd p_prev = 0.0;
    for (std::size_t j = 0; j <= nz; ++j) {
      Atom* slice = &atoms[j * nv];
      const cd e_old = field_old[j];
      cd e_new = j == 0 ? input : field_new[j - 1] + coupling * 2.0 * p_prev;
      for (std::size_t v = 0; v < nv; ++v) {
        half[v] = slice[v];
        free_half(half[v], rates[v]);
      }
      cd p_new = 0.0;
      for (int it = 0; it < opt.iterations; ++it) {
        const cd e_mid = 0.5 * (e_old + e_new);
        const Coupling k = coupling_unitary(s.mu12 * e_mid / hbar, s.mu13 * e_mid / hbar, dt);
        for (std::size_t v = 0; v < nv; ++v) trial[v] = atom_step(half[v], k, rates[v]);
        p_new = polarization(trial.data());
        if (j > 0) e_new = field_new[j - 1] + coupling * (p_prev + p_new);
      }
      for (std::size_t v = 0; v < nv; ++v) {
        slice[v] = trial[v];
        const Atom& a = trial[v];
        diag.max_trace_error = std::max(diag.max_trace_error, std::abs(a.r11 + a.r22 + a.r33 - 1.0));
        diag.max_hermiticity_error =
            std::max({diag.max_hermiticity_error, std::abs(a.r11.imag()), std::abs(a.r22.imag()), std::abs(a.r33.imag())});
        if (opt.check_positivity) {
          const Eigen::SelfAdjointEigenSolver<Eigen::Matrix3cd> es(to_matrix(a), Eigen::EigenvaluesOnly);
          diag.min_eigenvalue = std::min(diag.min_eigenvalue, es.eigenvalues().minCoeff());
        }
      }
      field_new[j] = e_new;
      slice_energy[j] += std::norm(e_new);
      p_prev = p_new;
    }
    if (!std::isfinite(field_new[nz].real()) || !std::isfinite(field_new[nz].imag())) {
      throw std::runtime_error("co-propagation diverged (non-finite field)");
    }
    out.samples[n + 1] = std::conj(field_new[nz]) / scale;
    std::swap(field_old, field_new);
  }

  for (std::size_t j = 1; j <= nz; ++j) {
    diag.energy_growth = std::max(diag.energy_growth, slice_energy[j] / slice_energy[0] - 1.0);
  }
  diag.lattice_points = (nz + 1) * nt * nv;
  if (opt.check_positivity && diag.min_eigenvalue < -1e-8) {
    throw std::runtime_error("co-propagation lost positivity of the density matrix");
  }
  if (diag.energy_growth > opt.divergence_threshold) {
    throw std::runtime_error("co-propagation diverged: slice energy grew beyond the threshold");
  }
  return {std::move(out), diag};
}

}  // namespace

CopropagationResult copropagate(const pulse::PulseEnvelope& pulse, const atomic::VaporConditions& conditions,
                                const ThreeLevelSystem& system, std::size_t z_steps) {
  SolverOptions opt;
  opt.z_steps = z_steps;
  return copropagate(pulse, conditions, system, opt);
}

CopropagationResult copropagate(const pulse::PulseEnvelope& pulse, const atomic::VaporConditions& conditions,
                                const ThreeLevelSystem& system, const SolverOptions& options) {
  return run_lattice(pulse, conditions, system, {{0.0, 1.0}}, options);
}

std::vector<pulse::QuadratureNode> velocity_nodes(double sigma, std::size_t count) {
  if (count == 0) throw std::invalid_argument("need at least one velocity node");
  if (count == 1 || !(sigma > 0.0)) return {{0.0, 1.0}};
  std::vector<pulse::QuadratureNode> nodes(count);
  const double spacing = 8.0 * sigma / static_cast<double>(count - 1);
  double total = 0.0;
  for (std::size_t i = 0; i < count; ++i) {
    const double x = -4.0 * sigma + spacing * static_cast<double>(i);
    nodes[i] = {x, std::exp(-0.5 * x * x / (sigma * sigma))};
    total += nodes[i].weight;
  }
  for (auto& n : nodes) n.weight /= total;
  return nodes;
}

CopropagationResult doppler_average_copropagate(const pulse::PulseEnvelope& pulse,
                                                const atomic::VaporConditions& conditions,
                                                const ThreeLevelSystem& system, std::size_t count,
                                                const SolverOptions& options) {
  if (count != 1 && count < 7) throw std::invalid_argument("velocity_nodes must be 1 or at least 7");
  const double sigma = conditions.doppler_sigma(atomic::transition_table());
  return run_lattice(pulse, conditions, system, velocity_nodes(sigma, count), options);
}

pulse::PulseEnvelope linear_two_line_output(const pulse::PulseEnvelope& pulse,
                                            const atomic::VaporConditions& conditions,
                                            const atomic::TransitionTable& table,
                                            const medium::MediumOptions& options) {
  const std::size_t n = pulse.size();
  const double df = 1.0 / (static_cast<double>(n) * pulse.dt);
  medium::FrequencyGrid grid;
  grid.step = df;
  grid.start = pulse.carrier_detuning - static_cast<double>(n / 2 + 2) * df;
  grid.count = n + 4;
  auto h = medium::transfer_function(grid, conditions, table.restricted_to_ground(4), options);
  const auto vac = medium::vacuum_transfer(grid, conditions.length);
  for (std::size_t i = 0; i < h.size(); ++i) h.values[i] *= std::conj(vac.values[i]);
  return pulse::propagate(pulse, h);
}

ComparisonPoint compare_models(const ComparisonConfig& config, double com_detuning) {
  const auto table = atomic::transition_table();
  const auto system = ThreeLevelSystem::from_table(table, config.medium);
  const auto input = pulse::gaussian_pulse(com_detuning, config.bandwidth, config.grid);
  const auto lattice = config.velocity_nodes > 1
                           ? doppler_average_copropagate(input, config.conditions, system, config.velocity_nodes,
                                                         config.solver)
                           : copropagate(input, config.conditions, system, config.solver);
  const auto linear = linear_two_line_output(input, config.conditions, table, config.medium);

  ComparisonPoint p;
  p.detuning = com_detuning;
  p.diagnostics = lattice.diagnostics;
  p.lindblad_profile = pulse::intensity(lattice.output);
  p.linear_profile = pulse::intensity(linear);
  const auto ref = pulse::intensity(input);
  p.lindblad_transmission = pulse::transmission(p.lindblad_profile, ref);
  p.linear_transmission = pulse::transmission(p.linear_profile, ref);
  const double peak = *std::max_element(p.linear_profile.values.begin(), p.linear_profile.values.end());
  for (std::size_t i = 0; i < ref.size(); ++i) {
    p.max_profile_deviation =
        std::max(p.max_profile_deviation, std::abs(p.lindblad_profile.values[i] - p.linear_profile.values[i]));
  }
  if (peak > 0.0) p.max_profile_deviation /= peak;
  return p;
}

}  // namespace cslight::lindblad
