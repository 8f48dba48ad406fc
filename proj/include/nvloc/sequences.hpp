#pragma once

#include "nvloc/hamiltonian.hpp"
#include "nvloc/vec3.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace nvloc {

enum class ReadoutPhase { X, Y };

/// Carr-Purcell sequence: N equally spaced pi pulses, inter-pulse spacing tau.
struct CpParams {
    int n_pulses = 16;  // even, positive
    double tau_us = 1.0;
    ReadoutPhase readout = ReadoutPhase::X;
};

/// Sensor-conditioned rotation axes of one CP cycle. The propagator for N
/// pulses is a rotation by N*phi_cp about n0 (sensor |0>) or n1 (sensor |1>).
/// `transparent` flags the degenerate phi_cp in {0, pi} where the axes are
/// undefined and the sequence does nothing to the nucleus.
struct CpAxes {
    Vec3 n0 = e_z;
    Vec3 n1 = e_z;
    double phi_cp = 0.0;  // [0, pi]
    double dot = 1.0;     // n0 . n1
    bool transparent = false;
};

enum class PulsePolVariant { PolX, PolY };

/// PulsePol: tau_pol is the half-cycle (one full cycle of the phase pattern
/// spans 2*tau_pol and holds eight pulses); n_pol cycles form one transfer
/// block, repeated n_rep times with sensor re-initialisation in between.
struct PulsePolParams {
    double tau_pol_us = 4.976;
    int n_pol = 5;
    int n_rep = 5;
    PulsePolVariant variant = PulsePolVariant::PolY;
};

/// Nuclear spin state as a Bloch vector, |bloch| <= 1 (mixed states allowed).
struct NuclearSpinState {
    Vec3 bloch{};
    std::string label{};
};

/// Compose one CP cycle per sensor branch (U0 U1^2 U0 and U1 U0^2 U1) and
/// decompose into the conditioned axes and per-pulse angle phi_cp.
CpAxes cp_axes(const ConditionalPrecession& prec, const CpParams& p);

/// Transition probability with the (pi/2)_X readout:
/// P_X = 1 - (1 - n0.n1)/2 * sin^2(N phi_cp / 2). Independent of the nuclear
/// state.
double transition_probability_x(const CpAxes& axes, int n_pulses);

/// Transition probability with the (pi/2)_Y readout:
/// P_Y = 1/2 + nu.{(n0 - n1) sin(N phi_cp) + 2 (n0 x n1) sin^2(N phi_cp/2)}/4.
double transition_probability_y(const NuclearSpinState& state, const CpAxes& axes,
                                int n_pulses);

/// Correlation spectroscopy: [(pi/2)_X CP (pi/2)_Y] - free(t_corr) -
/// [(pi/2)_X CP (pi/2)_Y], starting from an unpolarized nucleus. The sensor
/// coherence dephases during the free interval (populations kept). Returns
/// the transition probability for each grid point.
std::vector<double> correlation_trace(const ConditionalPrecession& prec,
                                      const CpParams& p,
                                      std::span<const double> t_corr_grid_us);

struct PulsePolResult {
    double p0 = 1.0;  // mean sensor survival over the n_rep blocks
    NuclearSpinState final_state{};
};

/// Polarization transfer by PulsePol, exact joint-propagator simulation.
/// Resonances at 2*tau_pol = k/f_n (k odd); at k = 3 PolY drives the nucleus
/// toward m_I = -1/2 and PolX toward +1/2, at k = 5 the directions swap.
PulsePolResult pulsepol_transfer(const ConditionalPrecession& prec,
                                 const PulsePolParams& pp,
                                 const NuclearSpinState& initial);

/// Selective RF pi pulse: frequency and length; a spin is inverted iff its
/// f1 lies within the Rabi linewidth 1/(2 t_pi) of the carrier.
struct RfPiPulse {
    double frequency_khz = 215.6;
    double t_pi_us = 199.443;
};

struct SelectiveResult {
    std::vector<NuclearSpinState> states;  // target first, then the others
    std::vector<double> p0_final;          // per-spin survival of the last PolY
    double p0_combined = 1.0;              // independence product rule
};

/// The selective-polarization sequence: (1) nine PolY blocks polarize every
/// spin resonant at tau_pol, (2) microwave pi (implicit), (3) optional
/// selective RF pi inverts only near-resonant spins, (4) one more PolY block
/// whose transfer is read out. Spins are treated as mutually independent.
/// `passes` repeats the whole sequence with the nuclear state carried over;
/// experimentally the sequence runs many times back to back and the bath
/// polarization builds up to this steady state (the unselective reference
/// starts each run with a depolarizer instead).
SelectiveResult selective_polarization(const ConditionalPrecession& prec_target,
                                       std::span<const ConditionalPrecession> prec_others,
                                       const PulsePolParams& pp,
                                       const std::optional<RfPiPulse>& rf, int passes = 1);

/// Coherently averaged synchronized readout: the N-pulse CP block with the
/// (pi/2)_Y readout repeats at interval t_L while every (polarized, tipped)
/// bath spin precesses about e_z at f0 between blocks. Per-spin readings are
/// combined by the independence product rule on contrast. `initial` holds
/// the post-tip Bloch vectors, one per bath spin.
std::vector<double> synchronized_readout(std::span<const ConditionalPrecession> bath,
                                         std::span<const Vec3> initial,
                                         double t_l_us, int m_blocks,
                                         const CpParams& p);

/// Phenomenological contrast decay: pulls p toward `baseline` by
/// exp(-t/decay_time).
double apply_contrast_decay(double p, double baseline, double t_us, double decay_time_us);

/// Published estimate of the block count needed to transfer one unit of
/// angular momentum at the k = 3 resonance:
/// n_rep >= pi f_t / (3 (2 + sqrt 2) A_perp n_pol).
/// Informational only; direct substitution of the experimental values gives
/// ~0.8 while the source quotes ~2.5, so nothing is asserted against it.
double pulsepol_transfer_blocks_estimate(double f_t_khz, double a_perp_khz, int n_pol);

}  // namespace nvloc
