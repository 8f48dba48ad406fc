#pragma once

#include "nvloc/vec3.hpp"

#include <span>
#include <utility>
#include <vector>

namespace nvloc {

/// Vector DC magnetometry result: zero-field splitting plus the coil field
/// in the laboratory frame.
struct FieldFit {
    double d_mhz = 0.0;
    double b_mag_mt = 0.0;
    double theta_lab = 0.0;
    double phi_lab = 0.0;
    double residual_rms_mhz = 0.0;
};

/// One NV orientation and its two measured transitions.
struct FieldObservation {
    Vec3 nv_axis;  // unit vector, laboratory coordinate
    double f_minus_mhz = 0.0;
    double f_plus_mhz = 0.0;
};

/// Least squares over (D, B vector) with nv_resonances as the forward model:
/// 1-degree lattice over the field direction with (D, |B|) solved at each
/// node, then golden refinement. Needs observations on >= 2 distinct axes.
FieldFit fit_field(std::span<const FieldObservation> observations,
                   double gamma_e_mhz_mt = 28.0);

/// CP sensing window: N pi pulses spaced tau; the modulation y(t) is +1 on
/// [0, tau/2), alternates sign every tau, and ends +1 on the final half
/// interval, supported on [0, N tau).
struct SensingWindow {
    double tau_us = 2.319;
    int n_pulses = 4;  // even
};

/// The (start, end, sign) pieces of y(t).
std::vector<std::tuple<double, double, int>> modulation_segments(const SensingWindow& w);

/// Cosine burst W(t) = Vpp cos(2 pi f (t - start) + phi_rf) on
/// [start, start + duration].
struct CosineBurst {
    double f_khz = 215.6;
    double start_us = 11.0;
    double duration_us = 4.0 * 2.319;
    double phi_rf = 0.0;
};

/// Accumulated sensor phase: 2 pi gamma_e b_rf * integral of the delayed
/// waveform times the shifted window, by exact piecewise integration of
/// cosine segments. b_rf in mT, gamma_e in MHz/mT, result in radians.
double accumulated_phase(const SensingWindow& window, const CosineBurst& waveform,
                         double t_delay_us, double t_wait_us, double b_rf_mt,
                         double gamma_e_mhz_mt = 28.0);

struct DelayFit {
    double t_delay_us = 0.0;
    double stderr_us = 0.0;
    double b_rf_mt = 0.0;
    double residual_rms = 0.0;
};

/// Least squares of P_Y(t_wait) = (1 - sin phi)/2 over (t_delay, b_rf).
/// Throws on a flat (unidentifiable) scan.
DelayFit estimate_delay(std::span<const std::pair<double, double>> scan,
                        const SensingWindow& window, const CosineBurst& waveform,
                        double gamma_e_mhz_mt = 28.0);

}  // namespace nvloc
