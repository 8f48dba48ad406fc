#pragma once

#include "nvloc/hamiltonian.hpp"

#include <optional>
#include <span>
#include <utility>
#include <vector>

namespace nvloc {

/// Result of fitting A cos(2 pi f t + phi_0) [exp(-t/T)] + B.
struct OscillationFit {
    double amplitude = 0.0;          // >= 0
    double offset = 0.0;
    double frequency_khz = 0.0;
    double phase = 0.0;              // at t = 0 of the supplied axis, [0, 2*pi)
    std::optional<double> decay_time_us{};
    double residual_rms = 0.0;
    bool converged = true;
};

struct FitOptions {
    bool fit_decay = false;
    double hint_span = 0.05;   // coarse grid covers f_hint * (1 +- span)
    int grid_points = 201;
};

/// Deterministic damped-cosine fit: coarse frequency grid around f_hint with
/// linear least squares per grid point, then golden-section refinement (and
/// an outer decay-time search when enabled). Requires >= 8 samples spanning
/// at least one period of f_hint.
OscillationFit fit_damped_cosine(std::span<const double> times_us,
                                 std::span<const double> values, double f_hint_khz,
                                 const FitOptions& opts = {});

/// Invert the CP nutation frequency to the hyperfine parameters:
///   A_par  = [cos a cos b - cos(pi - 2 pi f_cp tau)] f1/(sin a sin b) - f0,
///   A_perp = sqrt(f1^2 - (f0 + A_par)^2),
/// with a = pi f0 tau, b = pi f1 tau.
HyperfineParams estimate_hyperfine(double f_cp_khz, double f0_khz, double f1_khz,
                                   double tau_us);

/// Alias order and aliased frequency for sampling at interval dt:
/// f_N = 1/(2 dt), m = floor(f/f_N), f_alias = f - m f_N. Only even m is
/// supported (the odd-m mirror branch is rejected).
std::pair<int, double> undersampling_map(double f_khz, double dt_us);

struct UndersamplingConfig {
    double dt_us = 9.6;
    double t0_us = 6.872;
    int m = 4;  // non-negative even alias order
};

/// True oscillation phase from the aliased fit phase:
/// eta = eta_alias - m pi t0/dt (mod 2 pi).
double recover_phase(double eta_alias, const UndersamplingConfig& cfg);

/// Independent-spin combination: P = (1 + prod(2 P_i - 1))/2.
double combine_independent(std::span<const double> probabilities);

/// Dominant spectral peaks of a uniformly sampled trace (mean removed),
/// returned as (frequency_khz, magnitude) sorted by magnitude, strongest
/// first. Plain DFT bins, no interpolation.
std::vector<std::pair<double, double>> dominant_peaks(std::span<const double> values,
                                                      double dt_us, int n_peaks);

}  // namespace nvloc
