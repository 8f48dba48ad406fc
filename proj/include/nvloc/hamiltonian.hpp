#pragma once

#include "nvloc/vec3.hpp"

#include <optional>
#include <utility>

namespace nvloc {

/// Sensor constants. D and gamma_e are electronic (MHz, MHz/mT); the nuclear
/// gyromagnetic ratio gamma_c is in kHz/mT. nv_axis is e_z by definition of
/// the sensor coordinate.
struct SensorConfig {
    double d_mhz = 2870.4;
    double gamma_e_mhz_mt = 28.0;
    double gamma_c_khz_mt = 10.705;
    double b0_mt = 36.2;
    Vec3 nv_axis = e_z;
    // Optional additive offset to the |0>-|1> transition (the nitrogen
    // hyperfine line used experimentally); never enters the nuclear physics.
    std::optional<double> n14_offset_mhz{};

    /// Bare nuclear Larmor frequency f0 = gamma_c * B0, kHz.
    double larmor_khz() const { return gamma_c_khz_mt * b0_mt; }
};

/// Hyperfine coupling (A_parallel signed, A_perp >= 0), kHz.
struct HyperfineParams {
    double a_parallel_khz = 0.0;
    double a_perp_khz = 0.0;
};

/// Sensor-state-conditioned nuclear precession: frequency f0 about e_z when
/// the sensor is |0>, frequency f1 about the tilted axis e_p when it is |1>.
struct ConditionalPrecession {
    double f0_khz = 0.0;
    double f1_khz = 0.0;
    Vec3 e_p = e_z;
    double theta_p = 0.0;  // tilt of e_p from e_z, radians, [0, pi)
    Vec3 e_perp = e_x;     // in-plane hyperfine direction used to build e_p
};

/// In-plane hyperfine direction for a nucleus at polar angle theta, azimuth
/// phi: (cos phi, sin phi, 0) above the sensor plane, sign-flipped at and
/// below theta = pi/2.
Vec3 e_perp_direction(double theta, double phi);

ConditionalPrecession conditional_precession(const SensorConfig& cfg,
                                             const HyperfineParams& hf,
                                             const Vec3& e_perp);

/// Same, building e_perp from the site angles.
ConditionalPrecession conditional_precession(const SensorConfig& cfg,
                                             const HyperfineParams& hf,
                                             double theta, double phi);

/// The two spin-resonance transition frequencies (MHz) from the ground
/// sublevel of H = D Sz^2 + gamma_e B.S, sorted ascending. Exact 3x3
/// symmetric eigen-decomposition; B_vec in mT, any orientation.
std::pair<double, double> nv_resonances(double d_mhz, double gamma_e_mhz_mt,
                                        const Vec3& b_vec_mt, const Vec3& nv_axis);

}  // namespace nvloc
