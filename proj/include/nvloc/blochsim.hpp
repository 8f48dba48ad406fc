#pragma once

#include "nvloc/hamiltonian.hpp"
#include "nvloc/vec3.hpp"

#include <span>
#include <utility>
#include <vector>

namespace nvloc {

/// Timestamps of the azimuth protocol, all in us. s = 0 is the end of the RF
/// pulse; the RF spans [-t1, 0]; t2 marks the midpoint of the chirped
/// microwave pulse (precession axis jumps from e_z to e_p there); the first
/// sampled point of the free precession is t0.
struct ProtocolTiming {
    double t0_us = 6.872;
    double t1_us = 102.041;
    double t2_us = 104.329;
    double t_delay_us = 1.088;
};

/// Validate timing; in strict mode t1 must be an integer number of RF
/// periods within 1e-6 us.
void validate_timing(const ProtocolTiming& t, double f_rf_khz, bool strict);

/// Linearly polarized RF drive B(s) = 2 b cos(2 pi f s + phi_rf) e_rf with
/// piecewise-constant amplitude b supported on [-t1, 0]. Amplitudes are in
/// kHz (gyromagnetic factor absorbed).
struct RfDrive {
    double frequency_khz = 215.6;
    double phi_rf = 0.0;
    Vec3 e_rf = e_z;
    double amplitude_khz = 0.0;
    double t1_us = 0.0;  // support is [-t1, 0]
    bool rwa = false;    // use only the co-rotating circular component
};

/// Drive normalized for a pi/2 rotation in the tilted-axis model:
/// b = (4 t1 |e_rf x e_p|)^-1.
RfDrive make_halfpi_drive(const Vec3& e_rf, double f_rf_khz, double phi_rf,
                          double t1_us, const Vec3& e_p);

struct BlochTrajectory {
    std::vector<double> times_us;
    std::vector<Vec3> points;
};

/// Fixed-step 4th-order integration of
///   d nu/ds = 2 pi nu x [f_p e_p + B_rf(s) e_rf]
/// with per-step renormalization. The step must satisfy
/// step <= 1/(100 max(f_p, f_rf)).
BlochTrajectory integrate_bloch(const Vec3& initial, const Vec3& e_p, double f_p_khz,
                                const RfDrive& drive, std::pair<double, double> span_us,
                                double step_us);

/// High-field analytic azimuth at the end of the RF pulse:
/// phi_n(0) = -phi_rf + phi_c - pi/2 - 2 pi (f_p - f_rf) t1, in [0, 2 pi).
double phi_n_analytic(double phi_rf, double phi_c, double f_p_khz, double f_rf_khz,
                      double t1_us);

struct BlochSimOptions {
    double steps_per_period = 200.0;  // integrator step = 1/(spp * f_rf)
    bool rwa = false;
    Vec3 initial{0.0, 0.0, -1.0};     // PolY at k = 3 polarizes to -e_z
};

/// Nuclear Bloch vector at the end of the RF pulse (s = 0): free precession
/// about e_p from the chirp midpoint, then the RF pulse. `phi` rotates
/// prec.e_perp about e_z (pass the site azimuth when prec was built at
/// phi = 0).
Vec3 simulate_protocol_bloch(double phi, double phi_rf, const ProtocolTiming& timing,
                             const ConditionalPrecession& prec, const Vec3& e_rf,
                             double f_rf_khz, double f_p_khz,
                             const BlochSimOptions& opts = {});

/// Azimuth of simulate_protocol_bloch in [0, 2 pi). Throws when the final
/// transverse component is below 1e-3 (ill-conditioned azimuth).
double simulate_phi_n0(double phi, double phi_rf, const ProtocolTiming& timing,
                       const ConditionalPrecession& prec, const Vec3& e_rf,
                       double f_rf_khz, double f_p_khz, const BlochSimOptions& opts = {});

/// phi = phi_n0 + phi_0 (+ pi iff theta >= pi/2), mod 2 pi.
double determine_phi(double phi_n0, double phi_0, double theta);

struct PhiMeasurement {
    double phi_rf = 0.0;
    double phi_0 = 0.0;
};

struct PhiFit {
    double phi = 0.0;           // best site azimuth, [0, 2 pi)
    double accuracy = 0.0;      // RMS circular deviation at the optimum, radians
    bool ambiguous = false;     // a rival local minimum lies within 1 deg of RMS
};

/// Scan the site azimuth over [0, 2 pi) (0.1 deg grid, then golden
/// refinement), minimizing the RMS circular deviation between predicted and
/// measured oscillation phases. f_p_runs supplies the per-measurement
/// precession frequency (one shared value is the common case).
PhiFit fit_phi(std::span<const PhiMeasurement> measured, const ProtocolTiming& timing,
               const ConditionalPrecession& prec, const Vec3& e_rf, double f_rf_khz,
               std::span<const double> f_p_runs, const BlochSimOptions& opts = {});

/// WURST amplitude envelope (1 - |cos(pi t/t_p)|)^alpha_p on [0, t_p], 0
/// outside.
double wurst_envelope(double t_us, double t_p_us, double alpha_p);

}  // namespace nvloc
