#include "nvloc/hamiltonian.hpp"

#include "nvloc/errors.hpp"
#include "nvloc/units.hpp"

#include <Eigen/Dense>

#include <cmath>

namespace nvloc {

Vec3 e_perp_direction(double theta, double phi) {
    if (theta < -1e-12 || theta > pi + 1e-12) {
        throw DomainError("polar angle must lie in [0, pi]");
    }
    const double s = (theta < pi / 2.0) ? 1.0 : -1.0;
    return {s * std::cos(phi), s * std::sin(phi), 0.0};
}

ConditionalPrecession conditional_precession(const SensorConfig& cfg,
                                             const HyperfineParams& hf,
                                             const Vec3& e_perp) {
    ConditionalPrecession p;
    p.f0_khz = cfg.larmor_khz();
    p.e_perp = e_perp.normalized();

    const double fz = p.f0_khz + hf.a_parallel_khz;
    p.f1_khz = std::hypot(fz, hf.a_perp_khz);
    if (p.f1_khz < 1e-12) {
        throw NumericalError("degenerate precession axis: f0 + A_par = 0 and A_perp = 0");
    }
    // theta_p in [0, pi): fz < 0 gives a tilt past pi/2 rather than a
    // negative frequency.
    p.theta_p = std::atan2(hf.a_perp_khz, fz);
    p.e_p = e_z * std::cos(p.theta_p) + p.e_perp * std::sin(p.theta_p);
    return p;
}

ConditionalPrecession conditional_precession(const SensorConfig& cfg,
                                             const HyperfineParams& hf,
                                             double theta, double phi) {
    return conditional_precession(cfg, hf, e_perp_direction(theta, phi));
}

std::pair<double, double> nv_resonances(double d_mhz, double gamma_e_mhz_mt,
                                        const Vec3& b_vec_mt, const Vec3& nv_axis) {
    if (d_mhz <= 0.0) throw DomainError("zero-field splitting must be positive");
    const Vec3 n = nv_axis.normalized();

    // Rotate B into the NV frame; an in-plane rotation of the transverse
    // component leaves the spectrum unchanged, so the Hamiltonian can be
    // taken real symmetric.
    const double bz = b_vec_mt.dot(n);
    const Vec3 bt_vec = b_vec_mt - n * bz;
    const double bt = bt_vec.norm();

    // S = 1 operators, basis {|+1>, |0>, |-1>}; Sx couples with 1/sqrt(2).
    const double wz = gamma_e_mhz_mt * bz;
    const double wt = gamma_e_mhz_mt * bt / std::sqrt(2.0);
    Eigen::Matrix3d h;
    h << d_mhz + wz, wt, 0.0,
         wt, 0.0, wt,
         0.0, wt, d_mhz - wz;
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es;
    es.computeDirect(h, Eigen::EigenvaluesOnly);
    const auto& ev = es.eigenvalues();  // ascending
    return {ev[1] - ev[0], ev[2] - ev[0]};
}

}  // namespace nvloc
