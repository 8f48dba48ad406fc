#pragma once

#include "nvloc/vec3.hpp"

#include <utility>

namespace nvloc {

// Axis-angle rotation of a spin-1/2 Bloch vector. A SpinRotation with axis n
// and angle a stands for the spin unitary exp(-i*a*(n.I)); its action on a
// Bloch vector is the right-handed rotation by +a about n. Angles are kept in
// [0, 2*pi) so the SU(2) sign survives composition (half-angle in [0, pi));
// the single element -1 (a bare 2*pi rotation) is the one point this
// parametrization cannot hold and is treated as identity.
struct SpinRotation {
    Vec3 axis{0.0, 0.0, 1.0};
    double angle = 0.0;  // radians, [0, 2*pi)
};

/// Build a rotation from a unit axis and an angle (reduced mod 2*pi).
/// Throws DomainError if |axis| deviates from 1 by more than 1e-9.
SpinRotation rotation_from_axis_angle(const Vec3& axis, double angle);

/// Identity rotation.
inline SpinRotation rotation_identity() { return {e_z, 0.0}; }

/// Free precession at f (kHz) for t (us) about `axis`: the nuclear spin
/// rotates clockwise, i.e. by -2*pi*f*t.
SpinRotation free_precession(const Vec3& axis, double f_khz, double t_us);

/// Sequential action: b first, then a.
SpinRotation compose(const SpinRotation& a, const SpinRotation& b);

SpinRotation inverse(const SpinRotation& r);

/// Apply to a Bloch vector (Rodrigues form; exact norm preservation).
Vec3 apply(const SpinRotation& r, const Vec3& v);

/// Reduce to the angle <= pi branch. Degenerate conventions: angle 0 maps to
/// axis e_z; angle pi fixes the axis sign so its first nonzero component is
/// positive.
std::pair<Vec3, double> decompose(const SpinRotation& r);

// Unit quaternion (w, v), w = cos(angle/2), v = sin(angle/2)*axis. Exposed
// for the sequence propagator algebra.
struct Quat {
    double w = 1.0;
    Vec3 v{};
};

Quat quat_of(const SpinRotation& r);
SpinRotation rotation_of(const Quat& q);
Quat quat_mul(const Quat& a, const Quat& b);

}  // namespace nvloc
