#include "nvloc/rotation.hpp"

#include "nvloc/errors.hpp"
#include "nvloc/units.hpp"

#include <cmath>
#include <ostream>

namespace nvloc {

std::ostream& operator<<(std::ostream& os, const Vec3& v) {
    return os << "(" << v.x << ", " << v.y << ", " << v.z << ")";
}

SpinRotation rotation_from_axis_angle(const Vec3& axis, double angle) {
    const double n = axis.norm();
    if (std::abs(n - 1.0) > 1e-9) {
        throw DomainError("rotation axis must be a unit vector");
    }
    return {axis / n, wrap_two_pi(angle)};
}

SpinRotation free_precession(const Vec3& axis, double f_khz, double t_us) {
    return {axis.normalized(), wrap_two_pi(-phase_rad(f_khz, t_us))};
}

Quat quat_of(const SpinRotation& r) {
    const double h = 0.5 * r.angle;
    return {std::cos(h), r.axis * std::sin(h)};
}

SpinRotation rotation_of(const Quat& q) {
    const double s = q.v.norm();
    // 2*atan2(s, w) lands in [0, 2*pi]; s ~ 0 covers both the identity and
    // the unreachable -1, both of which act trivially on Bloch vectors.
    if (s < 1e-15) return rotation_identity();
    return {q.v / s, 2.0 * std::atan2(s, q.w)};
}

Quat quat_mul(const Quat& a, const Quat& b) {
    return {a.w * b.w - a.v.dot(b.v), a.w * b.v + b.w * a.v + a.v.cross(b.v)};
}

SpinRotation compose(const SpinRotation& a, const SpinRotation& b) {
    return rotation_of(quat_mul(quat_of(a), quat_of(b)));
}

SpinRotation inverse(const SpinRotation& r) {
    Quat q = quat_of(r);
    q.v = -q.v;
    return rotation_of(q);
}

Vec3 apply(const SpinRotation& r, const Vec3& v) {
    const double c = std::cos(r.angle);
    const double s = std::sin(r.angle);
    const Vec3& n = r.axis;
    return v * c + n.cross(v) * s + n * (n.dot(v) * (1.0 - c));
}

std::pair<Vec3, double> decompose(const SpinRotation& r) {
    constexpr double eps = 1e-12;
    double angle = r.angle;
    Vec3 axis = r.axis;
    if (angle > pi) {
        angle = two_pi - angle;
        axis = -axis;
    }
    if (angle < eps) return {e_z, 0.0};
    if (std::abs(angle - pi) < eps) {
        // Half turn: (n, pi) and (-n, pi) coincide; pick the sign with the
        // first nonzero component positive.
        constexpr double tol = 1e-12;
        bool flip = false;
        if (axis.x < -tol) flip = true;
        else if (std::abs(axis.x) <= tol && axis.y < -tol) flip = true;
        else if (std::abs(axis.x) <= tol && std::abs(axis.y) <= tol && axis.z < 0.0) flip = true;
        if (flip) axis = -axis;
        return {axis, pi};
    }
    return {axis, angle};
}

}  // namespace nvloc
