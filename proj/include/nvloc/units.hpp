#pragma once

#include <cmath>
#include <numbers>

// Unit conventions used throughout: nuclear frequencies in kHz, electronic
// frequencies in MHz, times in microseconds, fields in mT, angles in radians
// (degrees only at the CLI boundary).

namespace nvloc {

inline constexpr double pi = std::numbers::pi;
inline constexpr double two_pi = 2.0 * pi;

// kHz times us gives 1e-3 cycles.
inline constexpr double khz_us = 1.0e-3;

constexpr double deg2rad(double d) { return d * pi / 180.0; }
constexpr double rad2deg(double r) { return r * 180.0 / pi; }

/// Precession phase 2*pi*f*t in radians for f in kHz and t in us.
constexpr double phase_rad(double f_khz, double t_us) {
    return two_pi * f_khz * t_us * khz_us;
}

/// Wrap an angle to [0, 2*pi).
inline double wrap_two_pi(double a) {
    a = std::fmod(a, two_pi);
    return a < 0.0 ? a + two_pi : a;
}

/// Wrap an angle to (-pi, pi].
inline double wrap_pi(double a) {
    a = std::fmod(a, two_pi);
    if (a > pi) a -= two_pi;
    if (a <= -pi) a += two_pi;
    return a;
}

/// Signed circular difference a - b wrapped to (-pi, pi].
inline double circular_diff(double a, double b) { return wrap_pi(a - b); }

}  // namespace nvloc
