#include "nvloc/blochsim.hpp"

#include "nvloc/errors.hpp"
#include "nvloc/rotation.hpp"
#include "nvloc/units.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <string>
#include <thread>

namespace nvloc {

namespace {

Vec3 drive_field(const RfDrive& d, double s_us) {
    if (s_us < -d.t1_us || s_us > 0.0) return {};
    if (d.rwa) {
        // Co-rotating circular component only; valid for e_p ~ e_z.
        const double psi = d.e_rf.azimuth() - d.phi_rf - phase_rad(d.frequency_khz, s_us);
        return Vec3{std::cos(psi), std::sin(psi), 0.0} * d.amplitude_khz;
    }
    return d.e_rf * (2.0 * d.amplitude_khz *
                     std::cos(phase_rad(d.frequency_khz, s_us) + d.phi_rf));
}

Vec3 bloch_rhs(const Vec3& nu, const Vec3& e_p, double f_p, const RfDrive& d, double s) {
    return nu.cross(e_p * f_p + drive_field(d, s)) * (two_pi * khz_us);
}

// One renormalized RK4 step.
Vec3 rk4_step(const Vec3& nu, const Vec3& e_p, double f_p, const RfDrive& d, double s,
              double h) {
    const Vec3 k1 = bloch_rhs(nu, e_p, f_p, d, s);
    const Vec3 k2 = bloch_rhs(nu + k1 * (0.5 * h), e_p, f_p, d, s + 0.5 * h);
    const Vec3 k3 = bloch_rhs(nu + k2 * (0.5 * h), e_p, f_p, d, s + 0.5 * h);
    const Vec3 k4 = bloch_rhs(nu + k3 * h, e_p, f_p, d, s + h);
    const Vec3 out = nu + (k1 + (k2 + k3) * 2.0 + k4) * (h / 6.0);
    const double n = out.norm();
    return n > 0.0 ? out / n : out;
}

void check_step(double step_us, double f_p, double f_rf) {
    const double bound = 1.0e3 / (100.0 * std::max(f_p, f_rf));
    if (step_us > bound + 1e-15) {
        throw DomainError("integration step too large; need step <= " + std::to_string(bound) +
                          " us");
    }
}

Vec3 integrate_final(Vec3 nu, const Vec3& e_p, double f_p, const RfDrive& d,
                     double s_start, double s_end, double step) {
    const int n = std::max(1, static_cast<int>(std::ceil((s_end - s_start) / step - 1e-9)));
    const double h = (s_end - s_start) / n;
    for (int i = 0; i < n; ++i) {
        nu = rk4_step(nu, e_p, f_p, d, s_start + i * h, h);
    }
    return nu;
}

}  // namespace

void validate_timing(const ProtocolTiming& t, double f_rf_khz, bool strict) {
    if (!(t.t1_us > 0.0) || !(t.t2_us > t.t1_us) || !(t.t0_us > 0.0)) {
        throw DomainError("protocol timing requires t2 > t1 > 0 and t0 > 0");
    }
    if (strict) {
        const double periods = t.t1_us * f_rf_khz * khz_us;
        const double frac = std::abs(periods - std::round(periods));
        if (frac / (f_rf_khz * khz_us) > 1e-6) {
            throw DomainError("t1 must be an integer number of RF periods (strict mode)");
        }
    }
}

RfDrive make_halfpi_drive(const Vec3& e_rf, double f_rf_khz, double phi_rf,
                          double t1_us, const Vec3& e_p) {
    if (t1_us <= 0.0) throw DomainError("RF pulse length must be positive");
    const double sine = e_rf.normalized().cross(e_p.normalized()).norm();
    if (sine < 1e-9) throw NumericalError("RF axis parallel to the precession axis");
    RfDrive d;
    d.frequency_khz = f_rf_khz;
    d.phi_rf = phi_rf;
    d.e_rf = e_rf.normalized();
    d.t1_us = t1_us;
    d.amplitude_khz = 1.0e3 / (4.0 * t1_us * sine);
    return d;
}

BlochTrajectory integrate_bloch(const Vec3& initial, const Vec3& e_p, double f_p_khz,
                                const RfDrive& drive, std::pair<double, double> span_us,
                                double step_us) {
    if (initial.norm() > 1.0 + 1e-12) throw DomainError("|initial| must not exceed 1");
    if (span_us.second <= span_us.first) throw DomainError("empty integration span");
    check_step(step_us, f_p_khz, drive.frequency_khz);

    const int n = std::max(1, static_cast<int>(std::ceil((span_us.second - span_us.first) /
                                                         step_us - 1e-9)));
    const double h = (span_us.second - span_us.first) / n;
    BlochTrajectory traj;
    traj.times_us.reserve(n + 1);
    traj.points.reserve(n + 1);
    Vec3 nu = initial;
    double s = span_us.first;
    traj.times_us.push_back(s);
    traj.points.push_back(nu);
    for (int i = 1; i <= n; ++i) {
        nu = rk4_step(nu, e_p.normalized(), f_p_khz, drive, s, h);
        s = span_us.first + i * h;
        traj.times_us.push_back(s);
        traj.points.push_back(nu);
    }
    return traj;
}

double phi_n_analytic(double phi_rf, double phi_c, double f_p_khz, double f_rf_khz,
                      double t1_us) {
    return wrap_two_pi(-phi_rf + phi_c - 0.5 * pi -
                       phase_rad(f_p_khz - f_rf_khz, t1_us));
}

Vec3 simulate_protocol_bloch(double phi, double phi_rf, const ProtocolTiming& timing,
                             const ConditionalPrecession& prec, const Vec3& e_rf,
                             double f_rf_khz, double f_p_khz, const BlochSimOptions& opts) {
    validate_timing(timing, f_rf_khz, false);
    const SpinRotation rz = rotation_from_axis_angle(e_z, wrap_two_pi(phi));
    const Vec3 e_perp = apply(rz, prec.e_perp);
    const Vec3 e_p = (e_z * std::cos(prec.theta_p) + e_perp * std::sin(prec.theta_p)).normalized();

    RfDrive drive = make_halfpi_drive(e_rf, f_rf_khz, phi_rf, timing.t1_us, e_p);
    drive.rwa = opts.rwa;

    // Midpoint rule for the chirp: axis is e_z up to s = -t2 (does nothing to
    // -e_z), e_p afterwards.
    Vec3 nu = apply(free_precession(e_p, f_p_khz, timing.t2_us - timing.t1_us), opts.initial);

    const double step = 1.0e3 / (opts.steps_per_period * std::max(f_rf_khz, f_p_khz));
    return integrate_final(nu, e_p, f_p_khz, drive, -timing.t1_us, 0.0, step);
}

double simulate_phi_n0(double phi, double phi_rf, const ProtocolTiming& timing,
                       const ConditionalPrecession& prec, const Vec3& e_rf,
                       double f_rf_khz, double f_p_khz, const BlochSimOptions& opts) {
    const Vec3 nu =
        simulate_protocol_bloch(phi, phi_rf, timing, prec, e_rf, f_rf_khz, f_p_khz, opts);
    if (std::hypot(nu.x, nu.y) < 1e-3) {
        throw NumericalError("ill-conditioned azimuth: final Bloch vector nearly polar");
    }
    return wrap_two_pi(std::atan2(nu.y, nu.x));
}

double determine_phi(double phi_n0, double phi_0, double theta) {
    if (theta < -1e-12 || theta > pi + 1e-12) throw DomainError("theta must lie in [0, pi]");
    const double branch = theta >= 0.5 * pi ? pi : 0.0;
    return wrap_two_pi(phi_n0 + phi_0 + branch);
}

PhiFit fit_phi(std::span<const PhiMeasurement> measured, const ProtocolTiming& timing,
               const ConditionalPrecession& prec, const Vec3& e_rf, double f_rf_khz,
               std::span<const double> f_p_runs, const BlochSimOptions& opts) {
    if (measured.size() < 2) throw DomainError("need at least 2 measurements");
    if (f_p_runs.size() != 1 && f_p_runs.size() != measured.size()) {
        throw DomainError("f_p_runs must hold one shared value or one per measurement");
    }
    const double psi0 = std::atan2(prec.e_perp.y, prec.e_perp.x);

    auto rms_at = [&](double phi) {
        double ss = 0.0;
        for (size_t i = 0; i < measured.size(); ++i) {
            const double fp = f_p_runs.size() == 1 ? f_p_runs[0] : f_p_runs[i];
            const double sim = simulate_phi_n0(phi, measured[i].phi_rf, timing, prec, e_rf,
                                               f_rf_khz, fp, opts);
            const double pred = psi0 + phi - sim;
            const double d = circular_diff(pred, measured[i].phi_0);
            ss += d * d;
        }
        return std::sqrt(ss / static_cast<double>(measured.size()));
    };

    constexpr int grid_n = 3600;  // 0.1 degree
    std::vector<double> rms(grid_n);
    const unsigned n_workers = std::max(1u, std::thread::hardware_concurrency());
    std::vector<std::future<void>> jobs;
    const int chunk = (grid_n + static_cast<int>(n_workers) - 1) / static_cast<int>(n_workers);
    for (unsigned w = 0; w < n_workers; ++w) {
        const int lo = static_cast<int>(w) * chunk;
        const int hi = std::min(grid_n, lo + chunk);
        if (lo >= hi) break;
        jobs.push_back(std::async(std::launch::async, [&, lo, hi] {
            for (int i = lo; i < hi; ++i) rms[i] = rms_at(two_pi * i / grid_n);
        }));
    }
    for (auto& j : jobs) j.get();

    int best = 0;
    for (int i = 1; i < grid_n; ++i)
        if (rms[i] < rms[best]) best = i;

    // Golden refinement around the winning grid point.
    const double step = two_pi / grid_n;
    double lo = two_pi * best / grid_n - step, hi = two_pi * best / grid_n + step;
    constexpr double gold = 0.6180339887498949;
    double x1 = hi - gold * (hi - lo), x2 = lo + gold * (hi - lo);
    double f1 = rms_at(x1), f2 = rms_at(x2);
    for (int i = 0; i < 30; ++i) {
        if (f1 < f2) {
            hi = x2; x2 = x1; f2 = f1; x1 = hi - gold * (hi - lo); f1 = rms_at(x1);
        } else {
            lo = x1; x1 = x2; f1 = f2; x2 = lo + gold * (hi - lo); f2 = rms_at(x2);
        }
    }
    PhiFit out;
    out.phi = wrap_two_pi(f1 < f2 ? x1 : x2);
    out.accuracy = std::min(f1, f2);

    // Rival local minima within 1 degree of RMS flag the fit as ambiguous.
    for (int i = 0; i < grid_n; ++i) {
        const double prev = rms[(i + grid_n - 1) % grid_n];
        const double next = rms[(i + 1) % grid_n];
        if (rms[i] <= prev && rms[i] <= next &&
            std::abs(circular_diff(two_pi * i / grid_n, out.phi)) > deg2rad(5.0) &&
            rms[i] - out.accuracy < deg2rad(1.0)) {
            out.ambiguous = true;
            break;
        }
    }
    return out;
}

double wurst_envelope(double t_us, double t_p_us, double alpha_p) {
    if (t_p_us <= 0.0 || alpha_p <= 0.0) throw DomainError("t_p and alpha_p must be positive");
    if (t_us < 0.0 || t_us > t_p_us) return 0.0;
    return std::pow(1.0 - std::abs(std::cos(pi * t_us / t_p_us)), alpha_p);
}

}  // namespace nvloc
