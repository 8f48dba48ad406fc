#include "nvloc/calibration.hpp"

#include "nvloc/errors.hpp"
#include "nvloc/hamiltonian.hpp"
#include "nvloc/units.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <tuple>

namespace nvloc {

namespace {

constexpr double golden = 0.6180339887498949;

template <typename F>
double golden_min(F&& fn, double lo, double hi, int iters) {
    double x1 = hi - golden * (hi - lo);
    double x2 = lo + golden * (hi - lo);
    double f1 = fn(x1), f2 = fn(x2);
    for (int i = 0; i < iters; ++i) {
        if (f1 < f2) {
            hi = x2; x2 = x1; f2 = f1; x1 = hi - golden * (hi - lo); f1 = fn(x1);
        } else {
            lo = x1; x1 = x2; f1 = f2; x2 = lo + golden * (hi - lo); f2 = fn(x2);
        }
    }
    return f1 < f2 ? x1 : x2;
}

Vec3 direction(double theta, double phi) {
    return {std::sin(theta) * std::cos(phi), std::sin(theta) * std::sin(phi),
            std::cos(theta)};
}

struct InnerSolve {
    double d = 0.0, b = 0.0, sse = std::numeric_limits<double>::infinity();
};

double sse_of(std::span<const FieldObservation> obs, double gamma_e, double d, double b,
              const Vec3& dir) {
    double sse = 0.0;
    for (const auto& o : obs) {
        const auto [fm, fp] = nv_resonances(d, gamma_e, dir * b, o.nv_axis);
        sse += (fm - o.f_minus_mhz) * (fm - o.f_minus_mhz) +
               (fp - o.f_plus_mhz) * (fp - o.f_plus_mhz);
    }
    return sse;
}

// (D, |B|) for a fixed field direction: golden section on |B| alternated
// with a mean-residual update of D (dE/dD is 1 to per-mil accuracy in the
// B << D regime).
InnerSolve solve_d_b(std::span<const FieldObservation> obs, double gamma_e,
                     const Vec3& dir, double b_max, double d_init, int b_iters) {
    InnerSolve s;
    s.d = d_init;
    for (int round = 0; round < 3; ++round) {
        s.b = golden_min([&](double b) { return sse_of(obs, gamma_e, s.d, b, dir); }, 0.0,
                         b_max, b_iters);
        double shift = 0.0;
        for (const auto& o : obs) {
            const auto [fm, fp] = nv_resonances(s.d, gamma_e, dir * s.b, o.nv_axis);
            shift += (o.f_minus_mhz - fm) + (o.f_plus_mhz - fp);
        }
        s.d += shift / (2.0 * obs.size());
    }
    s.sse = sse_of(obs, gamma_e, s.d, s.b, dir);
    return s;
}

}  // namespace

FieldFit fit_field(std::span<const FieldObservation> observations, double gamma_e_mhz_mt) {
    if (observations.size() < 2) throw DomainError("need observations on >= 2 axes");
    {
        bool distinct = false;
        for (size_t i = 1; i < observations.size() && !distinct; ++i) {
            const double c = observations[i].nv_axis.normalized().dot(
                observations[0].nv_axis.normalized());
            if (std::abs(std::abs(c) - 1.0) > 1e-9) distinct = true;
        }
        if (!distinct) throw NumericalError("single-axis data: field direction unidentifiable");
    }

    double d0 = 0.0, split_max = 0.0;
    for (const auto& o : observations) {
        d0 += 0.5 * (o.f_minus_mhz + o.f_plus_mhz);
        split_max = std::max(split_max, o.f_plus_mhz - o.f_minus_mhz);
    }
    d0 /= static_cast<double>(observations.size());
    const double b_max = split_max / gamma_e_mhz_mt + 0.5;

    // The spectrum is invariant under B -> -B, so the upper hemisphere
    // suffices; the mirrored solution is physically equivalent.
    double best_theta = 0.0, best_phi = 0.0;
    InnerSolve best;
    for (int it = 0; it <= 90; ++it) {
        const int n_phi = it == 0 ? 1 : 360;
        for (int ip = 0; ip < n_phi; ++ip) {
            const double th = deg2rad(it), ph = deg2rad(ip);
            const InnerSolve s =
                solve_d_b(observations, gamma_e_mhz_mt, direction(th, ph), b_max, d0, 24);
            if (s.sse < best.sse) {
                best = s;
                best_theta = th;
                best_phi = ph;
            }
        }
    }

    // Coordinate-wise golden refinement of the direction.
    double th = best_theta, ph = best_phi;
    for (int round = 0; round < 4; ++round) {
        th = golden_min(
            [&](double t) {
                return solve_d_b(observations, gamma_e_mhz_mt, direction(t, ph), b_max, d0, 32).sse;
            },
            std::max(0.0, th - deg2rad(1.5)), th + deg2rad(1.5), 36);
        ph = golden_min(
            [&](double p) {
                return solve_d_b(observations, gamma_e_mhz_mt, direction(th, p), b_max, d0, 32).sse;
            },
            ph - deg2rad(1.5), ph + deg2rad(1.5), 36);
    }
    const InnerSolve fin = solve_d_b(observations, gamma_e_mhz_mt, direction(th, ph), b_max, d0, 48);

    FieldFit fit;
    fit.d_mhz = fin.d;
    fit.b_mag_mt = fin.b;
    if (fin.b < 1e-6) {
        fit.theta_lab = 0.0;
        fit.phi_lab = 0.0;
    } else {
        fit.theta_lab = th;
        fit.phi_lab = wrap_two_pi(ph);
    }
    fit.residual_rms_mhz = std::sqrt(fin.sse / (2.0 * observations.size()));
    return fit;
}

std::vector<std::tuple<double, double, int>> modulation_segments(const SensingWindow& w) {
    if (w.n_pulses <= 0 || w.n_pulses % 2 != 0) throw DomainError("window needs even N > 0");
    if (w.tau_us <= 0.0) throw DomainError("tau must be positive");
    std::vector<std::tuple<double, double, int>> seg;
    int sign = 1;
    seg.emplace_back(0.0, 0.5 * w.tau_us, sign);
    double t = 0.5 * w.tau_us;
    for (int k = 0; k < w.n_pulses - 1; ++k) {
        sign = -sign;
        seg.emplace_back(t, t + w.tau_us, sign);
        t += w.tau_us;
    }
    seg.emplace_back(t, t + 0.5 * w.tau_us, -sign);
    return seg;
}

double accumulated_phase(const SensingWindow& window, const CosineBurst& waveform,
                         double t_delay_us, double t_wait_us, double b_rf_mt,
                         double gamma_e_mhz_mt) {
    const auto segs = modulation_segments(window);
    const double omega = two_pi * waveform.f_khz * khz_us;  // rad/us
    const double w_lo = waveform.start_us + t_delay_us;
    const double w_hi = w_lo + waveform.duration_us;

    double integral = 0.0;  // us
    for (const auto& [s0, s1, sign] : segs) {
        const double lo = std::max(s0 + t_wait_us, w_lo);
        const double hi = std::min(s1 + t_wait_us, w_hi);
        if (hi <= lo) continue;
        // cos(omega (t - w_lo) + phi_rf) integrated over [lo, hi]
        const double a = omega * (lo - w_lo) + waveform.phi_rf;
        const double b = omega * (hi - w_lo) + waveform.phi_rf;
        integral += sign * (std::sin(b) - std::sin(a)) / omega;
    }
    // gamma_e [MHz/mT] * b [mT] * integral [us] is dimensionless (MHz x us).
    return two_pi * gamma_e_mhz_mt * b_rf_mt * integral;
}

DelayFit estimate_delay(std::span<const std::pair<double, double>> scan,
                        const SensingWindow& window, const CosineBurst& waveform,
                        double gamma_e_mhz_mt) {
    if (scan.size() < 4) throw DomainError("delay scan too short");
    double lo = scan[0].first, hi = scan[0].first;
    double pmin = 1.0, pmax = 0.0;
    for (const auto& [t, p] : scan) {
        lo = std::min(lo, t);
        hi = std::max(hi, t);
        pmin = std::min(pmin, p);
        pmax = std::max(pmax, p);
    }
    if (pmax - pmin < 1e-6) throw NumericalError("flat scan: delay unidentifiable");

    // phi is linear in b_rf; precompute the unit-field phase per scan point.
    auto unit_phases = [&](double delay) {
        std::vector<double> ph(scan.size());
        for (size_t i = 0; i < scan.size(); ++i) {
            ph[i] = accumulated_phase(window, waveform, delay, scan[i].first, 1.0,
                                      gamma_e_mhz_mt);
        }
        return ph;
    };
    auto sse_b = [&](const std::vector<double>& ph, double b) {
        double sse = 0.0;
        for (size_t i = 0; i < scan.size(); ++i) {
            const double model = 0.5 * (1.0 - std::sin(b * ph[i]));
            sse += (scan[i].second - model) * (scan[i].second - model);
        }
        return sse;
    };
    auto best_b = [&](const std::vector<double>& ph) {
        double scale = 1e-12;
        for (double p : ph) scale = std::max(scale, std::abs(p));
        const double b_hi = two_pi / scale;  // covers a full fringe
        double bb = 0.0, bs = std::numeric_limits<double>::infinity();
        for (int i = 0; i <= 256; ++i) {
            const double b = b_hi * i / 256.0;
            const double s = sse_b(ph, b);
            if (s < bs) { bs = s; bb = b; }
        }
        const double step = b_hi / 256.0;
        bb = golden_min([&](double b) { return sse_b(ph, b); }, std::max(0.0, bb - step),
                        bb + step, 40);
        return std::make_pair(bb, sse_b(ph, bb));
    };
    auto sse_delay = [&](double delay) { return best_b(unit_phases(delay)).second; };

    const double span = hi - lo + waveform.duration_us;
    double dbest = 0.0, sbest = std::numeric_limits<double>::infinity();
    const int n_grid = 600;
    for (int i = 0; i <= n_grid; ++i) {
        const double d = span * i / n_grid;
        const double s = sse_delay(d);
        if (s < sbest) { sbest = s; dbest = d; }
    }
    const double step = span / n_grid;
    const double d_opt = golden_min(sse_delay, std::max(0.0, dbest - step), dbest + step, 48);
    const auto [b_opt, sse_opt] = best_b(unit_phases(d_opt));

    DelayFit fit;
    fit.t_delay_us = d_opt;
    fit.b_rf_mt = b_opt;
    fit.residual_rms = std::sqrt(sse_opt / static_cast<double>(scan.size()));
    // Residual-curvature error bar.
    const double h = std::max(1e-4, step * 1e-2);
    const double c = (sse_delay(d_opt + h) - 2.0 * sse_opt + sse_delay(d_opt - h)) / (h * h);
    if (c > 0.0 && scan.size() > 2) {
        const double sigma2 = sse_opt / static_cast<double>(scan.size() - 2);
        fit.stderr_us = std::sqrt(2.0 * sigma2 / c);
    }
    return fit;
}

}  // namespace nvloc
