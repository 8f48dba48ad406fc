#include "nvloc/estimation.hpp"

#include "nvloc/errors.hpp"
#include "nvloc/units.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>

namespace nvloc {

namespace {

struct LinearFit {
    double a = 0.0, b = 0.0, offset = 0.0;
    double rss = std::numeric_limits<double>::infinity();
    bool ok = false;
};

// Least squares for y = a cos(2 pi f t) E + b sin(2 pi f t) E + B, with
// E = exp(-t/T) (or 1 when no decay).
LinearFit linear_fit(std::span<const double> t, std::span<const double> y, double f_khz,
                     std::optional<double> decay_us) {
    Eigen::Matrix3d m = Eigen::Matrix3d::Zero();
    Eigen::Vector3d rhs = Eigen::Vector3d::Zero();
    const size_t n = t.size();
    for (size_t i = 0; i < n; ++i) {
        const double e = decay_us ? std::exp(-t[i] / *decay_us) : 1.0;
        const double ph = phase_rad(f_khz, t[i]);
        const Eigen::Vector3d row(std::cos(ph) * e, std::sin(ph) * e, 1.0);
        m += row * row.transpose();
        rhs += row * y[i];
    }
    LinearFit out;
    Eigen::FullPivLU<Eigen::Matrix3d> lu(m);
    if (!lu.isInvertible()) return out;
    const Eigen::Vector3d sol = lu.solve(rhs);
    out.a = sol[0];
    out.b = sol[1];
    out.offset = sol[2];
    double rss = 0.0;
    for (size_t i = 0; i < n; ++i) {
        const double e = decay_us ? std::exp(-t[i] / *decay_us) : 1.0;
        const double ph = phase_rad(f_khz, t[i]);
        const double fit = out.a * std::cos(ph) * e + out.b * std::sin(ph) * e + out.offset;
        rss += (y[i] - fit) * (y[i] - fit);
    }
    out.rss = rss;
    out.ok = true;
    return out;
}

constexpr double golden = 0.6180339887498949;

// Golden-section minimum of fn over [lo, hi].
template <typename F>
double golden_min(F&& fn, double lo, double hi, int iters) {
    double x1 = hi - golden * (hi - lo);
    double x2 = lo + golden * (hi - lo);
    double f1 = fn(x1), f2 = fn(x2);
    for (int i = 0; i < iters; ++i) {
        if (f1 < f2) {
            hi = x2; x2 = x1; f2 = f1;
            x1 = hi - golden * (hi - lo);
            f1 = fn(x1);
        } else {
            lo = x1; x1 = x2; f1 = f2;
            x2 = lo + golden * (hi - lo);
            f2 = fn(x2);
        }
    }
    return f1 < f2 ? x1 : x2;
}

// Best frequency near f_hint for a fixed decay: coarse grid then golden
// refinement inside the winning interval.
double best_frequency(std::span<const double> t, std::span<const double> y, double f_hint,
                      const FitOptions& opts, std::optional<double> decay) {
    const double lo = f_hint * (1.0 - opts.hint_span);
    const double hi = f_hint * (1.0 + opts.hint_span);
    const int n = std::max(opts.grid_points, 3);
    double best_f = f_hint;
    double best = std::numeric_limits<double>::infinity();
    for (int i = 0; i < n; ++i) {
        const double f = lo + (hi - lo) * i / (n - 1);
        const double r = linear_fit(t, y, f, decay).rss;
        if (r < best) { best = r; best_f = f; }
    }
    const double step = (hi - lo) / (n - 1);
    auto rss_of = [&](double f) { return linear_fit(t, y, f, decay).rss; };
    return golden_min(rss_of, std::max(lo, best_f - step), std::min(hi, best_f + step), 40);
}

}  // namespace

OscillationFit fit_damped_cosine(std::span<const double> times_us,
                                 std::span<const double> values, double f_hint_khz,
                                 const FitOptions& opts) {
    if (times_us.size() != values.size()) throw DomainError("times and values must match");
    if (times_us.size() < 8) throw DomainError("need at least 8 samples");
    if (f_hint_khz <= 0.0) throw DomainError("frequency hint must be positive");
    const auto [tmin, tmax] = std::minmax_element(times_us.begin(), times_us.end());
    const double span = *tmax - *tmin;
    if (span * f_hint_khz * khz_us < 1.0) {
        throw DomainError("samples must span at least one period of the frequency hint");
    }

    std::optional<double> decay{};
    double f = 0.0;
    if (opts.fit_decay) {
        auto rss_at_logT = [&](double logT) {
            const double T = std::exp(logT);
            const double fq = best_frequency(times_us, values, f_hint_khz, opts, T);
            return linear_fit(times_us, values, fq, T).rss;
        };
        const double logT = golden_min(rss_at_logT, std::log(0.05 * span), std::log(100.0 * span), 60);
        decay = std::exp(logT);
        f = best_frequency(times_us, values, f_hint_khz, opts, decay);
    } else {
        f = best_frequency(times_us, values, f_hint_khz, opts, decay);
    }

    const LinearFit lin = linear_fit(times_us, values, f, decay);
    OscillationFit fit;
    fit.converged = lin.ok && std::isfinite(lin.rss);
    fit.frequency_khz = f;
    fit.amplitude = std::hypot(lin.a, lin.b);
    fit.offset = lin.offset;
    fit.phase = wrap_two_pi(std::atan2(-lin.b, lin.a));
    fit.decay_time_us = decay;
    fit.residual_rms = std::sqrt(lin.rss / static_cast<double>(times_us.size()));
    return fit;
}

HyperfineParams estimate_hyperfine(double f_cp_khz, double f0_khz, double f1_khz,
                                   double tau_us) {
    const double alpha = pi * f0_khz * tau_us * khz_us;
    const double beta = pi * f1_khz * tau_us * khz_us;
    const double ss = std::sin(alpha) * std::sin(beta);
    if (std::abs(ss) < 1e-12) throw NumericalError("singular geometry: sin(a) sin(b) = 0");
    const double phi_cp = pi - two_pi * f_cp_khz * tau_us * khz_us;
    const double a_par =
        (std::cos(alpha) * std::cos(beta) - std::cos(phi_cp)) * f1_khz / ss - f0_khz;
    const double rad = f1_khz * f1_khz - (f0_khz + a_par) * (f0_khz + a_par);
    if (rad < -1e-9 * f1_khz * f1_khz) {
        throw NumericalError("inconsistent inputs: negative radicand for A_perp");
    }
    return {a_par, std::sqrt(std::max(rad, 0.0))};
}

std::pair<int, double> undersampling_map(double f_khz, double dt_us) {
    if (dt_us <= 0.0) throw DomainError("sampling interval must be positive");
    if (f_khz < 0.0) throw DomainError("frequency must be non-negative");
    const double f_nyq = 1.0e3 / (2.0 * dt_us);  // kHz
    const int m = static_cast<int>(std::floor(f_khz / f_nyq));
    if (m % 2 != 0) throw NumericalError("unsupported alias order: odd m");
    return {m, f_khz - m * f_nyq};
}

double recover_phase(double eta_alias, const UndersamplingConfig& cfg) {
    if (cfg.dt_us <= 0.0) throw DomainError("sampling interval must be positive");
    if (cfg.m < 0 || cfg.m % 2 != 0) throw DomainError("alias order must be even and non-negative");
    return wrap_two_pi(eta_alias - cfg.m * pi * cfg.t0_us / cfg.dt_us);
}

double combine_independent(std::span<const double> probabilities) {
    double contrast = 1.0;
    for (double p : probabilities) {
        if (p < -1e-12 || p > 1.0 + 1e-12) throw DomainError("probabilities must lie in [0, 1]");
        contrast *= 2.0 * p - 1.0;
    }
    return 0.5 * (1.0 + contrast);
}

std::vector<std::pair<double, double>> dominant_peaks(std::span<const double> values,
                                                      double dt_us, int n_peaks) {
    const size_t n = values.size();
    if (n < 4) throw DomainError("trace too short for a spectrum");
    if (dt_us <= 0.0) throw DomainError("sampling interval must be positive");
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(n);

    const size_t half = n / 2;
    std::vector<double> mag(half + 1, 0.0);
    for (size_t k = 1; k <= half; ++k) {
        double re = 0.0, im = 0.0;
        for (size_t j = 0; j < n; ++j) {
            const double ph = two_pi * static_cast<double>(k) * static_cast<double>(j) /
                              static_cast<double>(n);
            re += (values[j] - mean) * std::cos(ph);
            im -= (values[j] - mean) * std::sin(ph);
        }
        mag[k] = std::hypot(re, im);
    }
    std::vector<std::pair<double, double>> peaks;
    for (size_t k = 1; k <= half; ++k) {
        const double left = k > 1 ? mag[k - 1] : 0.0;
        const double right = k < half ? mag[k + 1] : 0.0;
        if (mag[k] >= left && mag[k] >= right) {
            peaks.emplace_back(static_cast<double>(k) * 1.0e3 / (static_cast<double>(n) * dt_us),
                               mag[k]);
        }
    }
    std::sort(peaks.begin(), peaks.end(),
              [](const auto& a, const auto& b) { return a.second > b.second; });
    if (static_cast<int>(peaks.size()) > n_peaks) peaks.resize(n_peaks);
    return peaks;
}

}  // namespace nvloc
