#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "nvloc/calibration.hpp"
#include "nvloc/errors.hpp"
#include "nvloc/hamiltonian.hpp"
#include "nvloc/lattice.hpp"
#include "nvloc/units.hpp"

#include <random>

using namespace nvloc;

namespace {

std::vector<FieldObservation> synthesize(double d, double b, double theta, double phi,
                                         double noise_sd, unsigned seed) {
    const Vec3 bvec = Vec3{std::sin(theta) * std::cos(phi), std::sin(theta) * std::sin(phi),
                           std::cos(theta)} *
                      b;
    std::mt19937 rng(seed);
    std::normal_distribution<double> g(0.0, noise_sd);
    std::vector<FieldObservation> obs;
    for (const Vec3& axis : nv_axes_lab()) {
        auto [fm, fp] = nv_resonances(d, 28.0, bvec, axis);
        if (noise_sd > 0.0) {
            fm += g(rng);
            fp += g(rng);
        }
        obs.push_back({axis, fm, fp});
    }
    return obs;
}

}  // namespace

TEST_CASE("field fit: noiseless four-axis round trip at the published values") {
    const auto obs = synthesize(2870.4, 1.47, deg2rad(5.2), deg2rad(81.6), 0.0, 0);
    const FieldFit fit = fit_field(obs);
    CHECK(fit.d_mhz == doctest::Approx(2870.4).epsilon(1e-6));
    CHECK(fit.b_mag_mt == doctest::Approx(1.47).epsilon(1e-4));
    CHECK(std::abs(rad2deg(fit.theta_lab) - 5.2) < 0.1);
    CHECK(std::abs(rad2deg(fit.phi_lab) - 81.6) < 0.1);
    CHECK(fit.residual_rms_mhz < 1e-6);
}

TEST_CASE("field fit: zero field") {
    const auto obs = synthesize(2870.4, 0.0, 0.0, 0.0, 0.0, 0);
    const FieldFit fit = fit_field(obs);
    CHECK(fit.b_mag_mt < 1e-4);
    CHECK(fit.d_mhz == doctest::Approx(2870.4).epsilon(1e-9));
}

TEST_CASE("field fit: noise robustness") {
    const auto obs = synthesize(2870.4, 1.47, deg2rad(5.2), deg2rad(81.6), 0.05, 1234);
    const FieldFit fit = fit_field(obs);
    CHECK(std::abs(fit.b_mag_mt - 1.47) < 0.01);
    CHECK(std::abs(rad2deg(fit.theta_lab) - 5.2) < 1.0);
    CHECK(std::abs(circular_diff(fit.phi_lab, deg2rad(81.6))) < deg2rad(1.0));
}

TEST_CASE("field fit: single-axis data is rejected") {
    std::vector<FieldObservation> obs = {
        {{0.0, 0.0, 1.0}, 2850.0, 2890.0},
        {{0.0, 0.0, 1.0}, 2850.0, 2890.0},
    };
    CHECK_THROWS_AS(fit_field(obs), NumericalError);
    std::vector<FieldObservation> one = {{{0.0, 0.0, 1.0}, 2850.0, 2890.0}};
    CHECK_THROWS_AS(fit_field(one), DomainError);
}

TEST_CASE("modulation function: pattern and zero mean") {
    const SensingWindow w{2.319, 4};
    const auto segs = modulation_segments(w);
    REQUIRE(segs.size() == 5);
    const double tau = w.tau_us;
    // transitions at tau/2, 3tau/2, 5tau/2, 7tau/2; signs + - + - +
    const double edges[][2] = {{0.0, 0.5}, {0.5, 1.5}, {1.5, 2.5}, {2.5, 3.5}, {3.5, 4.0}};
    const int signs[] = {1, -1, 1, -1, 1};
    double integral = 0.0;
    for (size_t i = 0; i < segs.size(); ++i) {
        const auto& [lo, hi, sign] = segs[i];
        CHECK(lo == doctest::Approx(edges[i][0] * tau));
        CHECK(hi == doctest::Approx(edges[i][1] * tau));
        CHECK(sign == signs[i]);
        integral += sign * (hi - lo);
    }
    CHECK(integral == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("accumulated phase: overlap, linearity, shift equivariance, quadrature oracle") {
    const SensingWindow w{2.319, 4};
    CosineBurst wf;
    wf.f_khz = 215.6;
    wf.start_us = 11.0;
    wf.duration_us = 4.0 * w.tau_us;
    wf.phi_rf = 0.0;

    // non-overlapping supports
    CHECK(accumulated_phase(w, wf, 0.0, 100.0, 0.001) == doctest::Approx(0.0));

    // linear in b_rf and shift-equivariant
    const double p1 = accumulated_phase(w, wf, 1.088, 9.0, 0.001);
    const double p2 = accumulated_phase(w, wf, 1.088, 9.0, 0.002);
    CHECK(p2 == doctest::Approx(2.0 * p1).epsilon(1e-12));
    const double p3 = accumulated_phase(w, wf, 1.588, 9.5, 0.001);
    CHECK(p3 == doctest::Approx(p1).epsilon(1e-12));

    // quadrature oracle: midpoint integration split at the modulation
    // discontinuities (a bare midpoint rule across the jumps is only O(h))
    auto quadrature = [&](double delay, double wait, double b) {
        const double lo = wf.start_us + delay;
        const double hi = lo + wf.duration_us;
        auto ysign = [&](double t) {
            const double u = t - wait;
            if (u < 0.0 || u >= 4.0 * w.tau_us) return 0.0;
            if (u < 0.5 * w.tau_us) return 1.0;
            if (u < 1.5 * w.tau_us) return -1.0;
            if (u < 2.5 * w.tau_us) return 1.0;
            if (u < 3.5 * w.tau_us) return -1.0;
            return 1.0;
        };
        std::vector<double> edges{lo, hi};
        for (double e : {0.0, 0.5, 1.5, 2.5, 3.5, 4.0}) {
            const double t = wait + e * w.tau_us;
            if (t > lo && t < hi) edges.push_back(t);
        }
        std::sort(edges.begin(), edges.end());
        double acc = 0.0;
        for (size_t s = 0; s + 1 < edges.size(); ++s) {
            const int n = 20000;
            const double h = (edges[s + 1] - edges[s]) / n;
            for (int i = 0; i < n; ++i) {
                const double t = edges[s] + (i + 0.5) * h;
                acc += std::cos(two_pi * wf.f_khz * khz_us * (t - lo) + wf.phi_rf) *
                       ysign(t) * h;
            }
        }
        return two_pi * 28.0 * b * acc;
    };
    for (double wait : {8.0, 9.5, 11.2, 13.0}) {
        CHECK(accumulated_phase(w, wf, 1.088, wait, 0.003) ==
              doctest::Approx(quadrature(1.088, wait, 0.003)).epsilon(1e-7));
    }

    // perfectly aligned window and burst at tau = 1/(2 f): the square-cosine
    // overlap gives |phi| = 2 pi gamma_e b (2/pi)(4 tau) = 4 gamma_e b (4 tau)
    CosineBurst aligned = wf;
    aligned.start_us = 0.0;
    aligned.f_khz = 1.0e3 / (2.0 * w.tau_us);
    const double phi_max = accumulated_phase(w, aligned, 0.0, 0.0, 0.001);
    CHECK(std::abs(phi_max) ==
          doctest::Approx(4.0 * 28.0 * 0.001 * 4.0 * w.tau_us).epsilon(1e-9));
}

TEST_CASE("delay estimation round trips") {
    const SensingWindow w{2.319, 4};
    CosineBurst wf;
    wf.f_khz = 215.6;
    wf.start_us = 11.0;
    wf.duration_us = 4.0 * w.tau_us;

    auto make_scan = [&](double truth, double b, double phi_rf) {
        CosineBurst v = wf;
        v.phi_rf = phi_rf;
        std::vector<std::pair<double, double>> scan;
        for (int i = 0; i <= 80; ++i) {
            const double tw = 2.0 + 18.0 * i / 80.0;
            const double phi = accumulated_phase(w, v, truth, tw, b);
            scan.emplace_back(tw, 0.5 * (1.0 - std::sin(phi)));
        }
        return scan;
    };

    const auto fit = estimate_delay(make_scan(1.088, 0.002, 0.0), w, wf);
    CHECK(std::abs(fit.t_delay_us - 1.088) < 1e-4);
    CHECK(fit.b_rf_mt == doctest::Approx(0.002).epsilon(1e-3));

    const auto zero = estimate_delay(make_scan(0.0, 0.002, 0.0), w, wf);
    CHECK(std::abs(zero.t_delay_us) < 1e-4);

    // the 270-degree variant lands on the same delay
    CosineBurst v270 = wf;
    v270.phi_rf = deg2rad(270.0);
    const auto fit270 = estimate_delay(make_scan(1.088, 0.002, deg2rad(270.0)), w, v270);
    CHECK(std::abs(fit270.t_delay_us - fit.t_delay_us) <
          std::max({fit.stderr_us, fit270.stderr_us, 1e-4}));

    // flat scan rejected
    std::vector<std::pair<double, double>> flat;
    for (int i = 0; i < 20; ++i) flat.emplace_back(i, 0.5);
    CHECK_THROWS_AS(estimate_delay(flat, w, wf), NumericalError);
}
