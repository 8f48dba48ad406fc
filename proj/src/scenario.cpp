#include "nvloc/scenario.hpp"

#include "nvloc/blochsim.hpp"
#include "nvloc/calibration.hpp"
#include "nvloc/errors.hpp"
#include "nvloc/estimation.hpp"
#include "nvloc/hamiltonian.hpp"
#include "nvloc/lattice.hpp"
#include "nvloc/rotation.hpp"
#include "nvloc/sequences.hpp"
#include "nvloc/units.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

namespace nvloc {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<double> parse_list(const std::string& s, const std::string& ctx) {
    std::vector<double> out;
    std::istringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty()) continue;
        try {
            size_t used = 0;
            out.push_back(std::stod(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw DomainError(ctx + ": bad number '" + item + "'");
        }
    }
    return out;
}

}  // namespace

bool Scenario::has(const std::string& section, const std::string& key) const {
    const auto it = sections.find(section);
    if (it == sections.end()) return false;
    for (const auto& [k, v] : it->second)
        if (k == key) return true;
    return false;
}

std::string Scenario::get(const std::string& section, const std::string& key) const {
    const auto it = sections.find(section);
    if (it != sections.end()) {
        for (const auto& [k, v] : it->second)
            if (k == key) return v;
    }
    throw DomainError(source_path + ": missing required key [" + section + "] " + key);
}

std::string Scenario::get_or(const std::string& section, const std::string& key,
                             const std::string& fallback) const {
    return has(section, key) ? get(section, key) : fallback;
}

double Scenario::number(const std::string& section, const std::string& key) const {
    const std::string v = get(section, key);
    try {
        return std::stod(v);
    } catch (const std::exception&) {
        throw DomainError(source_path + ": [" + section + "] " + key + ": bad number '" + v + "'");
    }
}

double Scenario::number_or(const std::string& section, const std::string& key,
                           double fallback) const {
    return has(section, key) ? number(section, key) : fallback;
}

int Scenario::integer_or(const std::string& section, const std::string& key, int fallback) const {
    return has(section, key) ? static_cast<int>(std::llround(number(section, key))) : fallback;
}

std::vector<std::string> Scenario::all(const std::string& section, const std::string& key) const {
    std::vector<std::string> out;
    const auto it = sections.find(section);
    if (it == sections.end()) return out;
    for (const auto& [k, v] : it->second)
        if (k == key) out.push_back(v);
    return out;
}

Scenario parse_scenario_text(const std::string& text, const std::string& label) {
    Scenario sc;
    sc.source_path = label;
    std::istringstream in(text);
    std::string line;
    std::string section;  // top level keys live in ""
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') {
                throw DomainError(label + ":" + std::to_string(lineno) + ": unterminated section");
            }
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw DomainError(label + ":" + std::to_string(lineno) + ": expected key = value");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string val = trim(line.substr(eq + 1));
        if (key.empty()) {
            throw DomainError(label + ":" + std::to_string(lineno) + ": empty key");
        }
        if (section.empty() && key == "name") sc.name = val;
        else if (section.empty() && key == "kind") sc.kind = val;
        else sc.sections[section].emplace_back(key, val);
    }
    if (sc.kind.empty()) throw DomainError(label + ": missing top-level 'kind'");
    if (sc.name.empty()) sc.name = sc.kind;
    return sc;
}

Scenario parse_scenario_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DomainError("cannot open scenario file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_scenario_text(ss.str(), path);
}

namespace {

SensorConfig sensor_from(const Scenario& sc) {
    SensorConfig cfg;
    cfg.d_mhz = sc.number_or("sensor", "d_mhz", cfg.d_mhz);
    cfg.gamma_e_mhz_mt = sc.number_or("sensor", "gamma_e_mhz_mt", cfg.gamma_e_mhz_mt);
    cfg.gamma_c_khz_mt = sc.number_or("sensor", "gamma_c_khz_mt", cfg.gamma_c_khz_mt);
    cfg.b0_mt = sc.number_or("sensor", "b0_mt", cfg.b0_mt);
    return cfg;
}

struct TargetSpec {
    HyperfineParams hf;
    double theta = 0.0;
    double phi = 0.0;
    ConditionalPrecession prec;
};

TargetSpec target_from(const Scenario& sc, const SensorConfig& cfg) {
    TargetSpec t;
    t.hf.a_parallel_khz = sc.number("target", "a_parallel_khz");
    t.hf.a_perp_khz = sc.number("target", "a_perp_khz");
    t.theta = deg2rad(sc.number_or("target", "theta_deg", 0.0));
    t.phi = deg2rad(sc.number_or("target", "phi_deg", 0.0));
    t.prec = conditional_precession(cfg, t.hf, t.theta, t.phi);
    return t;
}

std::vector<ConditionalPrecession> bath_from(const Scenario& sc, const SensorConfig& cfg) {
    std::vector<ConditionalPrecession> bath;
    for (const std::string& spin : sc.all("bath", "spin")) {
        const auto v = parse_list(spin, sc.source_path + ": [bath] spin");
        if (v.size() < 2 || v.size() > 4) {
            throw DomainError(sc.source_path +
                              ": [bath] spin needs a_par, a_perp[, theta_deg[, phi_deg]]");
        }
        const double theta = v.size() > 2 ? deg2rad(v[2]) : deg2rad(30.0);
        const double phi = v.size() > 3 ? deg2rad(v[3]) : 0.0;
        bath.push_back(conditional_precession(cfg, {v[0], v[1]}, theta, phi));
    }
    const int n_sample = sc.integer_or("bath", "sample_count", 0);
    if (n_sample > 0) {
        if (!sc.has("bath", "seed")) {
            throw DomainError(sc.source_path + ": [bath] sampling requires an explicit seed");
        }
        const auto par = parse_list(sc.get("bath", "a_parallel_range_khz"),
                                    sc.source_path + ": a_parallel_range_khz");
        const auto perp = parse_list(sc.get("bath", "a_perp_range_khz"),
                                     sc.source_path + ": a_perp_range_khz");
        if (par.size() != 2 || perp.size() != 2) {
            throw DomainError(sc.source_path + ": bath ranges need 'lo, hi'");
        }
        std::mt19937 rng(static_cast<unsigned>(sc.number("bath", "seed")));
        std::uniform_real_distribution<double> upar(par[0], par[1]);
        std::uniform_real_distribution<double> uperp(perp[0], perp[1]);
        std::uniform_real_distribution<double> uphi(0.0, two_pi);
        for (int i = 0; i < n_sample; ++i) {
            bath.push_back(conditional_precession(cfg, {upar(rng), uperp(rng)},
                                                  deg2rad(60.0), uphi(rng)));
        }
    }
    return bath;
}

double parabolic_refine(double x0, double x1, double y0, double y1, double y2) {
    const double denom = (y0 - 2.0 * y1 + y2);
    if (std::abs(denom) < 1e-300) return x1;
    return x1 + 0.5 * (x1 - x0) * (y0 - y2) / denom;
}

ResultTable run_cp_sweep(const Scenario& sc) {
    const SensorConfig cfg = sensor_from(sc);
    const TargetSpec target = target_from(sc, cfg);
    const auto bath = bath_from(sc, cfg);
    CpParams p;
    p.n_pulses = sc.integer_or("cp", "n_pulses", 16);
    const double lo = sc.number("cp", "tau_min_us");
    const double hi = sc.number("cp", "tau_max_us");
    const int n = sc.integer_or("cp", "tau_points", 241);
    if (n < 3 || hi <= lo) throw DomainError(sc.source_path + ": bad tau sweep grid");

    ResultTable t;
    t.columns = {"tau_us", "f_khz", "p_x"};
    std::vector<double> px(n);
    for (int i = 0; i < n; ++i) {
        p.tau_us = lo + (hi - lo) * i / (n - 1);
        std::vector<double> probs;
        probs.push_back(transition_probability_x(cp_axes(target.prec, p), p.n_pulses));
        for (const auto& b : bath)
            probs.push_back(transition_probability_x(cp_axes(b, p), p.n_pulses));
        px[i] = combine_independent(probs);
        t.rows.push_back({p.tau_us, 1.0e3 / (2.0 * p.tau_us), px[i]});
    }
    int imin = 0;
    for (int i = 1; i < n; ++i)
        if (px[i] < px[imin]) imin = i;
    double tau_dip = t.rows[imin][0];
    if (imin > 0 && imin + 1 < n) {
        tau_dip = parabolic_refine(t.rows[imin - 1][0], t.rows[imin][0], px[imin - 1],
                                   px[imin], px[imin + 1]);
    }
    t.add_summary("dip_tau_us", tau_dip);
    t.add_summary("dip_f_khz", 1.0e3 / (2.0 * tau_dip));
    t.add_summary("dip_p_x", px[imin]);

    // resonance center of the target dip: where the conditioned axes
    // anti-align (the f_t estimate the spectrum provides)
    double res_tau = lo, res_dot = 1.0;
    for (int i = 0; i < n; ++i) {
        p.tau_us = lo + (hi - lo) * i / (n - 1);
        const CpAxes ax = cp_axes(target.prec, p);
        if (ax.dot < res_dot) {
            res_dot = ax.dot;
            res_tau = p.tau_us;
        }
    }
    t.add_summary("target_resonance_tau_us", res_tau);
    t.add_summary("target_resonance_f_khz", 1.0e3 / (2.0 * res_tau));
    return t;
}

ResultTable run_cp_nutation(const Scenario& sc) {
    const SensorConfig cfg = sensor_from(sc);
    const TargetSpec target = target_from(sc, cfg);
    const auto bath = bath_from(sc, cfg);
    CpParams p;
    p.tau_us = sc.number("cp", "tau_us");
    const int n_min = sc.integer_or("cp", "n_min", 2);
    const int n_max = sc.integer_or("cp", "n_max", 240);
    const int n_step = sc.integer_or("cp", "n_step", 2);
    if (n_min % 2 || n_step % 2 || n_step <= 0 || n_max < n_min) {
        throw DomainError(sc.source_path + ": nutation sweep needs even n_min/n_step");
    }
    const double decay = sc.number_or("envelope", "decay_time_us", 0.0);

    const CpAxes ax_t = cp_axes(target.prec, p);
    std::vector<CpAxes> ax_b;
    for (const auto& b : bath) ax_b.push_back(cp_axes(b, p));

    ResultTable t;
    t.columns = {"n_pulses", "t_us", "p_x"};
    std::vector<double> ts, ps;
    for (int n = n_min; n <= n_max; n += n_step) {
        std::vector<double> probs{transition_probability_x(ax_t, n)};
        for (const auto& ax : ax_b) probs.push_back(transition_probability_x(ax, n));
        const double time = n * p.tau_us;
        ts.push_back(time);
        ps.push_back(combine_independent(probs));
    }
    if (decay > 0.0) {
        double mean = 0.0;
        for (double v : ps) mean += v;
        mean /= static_cast<double>(ps.size());
        for (size_t i = 0; i < ps.size(); ++i)
            ps[i] = apply_contrast_decay(ps[i], mean, ts[i], decay);
    }
    for (size_t i = 0; i < ps.size(); ++i) {
        t.rows.push_back({static_cast<double>(n_min + n_step * static_cast<int>(i)), ts[i], ps[i]});
    }

    // The per-pulse angle maps to the nutation frequency via
    // phi_cp = pi - 2 pi f_cp tau.
    const double f_cp_model = (pi - ax_t.phi_cp) / (two_pi * p.tau_us * khz_us);
    t.add_summary("f_cp_model_khz", f_cp_model);
    const double hint = sc.number_or("fit", "f_hint_khz", std::abs(f_cp_model));
    FitOptions fo;
    fo.fit_decay = decay > 0.0;
    const OscillationFit fit = fit_damped_cosine(ts, ps, hint, fo);
    t.add_summary("f_cp_fit_khz", fit.frequency_khz);
    t.add_summary("fit_amplitude", fit.amplitude);
    t.add_summary("fit_residual_rms", fit.residual_rms);
    if (fit.decay_time_us) t.add_summary("fit_decay_time_us", *fit.decay_time_us);
    t.add_summary("p_x_min", *std::min_element(ps.begin(), ps.end()));
    return t;
}

ResultTable run_correlation(const Scenario& sc) {
    const SensorConfig cfg = sensor_from(sc);
    const TargetSpec target = target_from(sc, cfg);
    CpParams p;
    p.n_pulses = sc.integer_or("cp", "n_pulses", 16);
    p.tau_us = sc.number("cp", "tau_us");
    const double t_min = sc.number_or("correlation", "t_min_us", 0.0);
    const double dt = sc.number("correlation", "dt_us");
    const int n = sc.integer_or("correlation", "points", 512);
    if (n < 8 || dt <= 0.0) throw DomainError(sc.source_path + ": bad correlation grid");

    std::vector<double> grid(n);
    for (int i = 0; i < n; ++i) grid[i] = t_min + i * dt;
    const std::vector<double> trace = correlation_trace(target.prec, p, grid);

    ResultTable t;
    t.columns = {"t_corr_us", "p"};
    for (int i = 0; i < n; ++i) t.rows.push_back({grid[i], trace[i]});

    const auto peaks = dominant_peaks(trace, dt, 2);
    if (peaks.size() == 2) {
        const double fa = std::max(peaks[0].first, peaks[1].first);
        const double fb = std::min(peaks[0].first, peaks[1].first);
        t.add_summary("f0_peak_khz", fa);
        t.add_summary("f1_peak_khz", fb);
        t.add_summary("midpoint_khz", 0.5 * (fa + fb));
        t.add_summary("bin_khz", 1.0e3 / (n * dt));
    } else if (!peaks.empty()) {
        t.add_summary("f_peak_khz", peaks[0].first);
    }
    return t;
}

PulsePolVariant variant_from(const Scenario& sc, const std::string& section) {
    const std::string v = sc.get_or(section, "variant", "PolY");
    if (v == "PolY" || v == "poly" || v == "Y") return PulsePolVariant::PolY;
    if (v == "PolX" || v == "polx" || v == "X") return PulsePolVariant::PolX;
    throw DomainError(sc.source_path + ": [" + section + "] variant must be PolX or PolY");
}

ResultTable run_pulsepol_sweep(const Scenario& sc) {
    const SensorConfig cfg = sensor_from(sc);
    const TargetSpec target = target_from(sc, cfg);
    const auto bath = bath_from(sc, cfg);
    PulsePolParams pp;
    pp.n_pol = sc.integer_or("pulsepol", "n_pol", 5);
    pp.n_rep = sc.integer_or("pulsepol", "n_rep", 1);
    pp.variant = variant_from(sc, "pulsepol");
    const double f_lo = sc.number("pulsepol", "f_min_khz");
    const double f_hi = sc.number("pulsepol", "f_max_khz");
    const int n = sc.integer_or("pulsepol", "points", 221);
    if (n < 3 || f_hi <= f_lo || f_lo <= 0.0) {
        throw DomainError(sc.source_path + ": bad pulsepol sweep grid");
    }

    ResultTable t;
    t.columns = {"inv_two_tau_pol_khz", "p0", "target_iz"};
    for (int i = 0; i < n; ++i) {
        const double f = f_lo + (f_hi - f_lo) * i / (n - 1);
        pp.tau_pol_us = 1.0e3 / (2.0 * f);
        std::vector<double> probs;
        const PulsePolResult rt = pulsepol_transfer(target.prec, pp, {});
        probs.push_back(rt.p0);
        for (const auto& b : bath) probs.push_back(pulsepol_transfer(b, pp, {}).p0);
        t.rows.push_back({f, combine_independent(probs), 0.5 * rt.final_state.bloch.z});
    }

    const double f_t = 0.5 * (target.prec.f0_khz + target.prec.f1_khz);
    for (int k : {3, 5}) {
        PulsePolParams res = pp;
        res.tau_pol_us = 1.0e3 * k / (2.0 * f_t);
        res.n_rep = sc.integer_or("pulsepol", "n_rep_resonant", 5);
        const PulsePolResult r = pulsepol_transfer(target.prec, res, {});
        t.add_summary("iz_k" + std::to_string(k), 0.5 * r.final_state.bloch.z);
        t.add_summary("p0_k" + std::to_string(k), r.p0);
    }
    t.add_summary("f_t_khz", f_t);
    return t;
}

ResultTable run_selective(const Scenario& sc) {
    const SensorConfig cfg = sensor_from(sc);
    const TargetSpec target = target_from(sc, cfg);
    const auto bath = bath_from(sc, cfg);
    PulsePolParams pp;
    pp.n_pol = sc.integer_or("pulsepol", "n_pol", 5);
    pp.n_rep = sc.integer_or("pulsepol", "n_rep", 1);
    pp.variant = PulsePolVariant::PolY;
    RfPiPulse rf;
    rf.frequency_khz = sc.number_or("rf", "frequency_khz", target.prec.f1_khz);
    rf.t_pi_us = sc.number_or("rf", "t_pi_us", 199.443);
    const double f_lo = sc.number("pulsepol", "f_min_khz");
    const double f_hi = sc.number("pulsepol", "f_max_khz");
    const int n = sc.integer_or("pulsepol", "points", 221);
    if (n < 3 || f_hi <= f_lo || f_lo <= 0.0) {
        throw DomainError(sc.source_path + ": bad pulsepol sweep grid");
    }

    const int passes = sc.integer_or("pulsepol", "steady_state_passes", 3);

    ResultTable t;
    t.columns = {"inv_two_tau_pol_khz", "p0_selective", "p0_unselective"};
    std::vector<double> freq(n), sel(n), unsel(n), sel_t(n), unsel_t(n);
    const std::vector<ConditionalPrecession> no_bath;
    for (int i = 0; i < n; ++i) {
        const double f = f_lo + (f_hi - f_lo) * i / (n - 1);
        pp.tau_pol_us = 1.0e3 / (2.0 * f);
        const SelectiveResult r = selective_polarization(target.prec, bath, pp, rf, passes);
        std::vector<double> probs{pulsepol_transfer(target.prec, pp, {}).p0};
        freq[i] = f;
        sel[i] = r.p0_combined;
        unsel_t[i] = probs[0];
        for (const auto& b : bath) probs.push_back(pulsepol_transfer(b, pp, {}).p0);
        unsel[i] = combine_independent(probs);
        sel_t[i] = selective_polarization(target.prec, no_bath, pp, rf, passes).p0_combined;
        t.rows.push_back({f, sel[i], unsel[i]});
    }

    // Integrated non-target dip depths around each bath spin's k = 3, 5
    // resonances, measured against the target-only baseline so the flanks
    // of the target dips do not leak into the bath windows.
    const double win = sc.number_or("pulsepol", "dip_window_khz", 4.0);
    auto integrate_depth = [&](const std::vector<double>& full,
                               const std::vector<double>& base, double center) {
        double acc = 0.0;
        for (int i = 0; i < n; ++i) {
            if (std::abs(freq[i] - center) <= win) acc += base[i] - full[i];
        }
        return std::max(acc, 0.0);
    };
    double worst_ratio = std::numeric_limits<double>::infinity();
    int spin_idx = 0;
    for (const auto& b : bath) {
        ++spin_idx;
        const double fb = 0.5 * (b.f0_khz + b.f1_khz);
        for (int k : {3, 5}) {
            const double c = fb / k;
            if (c < f_lo + win || c > f_hi - win) continue;
            const double du = integrate_depth(unsel, unsel_t, c);
            const double ds = integrate_depth(sel, sel_t, c);
            if (du <= 0.0) continue;
            const double ratio = du / std::max(ds, 1e-12);
            worst_ratio = std::min(worst_ratio, ratio);
            t.add_summary("depth_unselective_spin" + std::to_string(spin_idx) + "_k" +
                              std::to_string(k),
                          du);
            t.add_summary("depth_selective_spin" + std::to_string(spin_idx) + "_k" +
                              std::to_string(k),
                          ds);
        }
    }
    if (std::isfinite(worst_ratio)) t.add_summary("min_suppression_ratio", worst_ratio);
    const double f_t = 0.5 * (target.prec.f0_khz + target.prec.f1_khz);
    const std::vector<double> ones(n, 1.0);
    for (int k : {3, 5}) {
        const double c = f_t / k;
        if (c >= f_lo + win && c <= f_hi - win) {
            t.add_summary("target_depth_selective_k" + std::to_string(k),
                          integrate_depth(sel, ones, c));
        }
    }
    return t;
}

ResultTable run_azimuth(const Scenario& sc) {
    const SensorConfig cfg = sensor_from(sc);
    const TargetSpec target = target_from(sc, cfg);

    ProtocolTiming timing;
    timing.t1_us = sc.number("timing", "t1_us");
    timing.t2_us = sc.number_or("timing", "t2_us", timing.t1_us + 2.288);
    timing.t0_us = sc.number("timing", "t0_us");
    timing.t_delay_us = sc.number_or("timing", "t_delay_us", 1.088);

    const double f_rf = sc.number_or("protocol", "f_rf_khz", target.prec.f1_khz);
    const double f_p = sc.number_or("protocol", "f_p_khz", f_rf);
    const double theta_c = deg2rad(sc.number_or("protocol", "theta_c_deg", 55.7));
    const double phi_c = deg2rad(sc.number_or("protocol", "phi_c_deg", 186.2));
    const Vec3 e_rf{std::sin(theta_c) * std::cos(phi_c), std::sin(theta_c) * std::sin(phi_c),
                    std::cos(theta_c)};
    const PulsePolVariant variant = variant_from(sc, "protocol");
    const auto phi_rf_list =
        parse_list(sc.get_or("protocol", "phi_rf_deg", "0, 90, 180, 270"),
                   sc.source_path + ": phi_rf_deg");

    CpParams cp;
    cp.n_pulses = sc.integer_or("cp", "n_pulses", 16);
    cp.tau_us = sc.number_or("cp", "tau_us", 1.6608);
    cp.readout = ReadoutPhase::Y;
    const CpAxes axes = cp_axes(target.prec, cp);

    UndersamplingConfig us;
    us.dt_us = sc.number_or("undersampling", "dt_us", 9.6);
    us.t0_us = timing.t0_us;
    const int n_pts = sc.integer_or("undersampling", "points", 104);
    const auto [m, f_alias] = undersampling_map(f_p, us.dt_us);
    us.m = m;
    const double decay = sc.number_or("envelope", "decay_time_us", 0.0);

    BlochSimOptions opts;
    opts.initial = variant == PulsePolVariant::PolY ? Vec3{0.0, 0.0, -1.0} : Vec3{0.0, 0.0, 1.0};

    ResultTable t;
    t.columns = {"phi_rf_deg", "t_us", "p_y"};
    std::vector<PhiMeasurement> measured;
    std::vector<double> intercepts;
    for (double prf_deg : phi_rf_list) {
        const double prf = deg2rad(prf_deg);
        const Vec3 nu0 = simulate_protocol_bloch(0.0, prf, timing, target.prec, e_rf, f_rf,
                                                 f_p, opts);
        std::vector<double> ts(n_pts), ps(n_pts);
        for (int k = 0; k < n_pts; ++k) {
            ts[k] = us.t0_us + k * us.dt_us;
            const Vec3 nu = apply(free_precession(target.prec.e_p, f_p, ts[k]), nu0);
            double p = transition_probability_y({nu, {}}, axes, cp.n_pulses);
            if (decay > 0.0) p = apply_contrast_decay(p, 0.5, ts[k], decay);
            ps[k] = p;
            t.rows.push_back({prf_deg, ts[k], p});
        }
        FitOptions fo;
        fo.fit_decay = decay > 0.0;
        const OscillationFit fit = fit_damped_cosine(ts, ps, std::max(f_alias, 0.5), fo);
        const double eta = recover_phase(fit.phase, us);
        measured.push_back({prf, eta});
        t.add_summary("f_alias_fit_khz_phirf_" + format_number(prf_deg), fit.frequency_khz);
        t.add_summary("phi0_deg_phirf_" + format_number(prf_deg), rad2deg(eta));
        intercepts.push_back(circular_diff(eta, prf));
    }

    // phi0(phi_rf) intercept assuming the unit slope seen in the data.
    double sc_sum = 0.0, cs_sum = 0.0;
    for (double ic : intercepts) {
        sc_sum += std::sin(ic);
        cs_sum += std::cos(ic);
    }
    const double intercept = wrap_two_pi(std::atan2(sc_sum, cs_sum));
    t.add_summary("phi0_intercept_deg", rad2deg(intercept));
    t.add_summary("alias_m", static_cast<double>(us.m));
    t.add_summary("f_alias_khz", f_alias);

    // Analytic azimuth estimate per measurement, averaged.
    double sa = 0.0, ca = 0.0;
    for (const auto& mnt : measured) {
        const double pn0 = phi_n_analytic(mnt.phi_rf, phi_c, f_p, f_rf, timing.t1_us);
        const double phi_est = determine_phi(pn0, mnt.phi_0, target.theta);
        sa += std::sin(phi_est);
        ca += std::cos(phi_est);
    }
    t.add_summary("phi_analytic_deg", rad2deg(wrap_two_pi(std::atan2(sa, ca))));

    if (sc.integer_or("protocol", "run_fit_phi", 0) != 0) {
        const ConditionalPrecession prec_ref =
            conditional_precession(cfg, target.hf, target.theta, 0.0);
        const double fp_shared = f_p;
        const PhiFit pf = fit_phi(measured, timing, prec_ref, e_rf, f_rf,
                                  std::span<const double>(&fp_shared, 1), opts);
        t.add_summary("phi_fit_deg", rad2deg(pf.phi));
        t.add_summary("phi_fit_rms_deg", rad2deg(pf.accuracy));
        t.add_summary("phi_fit_ambiguous", pf.ambiguous ? 1.0 : 0.0);
    }
    return t;
}

ResultTable run_sync_readout(const Scenario& sc) {
    const SensorConfig cfg = sensor_from(sc);
    auto bath = bath_from(sc, cfg);
    if (bath.empty()) throw DomainError(sc.source_path + ": sync-readout needs bath spins");
    CpParams cp;
    cp.n_pulses = sc.integer_or("sync", "n_pulses", 2);
    cp.tau_us = sc.number_or("sync", "tau_us", 1.0e3 / (2.0 * cfg.larmor_khz()));
    cp.readout = ReadoutPhase::Y;
    const double t_l = sc.number("sync", "t_l_us");
    const int m_blocks = sc.integer_or("sync", "m_blocks", 501);
    const PulsePolVariant variant = variant_from(sc, "sync");
    const double decay = sc.number_or("envelope", "decay_time_us", 0.0);

    // Polarized state tipped into the plane: the pi/2 about e_x maps the
    // PolY-polarized -e_z to +e_y (PolX to -e_y).
    const SpinRotation tip = rotation_from_axis_angle(e_x, 0.5 * pi);
    const Vec3 pol = variant == PulsePolVariant::PolY ? Vec3{0.0, 0.0, -1.0}
                                                      : Vec3{0.0, 0.0, 1.0};
    std::vector<Vec3> initial(bath.size(), apply(tip, pol));

    auto trace = synchronized_readout(bath, initial, t_l, m_blocks, cp);
    ResultTable t;
    t.columns = {"t_us", "p_y"};
    for (int i = 0; i < m_blocks; ++i) {
        double p = trace[i];
        if (decay > 0.0) p = apply_contrast_decay(p, 0.5, i * t_l, decay);
        t.rows.push_back({i * t_l, p});
        trace[i] = p;
    }
    const auto peaks = dominant_peaks(trace, t_l, 1);
    if (!peaks.empty()) {
        const auto [m, f_alias] = undersampling_map(cfg.larmor_khz(), t_l);
        t.add_summary("f_alias_peak_khz", peaks[0].first);
        t.add_summary("alias_m", static_cast<double>(m));
        t.add_summary("f_recovered_khz", peaks[0].first + m * 1.0e3 / (2.0 * t_l));
        const OscillationFit fit =
            fit_damped_cosine([&] {
                std::vector<double> ts(m_blocks);
                for (int i = 0; i < m_blocks; ++i) ts[i] = i * t_l;
                return ts;
            }(), trace, std::max(peaks[0].first, 0.5));
        t.add_summary("phase_deg", rad2deg(fit.phase));
        t.add_summary("amplitude", fit.amplitude);
    }
    return t;
}

ResultTable run_delay_scan(const Scenario& sc) {
    SensingWindow w;
    w.tau_us = sc.number_or("window", "tau_us", 2.319);
    w.n_pulses = sc.integer_or("window", "n_pulses", 4);
    CosineBurst wf;
    wf.f_khz = sc.number_or("waveform", "f_khz", 215.6);
    wf.start_us = sc.number_or("waveform", "start_us", 11.0);
    wf.duration_us = sc.number_or("waveform", "duration_us", 4.0 * w.tau_us);
    wf.phi_rf = deg2rad(sc.number_or("waveform", "phi_rf_deg", 0.0));

    const double truth = sc.number("scan", "t_delay_truth_us");
    const double b_rf = sc.number("scan", "b_rf_mt");
    const double lo = sc.number("scan", "t_wait_min_us");
    const double hi = sc.number("scan", "t_wait_max_us");
    const int n = sc.integer_or("scan", "points", 81);
    const double noise = sc.number_or("scan", "noise_sd", 0.0);
    if (n < 4 || hi <= lo) throw DomainError(sc.source_path + ": bad delay scan grid");
    std::mt19937 rng(0);
    if (noise > 0.0) {
        if (!sc.has("scan", "seed")) {
            throw DomainError(sc.source_path + ": noisy scan requires an explicit seed");
        }
        rng.seed(static_cast<unsigned>(sc.number("scan", "seed")));
    }
    std::normal_distribution<double> gauss(0.0, noise);

    std::vector<std::pair<double, double>> scan(n);
    ResultTable t;
    t.columns = {"t_wait_us", "p_y"};
    for (int i = 0; i < n; ++i) {
        const double tw = lo + (hi - lo) * i / (n - 1);
        const double phi = accumulated_phase(w, wf, truth, tw, b_rf);
        double p = 0.5 * (1.0 - std::sin(phi));
        if (noise > 0.0) p += gauss(rng);
        scan[i] = {tw, p};
        t.rows.push_back({tw, p});
    }
    const DelayFit fit = estimate_delay(scan, w, wf);
    t.add_summary("t_delay_us", fit.t_delay_us);
    t.add_summary("t_delay_stderr_us", fit.stderr_us);
    t.add_summary("b_rf_mt", fit.b_rf_mt);
    t.add_summary("residual_rms", fit.residual_rms);
    t.add_summary("t_delay_truth_us", truth);
    return t;
}

ResultTable run_field_fit(const Scenario& sc) {
    const double d = sc.number_or("field", "d_mhz", 2870.4);
    const double b = sc.number("field", "b_mt");
    const double theta = deg2rad(sc.number("field", "theta_deg"));
    const double phi = deg2rad(sc.number("field", "phi_deg"));
    const double gamma_e = sc.number_or("field", "gamma_e_mhz_mt", 28.0);
    const double noise = sc.number_or("field", "noise_sd_mhz", 0.0);
    std::mt19937 rng(0);
    if (noise > 0.0) {
        if (!sc.has("field", "seed")) {
            throw DomainError(sc.source_path + ": noisy observations require an explicit seed");
        }
        rng.seed(static_cast<unsigned>(sc.number("field", "seed")));
    }
    std::normal_distribution<double> gauss(0.0, noise);

    const Vec3 bvec = Vec3{std::sin(theta) * std::cos(phi), std::sin(theta) * std::sin(phi),
                           std::cos(theta)} *
                      b;
    std::vector<FieldObservation> obs;
    ResultTable t;
    t.columns = {"axis_theta_deg", "axis_phi_deg", "f_minus_mhz", "f_plus_mhz"};
    for (const Vec3& axis : nv_axes_lab()) {
        auto [fm, fp] = nv_resonances(d, gamma_e, bvec, axis);
        if (noise > 0.0) {
            fm += gauss(rng);
            fp += gauss(rng);
        }
        obs.push_back({axis, fm, fp});
        const Spherical s = spherical_of(axis);
        t.rows.push_back({rad2deg(s.theta), rad2deg(s.phi), fm, fp});
    }
    const FieldFit fit = fit_field(obs, gamma_e);
    t.add_summary("d_mhz", fit.d_mhz);
    t.add_summary("b_mt", fit.b_mag_mt);
    t.add_summary("theta_deg", rad2deg(fit.theta_lab));
    t.add_summary("phi_deg", rad2deg(fit.phi_lab));
    t.add_summary("residual_rms_mhz", fit.residual_rms_mhz);
    return t;
}

}  // namespace

ResultTable run_scenario(const Scenario& sc) {
    if (sc.kind == "cp-sweep") return run_cp_sweep(sc);
    if (sc.kind == "cp-nutation") return run_cp_nutation(sc);
    if (sc.kind == "correlation") return run_correlation(sc);
    if (sc.kind == "pulsepol-sweep") return run_pulsepol_sweep(sc);
    if (sc.kind == "selective") return run_selective(sc);
    if (sc.kind == "azimuth-protocol") return run_azimuth(sc);
    if (sc.kind == "sync-readout") return run_sync_readout(sc);
    if (sc.kind == "delay-scan") return run_delay_scan(sc);
    if (sc.kind == "field-fit") return run_field_fit(sc);
    throw DomainError(sc.source_path + ": unknown scenario kind '" + sc.kind + "'");
}

}  // namespace nvloc
