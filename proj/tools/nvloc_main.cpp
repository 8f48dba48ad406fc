// nvloc: command-line surface for the NV / nuclear-spin localization toolkit.
// All angles at this boundary are degrees, times are us, frequencies kHz
// unless the flag name says MHz.

#include "nvloc/blochsim.hpp"
#include "nvloc/calibration.hpp"
#include "nvloc/errors.hpp"
#include "nvloc/estimation.hpp"
#include "nvloc/hamiltonian.hpp"
#include "nvloc/lattice.hpp"
#include "nvloc/scenario.hpp"
#include "nvloc/sequences.hpp"
#include "nvloc/table.hpp"
#include "nvloc/units.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

namespace {

using namespace nvloc;

struct OutputOpts {
    std::string out;
    std::string format = "csv";
};

void add_output_flags(CLI::App* cmd, OutputOpts& o) {
    cmd->add_option("--out", o.out, "Output file (default: stdout or $NVLOC_OUT_DIR)");
    cmd->add_option("--format", o.format, "Output format: csv|json")
        ->check(CLI::IsMember({"csv", "json"}));
}

std::string resolve_out(const std::string& out, const std::string& fallback_name) {
    if (!out.empty()) return out;
    if (const char* dir = std::getenv("NVLOC_OUT_DIR")) {
        return (std::filesystem::path(dir) / fallback_name).string();
    }
    return {};
}

void emit(const ResultTable& t, const OutputOpts& o, const std::string& fallback_name) {
    const std::string body = o.format == "json" ? to_json(t) : to_csv(t);
    const std::string path = resolve_out(o.out, fallback_name + "." + o.format);
    if (path.empty()) {
        std::cout << body;
        if (o.format == "csv" && !t.summary.empty()) std::cout << summary_json(t);
    } else {
        write_file(path, body);
        if (o.format == "csv" && !t.summary.empty()) {
            write_file(path + ".summary.json", summary_json(t));
        }
        std::cout << "wrote " << path << "\n";
    }
}

std::vector<std::vector<double>> read_csv_numeric(const std::string& path,
                                                  std::vector<std::string>& header) {
    std::ifstream in(path);
    if (!in) throw DomainError("cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw DomainError(path + ": empty file");
    {
        std::istringstream hs(line);
        std::string col;
        while (std::getline(hs, col, ',')) header.push_back(col);
    }
    std::vector<std::vector<double>> rows;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        std::string field;
        std::vector<double> row;
        int fieldno = 0;
        while (std::getline(ls, field, ',')) {
            ++fieldno;
            try {
                row.push_back(std::stod(field));
            } catch (const std::exception&) {
                throw DomainError(path + ":" + std::to_string(lineno) + ": field " +
                                  std::to_string(fieldno) + ": bad number '" + field + "'");
            }
        }
        if (row.size() != header.size()) {
            throw DomainError(path + ":" + std::to_string(lineno) + ": expected " +
                              std::to_string(header.size()) + " fields");
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

int run_main(int argc, char** argv) {
    CLI::App app{"nvloc: forward simulation and inverse estimation for single nuclear-spin "
                 "localization with an NV quantum sensor"};
    app.require_subcommand(1);
    app.footer("Units: angles deg, times us, frequencies kHz (MHz where the flag says so).");

    // run
    auto* c_run = app.add_subcommand("run", "Run a scenario file");
    std::string scenario_path;
    std::string golden_dir;
    OutputOpts run_out;
    c_run->add_option("scenario", scenario_path, "Scenario file")->required();
    c_run->add_option("--write-golden", golden_dir,
                      "Regenerate the golden output for this scenario into the given directory");
    add_output_flags(c_run, run_out);
    c_run->callback([&] {
        const Scenario sc = parse_scenario_file(scenario_path);
        const ResultTable t = run_scenario(sc);
        if (!golden_dir.empty()) {
            const auto base = std::filesystem::path(golden_dir) / sc.name;
            write_file(base.string() + ".csv", to_csv(t));
            write_file(base.string() + ".summary.json", summary_json(t));
            std::cout << "wrote golden " << base.string() << ".csv\n";
            return;
        }
        emit(t, run_out, sc.name);
    });

    // fit
    auto* c_fit = app.add_subcommand("fit", "Fit A cos(2 pi f t + phi0) [exp(-t/T)] + B to a trace");
    std::string trace_path;
    double f_hint = 0.0;
    bool with_decay = false;
    OutputOpts fit_out;
    c_fit->add_option("trace", trace_path, "CSV with header t_us,value")->required();
    c_fit->add_option("--f-hint", f_hint, "Frequency hint, kHz")->required();
    c_fit->add_flag("--decay", with_decay, "Fit a decay time too");
    add_output_flags(c_fit, fit_out);
    c_fit->callback([&] {
        std::vector<std::string> header;
        const auto rows = read_csv_numeric(trace_path, header);
        if (header.size() < 2) throw DomainError(trace_path + ": need t_us,value columns");
        std::vector<double> ts, vs;
        for (const auto& r : rows) {
            ts.push_back(r[0]);
            vs.push_back(r[1]);
        }
        FitOptions fo;
        fo.fit_decay = with_decay;
        const OscillationFit fit = fit_damped_cosine(ts, vs, f_hint, fo);
        ResultTable t;
        t.add_summary("amplitude", fit.amplitude);
        t.add_summary("offset", fit.offset);
        t.add_summary("frequency_khz", fit.frequency_khz);
        t.add_summary("phase_deg", rad2deg(fit.phase));
        if (fit.decay_time_us) t.add_summary("decay_time_us", *fit.decay_time_us);
        t.add_summary("residual_rms", fit.residual_rms);
        t.add_summary("converged", fit.converged ? 1.0 : 0.0);
        std::cout << summary_json(t);
    });

    // invert-hyperfine
    auto* c_inv = app.add_subcommand("invert-hyperfine",
                                     "Hyperfine parameters from (f_cp, f0, f1, tau)");
    double fcp = 0.0, f0 = 0.0, f1 = 0.0, tau = 0.0;
    c_inv->add_option("--fcp", fcp, "Nutation frequency f_cp, kHz")->required();
    c_inv->add_option("--f0", f0, "Bare precession frequency f0, kHz")->required();
    c_inv->add_option("--f1", f1, "Coupled precession frequency f1, kHz")->required();
    c_inv->add_option("--tau", tau, "CP inter-pulse spacing, us")->required();
    c_inv->callback([&] {
        const HyperfineParams hf = estimate_hyperfine(fcp, f0, f1, tau);
        ResultTable t;
        t.add_summary("a_parallel_khz", hf.a_parallel_khz);
        t.add_summary("a_perp_khz", hf.a_perp_khz);
        std::cout << summary_json(t);
    });

    // recover-phase
    auto* c_rec = app.add_subcommand("recover-phase", "Undo undersampling on a fitted phase");
    double eta_deg = 0.0, rp_t0 = 0.0, rp_dt = 0.0;
    int rp_m = 0;
    c_rec->add_option("--eta", eta_deg, "Aliased phase, deg")->required();
    c_rec->add_option("--m", rp_m, "Alias order (even)")->required();
    c_rec->add_option("--t0", rp_t0, "Sampling start time, us")->required();
    c_rec->add_option("--dt", rp_dt, "Sampling interval, us")->required();
    c_rec->callback([&] {
        const double eta = recover_phase(deg2rad(eta_deg), {rp_dt, rp_t0, rp_m});
        ResultTable t;
        t.add_summary("phase_deg", rad2deg(eta));
        std::cout << summary_json(t);
    });

    // match-sites
    auto* c_match = app.add_subcommand("match-sites",
                                       "Match measured hyperfine values against the DFT table");
    double apar = 0.0, aperp = 0.0;
    std::string tol_str = "5,1";
    std::string table_path;
    c_match->add_option("--apar", apar, "Measured A_parallel, kHz")->required();
    c_match->add_option("--aperp", aperp, "Measured A_perp, kHz")->required();
    c_match->add_option("--tol", tol_str, "Tolerances 'par,perp' in kHz (default 5,1)");
    c_match->add_option("--table", table_path,
                        "Candidate table (csv: label,a_parallel_khz,a_perp_khz); default builtin");
    c_match->callback([&] {
        double tp = 0.0, tq = 0.0;
        if (std::sscanf(tol_str.c_str(), "%lf,%lf", &tp, &tq) != 2) {
            throw DomainError("--tol expects 'par,perp'");
        }
        std::vector<DftCandidate> table;
        if (!table_path.empty()) {
            table = load_candidates(table_path);
        } else {
            const auto b = builtin_candidates();
            table.assign(b.begin(), b.end());
        }
        const auto matches = match_hyperfine({apar, aperp}, table, tp, tq);
        std::cout << "label,a_parallel_khz,a_perp_khz\n";
        for (const auto& m : matches) {
            std::cout << m.label << "," << format_number(m.a_parallel_khz) << ","
                      << format_number(m.a_perp_khz) << "\n";
        }
        std::cout << "# matched " << matches.size() << " of " << table.size() << "\n";
    });

    // phi
    auto* c_phi = app.add_subcommand("phi", "Azimuth from phi0(phi_rf) measurements");
    std::string meas_path, phi_config;
    bool analytic = false, simulate = false;
    double phi_c_deg = 186.2, phi_fp = 0.0, phi_frf = 0.0, phi_t1 = 0.0, phi_theta_deg = 0.0;
    c_phi->add_option("--measurements", meas_path,
                      "CSV with header phi_rf_deg,phi0_deg[,f_p_khz]")
        ->required();
    c_phi->add_flag("--analytic", analytic, "Use the analytic phi_n(0) relation");
    c_phi->add_flag("--simulate", simulate, "Fit phi with the full Bloch simulation");
    c_phi->add_option("--config", phi_config, "Scenario file providing timing/target/protocol");
    c_phi->add_option("--phi-c", phi_c_deg, "Coil azimuth in the sensor frame, deg");
    c_phi->add_option("--f-p", phi_fp, "Precession frequency, kHz (analytic path)");
    c_phi->add_option("--f-rf", phi_frf, "RF frequency, kHz");
    c_phi->add_option("--t1", phi_t1, "RF pulse length, us (analytic path)");
    c_phi->add_option("--theta", phi_theta_deg, "Site polar angle, deg")->required();
    c_phi->callback([&] {
        if (analytic == simulate) {
            throw DomainError("choose exactly one of --analytic / --simulate");
        }
        std::vector<std::string> header;
        const auto rows = read_csv_numeric(meas_path, header);
        if (rows.empty() || header.size() < 2) {
            throw DomainError(meas_path + ": need phi_rf_deg,phi0_deg rows");
        }
        ResultTable t;
        if (analytic) {
            if (phi_fp <= 0.0 || phi_frf <= 0.0 || phi_t1 <= 0.0) {
                throw DomainError("--analytic needs --f-p, --f-rf and --t1");
            }
            double s = 0.0, c = 0.0;
            for (const auto& r : rows) {
                const double fp = header.size() > 2 && r.size() > 2 ? r[2] : phi_fp;
                const double pn0 =
                    phi_n_analytic(deg2rad(r[0]), deg2rad(phi_c_deg), fp, phi_frf, phi_t1);
                const double est = determine_phi(pn0, deg2rad(r[1]), deg2rad(phi_theta_deg));
                s += std::sin(est);
                c += std::cos(est);
            }
            t.add_summary("phi_deg", rad2deg(wrap_two_pi(std::atan2(s, c))));
            t.add_summary("points", static_cast<double>(rows.size()));
        } else {
            if (phi_config.empty()) throw DomainError("--simulate needs --config");
            const Scenario sc = parse_scenario_file(phi_config);
            const SensorConfig cfg = [&] {
                SensorConfig c2;
                c2.d_mhz = sc.number_or("sensor", "d_mhz", c2.d_mhz);
                c2.gamma_e_mhz_mt = sc.number_or("sensor", "gamma_e_mhz_mt", c2.gamma_e_mhz_mt);
                c2.gamma_c_khz_mt = sc.number_or("sensor", "gamma_c_khz_mt", c2.gamma_c_khz_mt);
                c2.b0_mt = sc.number_or("sensor", "b0_mt", c2.b0_mt);
                return c2;
            }();
            HyperfineParams hf{sc.number("target", "a_parallel_khz"),
                               sc.number("target", "a_perp_khz")};
            const ConditionalPrecession prec =
                conditional_precession(cfg, hf, deg2rad(phi_theta_deg), 0.0);
            ProtocolTiming timing;
            timing.t1_us = sc.number("timing", "t1_us");
            timing.t2_us = sc.number_or("timing", "t2_us", timing.t1_us + 2.288);
            timing.t0_us = sc.number("timing", "t0_us");
            const double f_rf = phi_frf > 0.0 ? phi_frf
                                              : sc.number_or("protocol", "f_rf_khz", prec.f1_khz);
            const double theta_c = deg2rad(sc.number_or("protocol", "theta_c_deg", 55.7));
            const double phi_cc = deg2rad(sc.number_or("protocol", "phi_c_deg", phi_c_deg));
            const Vec3 e_rf{std::sin(theta_c) * std::cos(phi_cc),
                            std::sin(theta_c) * std::sin(phi_cc), std::cos(theta_c)};
            std::vector<PhiMeasurement> meas;
            std::vector<double> fps;
            for (const auto& r : rows) {
                meas.push_back({deg2rad(r[0]), deg2rad(r[1])});
                if (header.size() > 2 && r.size() > 2) fps.push_back(r[2]);
            }
            if (fps.empty()) fps.push_back(phi_fp > 0.0 ? phi_fp : f_rf);
            const PhiFit fit = fit_phi(meas, timing, prec, e_rf, f_rf, fps);
            t.add_summary("phi_deg", rad2deg(fit.phi));
            t.add_summary("rms_deg", rad2deg(fit.accuracy));
            t.add_summary("ambiguous", fit.ambiguous ? 1.0 : 0.0);
        }
        std::cout << summary_json(t);
    });

    // calibrate
    auto* c_cal = app.add_subcommand("calibrate", "Field or delay calibration");
    c_cal->require_subcommand(1);
    auto* c_field = c_cal->add_subcommand("field", "Vector DC magnetometry fit");
    std::string field_path;
    double cal_gamma_e = 28.0;
    c_field->add_option("observations", field_path,
                        "CSV: axis_theta_deg,axis_phi_deg,f_minus_mhz,f_plus_mhz")
        ->required();
    c_field->add_option("--gamma-e-mhz", cal_gamma_e, "Electron gyromagnetic ratio, MHz/mT");
    c_field->callback([&] {
        std::vector<std::string> header;
        const auto rows = read_csv_numeric(field_path, header);
        if (header.size() < 4) throw DomainError(field_path + ": need 4 columns");
        std::vector<FieldObservation> obs;
        for (const auto& r : rows) {
            const double th = deg2rad(r[0]), ph = deg2rad(r[1]);
            obs.push_back({{std::sin(th) * std::cos(ph), std::sin(th) * std::sin(ph),
                            std::cos(th)},
                           r[2],
                           r[3]});
        }
        const FieldFit fit = fit_field(obs, cal_gamma_e);
        ResultTable t;
        t.add_summary("d_mhz", fit.d_mhz);
        t.add_summary("b_mt", fit.b_mag_mt);
        t.add_summary("theta_deg", rad2deg(fit.theta_lab));
        t.add_summary("phi_deg", rad2deg(fit.phi_lab));
        t.add_summary("residual_rms_mhz", fit.residual_rms_mhz);
        std::cout << summary_json(t);
    });
    auto* c_delay = c_cal->add_subcommand("delay", "RF delay fit from a t_wait scan");
    std::string delay_path;
    double dl_tau = 2.319, dl_f = 215.6, dl_start = 11.0, dl_dur = -1.0, dl_phirf = 0.0;
    int dl_n = 4;
    c_delay->add_option("scan", delay_path, "CSV: t_wait_us,p_y")->required();
    c_delay->add_option("--tau", dl_tau, "CP spacing, us");
    c_delay->add_option("--n", dl_n, "CP pulse count (even)");
    c_delay->add_option("--f", dl_f, "Waveform frequency, kHz");
    c_delay->add_option("--start", dl_start, "Waveform start, us");
    c_delay->add_option("--duration", dl_dur, "Waveform duration, us (default 4 tau)");
    c_delay->add_option("--phi-rf", dl_phirf, "Waveform phase, deg");
    c_delay->callback([&] {
        std::vector<std::string> header;
        const auto rows = read_csv_numeric(delay_path, header);
        std::vector<std::pair<double, double>> scan;
        for (const auto& r : rows) scan.emplace_back(r[0], r[1]);
        SensingWindow w{dl_tau, dl_n};
        CosineBurst wf{dl_f, dl_start, dl_dur > 0.0 ? dl_dur : 4.0 * dl_tau, deg2rad(dl_phirf)};
        const DelayFit fit = estimate_delay(scan, w, wf);
        ResultTable t;
        t.add_summary("t_delay_us", fit.t_delay_us);
        t.add_summary("stderr_us", fit.stderr_us);
        t.add_summary("b_rf_mt", fit.b_rf_mt);
        t.add_summary("residual_rms", fit.residual_rms);
        std::cout << summary_json(t);
    });

    // lattice
    auto* c_lat = app.add_subcommand("lattice", "Emit diamond lattice sites (sensor coordinate)");
    double extent = 10.0, origin_offset = default_origin_offset_angstrom;
    OutputOpts lat_out;
    c_lat->add_option("--extent", extent, "Radius, Angstrom")->required();
    c_lat->add_option("--origin-offset", origin_offset, "Origin height above the vacancy, Angstrom");
    add_output_flags(c_lat, lat_out);
    c_lat->callback([&] {
        const auto sites = generate_sites(extent, origin_offset);
        ResultTable t;
        t.columns = {"x_angstrom", "y_angstrom", "z_angstrom", "r_angstrom", "theta_deg",
                     "phi_deg"};
        for (const auto& s : sites) {
            t.rows.push_back({s.position.x, s.position.y, s.position.z, s.spherical.r,
                              rad2deg(s.spherical.theta), rad2deg(s.spherical.phi)});
        }
        t.add_summary("count", static_cast<double>(sites.size()));
        emit(t, lat_out, "lattice");
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;  // input errors map to 2; --help stays 0
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run_main(argc, argv);
    } catch (const nvloc::NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return 3;
    } catch (const nvloc::DomainError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
