#include "nvloc/sequences.hpp"

#include "nvloc/errors.hpp"
#include "nvloc/rotation.hpp"
#include "nvloc/units.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>

namespace nvloc {

namespace {

using cplx = std::complex<double>;

// Raw SU(2) quaternion for exp(-i*angle*(axis.I)); unlike SpinRotation this
// keeps the sign for any real angle, which matters for the relative phase
// between sensor branches.
Quat quat_axis_angle(const Vec3& axis, double angle) {
    return {std::cos(0.5 * angle), axis * std::sin(0.5 * angle)};
}

Quat branch_free(const Vec3& axis, double f_khz, double t_us) {
    return quat_axis_angle(axis, -phase_rad(f_khz, t_us));
}

// Complex 3-vector, the sigma coefficients of a 2x2 nuclear block.
struct CVec3 {
    cplx x{}, y{}, z{};
    CVec3 operator+(const CVec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    CVec3 operator-(const CVec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    CVec3 operator*(cplx s) const { return {x * s, y * s, z * s}; }
    CVec3 cross(const CVec3& o) const {
        return {y * o.z - z * o.y, z * o.x - x * o.z, x * o.y - y * o.x};
    }
    cplx dot_real(const Vec3& r) const { return x * r.x + y * r.y + z * r.z; }
};

CVec3 to_cvec(const Vec3& v) { return {v.x, v.y, v.z}; }

// Nuclear block M = (c*1 + w.sigma)/2, so Tr M = c and rho_n = 1/2 + nu.I has
// (c, w) = (1, nu).
struct PauliBlock {
    cplx c{};
    CVec3 w{};
};

// R M R'^dag for SU(2) quaternions R = (a0, a), R' = (b0, b).
PauliBlock conjugate_block(const PauliBlock& m, const Quat& ra, const Quat& rb) {
    const cplx i{0.0, 1.0};
    const CVec3 a = to_cvec(ra.v), b = to_cvec(rb.v);
    const cplx c1 = ra.w * m.c - i * m.w.dot_real(ra.v);
    const CVec3 w1 = m.w * ra.w - a * (i * m.c) + a.cross(m.w);
    PauliBlock out;
    out.c = c1 * rb.w + i * w1.dot_real(rb.v);
    out.w = w1 * rb.w + b * (i * c1) - w1.cross(b);
    return out;
}

// Joint sensor+nucleus state, sensor-indexed 2x2 blocks of Pauli components.
struct JointState {
    PauliBlock m[2][2];

    static JointState sensor0(const Vec3& nu) {
        JointState s;
        s.m[0][0] = {1.0, to_cvec(nu)};
        return s;
    }

    void conditional(const Quat& r0, const Quat& r1) {
        const Quat* r[2] = {&r0, &r1};
        for (int a = 0; a < 2; ++a)
            for (int b = 0; b < 2; ++b) m[a][b] = conjugate_block(m[a][b], *r[a], *r[b]);
    }

    // Sensor-only unitary with matrix u[s][s'].
    void sensor(const std::array<std::array<cplx, 2>, 2>& u) {
        PauliBlock out[2][2];
        for (int s = 0; s < 2; ++s)
            for (int t = 0; t < 2; ++t) {
                PauliBlock acc;
                for (int a = 0; a < 2; ++a)
                    for (int b = 0; b < 2; ++b) {
                        const cplx f = u[s][a] * std::conj(u[t][b]);
                        acc.c += f * m[a][b].c;
                        acc.w = acc.w + m[a][b].w * f;
                    }
                out[s][t] = acc;
            }
        for (int s = 0; s < 2; ++s)
            for (int t = 0; t < 2; ++t) m[s][t] = out[s][t];
    }

    void dephase_sensor() {
        m[0][1] = {};
        m[1][0] = {};
    }

    double p1() const { return m[1][1].c.real(); }
    double p0() const { return m[0][0].c.real(); }

    Vec3 nuclear_bloch() const {
        return {(m[0][0].w.x + m[1][1].w.x).real(), (m[0][0].w.y + m[1][1].w.y).real(),
                (m[0][0].w.z + m[1][1].w.z).real()};
    }

};

std::array<std::array<cplx, 2>, 2> pulse_x(double angle) {
    const double c = std::cos(0.5 * angle), s = std::sin(0.5 * angle);
    return {{{cplx{c, 0.0}, cplx{0.0, -s}}, {cplx{0.0, -s}, cplx{c, 0.0}}}};
}

std::array<std::array<cplx, 2>, 2> pulse_y(double angle) {
    const double c = std::cos(0.5 * angle), s = std::sin(0.5 * angle);
    return {{{cplx{c, 0.0}, cplx{-s, 0.0}}, {cplx{s, 0.0}, cplx{c, 0.0}}}};
}

void check_state(const Vec3& bloch) {
    if (bloch.norm() > 1.0 + 1e-12) throw DomainError("|bloch| must not exceed 1");
}

void check_cp(const CpParams& p) {
    if (p.n_pulses <= 0 || p.n_pulses % 2 != 0) throw DomainError("n_pulses must be even and positive");
    if (p.tau_us <= 0.0) throw DomainError("tau must be positive");
}

// One PulsePol half-cycle (six pulse events, free gaps of tau_pol/4):
// (pi/2)_a gap (pi)_b gap (pi/2)_a (pi/2)_b gap (pi)_a gap (pi/2)_b.
// PolY has a = Y, b = X; PolX swaps the roles.
void pulsepol_half_cycle(JointState& st, const Quat& gap0, const Quat& gap1,
                         PulsePolVariant variant) {
    const bool poly = variant == PulsePolVariant::PolY;
    auto half_a = poly ? pulse_y(pi / 2) : pulse_x(pi / 2);
    auto half_b = poly ? pulse_x(pi / 2) : pulse_y(pi / 2);
    auto pi_a = poly ? pulse_y(pi) : pulse_x(pi);
    auto pi_b = poly ? pulse_x(pi) : pulse_y(pi);
    st.sensor(half_a);
    st.conditional(gap0, gap1);
    st.sensor(pi_b);
    st.conditional(gap0, gap1);
    st.sensor(half_a);
    st.sensor(half_b);
    st.conditional(gap0, gap1);
    st.sensor(pi_a);
    st.conditional(gap0, gap1);
    st.sensor(half_b);
}

}  // namespace

CpAxes cp_axes(const ConditionalPrecession& prec, const CpParams& p) {
    check_cp(p);
    const Quat u0 = branch_free(e_z, prec.f0_khz, 0.5 * p.tau_us);
    const Quat u1 = branch_free(prec.e_p, prec.f1_khz, 0.5 * p.tau_us);
    const Quat v0 = quat_mul(quat_mul(u0, quat_mul(u1, u1)), u0);
    const Quat v1 = quat_mul(quat_mul(u1, quat_mul(u0, u0)), u1);

    CpAxes ax;
    const double s0 = v0.v.norm();
    const double s1 = v1.v.norm();
    // One cycle rotates by 2*phi_cp; the quaternion scalar is cos(phi_cp).
    ax.phi_cp = std::atan2(s0, v0.w);
    if (s0 < 1e-9 || s1 < 1e-9) {
        ax.transparent = true;
        ax.n0 = ax.n1 = e_z;
        ax.dot = 1.0;
        return ax;
    }
    ax.n0 = v0.v / s0;
    ax.n1 = v1.v / s1;
    ax.dot = ax.n0.dot(ax.n1);
    return ax;
}

double transition_probability_x(const CpAxes& axes, int n_pulses) {
    if (axes.transparent) return 1.0;
    const double s = std::sin(0.5 * n_pulses * axes.phi_cp);
    double p = 1.0 - 0.5 * (1.0 - axes.dot) * s * s;
    return std::clamp(p, 0.0, 1.0);
}

double transition_probability_y(const NuclearSpinState& state, const CpAxes& axes,
                                int n_pulses) {
    check_state(state.bloch);
    if (axes.transparent) return 0.5;
    const double nphi = n_pulses * axes.phi_cp;
    const double s = std::sin(0.5 * nphi);
    const Vec3 term = (axes.n0 - axes.n1) * std::sin(nphi) + axes.n0.cross(axes.n1) * (2.0 * s * s);
    return std::clamp(0.5 + 0.25 * state.bloch.dot(term), 0.0, 1.0);
}

std::vector<double> correlation_trace(const ConditionalPrecession& prec,
                                      const CpParams& p,
                                      std::span<const double> t_corr_grid_us) {
    check_cp(p);
    if (t_corr_grid_us.empty()) throw DomainError("correlation grid must not be empty");

    const Quat u0 = branch_free(e_z, prec.f0_khz, 0.5 * p.tau_us);
    const Quat u1 = branch_free(prec.e_p, prec.f1_khz, 0.5 * p.tau_us);
    const Quat v0 = quat_mul(quat_mul(u0, quat_mul(u1, u1)), u0);
    const Quat v1 = quat_mul(quat_mul(u1, quat_mul(u0, u0)), u1);

    auto block = [&](JointState& st) {
        st.sensor(pulse_x(pi / 2));
        Quat c0{1.0, {}}, c1{1.0, {}};
        for (int k = 0; k < p.n_pulses / 2; ++k) {
            c0 = quat_mul(v0, c0);
            c1 = quat_mul(v1, c1);
        }
        st.conditional(c0, c1);
        st.sensor(pulse_y(pi / 2));
    };

    std::vector<double> out;
    out.reserve(t_corr_grid_us.size());
    for (double t : t_corr_grid_us) {
        JointState st = JointState::sensor0({0.0, 0.0, 0.0});  // unpolarized nucleus
        block(st);
        st.dephase_sensor();  // population storage; sensor coherence is lost over t_corr
        st.conditional(branch_free(e_z, prec.f0_khz, t), branch_free(prec.e_p, prec.f1_khz, t));
        block(st);
        out.push_back(st.p1());
    }
    return out;
}

PulsePolResult pulsepol_transfer(const ConditionalPrecession& prec,
                                 const PulsePolParams& pp,
                                 const NuclearSpinState& initial) {
    if (pp.tau_pol_us <= 0.0) throw DomainError("tau_pol must be positive");
    if (pp.n_pol <= 0 || pp.n_rep <= 0) throw DomainError("n_pol and n_rep must be positive");
    check_state(initial.bloch);

    const double gap = 0.25 * pp.tau_pol_us;
    const Quat g0 = branch_free(e_z, prec.f0_khz, gap);
    const Quat g1 = branch_free(prec.e_p, prec.f1_khz, gap);

    Vec3 nu = initial.bloch;
    double p0_sum = 0.0;
    for (int rep = 0; rep < pp.n_rep; ++rep) {
        JointState st = JointState::sensor0(nu);
        for (int c = 0; c < 2 * pp.n_pol; ++c) pulsepol_half_cycle(st, g0, g1, pp.variant);
        p0_sum += st.p0();
        nu = st.nuclear_bloch();
    }
    PulsePolResult res;
    res.p0 = p0_sum / pp.n_rep;
    res.final_state = {nu, initial.label};
    return res;
}

SelectiveResult selective_polarization(const ConditionalPrecession& prec_target,
                                       std::span<const ConditionalPrecession> prec_others,
                                       const PulsePolParams& pp,
                                       const std::optional<RfPiPulse>& rf, int passes) {
    if (passes <= 0) throw DomainError("passes must be positive");
    std::vector<const ConditionalPrecession*> spins;
    spins.push_back(&prec_target);
    for (const auto& o : prec_others) spins.push_back(&o);

    PulsePolParams saturate = pp;
    saturate.n_rep = 9;
    saturate.variant = PulsePolVariant::PolY;

    SelectiveResult res;
    double contrast = 1.0;
    for (const auto* prec : spins) {
        const double bw = rf ? 1.0e3 / (2.0 * rf->t_pi_us) : 0.0;  // kHz
        const bool flipped = rf && std::abs(prec->f1_khz - rf->frequency_khz) <= bw;
        NuclearSpinState s{};
        PulsePolResult fin;
        for (int pass = 0; pass < passes; ++pass) {
            s = pulsepol_transfer(*prec, saturate, s).final_state;
            if (flipped) s.bloch = -s.bloch;
            fin = pulsepol_transfer(*prec, pp, s);
            s = fin.final_state;
        }
        res.states.push_back(fin.final_state);
        res.p0_final.push_back(fin.p0);
        contrast *= 2.0 * fin.p0 - 1.0;
    }
    res.p0_combined = 0.5 * (1.0 + contrast);
    return res;
}

std::vector<double> synchronized_readout(std::span<const ConditionalPrecession> bath,
                                         std::span<const Vec3> initial,
                                         double t_l_us, int m_blocks,
                                         const CpParams& p) {
    if (bath.size() != initial.size()) throw DomainError("one initial Bloch vector per bath spin");
    if (t_l_us <= 0.0 || m_blocks <= 0) throw DomainError("t_L and m_blocks must be positive");
    check_cp(p);

    std::vector<CpAxes> axes;
    axes.reserve(bath.size());
    for (const auto& prec : bath) axes.push_back(cp_axes(prec, p));

    std::vector<Vec3> nu(initial.begin(), initial.end());
    const double f0 = bath.empty() ? 0.0 : bath[0].f0_khz;
    const SpinRotation step = free_precession(e_z, f0, t_l_us);

    std::vector<double> out;
    out.reserve(m_blocks);
    for (int m = 0; m < m_blocks; ++m) {
        double contrast = 1.0;
        for (size_t i = 0; i < nu.size(); ++i) {
            const double py = transition_probability_y({nu[i], {}}, axes[i], p.n_pulses);
            contrast *= 2.0 * py - 1.0;
        }
        out.push_back(0.5 * (1.0 + contrast));
        for (auto& v : nu) v = apply(step, v);
    }
    return out;
}

double apply_contrast_decay(double p, double baseline, double t_us, double decay_time_us) {
    if (decay_time_us <= 0.0) return p;
    return baseline + (p - baseline) * std::exp(-t_us / decay_time_us);
}

double pulsepol_transfer_blocks_estimate(double f_t_khz, double a_perp_khz, int n_pol) {
    if (a_perp_khz <= 0.0 || n_pol <= 0) throw DomainError("need A_perp > 0 and n_pol > 0");
    return pi * f_t_khz / (3.0 * (2.0 + std::sqrt(2.0)) * a_perp_khz * n_pol);
}

}  // namespace nvloc
