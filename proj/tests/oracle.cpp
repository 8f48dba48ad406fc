#include "oracle.hpp"

#include "nvloc/units.hpp"

#include <unsupported/Eigen/KroneckerProduct>

namespace oracle {

using namespace nvloc;
using cplx = std::complex<double>;

Mat2 pauli_x() {
    Mat2 m;
    m << 0, 1, 1, 0;
    return m;
}
Mat2 pauli_y() {
    Mat2 m;
    m << 0, cplx(0, -1), cplx(0, 1), 0;
    return m;
}
Mat2 pauli_z() {
    Mat2 m;
    m << 1, 0, 0, -1;
    return m;
}

Mat2 su2(const Vec3& axis, double angle) {
    const Vec3 n = axis.normalized();
    const Mat2 ns = n.x * pauli_x() + n.y * pauli_y() + n.z * pauli_z();
    return std::cos(0.5 * angle) * Mat2::Identity() - cplx(0, 1) * std::sin(0.5 * angle) * ns;
}

Mat2 branch_free(const Vec3& axis, double f_khz, double t_us) {
    return su2(axis, -phase_rad(f_khz, t_us));
}

Mat2 density(const Vec3& nu) {
    return 0.5 * (Mat2::Identity() + nu.x * pauli_x() + nu.y * pauli_y() + nu.z * pauli_z());
}

Mat4 conditional(const Mat2& u0, const Mat2& u1) {
    Mat4 u = Mat4::Zero();
    u.topLeftCorner<2, 2>() = u0;
    u.bottomRightCorner<2, 2>() = u1;
    return u;
}

Mat4 sensor_pulse_x(double angle) {
    return Eigen::kroneckerProduct(su2(e_x, angle), Mat2::Identity());
}
Mat4 sensor_pulse_y(double angle) {
    return Eigen::kroneckerProduct(su2(e_y, angle), Mat2::Identity());
}

std::pair<Mat2, Mat2> cp_cycle(const ConditionalPrecession& prec, double tau_us) {
    const Mat2 u0 = branch_free(e_z, prec.f0_khz, 0.5 * tau_us);
    const Mat2 u1 = branch_free(prec.e_p, prec.f1_khz, 0.5 * tau_us);
    return {u0 * u1 * u1 * u0, u1 * u0 * u0 * u1};
}

namespace {

Mat2 matpow(Mat2 m, int n) {
    Mat2 acc = Mat2::Identity();
    for (int i = 0; i < n; ++i) acc = m * acc;
    return acc;
}

Mat4 cp_block(const ConditionalPrecession& prec, const CpParams& p) {
    const auto [v0, v1] = cp_cycle(prec, p.tau_us);
    const Mat4 ucp = conditional(matpow(v0, p.n_pulses / 2), matpow(v1, p.n_pulses / 2));
    const Mat4 read =
        p.readout == ReadoutPhase::X ? sensor_pulse_x(pi / 2) : sensor_pulse_y(pi / 2);
    return read * ucp * sensor_pulse_x(pi / 2);
}

double prob_ms1(const Mat4& rho) {
    return (rho(2, 2) + rho(3, 3)).real();
}

}  // namespace

double transition_probability(const ConditionalPrecession& prec, const CpParams& p,
                              const Vec3& nu) {
    const Mat4 u = cp_block(prec, p);
    Mat4 rho = Mat4::Zero();
    rho.topLeftCorner<2, 2>() = density(nu);  // sensor |0><0| (x) rho_n
    rho = u * rho * u.adjoint();
    return prob_ms1(rho);
}

double correlation_point(const ConditionalPrecession& prec, const CpParams& p,
                         double t_corr_us) {
    CpParams py = p;
    py.readout = ReadoutPhase::Y;
    const Mat4 blk = cp_block(prec, py);
    Mat4 rho = Mat4::Zero();
    rho.topLeftCorner<2, 2>() = density({});  // unpolarized
    rho = blk * rho * blk.adjoint();
    rho.topRightCorner<2, 2>().setZero();
    rho.bottomLeftCorner<2, 2>().setZero();
    const Mat4 ufree = conditional(branch_free(e_z, prec.f0_khz, t_corr_us),
                                   branch_free(prec.e_p, prec.f1_khz, t_corr_us));
    rho = ufree * rho * ufree.adjoint();
    rho = blk * rho * blk.adjoint();
    return prob_ms1(rho);
}

std::pair<double, double> pulsepol(const ConditionalPrecession& prec, const PulsePolParams& pp,
                                   const Vec3& nu0) {
    const double gap = 0.25 * pp.tau_pol_us;
    const Mat4 f = conditional(branch_free(e_z, prec.f0_khz, gap),
                               branch_free(prec.e_p, prec.f1_khz, gap));
    const bool poly = pp.variant == PulsePolVariant::PolY;
    auto half_a = poly ? sensor_pulse_y(pi / 2) : sensor_pulse_x(pi / 2);
    auto half_b = poly ? sensor_pulse_x(pi / 2) : sensor_pulse_y(pi / 2);
    auto pi_a = poly ? sensor_pulse_y(pi) : sensor_pulse_x(pi);
    auto pi_b = poly ? sensor_pulse_x(pi) : sensor_pulse_y(pi);
    const Mat4 half = half_b * f * pi_a * f * half_b * half_a * f * pi_b * f * half_a;
    Mat4 unit = Mat4::Identity();
    for (int i = 0; i < 2 * pp.n_pol; ++i) unit = half * unit;

    Mat2 rho_n = density(nu0);
    double p0_sum = 0.0;
    for (int rep = 0; rep < pp.n_rep; ++rep) {
        Mat4 rho = Mat4::Zero();
        rho.topLeftCorner<2, 2>() = rho_n;
        rho = unit * rho * unit.adjoint();
        p0_sum += (rho(0, 0) + rho(1, 1)).real();
        rho_n = rho.topLeftCorner<2, 2>() + rho.bottomRightCorner<2, 2>();
    }
    const double iz = 0.5 * (rho_n * pauli_z()).trace().real();
    return {p0_sum / pp.n_rep, iz};
}

double two_spin_transition(const ConditionalPrecession& a, const ConditionalPrecession& b,
                           const CpParams& p, const Vec3& nu_a, const Vec3& nu_b) {
    using Mat8 = Eigen::Matrix<cplx, 8, 8>;
    const auto [va0, va1] = cp_cycle(a, p.tau_us);
    const auto [vb0, vb1] = cp_cycle(b, p.tau_us);
    const Mat2 ua0 = matpow(va0, p.n_pulses / 2), ua1 = matpow(va1, p.n_pulses / 2);
    const Mat2 ub0 = matpow(vb0, p.n_pulses / 2), ub1 = matpow(vb1, p.n_pulses / 2);

    Mat8 ucp = Mat8::Zero();
    ucp.topLeftCorner<4, 4>() = Eigen::kroneckerProduct(ua0, ub0);
    ucp.bottomRightCorner<4, 4>() = Eigen::kroneckerProduct(ua1, ub1);
    const Mat2 h = su2(e_x, pi / 2);
    const Mat2 r = p.readout == ReadoutPhase::X ? su2(e_x, pi / 2) : su2(e_y, pi / 2);
    const Mat8 ux = Eigen::kroneckerProduct(h, Eigen::Matrix4cd::Identity());
    const Mat8 ur = Eigen::kroneckerProduct(r, Eigen::Matrix4cd::Identity());

    Mat8 rho = Mat8::Zero();
    rho.topLeftCorner<4, 4>() = Eigen::kroneckerProduct(density(nu_a), density(nu_b));
    const Mat8 u = ur * ucp * ux;
    rho = u * rho * u.adjoint();
    return rho.bottomRightCorner<4, 4>().trace().real();
}

}  // namespace oracle
