#include "nvloc/lattice.hpp"

#include "nvloc/errors.hpp"
#include "nvloc/units.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace nvloc {

namespace {

Vec3 rot_y(const Vec3& v, double a) {
    const double c = std::cos(a), s = std::sin(a);
    return {c * v.x + s * v.z, v.y, -s * v.x + c * v.z};
}

Vec3 rot_z(const Vec3& v, double a) {
    const double c = std::cos(a), s = std::sin(a);
    return {c * v.x - s * v.y, s * v.x + c * v.y, v.z};
}

// Sensor frame basis in cubic crystal coordinates: x || [-1-1-2],
// y || [1-10], z || [-1-11].
const Vec3 kXs = Vec3{-1.0, -1.0, -2.0} / std::sqrt(6.0);
const Vec3 kYs = Vec3{1.0, -1.0, 0.0} / std::sqrt(2.0);
const Vec3 kZs = Vec3{-1.0, -1.0, 1.0} / std::sqrt(3.0);

}  // namespace

Vec3 lab_to_sensor(const Vec3& v, double theta0, double phi0) {
    return rot_y(rot_z(v, -phi0), -theta0);
}

Vec3 sensor_to_lab(const Vec3& v, double theta0, double phi0) {
    return rot_z(rot_y(v, theta0), phi0);
}

Spherical spherical_of(const Vec3& p) {
    const double r = p.norm();
    if (r < 1e-300) throw DomainError("spherical coordinates undefined at the origin");
    Spherical s;
    s.r = r;
    s.theta = std::acos(std::clamp(p.z / r, -1.0, 1.0));
    s.phi = wrap_two_pi(std::atan2(p.y, p.x));
    return s;
}

Vec3 cartesian_of(const Spherical& s) {
    return {s.r * std::sin(s.theta) * std::cos(s.phi),
            s.r * std::sin(s.theta) * std::sin(s.phi), s.r * std::cos(s.theta)};
}

std::vector<LatticeSite> generate_sites(double extent_angstrom, double origin_offset) {
    if (extent_angstrom <= 0.0) throw DomainError("extent must be positive");
    const double a = diamond_lattice_constant_angstrom;
    // Vacancy at the crystal origin; its sublattice bonds to the nitrogen at
    // d = (a/4)(1,1,-1), straight below along the NV axis.
    const Vec3 d = Vec3{1.0, 1.0, -1.0} * (a / 4.0);
    const Vec3 origin = kZs * origin_offset;  // crystal coords

    const int n = static_cast<int>(std::ceil((extent_angstrom + origin_offset + a) / (a / 2.0)));
    std::vector<LatticeSite> out;
    for (int i = -n; i <= n; ++i) {
        for (int j = -n; j <= n; ++j) {
            for (int k = -n; k <= n; ++k) {
                if (((i + j + k) % 2 + 2) % 2 != 0) continue;
                const Vec3 base = Vec3{double(i), double(j), double(k)} * (a / 2.0);
                for (int sub = 0; sub < 2; ++sub) {
                    const Vec3 p = sub ? base + d : base;
                    const bool is_vacancy = !sub && i == 0 && j == 0 && k == 0;
                    const bool is_nitrogen = sub && i == 0 && j == 0 && k == 0;
                    if (is_vacancy || is_nitrogen) continue;
                    const Vec3 rel = p - origin;
                    const Vec3 pos{rel.dot(kXs), rel.dot(kYs), rel.dot(kZs)};
                    if (pos.norm() > extent_angstrom) continue;
                    LatticeSite site;
                    site.cell = {i, j, k};
                    site.sublattice_b = sub != 0;
                    site.position = pos;
                    site.spherical = spherical_of(pos);
                    out.push_back(site);
                }
            }
        }
    }
    std::sort(out.begin(), out.end(), [](const LatticeSite& x, const LatticeSite& y) {
        return x.spherical.r < y.spherical.r;
    });
    return out;
}

std::vector<DftCandidate> match_hyperfine(const HyperfineParams& measured,
                                          std::span<const DftCandidate> table,
                                          double tol_par_khz, double tol_perp_khz) {
    if (tol_par_khz < 0.0 || tol_perp_khz < 0.0) throw DomainError("tolerances must be >= 0");
    std::vector<DftCandidate> out;
    for (const auto& c : table) {
        if (std::abs(c.a_parallel_khz - measured.a_parallel_khz) <= tol_par_khz &&
            std::abs(c.a_perp_khz - measured.a_perp_khz) <= tol_perp_khz) {
            out.push_back(c);
        }
    }
    auto dev = [&](const DftCandidate& c) {
        return std::hypot(c.a_parallel_khz - measured.a_parallel_khz,
                          c.a_perp_khz - measured.a_perp_khz);
    };
    std::sort(out.begin(), out.end(),
              [&](const DftCandidate& a, const DftCandidate& b) { return dev(a) < dev(b); });
    return out;
}

std::vector<LatticeSite> sites_in_phi_range(std::span<const LatticeSite> candidates,
                                            double phi_center, double half_width) {
    if (half_width < 0.0) throw DomainError("half width must be >= 0");
    std::vector<LatticeSite> out;
    for (const auto& s : candidates) {
        if (std::abs(circular_diff(s.spherical.phi, phi_center)) <= half_width + 1e-12) {
            out.push_back(s);
        }
    }
    return out;
}

std::vector<LatticeSite> equivalence_set(std::span<const LatticeSite> sites,
                                         const Spherical& reference, double tol_r_angstrom,
                                         double tol_theta) {
    // C3v orbit of the reference: rotations by 0/120/240 degrees about the
    // NV axis plus the three vertical mirrors (planes through the V-C
    // bonds at phi = 0, 120, 240). A bare (r, theta) filter is not enough:
    // the projected lattice carries an accidental 12-fold (r, theta)
    // degeneracy whose other half is not symmetry-equivalent.
    std::vector<double> orbit;
    for (int k = 0; k < 3; ++k) {
        orbit.push_back(wrap_two_pi(reference.phi + k * two_pi / 3.0));
        orbit.push_back(wrap_two_pi(-reference.phi + k * two_pi / 3.0));
    }
    std::vector<LatticeSite> out;
    for (const auto& s : sites) {
        if (std::abs(s.spherical.r - reference.r) > tol_r_angstrom ||
            std::abs(s.spherical.theta - reference.theta) > tol_theta) {
            continue;
        }
        for (double phi : orbit) {
            if (std::abs(circular_diff(s.spherical.phi, phi)) <= tol_theta) {
                out.push_back(s);
                break;
            }
        }
    }
    return out;
}

std::span<const DftCandidate> builtin_candidates() {
    static const std::vector<DftCandidate> table = {
        {"C218", -175.4, 21.7}, {"C226", -176.7, 21.7}, {"C230", -174.7, 21.7},
        {"C240", -177.1, 21.9}, {"C280", -173.0, 22.0}, {"C282", -173.4, 22.1},
    };
    return table;
}

std::vector<DftCandidate> load_candidates(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DomainError("cannot open candidate table: " + path);
    std::string line;
    if (!std::getline(in, line)) throw DomainError("empty candidate table: " + path);
    // header: label,a_parallel_khz,a_perp_khz
    std::vector<DftCandidate> out;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream ss(line);
        DftCandidate c;
        std::string f1, f2;
        if (!std::getline(ss, c.label, ',') || !std::getline(ss, f1, ',') ||
            !std::getline(ss, f2)) {
            throw DomainError(path + ":" + std::to_string(lineno) + ": expected 3 fields");
        }
        try {
            c.a_parallel_khz = std::stod(f1);
            c.a_perp_khz = std::stod(f2);
        } catch (const std::exception&) {
            throw DomainError(path + ":" + std::to_string(lineno) + ": bad number");
        }
        out.push_back(std::move(c));
    }
    return out;
}

std::array<Vec3, 4> nv_axes_lab() {
    // <111> family expressed in the lab frame (x||[110], y||[-110], z||[001]):
    // all at 54.7356 deg polar, azimuths 0/90/180/270.
    const double ct = 1.0 / std::sqrt(3.0);
    const double st = std::sqrt(2.0 / 3.0);
    return {Vec3{st, 0.0, ct}, Vec3{0.0, st, ct}, Vec3{-st, 0.0, ct}, Vec3{0.0, -st, ct}};
}

}  // namespace nvloc
