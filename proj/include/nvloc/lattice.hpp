#pragma once

#include "nvloc/hamiltonian.hpp"
#include "nvloc/units.hpp"
#include "nvloc/vec3.hpp"

#include <array>
#include <span>
#include <string>
#include <vector>

namespace nvloc {

struct Spherical {
    double r = 0.0;      // Angstrom
    double theta = 0.0;  // [0, pi]
    double phi = 0.0;    // [0, 2 pi)
};

/// Carbon site of the diamond lattice in the sensor coordinate. `cell` holds
/// the fcc point in units of a/2; `sublattice_b` marks the second basis atom.
struct LatticeSite {
    std::array<int, 3> cell{};
    bool sublattice_b = false;
    Vec3 position{};  // Angstrom, sensor coordinate
    Spherical spherical{};
};

/// Published DFT hyperfine candidate.
struct DftCandidate {
    std::string label;
    double a_parallel_khz = 0.0;
    double a_perp_khz = 0.0;
};

// B0 direction in the laboratory coordinate; defines the transform.
inline constexpr double field_theta0 = deg2rad(54.7);
inline constexpr double field_phi0 = deg2rad(180.0);

/// Laboratory -> sensor transform, T = R_y(-Theta0) R_z(-Phi0).
Vec3 lab_to_sensor(const Vec3& v, double theta0 = field_theta0, double phi0 = field_phi0);
Vec3 sensor_to_lab(const Vec3& v, double theta0 = field_theta0, double phi0 = field_phi0);

inline constexpr double diamond_lattice_constant_angstrom = 3.567;
inline constexpr double default_origin_offset_angstrom = 0.75;

/// All carbon sites within `extent_angstrom` of the sensor origin, sorted by
/// distance. The z axis is the [-1-11] NV axis, the vacancy sits above the
/// nitrogen, and the origin sits `origin_offset` above the vacancy along z.
/// The vacancy and nitrogen sites are excluded.
std::vector<LatticeSite> generate_sites(double extent_angstrom,
                                        double origin_offset = default_origin_offset_angstrom);

/// Standard spherical decomposition; throws on the zero vector. The pole
/// convention is phi = 0.
Spherical spherical_of(const Vec3& position);
Vec3 cartesian_of(const Spherical& s);

/// Candidates with |dA_par| <= tol_par and |dA_perp| <= tol_perp, sorted by
/// the combined (Euclidean, kHz) deviation.
std::vector<DftCandidate> match_hyperfine(const HyperfineParams& measured,
                                          std::span<const DftCandidate> table,
                                          double tol_par_khz, double tol_perp_khz);

/// Circular-interval filter on the site azimuth.
std::vector<LatticeSite> sites_in_phi_range(std::span<const LatticeSite> candidates,
                                            double phi_center, double half_width);

/// Sites sharing (r, theta) with `reference` within the given windows; the
/// C3v images plus reflections of a generic site.
std::vector<LatticeSite> equivalence_set(std::span<const LatticeSite> sites,
                                         const Spherical& reference,
                                         double tol_r_angstrom = 0.05,
                                         double tol_theta = deg2rad(0.5));

/// The six-site table transcribed from the published DFT study.
std::span<const DftCandidate> builtin_candidates();

/// Load a candidate table: delimited text with header
/// `label,a_parallel_khz,a_perp_khz`.
std::vector<DftCandidate> load_candidates(const std::string& path);

/// The four NV quantization axes (unit vectors, laboratory coordinate).
std::array<Vec3, 4> nv_axes_lab();

}  // namespace nvloc
