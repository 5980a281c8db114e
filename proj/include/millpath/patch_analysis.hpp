#pragma once

#include "millpath/tool_contact.hpp"

#include <ostream>
#include <vector>

namespace millpath {

/// Unit tangent direction at the contact point with its angle from the
/// patch reference axis.
struct DirectionOnSurface {
    Vec3 direction = Vec3::UnitX();
    double theta = 0.0;
};

struct Diameter {
    int index = -1; ///< boundary sample k (k < n); the chord joins S_k and S_{k+n}
    double length = 0.0;
    DirectionOnSurface dir;
};

/// All measurable diameters |S_k - S_{k+n}|, k < n.
inline std::vector<Diameter> patch_diameters(const PatchBoundary& patch)
{
    std::vector<Diameter> out;
    for (int k = 0; k < patch.planes; ++k) {
        const auto& a = patch.samples[k];
        const auto& b = patch.samples[patch.opposite(k)];
        if (!a.valid || !b.valid)
            continue;
        Diameter d;
        d.index = k;
        d.length = (a.position - b.position).norm();
        d.dir.theta = a.theta;
        d.dir.direction = patch.direction(a.theta);
        out.push_back(d);
    }
    return out;
}

namespace detail {

inline Diameter extreme_diameter(const PatchBoundary& patch, bool largest)
{
    const auto all = patch_diameters(patch);
    if (all.size() < 2)
        throw MillError(ErrorKind::Geometry, "fewer than two valid patch diameters");
    const Diameter* best = &all[0];
    for (const auto& d : all) {
        const double tie = 1e-9 * std::max(d.length, best->length);
        const bool better = largest ? d.length > best->length + tie : d.length < best->length - tie;
        if (better)
            best = &d;
    }
    return *best;
}

} // namespace detail

/// Longest diameter; near-ties (relative 1e-9) go to the smallest theta.
inline Diameter largest_diameter(const PatchBoundary& patch) { return detail::extreme_diameter(patch, true); }

inline Diameter smallest_diameter(const PatchBoundary& patch) { return detail::extreme_diameter(patch, false); }

/// Direction perpendicular to the largest diameter, theta in [0, pi).
inline DirectionOnSurface widest_stripe_direction(const PatchBoundary& patch)
{
    const Diameter d = largest_diameter(patch);
    DirectionOnSurface w;
    w.theta = std::fmod(d.dir.theta + 0.5 * kPi, kPi);
    w.direction = patch.direction(w.theta);
    return w;
}

/// Chord-based principal direction estimate at one facet.
struct DiscDirections {
    DirectionOnSurface dir_max; ///< maximal normal curvature (shortest chord)
    DirectionOnSurface dir_min; ///< minimal normal curvature (longest chord)
    double chord_max = 0.0;
    double chord_min = 0.0;
    int usable = 0;
    Vec3 reference_axis = Vec3::UnitX();
};

namespace detail {

// Facet of the fan around vertex v whose corner wedge contains direction d.
inline int fan_facet_containing(const TriMesh& mesh, int v, int skip, const Vec3& d)
{
    int best = -1;
    double best_margin = -std::numeric_limits<double>::infinity();
    for (int f = 0; f < mesh.facet_count(); ++f) {
        if (f == skip)
            continue;
        const auto& tri = mesh.triangles[f];
        const int k = tri[0] == v ? 0 : tri[1] == v ? 1 : tri[2] == v ? 2 : -1;
        if (k < 0)
            continue;
        const Vec3& n = mesh.normals[f];
        const Vec3 df = (d - d.dot(n) * n).normalized();
        const Vec3 e1 = (mesh.vertices[tri[(k + 1) % 3]] - mesh.vertices[v]).normalized();
        const Vec3 e2 = (mesh.vertices[tri[(k + 2) % 3]] - mesh.vertices[v]).normalized();
        const double margin = std::min(e1.cross(df).dot(n), df.cross(e2).dot(n));
        if (margin > best_margin) {
            best_margin = margin;
            best = f;
        }
    }
    return best_margin >= -1e-12 ? best : -1;
}

// Straight walk on the mesh from p in facet t along in-plane direction d for
// the given surface length, unfolding across edges. Empty on boundary exit.
inline std::optional<MeshPoint> geodesic_walk(const TriMesh& mesh, int t, Vec3 p, Vec3 d, double length)
{
    double left = length;
    int entered = -1;
    for (int guard = 0; guard < 4 * mesh.facet_count() + 8; ++guard) {
        const Vec3& n = mesh.normals[t];
        d = (d - d.dot(n) * n).normalized();
        double best_s = std::numeric_limits<double>::infinity();
        double best_u = 0.0;
        int best_h = -1;
        for (int k = 0; k < 3; ++k) {
            const int h = 3 * t + k;
            if (h == entered)
                continue;
            const Vec3 a = mesh.vertices[mesh.from_vertex(h)];
            const Vec3 e = mesh.vertices[mesh.to_vertex(h)] - a;
            // p + s d = a + u e, solved in the facet plane
            const Vec3 m = n.cross(e);
            const double den = d.dot(m);
            if (std::abs(den) <= 1e-300)
                continue;
            const double s = (a - p).dot(m) / den;
            if (s > 1e-12 * length && s < best_s) {
                best_s = s;
                best_h = h;
                best_u = (p + s * d - a).dot(e) / e.squaredNorm();
            }
        }
        if (best_h < 0)
            return std::nullopt;
        if (best_s >= left)
            return MeshPoint{p + left * d, t, 0.0};
        left -= best_s;
        if (best_u < 1e-9 || best_u > 1.0 - 1e-9) {
            const int v = best_u < 0.5 ? mesh.from_vertex(best_h) : mesh.to_vertex(best_h);
            const int f = fan_facet_containing(mesh, v, t, d);
            if (f < 0)
                return std::nullopt;
            p = mesh.vertices[v];
            t = f;
            entered = -1;
            continue;
        }
        p += best_s * d;
        const int opp = mesh.opposite[best_h];
        if (opp < 0)
            return std::nullopt;
        const Vec3 e = (mesh.vertices[mesh.to_vertex(best_h)] - mesh.vertices[mesh.from_vertex(best_h)]).normalized();
        const int nt = TriMesh::facet_of(opp);
        const Vec3 m_old = n.cross(e), m_new = mesh.normals[nt].cross(e);
        d = d.dot(e) * e + d.dot(m_old) * m_new;
        t = nt;
        entered = opp;
    }
    throw MillError(ErrorKind::Internal, "geodesic march did not terminate");
}

inline std::optional<Vec3> geodesic_march(const TriMesh& mesh, int t, const Vec3& p, const Vec3& d, double length)
{
    const auto end = geodesic_walk(mesh, t, p, d, length);
    return end ? std::optional<Vec3>(end->position) : std::nullopt;
}

} // namespace detail

/// Lays a disc of the given surface radius on the mesh around the facet
/// incenter and compares chord lengths of its n curved diagonals.
inline DiscDirections disc_principal_directions(const TriMesh& mesh, int facet, double disc_radius, int n = 12,
                                                const Vec3& seed = Vec3::UnitX())
{
    if (facet < 0 || facet >= mesh.facet_count())
        throw MillError(ErrorKind::Usage, "facet index " + std::to_string(facet) + " out of range");
    if (!(disc_radius > 0.0) || n < 2)
        throw MillError(ErrorKind::Usage, "disc radius must be positive and n >= 2");
    const Vec3 P = incenter(mesh, facet);
    const Vec3 N = mesh.normals[facet];
    DiscDirections out;
    out.reference_axis = reference_axis(N, seed);
    bool any = false;
    for (int i = 0; i < n; ++i) {
        const double theta = kPi * i / n;
        const Vec3 d = tangent_direction(N, out.reference_axis, theta);
        const auto a = detail::geodesic_march(mesh, facet, P, d, disc_radius);
        const auto b = detail::geodesic_march(mesh, facet, P, -d, disc_radius);
        if (!a || !b)
            continue;
        const double chord = (*a - *b).norm();
        ++out.usable;
        if (!any || chord > out.chord_max * (1.0 + 1e-12)) {
            out.chord_max = chord;
            out.dir_min = {d, theta};
        }
        if (!any || chord < out.chord_min * (1.0 - 1e-12)) {
            out.chord_min = chord;
            out.dir_max = {d, theta};
        }
        any = true;
    }
    if (out.usable < 3)
        throw MillError(ErrorKind::Geometry, "disc leaves the mesh: fewer than 3 usable diagonals at facet " +
                                                 std::to_string(facet));
    return out;
}

inline double default_disc_radius(const TriMesh& mesh) { return 3.0 * mesh.average_edge; }

struct FacetDirectionRow {
    int facet = -1;
    DiscDirections dirs;
};

/// CSV rows: facet, theta_max, theta_min, chord_ratio (shortest / longest).
inline void write_direction_csv(std::ostream& out, const std::vector<FacetDirectionRow>& rows)
{
    out << "facet,theta_max,theta_min,chord_ratio\n";
    for (const auto& r : rows)
        out << r.facet << ',' << fmt9(r.dirs.dir_max.theta) << ',' << fmt9(r.dirs.dir_min.theta) << ','
            << fmt9(r.dirs.chord_min / r.dirs.chord_max) << '\n';
}

} // namespace millpath
