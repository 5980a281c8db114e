#pragma once

#include "millpath/mesh.hpp"

#include <optional>
#include <string>
#include <vector>

namespace millpath {

/// Normal section plane through a contact point P.
///
/// `v_axis` is the contact normal, `u_axis` a tangent direction, and
/// `plane_normal = u_axis x v_axis`. `angle` is the angle of `u_axis` measured
/// from the first frame of the fan it belongs to.
struct SectionFrame {
    Vec3 origin;
    Vec3 plane_normal;
    Vec3 u_axis;
    Vec3 v_axis;
    double angle = 0.0;

    Vec2 to_2d(const Vec3& p) const
    {
        const Vec3 d = p - origin;
        return {d.dot(u_axis), d.dot(v_axis)};
    }
    Vec3 to_3d(const Vec2& q) const { return origin + q.x() * u_axis + q.y() * v_axis; }
    double signed_distance(const Vec3& p) const { return (p - origin).dot(plane_normal); }
};

/// Tangent direction at `angle` from `u0` in the tangent plane with normal `n`.
inline Vec3 tangent_direction(const Vec3& n, const Vec3& u0, double angle)
{
    return std::cos(angle) * u0 + std::sin(angle) * n.cross(u0);
}

/// Tangent-plane reference axis derived from a seed direction; falls back to a
/// fixed perpendicular when the seed is (nearly) parallel to the normal.
inline Vec3 reference_axis(const Vec3& normal, const Vec3& seed, std::vector<std::string>* warnings = nullptr)
{
    const Vec3 t = seed - seed.dot(normal) * normal;
    if (t.norm() <= 1e-9 * std::max(seed.norm(), 1e-300)) {
        if (warnings)
            warnings->push_back("section seed parallel to contact normal; using fallback seed");
        return any_perpendicular(normal);
    }
    return t.normalized();
}

/// n section frames through P at equal angular spacing pi/n.
inline std::vector<SectionFrame> make_section_frames(const Vec3& P, const Vec3& normal, const Vec3& in_plane_seed,
                                                     int n, std::vector<std::string>* warnings = nullptr)
{
    if (n < 2)
        throw MillError(ErrorKind::Usage, "need at least two section planes");
    const Vec3 u0 = reference_axis(normal, in_plane_seed, warnings);
    std::vector<SectionFrame> frames;
    frames.reserve(n);
    for (int i = 0; i < n; ++i) {
        const double angle = kPi * i / n;
        SectionFrame f;
        f.origin = P;
        f.v_axis = normal;
        f.u_axis = tangent_direction(normal, u0, angle).normalized();
        f.plane_normal = f.u_axis.cross(f.v_axis).normalized();
        f.angle = angle;
        frames.push_back(f);
    }
    return frames;
}

/// Chained plane/mesh intersection around the contact point, in frame coordinates.
///
/// Points are ordered by increasing u near the contact. Segment k joins
/// points[k] and points[k+1] and lies in facet `facets[k]`.
struct SectionPolyline {
    std::vector<Vec2> points;
    std::vector<int> facets;
    int contact_segment = 0;
    bool truncated_front = false; ///< open mesh boundary reached at the start
    bool truncated_back = false;  ///< open mesh boundary reached at the end
    bool clipped_front = false;   ///< window reached at the start
    bool clipped_back = false;    ///< window reached at the end
    bool closed = false;          ///< section loop closed inside the window

    int segment_count() const { return static_cast<int>(facets.size()); }
    bool truncated() const { return truncated_front || truncated_back; }
};

namespace detail {

// Parameter t in [0,1] where |a + t(b-a)| = radius, with |a| <= radius < |b|.
inline double circle_exit(const Vec2& a, const Vec2& b, double radius)
{
    const Vec2 d = b - a;
    const double qa = d.squaredNorm(), qb = 2.0 * a.dot(d), qc = a.squaredNorm() - radius * radius;
    const double disc = std::max(qb * qb - 4.0 * qa * qc, 0.0);
    const double t = (-qb + std::sqrt(disc)) / (2.0 * qa);
    return std::clamp(t, 0.0, 1.0);
}

class SectionWalker {
public:
    SectionWalker(const TriMesh& mesh, const SectionFrame& frame)
        : mesh_(mesh), frame_(frame), eps_(1e-9 * mesh.bbox_diagonal)
    {
    }

    // Near-zero signed distances count as "above" so that no vertex lies on the plane.
    bool above(int v) const { return frame_.signed_distance(mesh_.vertices[v]) > -eps_; }

    bool crossed(int h) const { return above(mesh_.from_vertex(h)) != above(mesh_.to_vertex(h)); }

    // Crossing point of the edge under h; symmetric in the edge direction.
    Vec3 crossing(int h) const
    {
        int a = mesh_.from_vertex(h), b = mesh_.to_vertex(h);
        if (a > b)
            std::swap(a, b);
        const double da = frame_.signed_distance(mesh_.vertices[a]);
        const double db = frame_.signed_distance(mesh_.vertices[b]);
        const double t = std::clamp(da / (da - db), 0.0, 1.0);
        return mesh_.vertices[a] + t * (mesh_.vertices[b] - mesh_.vertices[a]);
    }

    std::vector<int> crossed_edges(int t) const
    {
        std::vector<int> out;
        for (int k = 0; k < 3; ++k)
            if (crossed(3 * t + k))
                out.push_back(3 * t + k);
        return out;
    }

    // Walks outward through half-edge `exit` of the start facet. Returns points
    // beyond the start point and their facets; sets clip/truncation flags.
    void walk(int start_facet, int exit, double radius, std::vector<Vec2>& pts, std::vector<int>& facets,
              bool& clipped, bool& truncated, bool& closed) const
    {
        int h = exit;
        Vec2 last = frame_.to_2d(crossing(h));
        for (int guard = 0; guard < mesh_.facet_count(); ++guard) {
            const int opp = mesh_.opposite[h];
            if (opp < 0) {
                truncated = true;
                return;
            }
            const int t = TriMesh::facet_of(opp);
            if (t == start_facet) {
                closed = true;
                return;
            }
            int out_edge = -1;
            for (int e : crossed_edges(t))
                if (e != opp)
                    out_edge = e;
            if (out_edge < 0)
                throw MillError(ErrorKind::Internal, "section walk lost the plane at facet " + std::to_string(t));
            Vec2 next = frame_.to_2d(crossing(out_edge));
            if (next.norm() > radius) {
                next = last + circle_exit(last, next, radius) * (next - last);
                pts.push_back(next);
                facets.push_back(t);
                clipped = true;
                return;
            }
            pts.push_back(next);
            facets.push_back(t);
            last = next;
            h = out_edge;
        }
    }

private:
    const TriMesh& mesh_;
    const SectionFrame& frame_;
    double eps_;
};

} // namespace detail

/// Facet containing P, or an error when P is off the mesh.
inline int locate_facet(const TriMesh& mesh, const Vec3& P)
{
    const MeshPoint hit = nearest_on_mesh(mesh, P);
    if (hit.facet < 0 || hit.distance > 1e-7 * mesh.bbox_diagonal)
        throw MillError(ErrorKind::Geometry, "contact point is not on the mesh");
    return hit.facet;
}

/// Local plane section by adjacency walking from the facet containing the frame origin.
inline SectionPolyline plane_section(const TriMesh& mesh, const SectionFrame& frame, double window_radius,
                                     std::optional<int> start_facet = std::nullopt)
{
    if (!(window_radius > 0.0))
        throw MillError(ErrorKind::Usage, "section window radius must be positive");
    const int t0 = start_facet ? *start_facet : locate_facet(mesh, frame.origin);
    const detail::SectionWalker walker(mesh, frame);
    const auto edges = walker.crossed_edges(t0);
    if (edges.size() != 2)
        throw MillError(ErrorKind::Geometry,
                        "section plane does not cross contact facet " + std::to_string(t0));

    int e_lo = edges[0], e_hi = edges[1];
    Vec2 a = frame.to_2d(walker.crossing(e_lo));
    Vec2 b = frame.to_2d(walker.crossing(e_hi));
    if (a.x() > b.x()) {
        std::swap(a, b);
        std::swap(e_lo, e_hi);
    }

    SectionPolyline out;
    std::vector<Vec2> back_pts, fwd_pts;
    std::vector<int> back_facets, fwd_facets;
    // The contact segment passes through the origin, so clipping is radial.
    if (a.norm() > window_radius) {
        a *= window_radius / a.norm();
        out.clipped_front = true;
    }
    if (b.norm() > window_radius) {
        b *= window_radius / b.norm();
        out.clipped_back = true;
    }
    bool closed = false;
    if (!out.clipped_back)
        walker.walk(t0, e_hi, window_radius, fwd_pts, fwd_facets, out.clipped_back, out.truncated_back, closed);
    if (!out.clipped_front && !closed)
        walker.walk(t0, e_lo, window_radius, back_pts, back_facets, out.clipped_front, out.truncated_front, closed);
    out.closed = closed;

    for (auto it = back_pts.rbegin(); it != back_pts.rend(); ++it)
        out.points.push_back(*it);
    for (auto it = back_facets.rbegin(); it != back_facets.rend(); ++it)
        out.facets.push_back(*it);
    out.contact_segment = static_cast<int>(out.facets.size());
    out.points.push_back(a);
    out.points.push_back(b);
    out.facets.push_back(t0);
    out.points.insert(out.points.end(), fwd_pts.begin(), fwd_pts.end());
    out.facets.insert(out.facets.end(), fwd_facets.begin(), fwd_facets.end());
    return out;
}

} // namespace millpath
