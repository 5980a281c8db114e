#pragma once

#include "millpath/offset.hpp"

#include <limits>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace millpath {

/// Ball-end tool: radius r, axis a, machining tolerance eps.
struct ToolSpec {
    double radius = 5.0;
    double tolerance = 0.5;
    Vec3 axis = Vec3::UnitZ();

    void validate() const
    {
        if (!(radius > 0.0))
            throw MillError(ErrorKind::Usage, "tool radius must be positive");
        if (!(tolerance > 0.0 && tolerance < radius))
            throw MillError(ErrorKind::Usage, "tolerance must satisfy 0 < tolerance < radius");
        if (std::abs(axis.norm() - 1.0) > 1e-9)
            throw MillError(ErrorKind::Usage, "tool axis must be a unit vector");
    }
};

/// Touching point of tool and surface. The ball centre is C = P + r N_P.
struct ContactPoint {
    Vec3 position = Vec3::Zero();
    Vec3 normal = Vec3::UnitZ();
    int facet = -1;
    std::optional<Vec2> params;

    Vec3 ball_center(double radius) const { return position + radius * normal; }
};

inline ContactPoint mesh_contact(const TriMesh& mesh, int facet)
{
    if (facet < 0 || facet >= mesh.facet_count())
        throw MillError(ErrorKind::Usage, "facet index " + std::to_string(facet) + " out of range");
    return {incenter(mesh, facet), mesh.normals[facet], facet, std::nullopt};
}

inline ContactPoint mesh_contact(const TriMesh& mesh, const Vec3& p, int facet)
{
    return {p, mesh.normals.at(facet), facet, std::nullopt};
}

struct Circle2 {
    Vec2 center;
    double radius = 0.0;
};

/// Normal section of the ball end: a circle of radius r around the image of C.
inline Circle2 tool_section_circle(const ToolSpec& tool, const ContactPoint& contact, const SectionFrame& frame)
{
    const Vec3 c = contact.ball_center(tool.radius);
    if (std::abs(frame.signed_distance(c)) > 1e-9 * std::max(tool.radius, 1.0))
        throw MillError(ErrorKind::Internal, "ball centre is not in the section plane");
    return {frame.to_2d(c), tool.radius};
}

struct ContactBoundaryPair {
    Vec2 b1; ///< toward decreasing u
    Vec2 b2; ///< toward increasing u
    int intersections = 0;
    bool multi_intersection = false;
};

/// The two offset/circle crossings nearest (in arc length) to the point below C.
inline ContactBoundaryPair contact_boundary_points(const OffsetPolyline& offset, const Circle2& circle)
{
    const auto& pts = offset.points;
    if (pts.size() < 2)
        throw MillError(ErrorKind::Geometry, "offset polyline too short to meet the tool");
    std::vector<double> arc(pts.size(), 0.0);
    for (std::size_t k = 1; k < pts.size(); ++k)
        arc[k] = arc[k - 1] + (pts[k] - pts[k - 1]).norm();

    const Vec2 foot = circle.center - Vec2(0.0, circle.radius);
    double s0 = 0.0, best = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k + 1 < pts.size(); ++k) {
        const Vec2 d = pts[k + 1] - pts[k];
        const double len2 = d.squaredNorm();
        const double t = len2 > 0.0 ? std::clamp((foot - pts[k]).dot(d) / len2, 0.0, 1.0) : 0.0;
        const double dist = (pts[k] + t * d - foot).norm();
        if (dist < best) {
            best = dist;
            s0 = arc[k] + t * (arc[k + 1] - arc[k]);
        }
    }

    struct Crossing {
        double s;
        Vec2 p;
    };
    std::vector<Crossing> hits;
    const double tiny = 1e-12 * std::max(circle.radius, 1e-300);
    for (std::size_t k = 0; k + 1 < pts.size(); ++k) {
        const Vec2 a = pts[k] - circle.center, d = pts[k + 1] - pts[k];
        const double qa = d.squaredNorm();
        if (qa <= 0.0)
            continue;
        const double qb = 2.0 * a.dot(d), qc = a.squaredNorm() - circle.radius * circle.radius;
        const double disc = qb * qb - 4.0 * qa * qc;
        if (disc < 0.0)
            continue;
        const double sq = std::sqrt(disc);
        for (double t : {(-qb - sq) / (2.0 * qa), (-qb + sq) / (2.0 * qa)}) {
            if (t < 0.0 || t > 1.0)
                continue;
            const double s = arc[k] + t * (arc[k + 1] - arc[k]);
            bool dup = false;
            for (const auto& h : hits)
                dup = dup || std::abs(h.s - s) <= tiny;
            if (!dup)
                hits.push_back({s, pts[k] + t * d});
        }
    }

    ContactBoundaryPair out;
    out.intersections = static_cast<int>(hits.size());
    out.multi_intersection = hits.size() > 2;
    const Crossing* lo = nullptr;
    const Crossing* hi = nullptr;
    for (const auto& h : hits) {
        if (h.s < s0 && (!lo || h.s > lo->s))
            lo = &h;
        if (h.s > s0 && (!hi || h.s < hi->s))
            hi = &h;
    }
    if (!lo || !hi)
        throw MillError(ErrorKind::Geometry,
                        "offset does not leave the tool on both sides; increase the section window radius");
    out.b1 = lo->p;
    out.b2 = hi->p;
    return out;
}

struct SectionProjection {
    Vec2 uv;
    Vec3 position;
    int facet = -1;
    int segment = -1;
    bool unreliable = false;
};

/// Nearest point of the section polyline to B, mapped back to 3D.
inline SectionProjection project_boundary_point(const Vec2& b, const SectionPolyline& section,
                                                const SectionFrame& frame)
{
    if (section.segment_count() < 1)
        throw MillError(ErrorKind::Geometry, "empty section polyline");
    SectionProjection out;
    double best = std::numeric_limits<double>::infinity();
    double best_t = 0.0;
    for (int k = 0; k < section.segment_count(); ++k) {
        const Vec2& a = section.points[k];
        const Vec2 d = section.points[k + 1] - a;
        const double len2 = d.squaredNorm();
        const double t = len2 > 0.0 ? std::clamp((b - a).dot(d) / len2, 0.0, 1.0) : 0.0;
        const Vec2 q = a + t * d;
        const double dist = (q - b).norm();
        if (dist < best) {
            best = dist;
            best_t = t;
            out.uv = q;
            out.segment = k;
        }
    }
    out.facet = section.facets[out.segment];
    out.position = frame.to_3d(out.uv);
    out.unreliable = (out.segment == 0 && best_t <= 0.0) ||
                     (out.segment == section.segment_count() - 1 && best_t >= 1.0);
    return out;
}

/// One point of the processed-patch boundary.
struct BoundarySample {
    Vec3 position = Vec3::Zero();
    Vec3 normal = Vec3::UnitZ();
    double theta = 0.0;
    int facet = -1;
    std::optional<Vec2> params;
    Vec2 contact_point_2d = Vec2::Zero(); ///< B in its frame
    int frame = -1;
    bool valid = false;
    bool unreliable = false;
};

/// Per-frame working data, kept for diagnostics and SVG output.
struct FrameResult {
    SectionFrame frame;
    SectionPolyline section;
    RawOffset raw;
    OffsetPolyline repaired;
    Circle2 circle;
    Vec2 b1 = Vec2::Zero();
    Vec2 b2 = Vec2::Zero();
    InterferenceReport interference;
    std::set<std::string> flags;
    std::string error;

    bool ok() const { return error.empty(); }
};

/// 2n boundary points of the processed patch, sample k at tangent angle k*pi/n.
///
/// Sample k (k < n) comes from B2 of frame k, sample k+n from B1 of frame k,
/// so opposite samples share a frame.
struct PatchBoundary {
    ContactPoint contact;
    Vec3 reference_axis = Vec3::UnitX();
    int planes = 0;
    std::vector<BoundarySample> samples;
    std::vector<FrameResult> frames;
    std::set<std::string> flags;
    std::string projection_rule = "nearest point of the section polyline within the frame plane";

    int size() const { return static_cast<int>(samples.size()); }
    int opposite(int k) const { return (k + planes) % (2 * planes); }

    Vec3 direction(double theta) const { return tangent_direction(contact.normal, reference_axis, theta); }

    /// Tangent-plane angle of a 3D direction.
    double angle_of(const Vec3& d) const
    {
        const Vec3 side = contact.normal.cross(reference_axis);
        return wrap_two_pi(std::atan2(d.dot(side), d.dot(reference_axis)));
    }

    std::vector<int> valid_indices() const
    {
        std::vector<int> out;
        for (int k = 0; k < size(); ++k)
            if (samples[k].valid)
                out.push_back(k);
        return out;
    }

    /// Cumulative boundary arc length at each valid sample, starting at the
    /// first valid sample; entry -1 for invalid samples. Last element: perimeter.
    std::vector<double> arc_table() const
    {
        std::vector<double> arc(size() + 1, -1.0);
        const auto idx = valid_indices();
        if (idx.empty())
            return arc;
        double s = 0.0;
        arc[idx[0]] = 0.0;
        for (std::size_t i = 1; i < idx.size(); ++i) {
            s += (samples[idx[i]].position - samples[idx[i - 1]].position).norm();
            arc[idx[i]] = s;
        }
        s += (samples[idx.front()].position - samples[idx.back()].position).norm();
        arc[size()] = s;
        return arc;
    }

    double perimeter() const { return arc_table().back(); }
};

/// Point on the boundary polygon at arc length s (cyclic) from the first valid sample.
struct BoundaryLocation {
    Vec3 position;
    Vec3 normal;
    double theta = 0.0;
    std::optional<Vec2> params;
    int from = -1; ///< sample index at the start of the containing edge
    int to = -1;
    double fraction = 0.0;
};

inline BoundaryLocation boundary_point_at_arc(const PatchBoundary& patch, double s)
{
    const auto idx = patch.valid_indices();
    if (idx.size() < 2)
        throw MillError(ErrorKind::Geometry, "patch has fewer than two valid boundary points");
    const auto arc = patch.arc_table();
    const double perim = arc.back();
    s = std::fmod(s, perim);
    if (s < 0.0)
        s += perim;
    for (std::size_t i = 0; i < idx.size(); ++i) {
        const int a = idx[i];
        const int b = idx[(i + 1) % idx.size()];
        const double s0 = arc[a];
        const double s1 = i + 1 < idx.size() ? arc[b] : perim;
        if (s <= s1 || i + 1 == idx.size()) {
            const double f = s1 > s0 ? std::clamp((s - s0) / (s1 - s0), 0.0, 1.0) : 0.0;
            const auto& A = patch.samples[a];
            const auto& B = patch.samples[b];
            BoundaryLocation loc;
            loc.position = A.position + f * (B.position - A.position);
            loc.normal = (A.normal + f * (B.normal - A.normal)).normalized();
            loc.theta = wrap_two_pi(A.theta + f * angle_diff(B.theta, A.theta));
            if (A.params && B.params)
                loc.params = *A.params + f * (*B.params - *A.params);
            loc.from = a;
            loc.to = b;
            loc.fraction = f;
            return loc;
        }
    }
    throw MillError(ErrorKind::Internal, "boundary arc lookup failed");
}

/// Arc-length position of the boundary point in tangent direction theta,
/// interpolating linearly in angle between the neighbouring valid samples.
inline double boundary_arc_at_angle(const PatchBoundary& patch, double theta)
{
    const auto idx = patch.valid_indices();
    if (idx.size() < 2)
        throw MillError(ErrorKind::Geometry, "patch has fewer than two valid boundary points");
    const auto arc = patch.arc_table();
    const double perim = arc.back();
    theta = wrap_two_pi(theta);
    for (std::size_t i = 0; i < idx.size(); ++i) {
        const int a = idx[i];
        const int b = idx[(i + 1) % idx.size()];
        const double span = wrap_two_pi(patch.samples[b].theta - patch.samples[a].theta);
        const double off = wrap_two_pi(theta - patch.samples[a].theta);
        if (off <= span || (span == 0.0 && off == 0.0)) {
            const double f = span > 0.0 ? off / span : 0.0;
            const double s0 = arc[a];
            const double s1 = i + 1 < idx.size() ? arc[b] : perim;
            return s0 + f * (s1 - s0);
        }
    }
    return 0.0;
}

/// Section window: tool radius + tolerance + one average edge length.
inline double default_window_radius(const TriMesh& mesh, const ToolSpec& tool)
{
    return tool.radius + tool.tolerance + mesh.average_edge;
}

/// Runs the offset/contact pipeline in one section frame.
inline FrameResult process_frame(const TriMesh& mesh, const ContactPoint& contact, const ToolSpec& tool,
                                 const SectionFrame& frame, double window_radius)
{
    FrameResult fr;
    fr.frame = frame;
    fr.section = plane_section(mesh, frame, window_radius, contact.facet);
    fr.raw = offset_segments(fr.section, mesh, frame, tool.tolerance);
    fr.repaired = repair_offset(fr.raw, tool.tolerance);
    fr.interference = detect_interference(fr.repaired, fr.section, frame.angle);
    fr.flags.insert(fr.repaired.flags.begin(), fr.repaired.flags.end());
    fr.circle = tool_section_circle(tool, contact, frame);
    const auto pair = contact_boundary_points(fr.repaired, fr.circle);
    if (pair.multi_intersection)
        fr.flags.insert(kFlagMultiIntersection);
    fr.b1 = pair.b1;
    fr.b2 = pair.b2;
    return fr;
}

/// Processed-patch boundary on a mesh from n normal sections.
inline PatchBoundary processed_patch(const TriMesh& mesh, const ContactPoint& contact, const ToolSpec& tool, int n,
                                     const Vec3& seed = Vec3::UnitX(), std::optional<double> window = std::nullopt)
{
    tool.validate();
    if (n < 4)
        throw MillError(ErrorKind::Usage, "processed patch needs at least 4 section planes");
    ContactPoint c = contact;
    if (c.facet < 0)
        c.facet = locate_facet(mesh, c.position);
    const double radius = window ? *window : default_window_radius(mesh, tool);

    PatchBoundary patch;
    patch.contact = c;
    patch.planes = n;
    std::vector<std::string> warnings;
    const auto frames = make_section_frames(c.position, c.normal, seed, n, &warnings);
    patch.reference_axis = frames[0].u_axis;
    patch.samples.resize(2 * n);
    int ok = 0;
    std::string errors;
    for (int i = 0; i < n; ++i) {
        FrameResult fr;
        try {
            fr = process_frame(mesh, c, tool, frames[i], radius);
        } catch (const MillError& e) {
            fr.frame = frames[i];
            fr.error = e.what();
            fr.flags.insert(kFlagFrameFailed);
            errors += " [frame " + std::to_string(i) + "] " + e.what();
        }
        if (fr.ok()) {
            const std::pair<int, Vec2> sides[2] = {{i, fr.b2}, {i + n, fr.b1}};
            for (const auto& [k, b] : sides) {
                const auto proj = project_boundary_point(b, fr.section, fr.frame);
                auto& s = patch.samples[k];
                s.position = proj.position;
                s.facet = proj.facet;
                s.normal = mesh.normals[proj.facet];
                s.theta = kPi * k / n;
                s.contact_point_2d = b;
                s.frame = i;
                s.valid = true;
                s.unreliable = proj.unreliable;
                if (proj.unreliable)
                    fr.flags.insert(kFlagWindowClipped);
            }
            ++ok;
        } else {
            for (int k : {i, i + n}) {
                patch.samples[k].theta = kPi * k / n;
                patch.samples[k].frame = i;
            }
        }
        patch.flags.insert(fr.flags.begin(), fr.flags.end());
        patch.frames.push_back(std::move(fr));
    }
    if (4 * ok < 3 * n)
        throw MillError(ErrorKind::Geometry, "processed patch failed in too many frames:" + errors);
    return patch;
}

} // namespace millpath
