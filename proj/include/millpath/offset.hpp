#pragma once

#include "millpath/section.hpp"

#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <vector>

namespace millpath {

/// One section segment translated within the section plane.
struct RawOffsetSegment {
    Vec2 source_start;
    Vec2 source_end;
    Vec2 start;
    Vec2 end;
    Vec2 displacement;
    int facet = -1;
    int source_index = -1;
};

struct RawOffset {
    std::vector<RawOffsetSegment> segments;
    std::vector<int> skipped_segments;
    std::vector<std::string> warnings;
};

enum class PointSource { Segment, ArcFill, Trim };

struct PointOrigin {
    PointSource kind = PointSource::Segment;
    int segment = -1;
    Vec2 center = Vec2::Zero(); ///< arc centre for arc-fill points
};

struct RepairEvent {
    enum class Kind { GapFilled, LocalTrim, GlobalTrim, SegmentRemoved };
    Kind kind;
    Vec2 location;
    int segment = -1;
};

inline const char* to_string(RepairEvent::Kind k)
{
    switch (k) {
    case RepairEvent::Kind::GapFilled: return "gap-filled";
    case RepairEvent::Kind::LocalTrim: return "local-trim";
    case RepairEvent::Kind::GlobalTrim: return "global-trim";
    case RepairEvent::Kind::SegmentRemoved: return "segment-removed";
    }
    return "?";
}

inline constexpr const char* kFlagMultiIntersection = "multi-intersection";
inline constexpr const char* kFlagOffsetDegenerate = "offset-degenerate";
inline constexpr const char* kFlagWindowClipped = "window-clipped";
inline constexpr const char* kFlagFrameFailed = "frame-failed";

/// Repaired offset polyline of one section.
struct OffsetPolyline {
    std::vector<Vec2> points;
    std::vector<PointOrigin> origin;
    std::vector<RepairEvent> log;
    std::set<std::string> flags;
    double epsilon = 0.0;
    int side = 0; ///< +1 when the offset lies left of the source direction

    bool has_flag(const std::string& f) const { return flags.count(f) > 0; }
};

/// Arc-fill angular step. Fill points lie on the exact arc; the step keeps the
/// chord sagitta below 0.5e-6 * eps so no chord dips under the no-gouge bound.
inline double arc_fill_max_step()
{
    static const double step = std::min(5.0 * kPi / 180.0, 2.0 * std::acos(1.0 - 0.5e-6));
    return step;
}

/// Translates every section segment by the in-plane projection of eps * N_j.
///
/// The displacement length is eps * cos(alpha), alpha being the angle between
/// N_j and the section plane. Facets whose normal is within 1e-6 rad of the
/// plane normal are skipped.
inline RawOffset offset_segments(const SectionPolyline& section, const TriMesh& mesh, const SectionFrame& frame,
                                 double epsilon)
{
    if (!(epsilon > 0.0))
        throw MillError(ErrorKind::Usage, "offset distance must be positive");
    RawOffset out;
    const double min_in_plane = std::sin(1e-6);
    for (int k = 0; k < section.segment_count(); ++k) {
        const int j = section.facets[k];
        const Vec3& n = mesh.normals.at(j);
        const Vec2 in_plane{n.dot(frame.u_axis), n.dot(frame.v_axis)};
        if (in_plane.norm() < min_in_plane) {
            out.skipped_segments.push_back(k);
            out.warnings.push_back("facet " + std::to_string(j) + " normal is perpendicular to section plane");
            continue;
        }
        RawOffsetSegment s;
        s.source_start = section.points[k];
        s.source_end = section.points[k + 1];
        s.displacement = epsilon * in_plane;
        s.start = s.source_start + s.displacement;
        s.end = s.source_end + s.displacement;
        s.facet = j;
        s.source_index = k;
        out.segments.push_back(s);
    }
    return out;
}

/// Raw offset of a 2D polyline with one unit displacement direction per segment.
inline RawOffset offset_polyline_2d(const std::vector<Vec2>& points, const std::vector<Vec2>& directions,
                                    double epsilon)
{
    RawOffset out;
    for (std::size_t k = 0; k + 1 < points.size(); ++k) {
        RawOffsetSegment s;
        s.source_start = points[k];
        s.source_end = points[k + 1];
        s.displacement = epsilon * directions.at(k);
        s.start = s.source_start + s.displacement;
        s.end = s.source_end + s.displacement;
        s.source_index = static_cast<int>(k);
        out.segments.push_back(s);
    }
    return out;
}

/// Offset of a 2D polyline displaced to its left (side=+1) or right (side=-1).
inline RawOffset offset_polyline_2d(const std::vector<Vec2>& points, int side, double epsilon)
{
    std::vector<Vec2> dirs;
    for (std::size_t k = 0; k + 1 < points.size(); ++k)
        dirs.push_back(side * left_normal((points[k + 1] - points[k]).normalized()));
    return offset_polyline_2d(points, dirs, epsilon);
}

namespace detail {

struct SegmentHit {
    bool hit = false;
    double s = 0.0;
    double t = 0.0;
    Vec2 point;
};

// Intersection of segments p0p1 and q0q1 (closed parameter ranges, non-parallel).
inline SegmentHit intersect_segments(const Vec2& p0, const Vec2& p1, const Vec2& q0, const Vec2& q1)
{
    const Vec2 r = p1 - p0, d = q1 - q0;
    const double den = cross2(r, d);
    if (std::abs(den) <= 1e-300)
        return {};
    const Vec2 w = q0 - p0;
    const double s = cross2(w, d) / den;
    const double t = cross2(w, r) / den;
    if (s < 0.0 || s > 1.0 || t < 0.0 || t > 1.0)
        return {};
    return {true, s, t, p0 + s * r};
}

// Intersection of the infinite lines through a0a1 and b0b1.
inline Vec2 line_intersection(const Vec2& a0, const Vec2& a1, const Vec2& b0, const Vec2& b1)
{
    const Vec2 r = a1 - a0, d = b1 - b0;
    return a0 + cross2(b0 - a0, d) / cross2(r, d) * r;
}

inline double param_on(const Vec2& a, const Vec2& b, const Vec2& x)
{
    const Vec2 d = b - a;
    return (x - a).dot(d) / d.squaredNorm();
}

// Points strictly between p0 and p1 on the arc around `center`, sweeping the
// short way. Radius is interpolated when |p0-c| != |p1-c|.
inline std::vector<Vec2> arc_fill(const Vec2& center, const Vec2& p0, const Vec2& p1)
{
    const Vec2 a = p0 - center, b = p1 - center;
    const double r0 = a.norm(), r1 = b.norm();
    const double phi0 = std::atan2(a.y(), a.x());
    const double sweep = angle_diff(std::atan2(b.y(), b.x()), phi0);
    const int m = std::max(1, static_cast<int>(std::ceil(std::abs(sweep) / arc_fill_max_step() - 1e-12)));
    std::vector<Vec2> out;
    for (int j = 1; j < m; ++j) {
        const double f = static_cast<double>(j) / m;
        const double rho = r0 + f * (r1 - r0);
        const double phi = phi0 + f * sweep;
        out.push_back(center + rho * Vec2(std::cos(phi), std::sin(phi)));
    }
    return out;
}

// Raw offset curve: offset segments joined by arcs (convex), connectors
// through the shared source vertex (concave) or straight lines.
struct RawCurve {
    std::vector<Vec2> points;
    std::vector<PointOrigin> origin;
    std::vector<int> owner;      // kept raw segment of curve segment k, -1 for joins
    std::vector<bool> connector; // curve segment k touches a concave source vertex
};

struct Interval {
    double lo, hi;
};

// Parameter interval of a + t d inside the open capsule of radius rho around s0s1.
inline std::optional<Interval> capsule_interval(const Vec2& a, const Vec2& d, const Vec2& s0, const Vec2& s1,
                                                double rho)
{
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    auto disc = [&](const Vec2& c) {
        const Vec2 w = a - c;
        const double qa = d.squaredNorm(), qb = 2.0 * w.dot(d), qc = w.squaredNorm() - rho * rho;
        const double dis = qb * qb - 4.0 * qa * qc;
        if (qa <= 0.0 || dis <= 0.0)
            return;
        const double sq = std::sqrt(dis);
        lo = std::min(lo, (-qb - sq) / (2.0 * qa));
        hi = std::max(hi, (-qb + sq) / (2.0 * qa));
    };
    disc(s0);
    disc(s1);
    const double len = (s1 - s0).norm();
    if (len > 0.0) {
        const Vec2 e = (s1 - s0) / len, n = left_normal(e);
        double l = -std::numeric_limits<double>::infinity(), h = -l;
        auto slab = [&](double c0, double c1, double min, double max) {
            // min < c0 + t c1 < max
            if (c1 == 0.0) {
                if (!(c0 > min && c0 < max))
                    h = -std::numeric_limits<double>::infinity();
                return;
            }
            double t0 = (min - c0) / c1, t1 = (max - c0) / c1;
            if (t0 > t1)
                std::swap(t0, t1);
            l = std::max(l, t0);
            h = std::min(h, t1);
        };
        slab((a - s0).dot(n), d.dot(n), -rho, rho);
        slab((a - s0).dot(e), d.dot(e), 0.0, len);
        if (l < h) {
            lo = std::min(lo, l);
            hi = std::max(hi, h);
        }
    }
    if (!(lo < hi))
        return std::nullopt;
    return Interval{lo, hi};
}

} // namespace detail

/// Gap filling, concave trimming and removal of self-intersection loops.
///
/// Offset segments are chained into a raw curve (arcs at convex joins,
/// connectors through the source vertex at concave joins). Every part of the
/// curve closer to a source segment than that segment's offset distance is
/// cut away; the surviving envelope is re-chained in curve order.
inline OffsetPolyline repair_offset(const RawOffset& raw, double epsilon)
{
    OffsetPolyline out;
    out.epsilon = epsilon;
    const double tiny = 1e-12 * std::max(epsilon, 1e-300);

    std::vector<const RawOffsetSegment*> segs;
    for (const auto& seg : raw.segments)
        if ((seg.end - seg.start).norm() > tiny)
            segs.push_back(&seg);
    if (segs.empty())
        return out;
    out.side = cross2(segs[0]->end - segs[0]->start, segs[0]->displacement) >= 0.0 ? 1 : -1;

    // Offset radius per kept segment, relaxed to its source neighbours so that
    // interpolated arc fills between unequal radii stay valid.
    const std::size_t ns = segs.size();
    std::vector<double> radius(ns);
    std::vector<bool> linked(ns, false); // segment k shares its end vertex with k+1
    for (std::size_t k = 0; k < ns; ++k)
        radius[k] = segs[k]->displacement.norm();
    for (std::size_t k = 0; k + 1 < ns; ++k)
        linked[k] = (segs[k]->source_end - segs[k + 1]->source_start).norm() <= tiny;
    std::vector<double> reach = radius;
    for (std::size_t k = 0; k < ns; ++k) {
        if (k > 0 && linked[k - 1])
            reach[k] = std::min(reach[k], radius[k - 1]);
        if (k + 1 < ns && linked[k])
            reach[k] = std::min(reach[k], radius[k + 1]);
    }

    detail::RawCurve curve;
    auto push = [&](const Vec2& p, PointOrigin o, int owner_of_previous, bool connector = false) {
        if (!curve.points.empty() && (curve.points.back() - p).norm() <= tiny)
            return;
        if (!curve.points.empty()) {
            curve.owner.push_back(owner_of_previous);
            curve.connector.push_back(connector);
        }
        curve.points.push_back(p);
        curve.origin.push_back(o);
    };
    for (std::size_t k = 0; k < ns; ++k) {
        const auto& s = *segs[k];
        if (k > 0) {
            const auto& p = *segs[k - 1];
            const Vec2 d1 = (p.end - p.start).normalized();
            const Vec2 d2 = (s.end - s.start).normalized();
            const double turn = cross2(d1, d2);
            const double gap = (s.start - p.end).norm();
            if (gap > tiny && std::abs(turn) >= 1e-12 && linked[k - 1]) {
                const double offset_side = cross2(d1, p.displacement) >= 0.0 ? 1.0 : -1.0;
                if (turn * offset_side < 0.0) {
                    for (const Vec2& q : detail::arc_fill(s.source_start, p.end, s.start))
                        push(q, {PointSource::ArcFill, p.source_index, s.source_start}, -1);
                    out.log.push_back({RepairEvent::Kind::GapFilled, s.source_start, s.source_index});
                } else {
                    push(s.source_start, {PointSource::Trim, p.source_index}, -1, true);
                    push(s.start, {PointSource::Segment, s.source_index}, -1, true);
                }
            }
        }
        push(s.start, {PointSource::Segment, s.source_index}, -1);
        push(s.end, {PointSource::Segment, s.source_index}, static_cast<int>(k));
    }

    // Valid parameter intervals of every curve segment.
    struct Piece {
        std::size_t seg;
        double t0, t1;
    };
    std::vector<Piece> pieces;
    const double shrink = 1.0 - 0.6e-6;
    for (std::size_t c = 0; c + 1 < curve.points.size(); ++c) {
        if (curve.connector[c])
            continue;
        const Vec2 a = curve.points[c], d = curve.points[c + 1] - a;
        const Vec2 bmin = a.cwiseMin(a + d), bmax = a.cwiseMax(a + d);
        std::vector<detail::Interval> cut;
        for (std::size_t k = 0; k < ns; ++k) {
            const Vec2 s0 = segs[k]->source_start, s1 = segs[k]->source_end;
            const double rho = reach[k] * shrink;
            const Vec2 smin = s0.cwiseMin(s1), smax = s0.cwiseMax(s1);
            if ((bmin.array() > smax.array() + rho).any() || (smin.array() > bmax.array() + rho).any())
                continue;
            if (const auto iv = detail::capsule_interval(a, d, s0, s1, rho)) {
                const double lo = std::max(iv->lo, 0.0), hi = std::min(iv->hi, 1.0);
                if (lo < hi)
                    cut.push_back({lo, hi});
            }
        }
        std::sort(cut.begin(), cut.end(), [](const auto& x, const auto& y) { return x.lo < y.lo; });
        double t = 0.0;
        for (const auto& iv : cut) {
            if (iv.lo > t)
                pieces.push_back({c, t, iv.lo});
            t = std::max(t, iv.hi);
        }
        if (t < 1.0)
            pieces.push_back({c, t, 1.0});
    }

    auto at = [&](std::size_t c, double t) {
        return t >= 1.0 ? curve.points[c + 1] : curve.points[c] + t * (curve.points[c + 1] - curve.points[c]);
    };
    auto add = [&](const Vec2& p, PointOrigin o) {
        if (!out.points.empty() && (out.points.back() - p).norm() <= tiny)
            return;
        out.points.push_back(p);
        out.origin.push_back(o);
    };
    std::vector<bool> used(ns, false);
    const double coincide = 1e-7 * std::max(epsilon, 1e-300);
    for (std::size_t i = 0; i < pieces.size(); ++i) {
        const auto& pc = pieces[i];
        Vec2 p0 = at(pc.seg, pc.t0);
        const Vec2 p1 = at(pc.seg, pc.t1);
        if (i == 0 && (pc.seg > 0 || pc.t0 > 0.0))
            out.log.push_back({RepairEvent::Kind::GlobalTrim, p0, -1});
        if (i > 0) {
            const auto& pv = pieces[i - 1];
            const bool contiguous = (pv.seg == pc.seg && pv.t1 == pc.t0) ||
                                    (pv.seg + 1 == pc.seg && pv.t1 >= 1.0 && pc.t0 <= 0.0);
            if (!contiguous) {
                // Both ends stop a hair inside the other capsule; meet at the crossing.
                const Vec2 a0 = out.points.size() > 1 ? out.points[out.points.size() - 2] : curve.points[pv.seg];
                const auto hit = detail::intersect_segments(a0, out.points.back(), p0, p1);
                if (hit.hit) {
                    out.points.back() = hit.point;
                    p0 = hit.point;
                } else {
                    const Vec2 a1 = out.points.back();
                    if (std::abs(cross2(a1 - a0, p1 - p0)) > 1e-12 * (a1 - a0).norm() * (p1 - p0).norm()) {
                        const Vec2 x = detail::line_intersection(a0, a1, p0, p1);
                        const double snap = 1e-4 * std::max(epsilon, 1e-300);
                        if ((x - a1).norm() <= snap && (x - p0).norm() <= snap) {
                            out.points.back() = x;
                            p0 = x;
                        }
                    }
                }
                const int oa = curve.owner[pv.seg], ob = curve.owner[pc.seg];
                const bool local = (p0 - out.points.back()).norm() <= coincide && oa >= 0 && ob == oa + 1 &&
                                   linked[static_cast<std::size_t>(oa)];
                out.log.push_back({local ? RepairEvent::Kind::LocalTrim : RepairEvent::Kind::GlobalTrim, p0,
                                   ob >= 0 ? segs[static_cast<std::size_t>(ob)]->source_index : -1});
            }
        }
        add(p0, pc.t0 <= 0.0 ? curve.origin[pc.seg] : PointOrigin{PointSource::Trim, -1});
        add(p1, pc.t1 >= 1.0 ? curve.origin[pc.seg + 1] : PointOrigin{PointSource::Trim, -1});
        if (curve.owner[pc.seg] >= 0)
            used[static_cast<std::size_t>(curve.owner[pc.seg])] = true;
        if (i + 1 == pieces.size() && (pc.seg + 2 < curve.points.size() || pc.t1 < 1.0))
            out.log.push_back({RepairEvent::Kind::GlobalTrim, p1, -1});
    }

    for (std::size_t k = 0; k < ns; ++k)
        if (!used[k]) {
            out.log.push_back({RepairEvent::Kind::SegmentRemoved, 0.5 * (segs[k]->start + segs[k]->end),
                               segs[k]->source_index});
            out.flags.insert(kFlagOffsetDegenerate);
        }
    return out;
}

/// Raw segments equivalent to an already repaired polyline (for re-repair).
///
/// Arc-fill chords get their arc centre as a point source; all other
/// segments are translates of their source by eps.
inline RawOffset as_raw(const OffsetPolyline& poly)
{
    RawOffset out;
    for (std::size_t k = 0; k + 1 < poly.points.size(); ++k) {
        RawOffsetSegment s;
        s.start = poly.points[k];
        s.end = poly.points[k + 1];
        const Vec2 d = s.end - s.start;
        const PointOrigin& o0 = poly.origin[k];
        const PointOrigin& o1 = poly.origin[k + 1];
        if (o0.kind == PointSource::ArcFill || o1.kind == PointSource::ArcFill) {
            const Vec2 c = o0.kind == PointSource::ArcFill ? o0.center : o1.center;
            const double rho = std::min((s.start - c).norm(), (s.end - c).norm());
            s.displacement = rho * (0.5 * (s.start + s.end) - c).normalized();
            s.source_start = s.source_end = c;
        } else {
            s.displacement =
                d.norm() > 0.0 ? Vec2(poly.side * poly.epsilon * left_normal(d.normalized())) : Vec2::Zero();
            s.source_start = s.start - s.displacement;
            s.source_end = s.end - s.displacement;
        }
        s.source_index = static_cast<int>(k);
        out.segments.push_back(s);
    }
    return out;
}

/// Distance from p to the polyline.
inline double distance_to_polyline(const Vec2& p, const std::vector<Vec2>& pts)
{
    double best = std::numeric_limits<double>::infinity();
    if (pts.size() == 1)
        return (p - pts[0]).norm();
    for (std::size_t k = 0; k + 1 < pts.size(); ++k) {
        const Vec2 d = pts[k + 1] - pts[k];
        const double len2 = d.squaredNorm();
        const double t = len2 > 0.0 ? std::clamp((p - pts[k]).dot(d) / len2, 0.0, 1.0) : 0.0;
        best = std::min(best, (pts[k] + t * d - p).norm());
    }
    return best;
}

/// True when two non-adjacent segments of the polyline intersect.
inline bool has_self_intersection(const std::vector<Vec2>& pts)
{
    for (std::size_t i = 0; i + 1 < pts.size(); ++i)
        for (std::size_t j = i + 2; j + 1 < pts.size(); ++j)
            if (detail::intersect_segments(pts[i], pts[i + 1], pts[j], pts[j + 1]).hit)
                return true;
    return false;
}

struct InterferenceReport {
    double frame_angle = 0.0;
    std::vector<RepairEvent> events;
    double min_distance = 0.0;
    std::set<std::string> flags;

    bool clean() const { return events.empty() && flags.empty(); }
};

/// Self-intersection events and the minimum offset-to-source distance.
inline InterferenceReport detect_interference(const OffsetPolyline& offset, const SectionPolyline& section,
                                              double frame_angle = 0.0, int samples_per_segment = 16)
{
    InterferenceReport rep;
    rep.frame_angle = frame_angle;
    for (const auto& e : offset.log)
        if (e.kind != RepairEvent::Kind::GapFilled)
            rep.events.push_back(e);
    rep.flags = offset.flags;
    rep.min_distance = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k + 1 < offset.points.size(); ++k)
        for (int s = 0; s <= samples_per_segment; ++s) {
            const double t = static_cast<double>(s) / samples_per_segment;
            const Vec2 p = offset.points[k] + t * (offset.points[k + 1] - offset.points[k]);
            rep.min_distance = std::min(rep.min_distance, distance_to_polyline(p, section.points));
        }
    if (offset.points.size() == 1)
        rep.min_distance = distance_to_polyline(offset.points[0], section.points);
    return rep;
}

/// SVG debug view of one section frame. scale <= 0 auto-fits with a 5% margin.
inline void write_section_svg(std::ostream& out, const SectionPolyline& section, const RawOffset& raw,
                              const OffsetPolyline& repaired, double scale = 0.0, double size = 800.0,
                              const std::vector<Vec2>& marks = {})
{
    Vec2 lo = Vec2::Constant(std::numeric_limits<double>::infinity());
    Vec2 hi = -lo;
    auto grow = [&](const Vec2& p) {
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
    };
    for (const auto& p : section.points)
        grow(p);
    for (const auto& p : repaired.points)
        grow(p);
    for (const auto& s : raw.segments) {
        grow(s.start);
        grow(s.end);
    }
    for (const auto& p : marks)
        grow(p);
    const double extent = std::max((hi - lo).maxCoeff(), 1e-12);
    const double margin = 0.05 * size;
    if (scale <= 0.0)
        scale = (size - 2.0 * margin) / extent;
    auto X = [&](const Vec2& p) { return fmt9(margin + (p.x() - lo.x()) * scale); };
    auto Y = [&](const Vec2& p) { return fmt9(size - margin - (p.y() - lo.y()) * scale); };
    auto polyline = [&](const std::vector<Vec2>& pts, const char* color, double width) {
        out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"" << width << "\" points=\"";
        for (const auto& p : pts)
            out << X(p) << ',' << Y(p) << ' ';
        out << "\"/>\n";
    };
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << size << "\" height=\"" << size << "\">\n";
    out << "<!-- frame (u,v) coordinates, model units x " << fmt9(scale) << " px -->\n";
    polyline(section.points, "black", 1.5);
    for (const auto& s : raw.segments)
        polyline({s.start, s.end}, "#9999ff", 1.0);
    polyline(repaired.points, "red", 1.0);
    for (const auto& e : repaired.log)
        out << "<circle cx=\"" << X(e.location) << "\" cy=\"" << Y(e.location) << "\" r=\"3\" fill=\""
            << (e.kind == RepairEvent::Kind::GapFilled ? "green" : "orange") << "\"/>\n";
    for (const auto& p : marks)
        out << "<circle cx=\"" << X(p) << "\" cy=\"" << Y(p) << "\" r=\"4\" fill=\"none\" stroke=\"blue\"/>\n";
    out << "</svg>\n";
}

} // namespace millpath
