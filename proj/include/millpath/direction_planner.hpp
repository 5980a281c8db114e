#pragma once

#include "millpath/patch_analysis.hpp"

#include <optional>
#include <string>

namespace millpath {

/// Angle between surface normal and tool axis, in [0, pi].
inline double inclination(const Vec3& n, const Vec3& a) { return std::acos(clamp_unit(n.dot(a))); }

inline double beta(const Vec3& n_w, const Vec3& n_s, const Vec3& a)
{
    return std::abs(inclination(n_w, a) - inclination(n_s, a));
}

/// Boundary point W in the widest-stripe direction.
inline BoundaryLocation widest_point(const PatchBoundary& patch, const DirectionOnSurface& w)
{
    return boundary_point_at_arc(patch, boundary_arc_at_angle(patch, w.theta));
}

/// Boundary point whose normal inclination is closest to the contact's.
struct IsophotePoint {
    int index = -1;  ///< boundary sample, or -1 when S is W itself between samples
    bool at_w = false;
    BoundaryLocation location;
    double arc = 0.0; ///< arc-length position on the boundary
    double residual = 0.0;
};

namespace detail {

inline BoundaryLocation sample_location(const PatchBoundary& patch, int k)
{
    const auto& s = patch.samples[k];
    BoundaryLocation loc;
    loc.position = s.position;
    loc.normal = s.normal;
    loc.theta = s.theta;
    loc.params = s.params;
    loc.from = k;
    loc.to = k;
    return loc;
}

inline constexpr double kResidualTie = 1e-12;

// Best isophote candidate among valid samples whose angular offset from
// theta_w satisfies `keep`, with W itself competing first.
template <class Keep>
IsophotePoint best_isophote(const PatchBoundary& patch, const Vec3& n_p, const Vec3& a, const DirectionOnSurface& w,
                            Keep keep)
{
    const double target = inclination(n_p, a);
    const auto arc = patch.arc_table();
    IsophotePoint best;
    double best_dist = std::numeric_limits<double>::infinity();
    bool found = false;
    for (int k : patch.valid_indices()) {
        const double delta = angle_diff(patch.samples[k].theta, w.theta);
        if (!keep(delta))
            continue;
        const double r = std::abs(inclination(patch.samples[k].normal, a) - target);
        const double dist = std::abs(delta);
        const bool better = !found || r < best.residual - kResidualTie ||
                            (r <= best.residual + kResidualTie && dist < best_dist);
        if (better) {
            best.index = k;
            best.residual = r;
            best.location = sample_location(patch, k);
            best.arc = arc[k];
            best_dist = dist;
            found = true;
        }
    }
    if (!found)
        throw MillError(ErrorKind::Geometry, "no boundary normals available for the isophote search");
    const double arc_w = boundary_arc_at_angle(patch, w.theta);
    const BoundaryLocation loc_w = boundary_point_at_arc(patch, arc_w);
    const double r_w = std::abs(inclination(loc_w.normal, a) - target);
    if (r_w <= best.residual + kResidualTie) {
        best.at_w = true;
        best.residual = r_w;
        best.location = loc_w;
        best.arc = arc_w;
        best.index = loc_w.fraction == 0.0 ? loc_w.from : loc_w.fraction == 1.0 ? loc_w.to : -1;
    }
    return best;
}

} // namespace detail

/// Minimizes |inclination(N_Si) - inclination(N_P)|; ties go to the sample
/// nearest in angle to w, and W itself wins when it attains the minimum.
inline IsophotePoint isophote_point(const PatchBoundary& patch, const Vec3& n_p, const Vec3& a,
                                    const DirectionOnSurface& w)
{
    return detail::best_isophote(patch, n_p, a, w, [](double) { return true; });
}

inline double beta(const PatchBoundary& patch, int w_index, int s_index, const Vec3& a)
{
    return beta(patch.samples.at(w_index).normal, patch.samples.at(s_index).normal, a);
}

/// Tangent-plane direction from the contact point toward a boundary point.
inline DirectionOnSurface direction_to(const PatchBoundary& patch, const Vec3& target)
{
    const Vec3& n = patch.contact.normal;
    Vec3 d = target - patch.contact.position;
    d -= d.dot(n) * n;
    if (d.norm() <= 1e-300)
        throw MillError(ErrorKind::Geometry, "boundary point coincides with the contact point");
    d.normalize();
    return {d, patch.angle_of(d)};
}

struct BlendResult {
    DirectionOnSurface q;
    BoundaryLocation point;
    double arc_w = 0.0;  ///< arc position of W
    double arc_q = 0.0;  ///< arc position of the blended point
    double arc_sw = 0.0; ///< length of the shorter boundary arc from W to S
    double arc_qw = 0.0; ///< length from W to q along that arc
};

/// Signed shorter-arc offset from arc position `from` to `to` on a closed
/// boundary of the given perimeter, in (-perimeter/2, perimeter/2].
inline double shorter_arc(double from, double to, double perimeter)
{
    double d = std::fmod(to - from, perimeter);
    if (d <= -0.5 * perimeter)
        d += perimeter;
    else if (d > 0.5 * perimeter)
        d -= perimeter;
    return d;
}

/// Direction toward the boundary point at (1 - cos beta) * arc(s, w) from W
/// along the shorter boundary arc toward S.
inline BlendResult blended_direction(const PatchBoundary& patch, const DirectionOnSurface& w, const IsophotePoint& s,
                                     double beta_angle)
{
    BlendResult out;
    const double perim = patch.perimeter();
    out.arc_w = boundary_arc_at_angle(patch, w.theta);
    const double signed_sw = shorter_arc(out.arc_w, s.arc, perim);
    out.arc_sw = std::abs(signed_sw);
    const double ratio = 1.0 - std::cos(beta_angle);
    out.arc_qw = ratio * out.arc_sw;
    out.arc_q = out.arc_w + ratio * signed_sw;
    out.point = boundary_point_at_arc(patch, out.arc_q);
    if (beta_angle == 0.0 || out.arc_qw == 0.0)
        out.q = w;
    else
        out.q = direction_to(patch, out.point.position);
    return out;
}

/// Arc position of a boundary location recomputed from its containing edge.
inline double arc_of_location(const PatchBoundary& patch, const BoundaryLocation& loc)
{
    const auto arc = patch.arc_table();
    const double s0 = arc[loc.from];
    return s0 + loc.fraction * (patch.samples[loc.to].position - patch.samples[loc.from].position).norm();
}

struct BisectorResult {
    DirectionOnSurface b1;
    DirectionOnSurface b2;
    IsophotePoint s1; ///< best isophote point on the half turn counter-clockwise from w
    IsophotePoint s2; ///< best on the clockwise half turn
    bool tangent = false; ///< S1 = S2: one direction returned twice
};

namespace detail {

inline DirectionOnSurface bisect(const PatchBoundary& patch, const DirectionOnSurface& w, const IsophotePoint& s,
                                 double side)
{
    if (s.at_w)
        return w;
    const Vec3 ds = direction_to(patch, s.location.position).direction;
    Vec3 b = w.direction + ds;
    if (b.norm() < 1e-12)
        b = side * patch.contact.normal.cross(w.direction);
    b.normalize();
    return {b, patch.angle_of(b)};
}

} // namespace detail

/// Bisectors of the angles (W, P, S1) and (W, P, S2).
inline BisectorResult bisector_directions(const PatchBoundary& patch, const Vec3& n_p, const Vec3& a,
                                          const DirectionOnSurface& w)
{
    BisectorResult out;
    out.s1 = detail::best_isophote(patch, n_p, a, w, [](double d) { return d >= 0.0 || d == kPi; });
    out.s2 = detail::best_isophote(patch, n_p, a, w, [](double d) { return d <= 0.0 || d == kPi; });
    out.tangent = (out.s1.at_w && out.s2.at_w) || (out.s1.index >= 0 && out.s1.index == out.s2.index);
    out.b1 = detail::bisect(patch, w, out.s1, 1.0);
    out.b2 = out.tangent ? out.b1 : detail::bisect(patch, w, out.s2, -1.0);
    return out;
}

/// Picks the bisector with the smaller turn against the previous direction.
inline DirectionOnSurface choose_bisector(const BisectorResult& b, const std::optional<Vec3>& previous)
{
    if (!previous)
        return b.b1;
    return b.b2.direction.dot(*previous) > b.b1.direction.dot(*previous) ? b.b2 : b.b1;
}

/// Per-point planning record.
struct PlanningRecord {
    double theta_w = 0.0;
    double theta_s = 0.0;
    double beta = 0.0;
    double theta_q = 0.0;
    double residual = 0.0;
    std::string strategy;
};

} // namespace millpath
