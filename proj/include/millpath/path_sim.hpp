#pragma once

#include "millpath/analytic_surface.hpp"
#include "millpath/direction_planner.hpp"

#include <limits>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <vector>

namespace millpath {

enum class Strategy { Widest, Bisector, Blended, IsophoteTrace };

inline const char* to_string(Strategy s)
{
    switch (s) {
    case Strategy::Widest: return "widest";
    case Strategy::Bisector: return "bisector";
    case Strategy::Blended: return "blended";
    case Strategy::IsophoteTrace: return "isophote-trace";
    }
    return "unknown";
}

inline Strategy parse_strategy(const std::string& name)
{
    for (Strategy s : {Strategy::Widest, Strategy::Bisector, Strategy::Blended, Strategy::IsophoteTrace})
        if (name == to_string(s))
            return s;
    throw MillError(ErrorKind::Usage, "unknown strategy '" + name + "' (widest|bisector|blended|isophote-trace)");
}

inline constexpr const char* kFlagShortenedStep = "shortened-step";
inline constexpr const char* kFlagTangentBisector = "tangent-bisector";

namespace detail {

inline double segment_distance(const Vec3& p, const Vec3& a, const Vec3& b)
{
    const Vec3 ab = b - a;
    const double t = ab.squaredNorm() > 0.0 ? std::clamp((p - a).dot(ab) / ab.squaredNorm(), 0.0, 1.0) : 0.0;
    return (a + t * ab - p).norm();
}

} // namespace detail

/// One tool position with its planning diagnostics.
struct ContactRecord {
    Vec3 position = Vec3::Zero();
    Vec3 normal = Vec3::UnitZ();
    int facet = -1;
    std::optional<Vec2> params;
    Vec3 direction = Vec3::UnitX(); ///< chosen moving direction q
    double theta_q = 0.0;
    double theta_w = 0.0;
    double theta_s = 0.0;
    double beta = 0.0;
    double residual = 0.0;
    double inclination = 0.0;
    double diameter_max = 0.0;
    double diameter_min = 0.0;
    double width = 0.0; ///< patch extent perpendicular to q
    double patch_radius = 0.0;
    double step_length = 0.0; ///< distance to the next contact, 0 for the last one
    double gaussian = std::numeric_limits<double>::quiet_NaN();
    std::set<std::string> flags;
    std::vector<Vec3> boundary; ///< valid processed-patch boundary samples

    ContactPoint contact() const { return {position, normal, facet, params}; }
};

struct ToolPath {
    std::vector<ContactRecord> points;
    Strategy strategy = Strategy::Widest;
    std::string surface;
    std::string stop_reason;
    bool closed = false;
    ToolSpec tool;
    int planes = 12;
    double step_fraction = 1.0;
    std::string side_step_rule = "side step from the path point of maximal stripe width";

    std::vector<Vec3> polyline() const
    {
        std::vector<Vec3> out;
        out.reserve(points.size());
        for (const auto& p : points)
            out.push_back(p.position);
        return out;
    }
};

/// Moves a point lying on a facet edge slightly toward the incenter so
/// that section planes do not graze the edge.
inline Vec3 inset_from_edges(const TriMesh& mesh, const Vec3& p, int facet)
{
    const double shift = 1e-6 * mesh.average_edge;
    for (int k = 0; k < 3; ++k) {
        const Vec3& a = mesh.corner(facet, k);
        const Vec3& b = mesh.corner(facet, (k + 1) % 3);
        if (detail::segment_distance(p, a, b) < shift) {
            const Vec3 c = incenter(mesh, facet) - p;
            return c.norm() > shift ? Vec3(p + shift * c.normalized()) : p;
        }
    }
    return p;
}

/// Surface access needed by the path loop; implemented for meshes and
/// analytic surfaces.
class PathBackend {
public:
    virtual ~PathBackend() = default;
    virtual std::string kind() const = 0;
    virtual bool analytic() const { return false; }
    virtual PatchBoundary patch(const ContactPoint& c, const ToolSpec& tool, int n, const Vec3& seed) const = 0;
    /// Surface contact at a processed-patch boundary location.
    virtual std::optional<ContactPoint> reproject(const PatchBoundary& patch, const BoundaryLocation& loc) const = 0;
    /// Contact reached by moving `length` along tangent direction d; empty when the surface ends.
    virtual std::optional<ContactPoint> offset(const ContactPoint& c, const Vec3& d, double length) const = 0;
    virtual double gaussian(const ContactPoint&) const { return std::numeric_limits<double>::quiet_NaN(); }
};

class MeshBackend : public PathBackend {
public:
    explicit MeshBackend(const TriMesh& mesh, std::string name = "mesh") : mesh_(mesh), name_(std::move(name)) {}
    std::string kind() const override { return name_; }
    const TriMesh& mesh() const { return mesh_; }

    PatchBoundary patch(const ContactPoint& c, const ToolSpec& tool, int n, const Vec3& seed) const override
    {
        return processed_patch(mesh_, c, tool, n, seed);
    }

    std::optional<ContactPoint> reproject(const PatchBoundary&, const BoundaryLocation& loc) const override
    {
        const MeshPoint m = nearest_on_mesh(mesh_, loc.position);
        return mesh_contact(mesh_, inset(m.position, m.facet), m.facet);
    }

    std::optional<ContactPoint> offset(const ContactPoint& c, const Vec3& d, double length) const override
    {
        const int facet = c.facet >= 0 ? c.facet : locate_facet(mesh_, c.position);
        const auto end = detail::geodesic_walk(mesh_, facet, c.position, d, length);
        if (!end)
            return std::nullopt;
        return mesh_contact(mesh_, inset(end->position, end->facet), end->facet);
    }

    Vec3 inset(const Vec3& p, int facet) const { return inset_from_edges(mesh_, p, facet); }

private:
    const TriMesh& mesh_;
    std::string name_;
};

class AnalyticBackend : public PathBackend {
public:
    explicit AnalyticBackend(const AnalyticSurface& s) : s_(s) {}
    std::string kind() const override { return s_.kind(); }
    bool analytic() const override { return true; }
    const AnalyticSurface& surface() const { return s_; }

    PatchBoundary patch(const ContactPoint& c, const ToolSpec& tool, int n, const Vec3& seed) const override
    {
        return contact_boundary_analytic(s_, c, tool, n, seed);
    }

    std::optional<ContactPoint> reproject(const PatchBoundary& patch, const BoundaryLocation& loc) const override
    {
        const auto& near = patch.samples[loc.fraction < 0.5 ? loc.from : loc.to];
        if (!near.params)
            return std::nullopt;
        const SurfacePoint p = refine_nearest(s_, loc.position, *near.params);
        if (!s_.domain.contains(p.params))
            return std::nullopt;
        return analytic_contact(s_, p.params);
    }

    std::optional<ContactPoint> offset(const ContactPoint& c, const Vec3& d, double length) const override
    {
        if (!c.params)
            throw MillError(ErrorKind::Usage, "analytic contact point needs surface parameters");
        try {
            auto coef = tangent_decomposition(s_, *c.params, d);
            coef.dt = length * std::hypot(coef.a, coef.b) / 200.0;
            coef.K = 400;
            const Vec3 target = c.position + length * d;
            const SurfacePoint m = march_project(s_, *c.params, coef, target);
            const SurfacePoint p = refine_nearest(s_, target, m.params);
            return analytic_contact(s_, p.params);
        } catch (const MillError&) {
            return std::nullopt;
        }
    }

    double gaussian(const ContactPoint& c) const override
    {
        return c.params ? gaussian_curvature(s_, *c.params) : std::numeric_limits<double>::quiet_NaN();
    }

private:
    const AnalyticSurface& s_;
};

struct PathOptions {
    ToolSpec tool;
    int planes = 12;
    Strategy strategy = Strategy::Widest;
    int max_steps = 100;
    double step_fraction = 1.0; ///< share of the boundary distance actually stepped
    double closure_tolerance = 0.25; ///< in units of the current step
    Vec3 seed = Vec3::UnitX(); ///< in-plane seed for the section frames
    std::optional<Vec3> heading; ///< initial moving direction hint
    std::optional<double> max_inclination;

    void validate() const
    {
        tool.validate();
        if (planes < 4)
            throw MillError(ErrorKind::Usage, "processed patch needs at least 4 section planes");
        if (max_steps < 1)
            throw MillError(ErrorKind::Usage, "max steps must be at least 1");
        if (!(step_fraction > 0.0 && step_fraction <= 1.0))
            throw MillError(ErrorKind::Usage, "step fraction must lie in (0, 1]");
        if (!(closure_tolerance >= 0.0))
            throw MillError(ErrorKind::Usage, "closure tolerance must be non-negative");
    }
};

/// Largest distance from the contact point to a valid boundary sample.
inline double patch_radius(const PatchBoundary& patch)
{
    double r = 0.0;
    for (int k : patch.valid_indices())
        r = std::max(r, (patch.samples[k].position - patch.contact.position).norm());
    return r;
}

/// Distance between the boundary points at theta + pi/2 and theta - pi/2.
inline double stripe_width(const PatchBoundary& patch, double theta)
{
    const auto a = boundary_point_at_arc(patch, boundary_arc_at_angle(patch, theta + 0.5 * kPi));
    const auto b = boundary_point_at_arc(patch, boundary_arc_at_angle(patch, theta - 0.5 * kPi));
    return (a.position - b.position).norm();
}

/// Planned move at one contact: the record and the boundary target.
struct PlannedStep {
    ContactRecord record;
    BoundaryLocation target;
};

/// Direction planning for one processed patch. `previous` resolves the
/// antipodal choice of w; without it w keeps theta in [0, pi).
inline PlannedStep plan_step(const PatchBoundary& patch, Strategy strategy, const Vec3& axis,
                             const std::optional<Vec3>& previous)
{
    PlannedStep out;
    auto& rec = out.record;
    const auto& c = patch.contact;
    rec.position = c.position;
    rec.normal = c.normal;
    rec.facet = c.facet;
    rec.params = c.params;
    rec.inclination = inclination(c.normal, axis);
    rec.diameter_max = largest_diameter(patch).length;
    rec.diameter_min = smallest_diameter(patch).length;
    rec.patch_radius = patch_radius(patch);
    for (int k : patch.valid_indices())
        rec.boundary.push_back(patch.samples[k].position);
    rec.flags = patch.flags;

    DirectionOnSurface w = widest_stripe_direction(patch);
    if (previous && w.direction.dot(*previous) < 0.0) {
        w.theta = wrap_two_pi(w.theta + kPi);
        w.direction = -w.direction;
    }
    rec.theta_w = w.theta;
    const IsophotePoint s = isophote_point(patch, c.normal, axis, w);
    const BoundaryLocation loc_w = widest_point(patch, w);
    rec.theta_s = s.location.theta;
    rec.residual = s.residual;
    rec.beta = beta(loc_w.normal, s.location.normal, axis);

    DirectionOnSurface q = w;
    out.target = loc_w;
    switch (strategy) {
    case Strategy::Widest:
        break;
    case Strategy::Blended: {
        const BlendResult b = blended_direction(patch, w, s, rec.beta);
        q = b.q;
        out.target = b.point;
        break;
    }
    case Strategy::Bisector: {
        const BisectorResult b = bisector_directions(patch, c.normal, axis, w);
        q = choose_bisector(b, previous ? previous : std::optional<Vec3>(w.direction));
        if (b.tangent)
            rec.flags.insert(kFlagTangentBisector);
        out.target = boundary_point_at_arc(patch, boundary_arc_at_angle(patch, q.theta));
        break;
    }
    case Strategy::IsophoteTrace:
        throw MillError(ErrorKind::Usage, "isophote-trace paths are traced, not stepped");
    }
    rec.direction = q.direction;
    rec.theta_q = q.theta;
    rec.width = stripe_width(patch, q.theta);
    return out;
}

namespace detail {

inline ToolPath trace_path(const AnalyticBackend& backend, const ContactPoint& start, const PathOptions& opt)
{
    const auto& s = backend.surface();
    if (!start.params)
        throw MillError(ErrorKind::Usage, "analytic contact point needs surface parameters");
    ToolPath path;
    path.strategy = Strategy::IsophoteTrace;
    path.surface = backend.kind();
    path.tool = opt.tool;
    path.planes = opt.planes;
    path.step_fraction = opt.step_fraction;

    const PatchBoundary first = backend.patch(start, opt.tool, opt.planes, opt.seed);
    const PlannedStep plan = plan_step(first, Strategy::Widest, opt.tool.axis, opt.heading);
    const double step = opt.step_fraction * (plan.target.position - start.position).norm();
    const auto trace = trace_isophote(s, *start.params, step, opt.max_steps - 1, opt.tool.axis,
                                      opt.heading ? opt.heading : std::optional<Vec3>(plan.record.direction));
    path.closed = trace.closed;
    path.stop_reason = trace.closed ? "closed" : trace.left_domain ? "domain exit" : "max steps";
    for (std::size_t i = 0; i < trace.params.size(); ++i) {
        const ContactPoint c = analytic_contact(s, trace.params[i]);
        const Vec3 next = i + 1 < trace.points.size() ? trace.points[i + 1]
                        : trace.closed             ? trace.points.front()
                                                   : trace.points[i] + (trace.points[i] - trace.points[i - 1]);
        PatchBoundary patch;
        try {
            patch = backend.patch(c, opt.tool, opt.planes, opt.seed);
        } catch (const MillError& e) {
            if (i == 0)
                throw;
            path.stop_reason = std::string("patch failure: ") + e.what();
            path.closed = false;
            break;
        }
        ContactRecord rec = plan_step(patch, Strategy::Widest, opt.tool.axis, std::nullopt).record;
        const DirectionOnSurface q = direction_to(patch, next);
        rec.direction = q.direction;
        rec.theta_q = q.theta;
        rec.width = stripe_width(patch, q.theta);
        rec.step_length = i + 1 < trace.points.size() ? (trace.points[i + 1] - trace.points[i]).norm() : 0.0;
        rec.gaussian = backend.gaussian(c);
        path.points.push_back(std::move(rec));
    }
    return path;
}

} // namespace detail

/// Steps the tool from `start` under the chosen strategy until max steps,
/// domain exit, closure near the start, or a patch failure.
inline ToolPath generate_path(const PathBackend& backend, const ContactPoint& start, const PathOptions& opt)
{
    opt.validate();
    if (opt.strategy == Strategy::IsophoteTrace) {
        if (!backend.analytic())
            throw MillError(ErrorKind::Usage, "isophote-trace strategy needs an analytic surface");
        return detail::trace_path(static_cast<const AnalyticBackend&>(backend), start, opt);
    }
    ToolPath path;
    path.strategy = opt.strategy;
    path.surface = backend.kind();
    path.tool = opt.tool;
    path.planes = opt.planes;
    path.step_fraction = opt.step_fraction;

    ContactPoint c = start;
    std::optional<Vec3> previous = opt.heading;
    std::optional<Vec3> first_dir;
    path.stop_reason = "max steps";
    for (int step = 0; step < opt.max_steps; ++step) {
        PatchBoundary patch;
        PlannedStep plan;
        try {
            patch = backend.patch(c, opt.tool, opt.planes, opt.seed);
            plan = plan_step(patch, opt.strategy, opt.tool.axis, previous);
        } catch (const MillError& e) {
            if (path.points.empty())
                throw;
            path.stop_reason = std::string("patch failure: ") + e.what();
            break;
        }
        ContactRecord& rec = plan.record;
        rec.gaussian = backend.gaussian(c);
        if (opt.max_inclination && rec.inclination > *opt.max_inclination) {
            path.stop_reason = "inclination limit";
            break;
        }

        const bool unreliable =
            patch.samples[plan.target.from].unreliable || patch.samples[plan.target.to].unreliable;
        std::optional<ContactPoint> next;
        if (unreliable) {
            rec.flags.insert(kFlagShortenedStep);
            next = backend.offset(c, rec.direction, 0.5 * rec.patch_radius);
        } else if (opt.step_fraction < 1.0) {
            next = backend.offset(c, rec.direction, opt.step_fraction * (plan.target.position - c.position).norm());
        } else {
            next = backend.reproject(patch, plan.target);
        }
        if (!next) {
            path.points.push_back(std::move(rec));
            path.stop_reason = "domain exit";
            break;
        }
        const Vec3 move = next->position - c.position;
        rec.step_length = move.norm();
        if (!(rec.step_length > 0.0)) {
            path.points.push_back(std::move(rec));
            path.stop_reason = "zero step";
            break;
        }
        previous = move / rec.step_length;
        if (!first_dir)
            first_dir = previous;
        path.points.push_back(std::move(rec));

        if (path.points.size() >= 3 &&
            detail::segment_distance(start.position, c.position, next->position) <=
                opt.closure_tolerance * path.points.back().step_length &&
            previous->dot(*first_dir) > 0.5) {
            path.closed = true;
            path.stop_reason = "closed";
            break;
        }
        c = *next;
    }
    return path;
}

/// Start of the neighbouring path: offset from the point of maximal stripe
/// width, perpendicular to the moving direction, by (1 - overlap) half widths.
struct SideStep {
    ContactPoint start;
    int origin = -1;
    double distance = 0.0;
    Vec3 heading = Vec3::UnitX();
};

inline SideStep side_step(const PathBackend& backend, const ToolPath& path, double overlap, int side = 1)
{
    if (path.points.empty())
        throw MillError(ErrorKind::Usage, "side step needs a nonempty path");
    if (!(overlap > 0.0 && overlap < 1.0))
        throw MillError(ErrorKind::Usage, "overlap must lie in (0, 1)");
    int best = 0;
    for (int i = 1; i < static_cast<int>(path.points.size()); ++i)
        if (path.points[i].width > path.points[best].width)
            best = i;
    const auto& rec = path.points[best];
    const Vec3 d = (side >= 0 ? 1.0 : -1.0) * rec.normal.cross(rec.direction).normalized();
    SideStep out;
    out.origin = best;
    out.distance = (1.0 - overlap) * 0.5 * rec.width;
    out.heading = rec.direction;
    const auto next = backend.offset(rec.contact(), d, out.distance);
    if (!next)
        throw MillError(ErrorKind::Geometry, "surface covered in this direction");
    out.start = *next;
    return out;
}

struct PathSet {
    std::vector<ToolPath> paths;
    std::vector<SideStep> steps; ///< steps[i] starts paths[i + 1]
    std::string stop_reason;
};

/// `count` neighbouring paths joined by side steps; stops early when a side
/// step leaves the surface.
inline PathSet generate_paths(const PathBackend& backend, const ContactPoint& start, const PathOptions& opt, int count,
                              double overlap, int side = 1)
{
    if (count < 1)
        throw MillError(ErrorKind::Usage, "path count must be at least 1");
    if (count > 1 && !(overlap > 0.0 && overlap < 1.0))
        throw MillError(ErrorKind::Usage, "overlap must lie in (0, 1)");
    PathSet out;
    out.paths.push_back(generate_path(backend, start, opt));
    out.stop_reason = "path count reached";
    while (static_cast<int>(out.paths.size()) < count) {
        SideStep s;
        try {
            s = side_step(backend, out.paths.back(), overlap, side);
        } catch (const MillError& e) {
            if (e.kind() != ErrorKind::Geometry)
                throw;
            out.stop_reason = e.what();
            break;
        }
        PathOptions next = opt;
        next.heading = s.heading;
        out.steps.push_back(s);
        out.paths.push_back(generate_path(backend, s.start, next));
    }
    return out;
}

/// Per-path summary of inclination, stripe width and curvature.
struct PathDiagnostics {
    std::string strategy;
    std::string stop_reason;
    std::size_t points = 0;
    double inclination_min = 0.0;
    double inclination_max = 0.0;
    double inclination_mean = 0.0;
    double width_mean = 0.0;
    double width_change_percent = 0.0; ///< against the baseline mean width
    double gaussian_min = std::numeric_limits<double>::quiet_NaN();
    double gaussian_max = std::numeric_limits<double>::quiet_NaN();
    std::vector<double> widths;

    double inclination_range() const { return inclination_max - inclination_min; }
};

inline PathDiagnostics path_diagnostics(const ToolPath& path)
{
    PathDiagnostics d;
    d.strategy = to_string(path.strategy);
    d.stop_reason = path.stop_reason;
    d.points = path.points.size();
    if (path.points.empty())
        return d;
    d.inclination_min = std::numeric_limits<double>::infinity();
    d.inclination_max = -std::numeric_limits<double>::infinity();
    double incl_sum = 0.0, width_sum = 0.0;
    for (const auto& p : path.points) {
        d.inclination_min = std::min(d.inclination_min, p.inclination);
        d.inclination_max = std::max(d.inclination_max, p.inclination);
        incl_sum += p.inclination;
        width_sum += p.width;
        d.widths.push_back(p.width);
        if (std::isfinite(p.gaussian)) {
            d.gaussian_min = std::isnan(d.gaussian_min) ? p.gaussian : std::min(d.gaussian_min, p.gaussian);
            d.gaussian_max = std::isnan(d.gaussian_max) ? p.gaussian : std::max(d.gaussian_max, p.gaussian);
        }
    }
    const double n = static_cast<double>(path.points.size());
    d.inclination_mean = std::clamp(incl_sum / n, d.inclination_min, d.inclination_max);
    d.width_mean = width_sum / n;
    return d;
}

/// Diagnostics of each path with its mean-width change against the baseline.
inline std::vector<PathDiagnostics> path_report(const std::vector<ToolPath>& paths, const ToolPath& baseline)
{
    const PathDiagnostics base = path_diagnostics(baseline);
    std::vector<PathDiagnostics> out;
    for (const auto& p : paths) {
        PathDiagnostics d = path_diagnostics(p);
        if (base.width_mean > 0.0)
            d.width_change_percent = 100.0 * (d.width_mean - base.width_mean) / base.width_mean;
        out.push_back(std::move(d));
    }
    return out;
}

/// Largest distance from the points of `path` to the polyline `reference`.
inline double max_deviation(const std::vector<Vec3>& path, const std::vector<Vec3>& reference, bool closed = false)
{
    if (reference.empty())
        throw MillError(ErrorKind::Usage, "reference polyline is empty");
    double worst = 0.0;
    for (const auto& p : path) {
        double best = (p - reference.front()).norm();
        const std::size_t segs = closed ? reference.size() : reference.size() - 1;
        for (std::size_t i = 0; i < segs; ++i)
            best = std::min(best, detail::segment_distance(p, reference[i], reference[(i + 1) % reference.size()]));
        worst = std::max(worst, best);
    }
    return worst;
}

inline std::string join_flags(const std::set<std::string>& flags)
{
    std::string s;
    for (const auto& f : flags)
        s += (s.empty() ? "" : ";") + f;
    return s;
}

/// One row per contact point: x,y,z,theta_q,beta,inclination,width,flags.
inline void write_path_csv(std::ostream& out, const ToolPath& path)
{
    out << "x,y,z,theta_q,beta,inclination,width,flags\n";
    for (const auto& p : path.points)
        out << fmt9(p.position.x()) << ',' << fmt9(p.position.y()) << ',' << fmt9(p.position.z()) << ','
            << fmt9(p.theta_q) << ',' << fmt9(p.beta) << ',' << fmt9(p.inclination) << ',' << fmt9(p.width) << ','
            << join_flags(p.flags) << '\n';
}

} // namespace millpath
