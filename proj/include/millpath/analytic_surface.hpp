#pragma once

#include "millpath/mesh_gen.hpp"
#include "millpath/tool_contact.hpp"

#include <array>
#include <map>
#include <memory>
#include <string>
#include <vector>

namespace millpath {

/// Parameter rectangle [u0,u1] x [v0,v1].
struct ParamDomain {
    double u0 = 0.0, u1 = 1.0, v0 = 0.0, v1 = 1.0;
    bool periodic_u = false;
    bool periodic_v = false;

    double diagonal() const { return std::hypot(u1 - u0, v1 - v0); }

    bool contains(const Vec2& p) const
    {
        return (periodic_u || (p.x() >= u0 && p.x() <= u1)) && (periodic_v || (p.y() >= v0 && p.y() <= v1));
    }

    Vec2 wrap(Vec2 p) const
    {
        auto w = [](double x, double a, double b) {
            const double span = b - a;
            x = std::fmod(x - a, span);
            return (x < 0.0 ? x + span : x) + a;
        };
        if (periodic_u)
            p.x() = w(p.x(), u0, u1);
        if (periodic_v)
            p.y() = w(p.y(), v0, v1);
        return p;
    }

    Vec2 clamp(Vec2 p) const
    {
        if (!periodic_u)
            p.x() = std::clamp(p.x(), u0, u1);
        if (!periodic_v)
            p.y() = std::clamp(p.y(), v0, v1);
        return wrap(p);
    }
};

struct Partials {
    Vec3 ru, rv;
};

struct SecondPartials {
    Vec3 ruu, ruv, rvv;
};

/// Smooth surface r(u,v) over a parameter rectangle. Normals follow
/// orientation * (r_u x r_v).
class AnalyticSurface {
public:
    virtual ~AnalyticSurface() = default;

    virtual std::string kind() const = 0;
    virtual bool is_graph() const { return false; }

    Vec3 point(double u, double v) const { return eval_point(u, v); }
    Partials partials(double u, double v) const { return eval_partials(u, v); }
    SecondPartials second_partials(double u, double v) const { return eval_second(u, v); }
    Vec3 point(const Vec2& p) const { return eval_point(p.x(), p.y()); }
    Partials partials(const Vec2& p) const { return eval_partials(p.x(), p.y()); }
    SecondPartials second_partials(const Vec2& p) const { return eval_second(p.x(), p.y()); }

    Vec3 normal(const Vec2& p) const
    {
        const auto d = partials(p);
        const Vec3 n = d.ru.cross(d.rv);
        const double len = n.norm();
        if (!(len > 0.0))
            throw MillError(ErrorKind::Numeric, "irregular parameterization point");
        return orientation * n / len;
    }

    ParamDomain domain;
    double orientation = 1.0;

protected:
    virtual Vec3 eval_point(double u, double v) const = 0;
    virtual Partials eval_partials(double u, double v) const = 0;
    virtual SecondPartials eval_second(double u, double v) const = 0;
};

/// Graph surface z = f(x,y), parameters (x,y).
class GraphSurface : public AnalyticSurface {
public:
    virtual double f(double x, double y) const = 0;
    virtual Vec2 gradient(double x, double y) const = 0;
    /// (f_xx, f_xy, f_yy)
    virtual Vec3 hessian(double x, double y) const = 0;

    bool is_graph() const override { return true; }

protected:
    Vec3 eval_point(double x, double y) const override { return {x, y, f(x, y)}; }
    Partials eval_partials(double x, double y) const override
    {
        const Vec2 g = gradient(x, y);
        return {Vec3(1.0, 0.0, g.x()), Vec3(0.0, 1.0, g.y())};
    }
    SecondPartials eval_second(double x, double y) const override
    {
        const Vec3 h = hessian(x, y);
        return {Vec3(0, 0, h[0]), Vec3(0, 0, h[1]), Vec3(0, 0, h[2])};
    }
};

namespace surfaces {

inline ParamDomain square(double half) { return {-half, half, -half, half}; }

/// z = px x + py y + h
class Plane : public GraphSurface {
public:
    explicit Plane(double px = 0.0, double py = 0.0, double h = 0.0, double half = 20.0) : px_(px), py_(py), h_(h)
    {
        domain = square(half);
    }
    std::string kind() const override { return "plane"; }
    double f(double x, double y) const override { return px_ * x + py_ * y + h_; }
    Vec2 gradient(double, double) const override { return {px_, py_}; }
    Vec3 hessian(double, double) const override { return Vec3::Zero(); }

private:
    double px_, py_, h_;
};

/// z = c (x^2 + y^2)
class Paraboloid : public GraphSurface {
public:
    explicit Paraboloid(double c = 0.02, double half = 20.0) : c_(c) { domain = square(half); }
    std::string kind() const override { return "paraboloid"; }
    double f(double x, double y) const override { return c_ * (x * x + y * y); }
    Vec2 gradient(double x, double y) const override { return {2.0 * c_ * x, 2.0 * c_ * y}; }
    Vec3 hessian(double, double) const override { return {2.0 * c_, 0.0, 2.0 * c_}; }

private:
    double c_;
};

/// z = c (x^2 - y^2)
class Saddle : public GraphSurface {
public:
    explicit Saddle(double c = 0.02, double half = 20.0) : c_(c) { domain = square(half); }
    std::string kind() const override { return "saddle"; }
    double f(double x, double y) const override { return c_ * (x * x - y * y); }
    Vec2 gradient(double x, double y) const override { return {2.0 * c_ * x, -2.0 * c_ * y}; }
    Vec3 hessian(double, double) const override { return {2.0 * c_, 0.0, -2.0 * c_}; }

private:
    double c_;
};

/// Upper hemisphere z = sqrt(R^2 - x^2 - y^2) centred at the origin.
class SphereGraph : public GraphSurface {
public:
    explicit SphereGraph(double R = 20.0, double half = -1.0) : R_(R)
    {
        domain = square(half > 0.0 ? half : 0.6 * R);
    }
    std::string kind() const override { return "sphere"; }
    double radius() const { return R_; }
    double f(double x, double y) const override { return std::sqrt(R_ * R_ - x * x - y * y); }
    Vec2 gradient(double x, double y) const override
    {
        const double z = f(x, y);
        return {-x / z, -y / z};
    }
    Vec3 hessian(double x, double y) const override
    {
        const double z = f(x, y), z3 = z * z * z;
        return {-(R_ * R_ - y * y) / z3, -x * y / z3, -(R_ * R_ - x * x) / z3};
    }

private:
    double R_;
};

/// z = A sin(w x) cos(w y)
class TrigBump : public GraphSurface {
public:
    explicit TrigBump(double A = 5.0, double w = 0.08, double half = 40.0) : A_(A), w_(w) { domain = square(half); }
    std::string kind() const override { return "bump"; }
    double f(double x, double y) const override { return A_ * std::sin(w_ * x) * std::cos(w_ * y); }
    Vec2 gradient(double x, double y) const override
    {
        return {A_ * w_ * std::cos(w_ * x) * std::cos(w_ * y), -A_ * w_ * std::sin(w_ * x) * std::sin(w_ * y)};
    }
    Vec3 hessian(double x, double y) const override
    {
        const double k = A_ * w_ * w_;
        return {-k * std::sin(w_ * x) * std::cos(w_ * y), -k * std::cos(w_ * x) * std::sin(w_ * y),
                -k * std::sin(w_ * x) * std::cos(w_ * y)};
    }

private:
    double A_, w_;
};

/// r(u,v) = (u, R sin v, R cos v): axis along x, v measured from +z.
/// `concave` flips the normal toward the axis.
class Cylinder : public AnalyticSurface {
public:
    explicit Cylinder(double R = 20.0, double length = 80.0, bool concave = false) : R_(R)
    {
        domain = {-0.5 * length, 0.5 * length, -kPi, kPi, false, true};
        orientation = concave ? -1.0 : 1.0;
    }
    std::string kind() const override { return "cylinder"; }
protected:
    Vec3 eval_point(double u, double v) const override { return {u, R_ * std::sin(v), R_ * std::cos(v)}; }
    Partials eval_partials(double, double v) const override
    {
        return {Vec3::UnitX(), Vec3(0.0, R_ * std::cos(v), -R_ * std::sin(v))};
    }
    SecondPartials eval_second(double, double v) const override
    {
        return {Vec3::Zero(), Vec3::Zero(), Vec3(0.0, -R_ * std::sin(v), -R_ * std::cos(v))};
    }

private:
    double R_;
};

/// r(u,v) = ((R0 + r0 cos v) cos u, (R0 + r0 cos v) sin u, r0 sin v), outward normals.
class Torus : public AnalyticSurface {
public:
    explicit Torus(double R0 = 5.0, double r0 = 2.5) : R0_(R0), r0_(r0)
    {
        domain = {0.0, kTwoPi, 0.0, kTwoPi, true, true};
    }
    std::string kind() const override { return "torus"; }
    double major() const { return R0_; }
    double minor() const { return r0_; }
protected:
    Vec3 eval_point(double u, double v) const override
    {
        const double w = R0_ + r0_ * std::cos(v);
        return {w * std::cos(u), w * std::sin(u), r0_ * std::sin(v)};
    }
    Partials eval_partials(double u, double v) const override
    {
        const double w = R0_ + r0_ * std::cos(v);
        return {Vec3(-w * std::sin(u), w * std::cos(u), 0.0),
                Vec3(-r0_ * std::sin(v) * std::cos(u), -r0_ * std::sin(v) * std::sin(u), r0_ * std::cos(v))};
    }
    SecondPartials eval_second(double u, double v) const override
    {
        const double w = R0_ + r0_ * std::cos(v);
        return {Vec3(-w * std::cos(u), -w * std::sin(u), 0.0),
                Vec3(r0_ * std::sin(v) * std::sin(u), -r0_ * std::sin(v) * std::cos(u), 0.0),
                Vec3(-r0_ * std::cos(v) * std::cos(u), -r0_ * std::cos(v) * std::sin(u), -r0_ * std::sin(v))};
    }

private:
    double R0_, r0_;
};

} // namespace surfaces

/// Catalog names accepted by make_surface.
inline const std::vector<std::string>& surface_catalog()
{
    static const std::vector<std::string> names{"plane", "paraboloid", "saddle", "sphere", "cylinder", "torus", "bump"};
    return names;
}

/// Builds a catalog surface. Recognised parameters per kind:
/// plane: slope_x, slope_y, height, half; paraboloid/saddle: c, half;
/// sphere: radius, half; cylinder: radius, length, concave; torus: major, minor;
/// bump: amplitude, omega, half. Any kind: u0, u1, v0, v1, flip.
inline std::unique_ptr<AnalyticSurface> make_surface(const std::string& kind,
                                                     const std::map<std::string, double>& params = {})
{
    auto get = [&](const std::string& key, double def) {
        const auto it = params.find(key);
        return it == params.end() ? def : it->second;
    };
    std::unique_ptr<AnalyticSurface> s;
    if (kind == "plane")
        s = std::make_unique<surfaces::Plane>(get("slope_x", 0.0), get("slope_y", 0.0), get("height", 0.0),
                                              get("half", 20.0));
    else if (kind == "paraboloid")
        s = std::make_unique<surfaces::Paraboloid>(get("c", 0.02), get("half", 20.0));
    else if (kind == "saddle")
        s = std::make_unique<surfaces::Saddle>(get("c", 0.02), get("half", 20.0));
    else if (kind == "sphere")
        s = std::make_unique<surfaces::SphereGraph>(get("radius", 20.0), get("half", -1.0));
    else if (kind == "cylinder")
        s = std::make_unique<surfaces::Cylinder>(get("radius", 20.0), get("length", 80.0), get("concave", 0.0) != 0.0);
    else if (kind == "torus")
        s = std::make_unique<surfaces::Torus>(get("major", 5.0), get("minor", 2.5));
    else if (kind == "bump")
        s = std::make_unique<surfaces::TrigBump>(get("amplitude", 5.0), get("omega", 0.08), get("half", 40.0));
    else
        throw MillError(ErrorKind::Usage, "unknown surface kind '" + kind + "'");
    for (const char* key : {"u0", "u1", "v0", "v1"}) {
        const auto it = params.find(key);
        if (it == params.end())
            continue;
        const std::string k = key;
        (k == "u0" ? s->domain.u0 : k == "u1" ? s->domain.u1 : k == "v0" ? s->domain.v0 : s->domain.v1) = it->second;
    }
    if (get("flip", 0.0) != 0.0)
        s->orientation = -s->orientation;
    if (!(s->domain.u1 > s->domain.u0) || !(s->domain.v1 > s->domain.v0))
        throw MillError(ErrorKind::Usage, "empty parameter domain for surface '" + kind + "'");
    return s;
}

/// Largest relative error of the analytic partials against central finite
/// differences with step 1e-5 * domain size.
inline double partials_fd_error(const AnalyticSurface& s, const Vec2& p)
{
    const double h = 1e-5 * s.domain.diagonal();
    const Vec2 du(h, 0.0), dv(0.0, h);
    const auto d = s.partials(p);
    const auto d2 = s.second_partials(p);
    const Vec3 fd_u = (s.point(p + du) - s.point(p - du)) / (2 * h);
    const Vec3 fd_v = (s.point(p + dv) - s.point(p - dv)) / (2 * h);
    const Vec3 fd_uu = (s.partials(p + du).ru - s.partials(p - du).ru) / (2 * h);
    const Vec3 fd_uv = (s.partials(p + dv).ru - s.partials(p - dv).ru) / (2 * h);
    const Vec3 fd_vv = (s.partials(p + dv).rv - s.partials(p - dv).rv) / (2 * h);
    double err = 0.0;
    auto rel = [&](const Vec3& a, const Vec3& fd, double scale) {
        err = std::max(err, (a - fd).norm() / std::max(scale, 1e-300));
    };
    const double first = std::max(d.ru.norm(), d.rv.norm());
    rel(d.ru, fd_u, first);
    rel(d.rv, fd_v, first);
    const double second = std::max({d2.ruu.norm(), d2.ruv.norm(), d2.rvv.norm(), 1e-3 * first / s.domain.diagonal()});
    rel(d2.ruu, fd_uu, second);
    rel(d2.ruv, fd_uv, second);
    rel(d2.rvv, fd_vv, second);
    return err;
}

/// Upward graph normal (-f_x, -f_y, 1) / sqrt(f_x^2 + f_y^2 + 1).
inline Vec3 graph_normal(const GraphSurface& s, double x, double y)
{
    const Vec2 g = s.gradient(x, y);
    return Vec3(-g.x(), -g.y(), 1.0) / std::sqrt(g.squaredNorm() + 1.0);
}

/// f_x^2 + f_y^2 at (x,y) minus its value at (xP,yP); zero on the isophote
/// through P for a vertical tool axis.
inline double isophote_residual(const GraphSurface& s, double x, double y, double xp, double yp)
{
    return s.gradient(x, y).squaredNorm() - s.gradient(xp, yp).squaredNorm();
}

struct ShapeData {
    double E = 0, F = 0, G = 0, L = 0, M = 0, N = 0;
    double gaussian = 0.0;
    double mean = 0.0;
    double k1 = 0.0; ///< larger principal curvature
    double k2 = 0.0;
};

inline ShapeData shape_data(const AnalyticSurface& s, const Vec2& p)
{
    const auto d = s.partials(p);
    const auto d2 = s.second_partials(p);
    ShapeData out;
    out.E = d.ru.dot(d.ru);
    out.F = d.ru.dot(d.rv);
    out.G = d.rv.dot(d.rv);
    const double det = out.E * out.G - out.F * out.F;
    if (!(det > 1e-14 * (out.E + out.G) * (out.E + out.G)))
        throw MillError(ErrorKind::Numeric, "irregular parameterization point");
    const Vec3 n = s.normal(p);
    out.L = d2.ruu.dot(n);
    out.M = d2.ruv.dot(n);
    out.N = d2.rvv.dot(n);
    out.gaussian = (out.L * out.N - out.M * out.M) / det;
    out.mean = (out.E * out.N - 2.0 * out.F * out.M + out.G * out.L) / (2.0 * det);
    const double disc = std::sqrt(std::max(0.0, out.mean * out.mean - out.gaussian));
    out.k1 = out.mean + disc;
    out.k2 = out.mean - disc;
    return out;
}

/// K = (LN - M^2) / (EG - F^2); sign follows the surface orientation
/// convention of the normal (positive on convex caps seen from the tool).
inline double gaussian_curvature(const AnalyticSurface& s, const Vec2& p) { return shape_data(s, p).gaussian; }

/// Radius of the strongest principal curvature, capped by the domain diagonal.
inline double local_feature_size(const AnalyticSurface& s, const Vec2& p)
{
    const auto sd = shape_data(s, p);
    const double k = std::max(std::abs(sd.k1), std::abs(sd.k2));
    const double diag = s.domain.diagonal();
    return k * diag > 1.0 ? 1.0 / k : diag;
}

inline ContactPoint analytic_contact(const AnalyticSurface& s, const Vec2& p)
{
    const Vec2 q = s.domain.wrap(p);
    if (!s.domain.contains(q))
        throw MillError(ErrorKind::Usage, "contact parameters outside the surface domain");
    return {s.point(q), s.normal(q), -1, q};
}

/// Triangulated copy of a surface, normals following its orientation.
inline TriMesh tessellate_surface(const AnalyticSurface& s, int nu, int nv)
{
    return tessellate([&](double u, double v) { return s.point(u, v); }, s.domain.u0, s.domain.u1, nu, s.domain.v0,
                      s.domain.v1, nv, s.orientation < 0.0);
}

// ---------------------------------------------------------------------------
// isophotes

struct IsophoteTrace {
    std::vector<Vec2> params;
    std::vector<Vec3> points;
    std::vector<double> residuals;
    double level = 0.0;
    bool closed = false;
    bool left_domain = false;
};

namespace detail {

// Isophote function: |grad f|^2 for graphs (vertical axis), N.a otherwise.
struct IsophoteFunction {
    const AnalyticSurface& s;
    Vec3 axis;

    double operator()(const Vec2& p) const
    {
        if (s.is_graph())
            return static_cast<const GraphSurface&>(s).gradient(p.x(), p.y()).squaredNorm();
        return s.normal(p).dot(axis);
    }

    Vec2 gradient(const Vec2& p) const
    {
        if (s.is_graph()) {
            const auto& g = static_cast<const GraphSurface&>(s);
            const Vec2 d = g.gradient(p.x(), p.y());
            const Vec3 h = g.hessian(p.x(), p.y());
            return {2.0 * (d.x() * h[0] + d.y() * h[1]), 2.0 * (d.x() * h[1] + d.y() * h[2])};
        }
        const double step = 1e-6 * s.domain.diagonal();
        const Vec2 du(step, 0.0), dv(0.0, step);
        return {((*this)(p + du) - (*this)(p - du)) / (2 * step), ((*this)(p + dv) - (*this)(p - dv)) / (2 * step)};
    }
};

} // namespace detail

/// Predictor-corrector march along the isophote through P. Graph surfaces use
/// the vertical-axis equation f_x^2 + f_y^2 = const; parametric surfaces use
/// N . axis = const.
inline IsophoteTrace trace_isophote(const AnalyticSurface& s, const Vec2& start, double step, int count,
                                    const Vec3& axis = Vec3::UnitZ(), std::optional<Vec3> heading = std::nullopt)
{
    if (!(step > 0.0) || count < 1)
        throw MillError(ErrorKind::Usage, "isophote tracing needs a positive step and count");
    const detail::IsophoteFunction fn{s, axis};
    IsophoteTrace out;
    Vec2 p = s.domain.wrap(start);
    out.level = fn(p);
    const double tol = 1e-8 * (1.0 + std::abs(out.level));
    auto correct = [&](Vec2 q) {
        for (int it = 0; it < 50; ++it) {
            const double r = fn(q) - out.level;
            if (std::abs(r) <= 1e-13 * (1.0 + std::abs(out.level)))
                break;
            const Vec2 g = fn.gradient(q);
            if (g.squaredNorm() <= 1e-300)
                break;
            q -= r * g / g.squaredNorm();
        }
        return q;
    };
    const Vec2 g0 = fn.gradient(p);
    if (g0.norm() <= 1e-12)
        throw MillError(ErrorKind::Numeric, "isophote undefined (umbilic/flat)");
    auto record = [&](const Vec2& q) {
        out.params.push_back(s.domain.wrap(q));
        out.points.push_back(s.point(q));
        out.residuals.push_back(fn(q) - out.level);
    };
    record(p);
    Vec2 prev_t = Vec2::Zero();
    for (int i = 0; i < count; ++i) {
        const Vec2 g = fn.gradient(p);
        if (g.norm() <= 1e-14)
            throw MillError(ErrorKind::Numeric, "isophote undefined (umbilic/flat)");
        Vec2 t(-g.y(), g.x());
        const auto d = s.partials(p);
        if (i == 0 && heading) {
            if ((t.x() * d.ru + t.y() * d.rv).dot(*heading) < 0.0)
                t = -t;
        } else if (i > 0 && t.dot(prev_t) < 0.0) {
            t = -t;
        }
        t /= (t.x() * d.ru + t.y() * d.rv).norm();
        prev_t = t;
        const Vec2 q = correct(p + step * t);
        if (!s.domain.contains(q)) {
            out.left_domain = true;
            break;
        }
        if (std::abs(fn(q) - out.level) > tol)
            throw MillError(ErrorKind::Numeric, "isophote corrector did not converge");
        p = q;
        record(p);
        if (i >= 3 && (out.points.back() - out.points.front()).norm() < 0.75 * step) {
            out.closed = true;
            break;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// contact boundary

namespace detail {

// Point of the surface curve cut by a plane, kept in the plane by Newton
// steps in the parameter domain.
inline Vec2 correct_to_plane(const AnalyticSurface& s, Vec2 p, const Vec3& origin, const Vec3& pn)
{
    const double scale = 1e-14 * (1.0 + origin.norm());
    for (int it = 0; it < 30; ++it) {
        const double h = pn.dot(s.point(p) - origin);
        if (std::abs(h) <= scale)
            break;
        const auto d = s.partials(p);
        const Vec2 g(pn.dot(d.ru), pn.dot(d.rv));
        if (g.squaredNorm() <= 1e-300)
            break;
        p -= h * g / g.squaredNorm();
    }
    return p;
}

// Parameter-space tangent of the section curve with unit 3D speed.
inline Vec2 section_tangent(const AnalyticSurface& s, const Vec2& p, const Vec3& pn, const Vec3& forward)
{
    const auto d = s.partials(p);
    Vec2 t(-pn.dot(d.rv), pn.dot(d.ru));
    Vec3 dir = t.x() * d.ru + t.y() * d.rv;
    if (dir.dot(forward) < 0.0) {
        t = -t;
        dir = -dir;
    }
    const double len = dir.norm();
    if (!(len > 0.0))
        throw MillError(ErrorKind::Numeric, "section curve is singular");
    return t / len;
}

struct BoundaryRoot {
    Vec2 params;
    std::string error;
};

// Walks the section curve from P in direction `forward` and returns the first
// root of |C - (B + eps N(B))| - r.
inline BoundaryRoot section_root(const AnalyticSurface& s, const ContactPoint& c, const ToolSpec& tool,
                                 const Vec3& pn, Vec3 forward)
{
    const Vec3 C = c.ball_center(tool.radius);
    auto g = [&](const Vec2& p) {
        return (C - (s.point(p) + tool.tolerance * s.normal(p))).norm() - tool.radius;
    };
    const int samples = 64;
    const double reach = 2.0 * tool.radius + tool.tolerance;
    const double ds = reach / samples;
    Vec2 p = *c.params;
    double gp = g(p);
    for (int i = 1; i <= samples; ++i) {
        const Vec2 t = section_tangent(s, p, pn, forward);
        auto at = [&](double sigma) { return correct_to_plane(s, p + sigma * t, c.position, pn); };
        const Vec2 q = at(ds);
        if (!s.domain.contains(q))
            return {Vec2::Zero(), "surface curve leaves the parameter domain before the contact boundary"};
        const double gq = g(q);
        if (gp < 0.0 && gq >= 0.0) {
            // Illinois regula falsi with bisection fallback on [0, ds].
            double a = 0.0, b = ds, fa = gp, fb = gq;
            int side = 0;
            double x = b;
            for (int it = 0; it < 100 && b - a > 1e-10; ++it) {
                x = (a * fb - b * fa) / (fb - fa);
                if (!(x > a && x < b))
                    x = 0.5 * (a + b);
                const double fx = g(at(x));
                if (fx == 0.0) {
                    a = b = x;
                    break;
                }
                if ((fx < 0.0) == (fa < 0.0)) {
                    a = x;
                    fa = fx;
                    if (side == -1)
                        fb *= 0.5;
                    side = -1;
                } else {
                    b = x;
                    fb = fx;
                    if (side == 1)
                        fa *= 0.5;
                    side = 1;
                }
            }
            const double root = std::abs(fa) < std::abs(fb) ? a : b;
            return {s.domain.wrap(at(root)), ""};
        }
        forward = s.point(q) - s.point(p);
        p = q;
        gp = gq;
    }
    return {Vec2::Zero(), "no sign change within search interval (tool larger than the local feature?)"};
}

} // namespace detail

/// Processed-patch boundary on an analytic surface: in each of the n normal
/// planes the contact-boundary equation r = |C - (B + eps N(B))| is solved on
/// both sides of P along the surface curve.
inline PatchBoundary contact_boundary_analytic(const AnalyticSurface& s, const ContactPoint& contact,
                                               const ToolSpec& tool, int n, const Vec3& seed = Vec3::UnitX())
{
    tool.validate();
    if (n < 4)
        throw MillError(ErrorKind::Usage, "processed patch needs at least 4 section planes");
    if (!contact.params)
        throw MillError(ErrorKind::Usage, "analytic contact point needs surface parameters");
    PatchBoundary patch;
    patch.contact = contact;
    patch.planes = n;
    patch.projection_rule = "analytic surface point solving the contact-boundary equation";
    const auto frames = make_section_frames(contact.position, contact.normal, seed, n);
    patch.reference_axis = frames[0].u_axis;
    patch.samples.resize(2 * n);
    patch.frames.resize(n);
    int ok = 0;
    std::string errors;
    for (int i = 0; i < n; ++i) {
        auto& fr = patch.frames[i];
        fr.frame = frames[i];
        const Vec3 pn = frames[i].plane_normal;
        const std::pair<int, double> sides[2] = {{i, 1.0}, {i + n, -1.0}};
        bool frame_ok = true;
        for (const auto& [k, sign] : sides) {
            const auto root = detail::section_root(s, contact, tool, pn, sign * frames[i].u_axis);
            auto& smp = patch.samples[k];
            smp.theta = kPi * k / n;
            smp.frame = i;
            if (!root.error.empty()) {
                frame_ok = false;
                fr.error = root.error;
                continue;
            }
            smp.params = root.params;
            smp.position = s.point(root.params);
            smp.normal = s.normal(root.params);
            const Vec3 rel = smp.position - contact.position;
            smp.contact_point_2d = Vec2(rel.dot(frames[i].u_axis), rel.dot(frames[i].v_axis));
            smp.valid = true;
        }
        if (frame_ok) {
            ++ok;
        } else {
            fr.flags.insert(kFlagFrameFailed);
            patch.flags.insert(kFlagFrameFailed);
            errors += " [frame " + std::to_string(i) + "] " + fr.error;
        }
    }
    if (4 * ok < 3 * n)
        throw MillError(ErrorKind::Geometry, "contact boundary failed in too many frames:" + errors);
    return patch;
}

// ---------------------------------------------------------------------------
// tangent decomposition and marching projection

struct TangentCoefficients {
    double a = 0.0;
    double b = 0.0;
    double dt = 0.0;
    int K = 2000;
    double residual = 0.0; ///< out-of-plane part of the decomposed vector
};

/// s = a r_u + b r_v solved through the normal equations; default march
/// step dt = domain diagonal / 1000.
inline TangentCoefficients tangent_decomposition(const AnalyticSurface& s, const Vec2& p, const Vec3& v)
{
    const auto d = s.partials(p);
    const double E = d.ru.dot(d.ru), F = d.ru.dot(d.rv), G = d.rv.dot(d.rv);
    const double det = E * G - F * F;
    if (!(det > 1e-14 * (E + G) * (E + G)))
        throw MillError(ErrorKind::Numeric, "irregular parameterization point");
    const double pu = v.dot(d.ru), pv = v.dot(d.rv);
    TangentCoefficients out;
    out.a = (G * pu - F * pv) / det;
    out.b = (E * pv - F * pu) / det;
    out.residual = (v - out.a * d.ru - out.b * d.rv).norm();
    out.dt = s.domain.diagonal() / 1000.0;
    if (out.a == 0.0 && out.b == 0.0)
        throw MillError(ErrorKind::Usage, "tangent direction decomposes to zero");
    return out;
}

struct SurfacePoint {
    Vec2 params = Vec2::Zero();
    Vec3 position = Vec3::Zero();
    double distance = 0.0;
    int k = 0; ///< march index of the best sample
};

/// Samples r along the parameter ray (u_P, v_P) + k dt (a, b)/|(a, b)|,
/// k = 0..K, and refines the closest sample by golden section.
inline SurfacePoint march_project(const AnalyticSurface& s, const Vec2& p, const TangentCoefficients& c, const Vec3& B)
{
    if (!(c.dt > 0.0) || c.K < 2)
        throw MillError(ErrorKind::Usage, "march needs dt > 0 and K >= 2");
    const Vec2 dir = Vec2(c.a, c.b).normalized();
    auto at = [&](double t) { return p + t * dir; };
    auto dist = [&](double t) { return (s.point(at(t)) - B).norm(); };
    int best = 0, last = 0;
    double best_d = dist(0.0);
    for (int k = 1; k <= c.K; ++k) {
        if (!s.domain.contains(at(k * c.dt)))
            break;
        last = k;
        const double d = dist(k * c.dt);
        if (d < best_d) {
            best_d = d;
            best = k;
        }
    }
    if (best == c.K)
        throw MillError(ErrorKind::Geometry, "projection minimum at the end of the march; increase K or dt");
    if (best == last && last < c.K)
        throw MillError(ErrorKind::Geometry, "projection ray leaves the parameter domain");
    double lo = std::max(0, best - 1) * c.dt, hi = (best + 1) * c.dt;
    const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
    double x1 = hi - phi * (hi - lo), x2 = lo + phi * (hi - lo);
    double f1 = dist(x1), f2 = dist(x2);
    while (hi - lo > 1e-10) {
        if (f1 < f2) {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - phi * (hi - lo);
            f1 = dist(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + phi * (hi - lo);
            f2 = dist(x2);
        }
    }
    double t = 0.5 * (lo + hi);
    if (dist(t) > best_d)
        t = best * c.dt;
    // Newton polish on d/dt |r - B|^2 / 2 below the golden-section resolution.
    for (int it = 0; it < 3; ++it) {
        const Vec2 q = at(t);
        const auto d1 = s.partials(q);
        const auto d2 = s.second_partials(q);
        const Vec3 rt = dir.x() * d1.ru + dir.y() * d1.rv;
        const Vec3 rtt = dir.x() * dir.x() * d2.ruu + 2.0 * dir.x() * dir.y() * d2.ruv + dir.y() * dir.y() * d2.rvv;
        const Vec3 r = s.point(q) - B;
        const double h = rt.dot(rt) + r.dot(rtt);
        if (!(h > 0.0))
            break;
        const double tn = std::clamp(t - r.dot(rt) / h, std::max(0, best - 1) * c.dt, (best + 1) * c.dt);
        if (!(dist(tn) <= dist(t)))
            break;
        t = tn;
    }
    SurfacePoint out;
    out.params = s.domain.wrap(at(t));
    out.position = s.point(out.params);
    out.distance = (out.position - B).norm();
    out.k = best;
    return out;
}

/// Damped Newton descent on |r(u,v) - X| from a starting parameter.
inline SurfacePoint refine_nearest(const AnalyticSurface& s, const Vec3& X, Vec2 p)
{
    const auto& D = s.domain;
    for (int it = 0; it < 60; ++it) {
        const Vec3 r = s.point(p) - X;
        const auto d = s.partials(p);
        const auto d2 = s.second_partials(p);
        const Vec2 g(r.dot(d.ru), r.dot(d.rv));
        Eigen::Matrix2d H;
        H << d.ru.dot(d.ru) + r.dot(d2.ruu), d.ru.dot(d.rv) + r.dot(d2.ruv), d.ru.dot(d.rv) + r.dot(d2.ruv),
            d.rv.dot(d.rv) + r.dot(d2.rvv);
        Vec2 step = -H.ldlt().solve(g);
        if (!step.allFinite() || H.determinant() <= 0.0)
            step = -g / std::max(d.ru.squaredNorm() + d.rv.squaredNorm(), 1e-300);
        double lambda = 1.0;
        const double f0 = r.norm();
        Vec2 q = D.clamp(p + step);
        while ((s.point(q) - X).norm() > f0 && lambda > 1e-6) {
            lambda *= 0.5;
            q = D.clamp(p + lambda * step);
        }
        if ((s.point(q) - X).norm() > f0)
            break;
        const bool done = (q - p).norm() <= 1e-15 * (1.0 + D.diagonal());
        p = q;
        if (done)
            break;
    }
    SurfacePoint out;
    out.params = D.wrap(p);
    out.position = s.point(out.params);
    out.distance = (out.position - X).norm();
    return out;
}

/// Brute-force nearest surface point: grid scan over the parameter rectangle
/// followed by Newton refinement of the best candidates.
inline SurfacePoint nearest_point_oracle(const AnalyticSurface& s, const Vec3& X, int grid = 64)
{
    grid = std::max(grid, 64);
    const auto& D = s.domain;
    struct Cand {
        double d;
        Vec2 p;
    };
    std::vector<Cand> cands;
    cands.reserve((grid + 1) * (grid + 1));
    for (int i = 0; i <= grid; ++i)
        for (int j = 0; j <= grid; ++j) {
            const Vec2 p(D.u0 + (D.u1 - D.u0) * i / grid, D.v0 + (D.v1 - D.v0) * j / grid);
            cands.push_back({(s.point(p) - X).norm(), p});
        }
    const std::size_t keep = std::min<std::size_t>(6, cands.size());
    std::partial_sort(cands.begin(), cands.begin() + keep, cands.end(),
                      [](const Cand& a, const Cand& b) { return a.d < b.d; });
    SurfacePoint best;
    best.distance = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < keep; ++c) {
        const SurfacePoint p = refine_nearest(s, X, cands[c].p);
        if (p.distance < best.distance)
            best = p;
    }
    return best;
}

} // namespace millpath
