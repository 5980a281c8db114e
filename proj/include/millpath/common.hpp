#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <numbers>
#include <stdexcept>
#include <string>

namespace millpath {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

enum class ErrorKind {
    Parse,
    NonManifold,
    Orientation,
    Degenerate,
    Geometry,
    Numeric,
    Usage,
    Internal,
};

/// Error raised by every library operation. `kind` drives the CLI exit code.
class MillError : public std::runtime_error {
public:
    MillError(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

inline double cross2(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

inline Vec2 left_normal(const Vec2& d) { return {-d.y(), d.x()}; }

/// Maps any angle to [0, 2pi).
inline double wrap_two_pi(double a)
{
    a = std::fmod(a, kTwoPi);
    if (a < 0.0)
        a += kTwoPi;
    if (a >= kTwoPi)
        a = 0.0;
    return a;
}

/// Signed angular difference a - b mapped to (-pi, pi].
inline double angle_diff(double a, double b)
{
    double d = wrap_two_pi(a - b);
    if (d > kPi)
        d -= kTwoPi;
    return d;
}

inline double clamp_unit(double x) { return std::clamp(x, -1.0, 1.0); }

/// Any unit vector perpendicular to n.
inline Vec3 any_perpendicular(const Vec3& n)
{
    const Vec3 ax = std::abs(n.x()) <= std::abs(n.y()) && std::abs(n.x()) <= std::abs(n.z()) ? Vec3::UnitX()
                  : std::abs(n.y()) <= std::abs(n.z())                                       ? Vec3::UnitY()
                                                                                               : Vec3::UnitZ();
    return (ax - ax.dot(n) * n).normalized();
}

/// Rounds to 9 significant digits; all emitted numbers go through this.
inline double round9(double x)
{
    if (!std::isfinite(x))
        return x;
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.9g", x);
    return std::strtod(buf, nullptr);
}

inline std::string fmt9(double x)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.9g", x);
    return buf;
}

} // namespace millpath
