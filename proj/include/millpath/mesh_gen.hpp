#pragma once

#include "millpath/mesh.hpp"

#include <functional>
#include <map>

namespace millpath {

/// Triangulates a parameter grid. Normals follow dr/du x dr/dv unless `flip`.
/// Seams of closed surfaces are welded.
inline TriMesh tessellate(const std::function<Vec3(double, double)>& r, double u0, double u1, int nu, double v0,
                          double v1, int nv, bool flip = false)
{
    if (nu < 1 || nv < 1)
        throw MillError(ErrorKind::Usage, "tessellation needs at least one cell per direction");
    std::vector<Vec3> grid((nu + 1) * (nv + 1));
    for (int i = 0; i <= nu; ++i)
        for (int j = 0; j <= nv; ++j)
            grid[i * (nv + 1) + j] = r(u0 + (u1 - u0) * i / nu, v0 + (v1 - v0) * j / nv);
    auto at = [&](int i, int j) { return grid[i * (nv + 1) + j]; };
    std::vector<std::array<Vec3, 3>> soup;
    soup.reserve(2 * nu * nv);
    for (int i = 0; i < nu; ++i)
        for (int j = 0; j < nv; ++j) {
            std::array<Vec3, 3> a{at(i, j), at(i + 1, j), at(i + 1, j + 1)};
            std::array<Vec3, 3> b{at(i, j), at(i + 1, j + 1), at(i, j + 1)};
            if (flip) {
                std::swap(a[1], a[2]);
                std::swap(b[1], b[2]);
            }
            soup.push_back(a);
            soup.push_back(b);
        }
    return weld_and_build(soup);
}

/// Square patch [-half, half]^2 in the plane z = 0.
inline TriMesh make_flat_mesh(double half, int cells)
{
    return tessellate([](double u, double v) { return Vec3(u, v, 0.0); }, -half, half, cells, -half, half, cells);
}

/// Cylinder with axis along x: points (x, R sin phi, R cos phi), phi measured from +z.
///
/// `concave` flips the orientation so the normals point at the axis (tool inside).
inline TriMesh make_cylinder_mesh(double radius, double length, int n_len, double phi0, double phi1, int n_circ,
                                  bool concave = false)
{
    auto r = [radius](double x, double phi) { return Vec3(x, radius * std::sin(phi), radius * std::cos(phi)); };
    return tessellate(r, -0.5 * length, 0.5 * length, n_len, phi0, phi1, n_circ, concave);
}

inline TriMesh make_octahedron(double radius = 1.0)
{
    const Vec3 px(radius, 0, 0), nx(-radius, 0, 0), py(0, radius, 0), ny(0, -radius, 0), pz(0, 0, radius),
        nz(0, 0, -radius);
    std::vector<Vec3> v{px, nx, py, ny, pz, nz};
    std::vector<Triangle> t{{0, 2, 4}, {2, 1, 4}, {1, 3, 4}, {3, 0, 4}, {2, 0, 5}, {1, 2, 5}, {3, 1, 5}, {0, 3, 5}};
    return TriMesh::build(v, t);
}

inline TriMesh make_tetrahedron(double scale = 1.0)
{
    std::vector<Vec3> v{Vec3(1, 1, 1) * scale, Vec3(1, -1, -1) * scale, Vec3(-1, 1, -1) * scale,
                        Vec3(-1, -1, 1) * scale};
    std::vector<Triangle> t{{0, 1, 2}, {0, 3, 1}, {0, 2, 3}, {1, 3, 2}};
    return TriMesh::build(v, t);
}

/// Geodesic sphere: icosahedron subdivided `levels` times (20 * 4^levels facets).
inline TriMesh make_geodesic_sphere(double radius, int levels, const Vec3& center = Vec3::Zero())
{
    const double g = (1.0 + std::sqrt(5.0)) / 2.0;
    std::vector<Vec3> v{{-1, g, 0}, {1, g, 0}, {-1, -g, 0}, {1, -g, 0}, {0, -1, g}, {0, 1, g},
                        {0, -1, -g}, {0, 1, -g}, {g, 0, -1}, {g, 0, 1}, {-g, 0, -1}, {-g, 0, 1}};
    for (auto& p : v)
        p.normalize();
    std::vector<Triangle> t{{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11}, {1, 5, 9}, {5, 11, 4},
                            {11, 10, 2}, {10, 7, 6}, {7, 1, 8},   {3, 9, 4}, {3, 4, 2},   {3, 2, 6}, {3, 6, 8},
                            {3, 8, 9},  {4, 9, 5},  {2, 4, 11},  {6, 2, 10}, {8, 6, 7},   {9, 8, 1}};
    for (int l = 0; l < levels; ++l) {
        std::map<std::pair<int, int>, int> mid;
        auto midpoint = [&](int a, int b) {
            const auto key = std::minmax(a, b);
            auto it = mid.find(key);
            if (it != mid.end())
                return it->second;
            v.push_back((v[a] + v[b]).normalized());
            const int idx = static_cast<int>(v.size()) - 1;
            mid.emplace(key, idx);
            return idx;
        };
        std::vector<Triangle> next;
        next.reserve(4 * t.size());
        for (const auto& tri : t) {
            const int ab = midpoint(tri[0], tri[1]), bc = midpoint(tri[1], tri[2]), ca = midpoint(tri[2], tri[0]);
            next.push_back({tri[0], ab, ca});
            next.push_back({tri[1], bc, ab});
            next.push_back({tri[2], ca, bc});
            next.push_back({ab, bc, ca});
        }
        t = std::move(next);
    }
    for (auto& p : v)
        p = center + radius * p;
    return TriMesh::build(v, t);
}

/// Largest deviation of a facet plane from the sphere it is inscribed in.
inline double sphere_mesh_sagitta(const TriMesh& mesh, const Vec3& center, double radius)
{
    double worst = 0.0;
    for (int t = 0; t < mesh.facet_count(); ++t) {
        const double plane_dist = std::abs((mesh.corner(t, 0) - center).dot(mesh.normals[t]));
        worst = std::max(worst, radius - plane_dist);
    }
    return worst;
}

} // namespace millpath
