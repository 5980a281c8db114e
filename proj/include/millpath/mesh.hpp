#pragma once

#include "millpath/common.hpp"

#include <array>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <functional>
#include <limits>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

namespace millpath {

using Triangle = std::array<int, 3>;

/// Indexed triangle mesh with half-edge adjacency.
///
/// Half-edge `3*t + k` runs from corner k to corner (k+1)%3 of triangle t.
/// `opposite[h]` is the reversed half-edge in the neighbouring triangle, or -1
/// on the boundary. Immutable after `TriMesh::build`.
struct TriMesh {
    std::vector<Vec3> vertices;
    std::vector<Triangle> triangles;
    std::vector<Vec3> normals;
    std::vector<int> opposite;
    double bbox_diagonal = 0.0;
    double average_edge = 0.0;

    int facet_count() const { return static_cast<int>(triangles.size()); }
    int halfedge_count() const { return 3 * facet_count(); }

    static int facet_of(int h) { return h / 3; }
    static int next(int h) { return 3 * (h / 3) + (h % 3 + 1) % 3; }

    int from_vertex(int h) const { return triangles[h / 3][h % 3]; }
    int to_vertex(int h) const { return triangles[h / 3][(h % 3 + 1) % 3]; }
    const Vec3& corner(int t, int k) const { return vertices[triangles[t][k]]; }

    int interior_edge_count() const
    {
        int c = 0;
        for (int o : opposite)
            c += o >= 0 ? 1 : 0;
        return c / 2;
    }
    int boundary_edge_count() const
    {
        int c = 0;
        for (int o : opposite)
            c += o < 0 ? 1 : 0;
        return c;
    }

    static TriMesh build(std::vector<Vec3> vertices, std::vector<Triangle> triangles);
};

inline double bbox_diagonal_of(const std::vector<Vec3>& pts)
{
    if (pts.empty())
        return 0.0;
    Vec3 lo = pts.front(), hi = pts.front();
    for (const auto& p : pts) {
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
    }
    return (hi - lo).norm();
}

/// Unit normal of facet j, following the triangle winding.
inline Vec3 facet_normal(const TriMesh& mesh, int j)
{
    if (j < 0 || j >= mesh.facet_count())
        throw MillError(ErrorKind::Usage, "facet index " + std::to_string(j) + " out of range");
    const Vec3& a = mesh.corner(j, 0);
    const Vec3& b = mesh.corner(j, 1);
    const Vec3& c = mesh.corner(j, 2);
    const Vec3 n = (b - a).cross(c - a);
    const double scale = std::max(mesh.bbox_diagonal, bbox_diagonal_of({a, b, c}));
    if (0.5 * n.norm() <= 1e-12 * scale * scale)
        throw MillError(ErrorKind::Degenerate, "degenerate triangle at facet " + std::to_string(j));
    return n.normalized();
}

inline TriMesh TriMesh::build(std::vector<Vec3> verts, std::vector<Triangle> tris)
{
    TriMesh m;
    m.vertices = std::move(verts);
    m.triangles = std::move(tris);
    m.bbox_diagonal = bbox_diagonal_of(m.vertices);

    const int nv = static_cast<int>(m.vertices.size());
    for (int t = 0; t < m.facet_count(); ++t)
        for (int k = 0; k < 3; ++k)
            if (m.triangles[t][k] < 0 || m.triangles[t][k] >= nv)
                throw MillError(ErrorKind::Parse, "facet " + std::to_string(t) + " references vertex out of range");

    // Undirected edges first so non-manifold input gets the edge report.
    std::map<std::pair<int, int>, std::vector<int>> undirected;
    double edge_sum = 0.0;
    for (int t = 0; t < m.facet_count(); ++t)
        for (int k = 0; k < 3; ++k) {
            const int h = 3 * t + k;
            const int a = m.from_vertex(h), b = m.to_vertex(h);
            undirected[{std::min(a, b), std::max(a, b)}].push_back(t);
            edge_sum += (m.vertices[a] - m.vertices[b]).norm();
        }
    for (const auto& [edge, faces] : undirected) {
        if (faces.size() > 2) {
            std::ostringstream os;
            os << "non-manifold edge (" << edge.first << "," << edge.second << ") shared by facets";
            for (int f : faces)
                os << ' ' << f;
            throw MillError(ErrorKind::NonManifold, os.str());
        }
    }
    std::map<std::pair<int, int>, int> directed;
    for (int h = 0; h < m.halfedge_count(); ++h) {
        const int a = m.from_vertex(h), b = m.to_vertex(h);
        auto [it, inserted] = directed.emplace(std::pair{a, b}, h);
        if (!inserted)
            throw MillError(ErrorKind::Orientation, "inconsistent orientation: directed edge (" + std::to_string(a) +
                                                        "," + std::to_string(b) + ") used by facets " +
                                                        std::to_string(it->second / 3) + " and " +
                                                        std::to_string(h / 3));
    }
    m.average_edge = m.facet_count() > 0 ? edge_sum / (3.0 * m.facet_count()) : 0.0;

    m.opposite.assign(m.halfedge_count(), -1);
    for (int h = 0; h < m.halfedge_count(); ++h) {
        auto it = directed.find({m.to_vertex(h), m.from_vertex(h)});
        if (it != directed.end())
            m.opposite[h] = it->second;
    }

    m.normals.resize(m.triangles.size());
    for (int t = 0; t < m.facet_count(); ++t)
        m.normals[t] = facet_normal(m, t);
    return m;
}

/// Merges coincident vertices (within tol) of a triangle soup, then builds.
inline TriMesh weld_and_build(const std::vector<std::array<Vec3, 3>>& soup, double relative_tol = 1e-7)
{
    std::vector<Vec3> all;
    all.reserve(3 * soup.size());
    for (const auto& t : soup)
        for (const auto& p : t)
            all.push_back(p);
    const double tol = std::max(relative_tol * bbox_diagonal_of(all), 1e-300);

    struct KeyHash {
        std::size_t operator()(const std::array<long long, 3>& k) const
        {
            return std::hash<long long>()(k[0] * 73856093LL ^ k[1] * 19349663LL ^ k[2] * 83492791LL);
        }
    };
    std::unordered_map<std::array<long long, 3>, std::vector<int>, KeyHash> grid;
    std::vector<Vec3> verts;
    auto key_of = [&](const Vec3& p) {
        return std::array<long long, 3>{static_cast<long long>(std::floor(p.x() / tol)),
                                        static_cast<long long>(std::floor(p.y() / tol)),
                                        static_cast<long long>(std::floor(p.z() / tol))};
    };
    auto index_of = [&](const Vec3& p) {
        const auto k = key_of(p);
        for (long long dx = -1; dx <= 1; ++dx)
            for (long long dy = -1; dy <= 1; ++dy)
                for (long long dz = -1; dz <= 1; ++dz) {
                    auto it = grid.find({k[0] + dx, k[1] + dy, k[2] + dz});
                    if (it == grid.end())
                        continue;
                    for (int idx : it->second)
                        if ((verts[idx] - p).norm() <= tol)
                            return idx;
                }
        const int idx = static_cast<int>(verts.size());
        verts.push_back(p);
        grid[k].push_back(idx);
        return idx;
    };

    std::vector<Triangle> tris;
    tris.reserve(soup.size());
    for (std::size_t t = 0; t < soup.size(); ++t) {
        Triangle tri{index_of(soup[t][0]), index_of(soup[t][1]), index_of(soup[t][2])};
        if (tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2])
            throw MillError(ErrorKind::Degenerate, "degenerate triangle at facet " + std::to_string(t) +
                                                       " (corners merged by welding)");
        tris.push_back(tri);
    }
    return TriMesh::build(std::move(verts), std::move(tris));
}

enum class MeshFormat { StlAscii, StlBinary, Obj };

namespace detail {

inline std::vector<std::array<Vec3, 3>> read_stl_ascii(std::istream& in, const std::string& name)
{
    std::vector<std::array<Vec3, 3>> soup;
    std::string tok;
    std::array<Vec3, 3> cur;
    int nvert = 0;
    bool in_loop = false;
    while (in >> tok) {
        if (tok == "outer") {
            in >> tok;
            in_loop = true;
            nvert = 0;
        } else if (tok == "vertex") {
            double x, y, z;
            if (!(in >> x >> y >> z))
                throw MillError(ErrorKind::Parse, name + ": malformed vertex record");
            if (!in_loop || nvert >= 3)
                throw MillError(ErrorKind::Parse, name + ": facet with more than three vertices");
            cur[nvert++] = {x, y, z};
        } else if (tok == "endloop") {
            if (nvert != 3)
                throw MillError(ErrorKind::Parse, name + ": facet with " + std::to_string(nvert) + " vertices");
            soup.push_back(cur);
            in_loop = false;
        }
    }
    if (in_loop)
        throw MillError(ErrorKind::Parse, name + ": unterminated facet");
    if (soup.empty())
        throw MillError(ErrorKind::Parse, name + ": no facets");
    return soup;
}

inline std::vector<std::array<Vec3, 3>> read_stl_binary(std::istream& in, const std::string& name)
{
    std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (bytes.size() < 84)
        throw MillError(ErrorKind::Parse, name + ": truncated binary STL header");
    std::uint32_t count = 0;
    std::memcpy(&count, bytes.data() + 80, 4);
    if (bytes.size() != 84 + 50ull * count)
        throw MillError(ErrorKind::Parse, name + ": binary STL size does not match facet count " +
                                              std::to_string(count));
    std::vector<std::array<Vec3, 3>> soup(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        const char* rec = bytes.data() + 84 + 50ull * i;
        float f[12];
        std::memcpy(f, rec, sizeof f);
        for (int k = 0; k < 3; ++k)
            soup[i][k] = {f[3 + 3 * k], f[4 + 3 * k], f[5 + 3 * k]};
    }
    if (soup.empty())
        throw MillError(ErrorKind::Parse, name + ": no facets");
    return soup;
}

inline std::vector<std::array<Vec3, 3>> read_obj(std::istream& in, const std::string& name)
{
    std::vector<Vec3> verts;
    std::vector<std::array<Vec3, 3>> soup;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::istringstream ls(line);
        std::string tag;
        if (!(ls >> tag) || tag[0] == '#')
            continue;
        if (tag == "v") {
            double x, y, z;
            if (!(ls >> x >> y >> z))
                throw MillError(ErrorKind::Parse, name + ":" + std::to_string(lineno) + ": malformed vertex");
            verts.emplace_back(x, y, z);
        } else if (tag == "f") {
            std::vector<int> idx;
            std::string item;
            while (ls >> item) {
                const int i = std::stoi(item.substr(0, item.find('/')));
                const int resolved = i > 0 ? i - 1 : static_cast<int>(verts.size()) + i;
                if (resolved < 0 || resolved >= static_cast<int>(verts.size()))
                    throw MillError(ErrorKind::Parse,
                                    name + ":" + std::to_string(lineno) + ": face index out of range");
                idx.push_back(resolved);
            }
            if (idx.size() != 3)
                throw MillError(ErrorKind::Parse, name + ":" + std::to_string(lineno) + ": only triangles supported");
            soup.push_back({verts[idx[0]], verts[idx[1]], verts[idx[2]]});
        }
    }
    if (soup.empty())
        throw MillError(ErrorKind::Parse, name + ": no faces");
    return soup;
}

} // namespace detail

inline MeshFormat format_from_path(const std::filesystem::path& path)
{
    std::string ext = path.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (ext == ".obj")
        return MeshFormat::Obj;
    if (ext != ".stl")
        throw MillError(ErrorKind::Usage, "cannot infer mesh format of " + path.string());
    std::ifstream in(path, std::ios::binary);
    char head[5] = {};
    in.read(head, 5);
    if (std::string(head, 5) != "solid")
        return MeshFormat::StlBinary;
    // Binary files may also start with "solid": trust the size check.
    in.seekg(0, std::ios::end);
    const auto size = static_cast<std::uint64_t>(in.tellg());
    if (size >= 84) {
        in.seekg(80);
        std::uint32_t count = 0;
        in.read(reinterpret_cast<char*>(&count), 4);
        if (size == 84 + 50ull * count)
            return MeshFormat::StlBinary;
    }
    return MeshFormat::StlAscii;
}

inline TriMesh load_mesh(const std::filesystem::path& path, MeshFormat format)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw MillError(ErrorKind::Usage, "cannot open mesh file " + path.string());
    const std::string name = path.string();
    switch (format) {
    case MeshFormat::StlAscii: return weld_and_build(detail::read_stl_ascii(in, name));
    case MeshFormat::StlBinary: return weld_and_build(detail::read_stl_binary(in, name));
    case MeshFormat::Obj: return weld_and_build(detail::read_obj(in, name));
    }
    throw MillError(ErrorKind::Internal, "unknown mesh format");
}

inline TriMesh load_mesh(const std::filesystem::path& path) { return load_mesh(path, format_from_path(path)); }

inline void write_obj(std::ostream& out, const TriMesh& mesh)
{
    for (const auto& v : mesh.vertices)
        out << "v " << fmt9(v.x()) << ' ' << fmt9(v.y()) << ' ' << fmt9(v.z()) << '\n';
    for (const auto& t : mesh.triangles)
        out << "f " << t[0] + 1 << ' ' << t[1] + 1 << ' ' << t[2] + 1 << '\n';
}

inline void write_stl_ascii(std::ostream& out, const TriMesh& mesh)
{
    out << "solid millpath\n";
    for (int t = 0; t < mesh.facet_count(); ++t) {
        const Vec3& n = mesh.normals[t];
        out << " facet normal " << fmt9(n.x()) << ' ' << fmt9(n.y()) << ' ' << fmt9(n.z()) << "\n  outer loop\n";
        for (int k = 0; k < 3; ++k) {
            const Vec3& p = mesh.corner(t, k);
            out << "   vertex " << fmt9(p.x()) << ' ' << fmt9(p.y()) << ' ' << fmt9(p.z()) << '\n';
        }
        out << "  endloop\n endfacet\n";
    }
    out << "endsolid millpath\n";
}

inline void write_stl_binary(std::ostream& out, const TriMesh& mesh)
{
    char header[80] = {};
    std::memcpy(header, "millpath binary stl", 19);
    out.write(header, 80);
    const auto count = static_cast<std::uint32_t>(mesh.facet_count());
    out.write(reinterpret_cast<const char*>(&count), 4);
    for (int t = 0; t < mesh.facet_count(); ++t) {
        float rec[12];
        for (int i = 0; i < 3; ++i)
            rec[i] = static_cast<float>(mesh.normals[t][i]);
        for (int k = 0; k < 3; ++k)
            for (int i = 0; i < 3; ++i)
                rec[3 + 3 * k + i] = static_cast<float>(mesh.corner(t, k)[i]);
        out.write(reinterpret_cast<const char*>(rec), sizeof rec);
        const std::uint16_t attr = 0;
        out.write(reinterpret_cast<const char*>(&attr), 2);
    }
}

/// Writes polylines as OBJ `l` records.
inline void write_obj_polylines(std::ostream& out, const std::vector<std::vector<Vec3>>& lines, bool closed = false)
{
    int base = 1;
    for (const auto& line : lines) {
        for (const auto& p : line)
            out << "v " << fmt9(p.x()) << ' ' << fmt9(p.y()) << ' ' << fmt9(p.z()) << '\n';
        if (line.size() >= 2) {
            out << 'l';
            for (std::size_t i = 0; i < line.size(); ++i)
                out << ' ' << base + static_cast<int>(i);
            if (closed)
                out << ' ' << base;
            out << '\n';
        }
        base += static_cast<int>(line.size());
    }
}

inline Vec3 incenter(const TriMesh& mesh, int t)
{
    const Vec3& a = mesh.corner(t, 0);
    const Vec3& b = mesh.corner(t, 1);
    const Vec3& c = mesh.corner(t, 2);
    const double la = (b - c).norm(), lb = (c - a).norm(), lc = (a - b).norm();
    return (la * a + lb * b + lc * c) / (la + lb + lc);
}

/// Closest point of triangle abc to p.
inline Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c)
{
    const Vec3 ab = b - a, ac = c - a, ap = p - a;
    const double d1 = ab.dot(ap), d2 = ac.dot(ap);
    if (d1 <= 0 && d2 <= 0)
        return a;
    const Vec3 bp = p - b;
    const double d3 = ab.dot(bp), d4 = ac.dot(bp);
    if (d3 >= 0 && d4 <= d3)
        return b;
    const double vc = d1 * d4 - d3 * d2;
    if (vc <= 0 && d1 >= 0 && d3 <= 0)
        return a + d1 / (d1 - d3) * ab;
    const Vec3 cp = p - c;
    const double d5 = ab.dot(cp), d6 = ac.dot(cp);
    if (d6 >= 0 && d5 <= d6)
        return c;
    const double vb = d5 * d2 - d1 * d6;
    if (vb <= 0 && d2 >= 0 && d6 <= 0)
        return a + d2 / (d2 - d6) * ac;
    const double va = d3 * d6 - d5 * d4;
    if (va <= 0 && (d4 - d3) >= 0 && (d5 - d6) >= 0)
        return b + (d4 - d3) / ((d4 - d3) + (d5 - d6)) * (c - b);
    const double denom = 1.0 / (va + vb + vc);
    return a + ab * (vb * denom) + ac * (vc * denom);
}

struct MeshPoint {
    Vec3 position;
    int facet = -1;
    double distance = 0.0;
};

/// Brute-force nearest point on the mesh. Ties go to the lowest facet index.
inline MeshPoint nearest_on_mesh(const TriMesh& mesh, const Vec3& p)
{
    MeshPoint best{p, -1, std::numeric_limits<double>::infinity()};
    for (int t = 0; t < mesh.facet_count(); ++t) {
        const Vec3 q = closest_point_on_triangle(p, mesh.corner(t, 0), mesh.corner(t, 1), mesh.corner(t, 2));
        const double d = (q - p).norm();
        if (d < best.distance)
            best = {q, t, d};
    }
    return best;
}

/// True when p lies on facet t within tol (distance to the closed triangle).
inline bool point_on_facet(const TriMesh& mesh, int t, const Vec3& p, double tol)
{
    const Vec3 q = closest_point_on_triangle(p, mesh.corner(t, 0), mesh.corner(t, 1), mesh.corner(t, 2));
    return (q - p).norm() <= tol;
}

} // namespace millpath
