#include "millpath/mesh.hpp"
#include "millpath/mesh_gen.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <map>

using namespace millpath;

namespace {

std::filesystem::path scratch(const std::string& name)
{
    const auto dir = std::filesystem::temp_directory_path() / "millpath_test_mesh";
    std::filesystem::create_directories(dir);
    return dir / name;
}

void write_file(const std::filesystem::path& p, const std::string& text)
{
    std::ofstream(p) << text;
}

} // namespace

TEST(Mesh, SingleTriangleObj)
{
    const auto p = scratch("tri.obj");
    write_file(p, "v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n");
    const TriMesh m = load_mesh(p, MeshFormat::Obj);
    ASSERT_EQ(m.facet_count(), 1);
    EXPECT_NEAR((m.normals[0] - Vec3(0, 0, 1)).norm(), 0.0, 1e-15);
    EXPECT_EQ(m.boundary_edge_count(), 3);
}

TEST(Mesh, StlAsciiWeldsDuplicatedVertices)
{
    const auto p = scratch("tri.stl");
    write_file(p, "solid t\n facet normal 0 0 1\n  outer loop\n   vertex 0 0 0\n   vertex 1 0 0\n"
                  "   vertex 0 1 0\n  endloop\n endfacet\n"
                  " facet normal 0 0 1\n  outer loop\n   vertex 1 0 0\n   vertex 1 1 0\n"
                  "   vertex 0 1 0\n  endloop\n endfacet\nendsolid t\n");
    const TriMesh m = load_mesh(p);
    EXPECT_EQ(m.facet_count(), 2);
    EXPECT_EQ(m.vertices.size(), 4u);
    EXPECT_EQ(m.interior_edge_count(), 1);
}

TEST(Mesh, OctahedronAdjacencyMatchesBruteForce)
{
    const TriMesh oct = make_octahedron();
    const auto p = scratch("oct.stl");
    {
        std::ofstream out(p, std::ios::binary);
        write_stl_binary(out, oct);
    }
    const TriMesh m = load_mesh(p, MeshFormat::StlBinary);
    ASSERT_EQ(m.facet_count(), 8);

    // Brute force: count undirected edges and how many facets use each.
    std::map<std::pair<int, int>, int> uses;
    for (const auto& t : m.triangles)
        for (int k = 0; k < 3; ++k)
            ++uses[std::minmax(t[k], t[(k + 1) % 3])];
    int shared = 0;
    for (const auto& [e, c] : uses)
        shared += c == 2 ? 1 : 0;
    EXPECT_EQ(shared, 12);
    EXPECT_EQ(m.interior_edge_count(), 12);
    for (int h = 0; h < m.halfedge_count(); ++h) {
        ASSERT_GE(m.opposite[h], 0);
        EXPECT_EQ(m.opposite[m.opposite[h]], h);
        EXPECT_EQ(m.from_vertex(m.opposite[h]), m.to_vertex(h));
        EXPECT_EQ(m.to_vertex(m.opposite[h]), m.from_vertex(h));
    }
}

TEST(Mesh, FacetNormalWinding)
{
    const TriMesh a = TriMesh::build({{0, 0, 0}, {1, 0, 0}, {0, 1, 0}}, {{0, 1, 2}});
    const TriMesh b = TriMesh::build({{0, 0, 0}, {0, 1, 0}, {1, 0, 0}}, {{0, 1, 2}});
    EXPECT_NEAR((facet_normal(a, 0) - Vec3(0, 0, 1)).norm(), 0.0, 1e-15);
    EXPECT_NEAR((facet_normal(b, 0) - Vec3(0, 0, -1)).norm(), 0.0, 1e-15);
}

TEST(Mesh, RegularTetrahedronFaceNormals)
{
    const TriMesh m = make_tetrahedron();
    for (int t = 0; t < 4; ++t) {
        // The face opposite vertex v has the outward normal -v/|v|.
        int missing = 0;
        for (int v = 0; v < 4; ++v)
            if (std::find(m.triangles[t].begin(), m.triangles[t].end(), v) == m.triangles[t].end())
                missing = v;
        const Vec3 expected = -m.vertices[missing].normalized();
        EXPECT_NEAR((facet_normal(m, t) - expected).norm(), 0.0, 1e-12);
    }
}

TEST(Mesh, DegenerateFacetIsNamed)
{
    try {
        TriMesh::build({{0, 0, 0}, {1, 0, 0}, {2, 0, 0}, {0, 1, 0}}, {{0, 1, 3}, {1, 0, 2}});
        FAIL() << "expected a degenerate-facet error";
    } catch (const MillError& e) {
        EXPECT_EQ(e.kind(), ErrorKind::Degenerate);
        EXPECT_NE(std::string(e.what()).find("facet 1"), std::string::npos);
    }
}

TEST(Mesh, NonManifoldEdgeRejected)
{
    const std::vector<Vec3> v{{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}};
    try {
        TriMesh::build(v, {{0, 1, 2}, {1, 0, 3}, {0, 4, 1}});
        FAIL() << "expected non-manifold rejection";
    } catch (const MillError& e) {
        EXPECT_EQ(e.kind(), ErrorKind::NonManifold);
        EXPECT_NE(std::string(e.what()).find("(0,1)"), std::string::npos);
    }
}

TEST(Mesh, InconsistentOrientationRejected)
{
    const std::vector<Vec3> v{{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {1, 1, 0}};
    EXPECT_THROW(
        {
            try {
                TriMesh::build(v, {{0, 1, 2}, {0, 1, 3}});
            } catch (const MillError& e) {
                EXPECT_EQ(e.kind(), ErrorKind::Orientation);
                throw;
            }
        },
        MillError);
}

TEST(Mesh, ParseFailures)
{
    const auto bad_obj = scratch("quad.obj");
    write_file(bad_obj, "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n");
    EXPECT_THROW(load_mesh(bad_obj), MillError);
    const auto bad_stl = scratch("bad.stl");
    write_file(bad_stl, "solid x\n facet normal 0 0 1\n outer loop\n vertex 0 0 0\n vertex 1 0 0\n endloop\n");
    EXPECT_THROW(load_mesh(bad_stl, MeshFormat::StlAscii), MillError);
    EXPECT_THROW(load_mesh(scratch("missing.obj")), MillError);
}

TEST(Mesh, InvariantsOnGeneratedMeshes)
{
    for (const TriMesh& m : {make_geodesic_sphere(3.0, 2), make_flat_mesh(2.0, 6),
                             make_cylinder_mesh(5.0, 10.0, 8, 0.0, kTwoPi, 24)}) {
        for (const auto& n : m.normals)
            EXPECT_NEAR(n.norm(), 1.0, 1e-12);
        for (int h = 0; h < m.halfedge_count(); ++h)
            if (m.opposite[h] >= 0)
                EXPECT_EQ(m.opposite[m.opposite[h]], h);
    }
    // Seam welding closes the full cylinder around its circumference.
    const TriMesh cyl = make_cylinder_mesh(5.0, 10.0, 8, 0.0, kTwoPi, 24);
    EXPECT_EQ(cyl.boundary_edge_count(), 2 * 24);
}

TEST(Mesh, ObjRoundTripPreservesGeometry)
{
    const TriMesh m = make_geodesic_sphere(2.0, 1);
    const auto p = scratch("sphere.obj");
    {
        std::ofstream out(p);
        write_obj(out, m);
    }
    const TriMesh back = load_mesh(p);
    ASSERT_EQ(back.facet_count(), m.facet_count());
    for (int t = 0; t < m.facet_count(); ++t)
        EXPECT_NEAR((back.normals[t] - m.normals[t]).norm(), 0.0, 1e-7);
}
