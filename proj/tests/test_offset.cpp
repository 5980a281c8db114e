#include "millpath/mesh_gen.hpp"
#include "millpath/offset.hpp"
#include "millpath/tool_contact.hpp"

#include <gtest/gtest.h>

#include <random>
#include <sstream>

using namespace millpath;

namespace {

SectionFrame xz_frame()
{
    SectionFrame f;
    f.origin = Vec3::Zero();
    f.u_axis = Vec3::UnitX();
    f.v_axis = Vec3::UnitZ();
    f.plane_normal = f.u_axis.cross(f.v_axis);
    return f;
}

// Single triangle through the origin with the given unit normal.
TriMesh triangle_with_normal(const Vec3& n)
{
    const Vec3 a = any_perpendicular(n);
    const Vec3 b = n.cross(a);
    std::vector<Vec3> v{-a - b, a - b, 2.0 * b};
    return TriMesh::build(v, {{0, 1, 2}});
}

SectionPolyline straight_section()
{
    SectionPolyline s;
    s.points = {Vec2(-1, 0), Vec2(1, 0)};
    s.facets = {0};
    return s;
}

// Dense-sampling distance check of the offset against its source.
void expect_distance_band(const std::vector<Vec2>& offset, const std::vector<Vec2>& source, double eps)
{
    const double lo = eps - 1e-6 * eps;
    const double hi = eps + eps * (1.0 - std::cos(2.5 * kPi / 180.0));
    for (std::size_t k = 0; k + 1 < offset.size(); ++k)
        for (int s = 0; s <= 20; ++s) {
            const Vec2 p = offset[k] + (s / 20.0) * (offset[k + 1] - offset[k]);
            const double d = distance_to_polyline(p, source);
            ASSERT_GE(d, lo) << "segment " << k << " sample " << s;
            ASSERT_LE(d, hi) << "segment " << k << " sample " << s;
        }
}

std::vector<Vec2> random_curve(std::mt19937& rng, int count)
{
    std::uniform_real_distribution<double> amp(-1.0, 1.0), phase(0.0, kTwoPi);
    double a[4], ph[4];
    for (int m = 0; m < 4; ++m) {
        a[m] = amp(rng) / (m + 1);
        ph[m] = phase(rng);
    }
    std::vector<Vec2> pts;
    for (int i = 0; i < count; ++i) {
        const double x = -5.0 + 10.0 * i / (count - 1);
        double y = 0.0;
        for (int m = 0; m < 4; ++m)
            y += a[m] * std::sin((m + 1) * 0.9 * x + ph[m]);
        pts.emplace_back(x, y);
    }
    return pts;
}

} // namespace

TEST(OffsetSegments, InPlaneNormalGivesFullEpsilon)
{
    const auto mesh = triangle_with_normal(Vec3(0, 0, 1));
    const auto raw = offset_segments(straight_section(), mesh, xz_frame(), 0.3);
    ASSERT_EQ(raw.segments.size(), 1u);
    EXPECT_NEAR(raw.segments[0].displacement.norm(), 0.3, 1e-15);
}

TEST(OffsetSegments, SixtyDegreeTiltHalvesDisplacement)
{
    const double a = kPi / 3.0;
    const Vec3 n(0.0, -std::sin(a), std::cos(a));
    const auto mesh = triangle_with_normal(n);
    const auto raw = offset_segments(straight_section(), mesh, xz_frame(), 1.0);
    ASSERT_EQ(raw.segments.size(), 1u);
    EXPECT_NEAR(raw.segments[0].displacement.norm(), 0.5, 1e-12);
    EXPECT_NEAR(raw.segments[0].displacement.x(), 0.0, 1e-12);
}

TEST(OffsetSegments, NormalAlongPlaneNormalIsSkipped)
{
    const auto mesh = triangle_with_normal(Vec3(0, -1, 0));
    const auto raw = offset_segments(straight_section(), mesh, xz_frame(), 1.0);
    EXPECT_TRUE(raw.segments.empty());
    ASSERT_EQ(raw.skipped_segments.size(), 1u);
    EXPECT_FALSE(raw.warnings.empty());
}

TEST(OffsetSegments, FlatMeshGivesLineAtEpsilon)
{
    const auto mesh = make_flat_mesh(10.0, 20);
    const int facet = 2 * (10 * 20 + 10) + 1;
    const Vec3 P = incenter(mesh, facet);
    for (const auto& frame : make_section_frames(P, Vec3::UnitZ(), Vec3::UnitX(), 6)) {
        const auto sec = plane_section(mesh, frame, 6.0, facet);
        const auto raw = offset_segments(sec, mesh, frame, 0.5);
        ASSERT_EQ(raw.segments.size(), static_cast<std::size_t>(sec.segment_count()));
        for (const auto& s : raw.segments) {
            EXPECT_NEAR(s.start.y(), 0.5, 1e-12);
            EXPECT_NEAR(s.end.y(), 0.5, 1e-12);
        }
    }
}

TEST(RepairOffset, ConcaveVTrimsThroughApexOffset)
{
    const double eps = std::sqrt(2.0) / 2.0;
    const auto raw = offset_polyline_2d({Vec2(-1, 1), Vec2(0, 0), Vec2(1, 1)}, +1, eps);
    const auto rep = repair_offset(raw, eps);
    bool through = false;
    for (const auto& p : rep.points)
        through = through || (p - Vec2(0, 1)).norm() < 1e-12;
    EXPECT_TRUE(through);
    ASSERT_EQ(rep.log.size(), 1u);
    EXPECT_EQ(rep.log[0].kind, RepairEvent::Kind::LocalTrim);
    EXPECT_NEAR((rep.log[0].location - Vec2(0, 1)).norm(), 0.0, 1e-12);
    EXPECT_FALSE(has_self_intersection(rep.points));
}

TEST(RepairOffset, ConvexTentFilledWithArc)
{
    const auto raw = offset_polyline_2d({Vec2(-1, 0), Vec2(0, 1), Vec2(1, 0)}, +1, 0.5);
    const auto rep = repair_offset(raw, 0.5);
    int fills = 0;
    for (std::size_t k = 0; k < rep.points.size(); ++k)
        if (rep.origin[k].kind == PointSource::ArcFill) {
            ++fills;
            EXPECT_NEAR((rep.points[k] - Vec2(0, 1)).norm(), 0.5, 1e-9);
        }
    EXPECT_GT(fills, 0);
    ASSERT_EQ(rep.log.size(), 1u);
    EXPECT_EQ(rep.log[0].kind, RepairEvent::Kind::GapFilled);
    // Consecutive arc samples (including the raw endpoints) are at most 5 degrees apart.
    for (std::size_t k = 1; k + 1 < rep.points.size(); ++k) {
        const Vec2 a = rep.points[k] - Vec2(0, 1), b = rep.points[k + 1] - Vec2(0, 1);
        if (std::abs(a.norm() - 0.5) < 1e-9 && std::abs(b.norm() - 0.5) < 1e-9)
            EXPECT_LE(std::abs(angle_diff(std::atan2(b.y(), b.x()), std::atan2(a.y(), a.x()))),
                      5.0 * kPi / 180.0 + 1e-12);
    }
    expect_distance_band(rep.points, {Vec2(-1, 0), Vec2(0, 1), Vec2(1, 0)}, 0.5);
}

TEST(RepairOffset, StraightLineIsUnchanged)
{
    const std::vector<Vec2> src{Vec2(0, 0), Vec2(1, 0.5), Vec2(2, 1), Vec2(3, 1.5)};
    const auto raw = offset_polyline_2d(src, -1, 0.25);
    const auto rep = repair_offset(raw, 0.25);
    EXPECT_TRUE(rep.log.empty());
    ASSERT_EQ(rep.points.size(), 4u);
    EXPECT_EQ(rep.points[0], raw.segments[0].start);
    for (std::size_t k = 0; k < raw.segments.size(); ++k)
        EXPECT_NEAR((rep.points[k + 1] - raw.segments[k].end).norm(), 0.0, 1e-15);
}

TEST(RepairOffset, TightConcaveArcIsDegenerate)
{
    std::vector<Vec2> arc;
    for (int i = 0; i <= 24; ++i) {
        const double phi = -kPi / 3.0 + (2.0 * kPi / 3.0) * i / 24;
        arc.emplace_back(0.5 * std::sin(phi), -0.5 * std::cos(phi));
    }
    const auto rep = repair_offset(offset_polyline_2d(arc, +1, 1.0), 1.0);
    EXPECT_TRUE(rep.has_flag(kFlagOffsetDegenerate));
    SectionPolyline sec;
    sec.points = arc;
    sec.facets.assign(arc.size() - 1, 0);
    const auto report = detect_interference(rep, sec);
    EXPECT_TRUE(report.flags.count(kFlagOffsetDegenerate));
    EXPECT_FALSE(report.clean());
}

TEST(DetectInterference, ConcaveVReportsOneTrim)
{
    const double eps = std::sqrt(2.0) / 2.0;
    SectionPolyline sec;
    sec.points = {Vec2(-1, 1), Vec2(0, 0), Vec2(1, 1)};
    sec.facets = {0, 0};
    const auto rep = repair_offset(offset_polyline_2d(sec.points, +1, eps), eps);
    const auto report = detect_interference(rep, sec, 0.25);
    ASSERT_EQ(report.events.size(), 1u);
    EXPECT_NEAR((report.events[0].location - Vec2(0, 1)).norm(), 0.0, 1e-12);
    EXPECT_DOUBLE_EQ(report.frame_angle, 0.25);
    EXPECT_GE(report.min_distance, eps * (1.0 - 1e-6));
}

TEST(DetectInterference, SmoothConvexSectionIsClean)
{
    SectionPolyline sec;
    for (int i = 0; i <= 40; ++i) {
        const double phi = -kPi / 4.0 + (kPi / 2.0) * i / 40;
        sec.points.emplace_back(10.0 * std::sin(phi), 10.0 * std::cos(phi) - 10.0);
    }
    sec.facets.assign(40, 0);
    const double eps = 0.5;
    const auto rep = repair_offset(offset_polyline_2d(sec.points, +1, eps), eps);
    const auto report = detect_interference(rep, sec);
    EXPECT_TRUE(report.events.empty());
    EXPECT_TRUE(report.flags.empty());
    EXPECT_NEAR(report.min_distance, eps, 1e-6 * eps);
}

TEST(OffsetProperties, DistanceBandAndNoSelfIntersection)
{
    std::mt19937 rng(20261016);
    for (int trial = 0; trial < 12; ++trial) {
        const auto src = random_curve(rng, 30 + 3 * trial);
        for (int side : {+1, -1})
            for (double eps : {0.1, 0.4, 1.0, 2.5}) {
                SCOPED_TRACE("trial " + std::to_string(trial) + " side " + std::to_string(side) + " eps " +
                             std::to_string(eps));
                const auto rep = repair_offset(offset_polyline_2d(src, side, eps), eps);
                ASSERT_GE(rep.points.size(), 2u);
                EXPECT_FALSE(has_self_intersection(rep.points));
                // Interior samples only: the open ends of the offset sit beside the source endpoints.
                std::vector<Vec2> inner;
                for (const auto& p : rep.points)
                    if (std::abs(p.x()) < 5.0 - 2.0 * eps)
                        inner.push_back(p);
                for (const auto& p : inner)
                    ASSERT_GE(distance_to_polyline(p, src), eps * (1.0 - 1e-6));
                for (std::size_t k = 0; k + 1 < rep.points.size(); ++k)
                    for (int s = 0; s <= 8; ++s) {
                        const Vec2 p = rep.points[k] + (s / 8.0) * (rep.points[k + 1] - rep.points[k]);
                        const double d = distance_to_polyline(p, src);
                        ASSERT_GE(d, eps * (1.0 - 1e-6));
                        ASSERT_LE(d, eps * (2.0 - std::cos(2.5 * kPi / 180.0)) + 1e-12);
                    }
            }
    }
}

TEST(OffsetProperties, RepairIsIdempotent)
{
    std::mt19937 rng(7);
    for (int trial = 0; trial < 20; ++trial) {
        const auto src = random_curve(rng, 40);
        const double eps = 0.3;
        const auto once = repair_offset(offset_polyline_2d(src, +1, eps), eps);
        const auto twice = repair_offset(as_raw(once), eps);
        EXPECT_TRUE(twice.log.empty());
        ASSERT_EQ(once.points.size(), twice.points.size());
        for (std::size_t k = 0; k < once.points.size(); ++k)
            EXPECT_EQ(once.points[k], twice.points[k]);
    }
}

TEST(OffsetProperties, PlanarMeshOffsetIsExactTranslate)
{
    const auto mesh = make_flat_mesh(10.0, 16);
    const int facet = 2 * (8 * 16 + 8);
    const Vec3 P = incenter(mesh, facet);
    const double eps = 0.5;
    for (const auto& frame : make_section_frames(P, Vec3::UnitZ(), Vec3(1, 0.3, 0), 12)) {
        const auto sec = plane_section(mesh, frame, 6.0, facet);
        const auto rep = repair_offset(offset_segments(sec, mesh, frame, eps), eps);
        EXPECT_TRUE(rep.log.empty());
        ASSERT_EQ(rep.points.size(), sec.points.size());
        for (std::size_t k = 0; k < rep.points.size(); ++k)
            EXPECT_LT((rep.points[k] - sec.points[k] - Vec2(0, eps)).norm(), 1e-9 * eps);
    }
}

TEST(OffsetProperties, SphereOffsetStaysOnConcentricSphere)
{
    const double R = 20.0, eps = 0.5;
    const auto mesh = make_geodesic_sphere(R, 4);
    const double sag = sphere_mesh_sagitta(mesh, Vec3::Zero(), R);
    for (int facet : {0, 137, 2001, 4095}) {
        const Vec3 P = incenter(mesh, facet);
        for (const auto& frame : make_section_frames(P, mesh.normals[facet], Vec3::UnitX(), 6)) {
            const auto sec = plane_section(mesh, frame, 6.0, facet);
            const auto rep = repair_offset(offset_segments(sec, mesh, frame, eps), eps);
            for (const auto& p : rep.points)
                EXPECT_NEAR(frame.to_3d(p).norm(), R + eps, 2.0 * sag) << "facet " << facet;
            EXPECT_FALSE(has_self_intersection(rep.points));
        }
    }
}

TEST(SectionSvg, ContainsAllLayers)
{
    const auto raw = offset_polyline_2d({Vec2(-1, 0), Vec2(0, 1), Vec2(1, 0)}, +1, 0.5);
    const auto rep = repair_offset(raw, 0.5);
    SectionPolyline sec;
    sec.points = {Vec2(-1, 0), Vec2(0, 1), Vec2(1, 0)};
    sec.facets = {0, 1};
    std::ostringstream os;
    write_section_svg(os, sec, raw, rep, 0.0, 400.0, {Vec2(0, 1.5)});
    const std::string svg = os.str();
    EXPECT_NE(svg.find("<svg"), std::string::npos);
    EXPECT_NE(svg.find("stroke=\"red\""), std::string::npos);
    EXPECT_NE(svg.find("fill=\"green\""), std::string::npos);
    EXPECT_NE(svg.find("stroke=\"blue\""), std::string::npos);
}
