#include "millpath/cli.hpp"

#include <gtest/gtest.h>

#include <cstdlib>

using namespace millpath;
namespace fs = std::filesystem;
using cli::Json;

namespace {

fs::path scratch(const std::string& name)
{
    const fs::path p = fs::temp_directory_path() / ("millpath_cli_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

int run(std::vector<std::string> args, std::string* err_text = nullptr)
{
    args.insert(args.begin(), "millpath");
    std::vector<const char*> argv;
    for (const auto& a : args)
        argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = cli::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
    if (err_text)
        *err_text = err.str();
    return code;
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

Json load(const fs::path& p) { return Json::parse(slurp(p)); }

fs::path write_mesh(const fs::path& dir, const std::string& name, const TriMesh& m)
{
    const fs::path p = dir / name;
    std::ofstream f(p);
    write_stl_ascii(f, m);
    return p;
}

std::map<std::string, std::string> tree(const fs::path& dir)
{
    std::map<std::string, std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(dir))
        if (e.is_regular_file())
            out[fs::relative(e.path(), dir).string()] = slurp(e.path());
    return out;
}

} // namespace

TEST(CliIo, FlatPatchDiameters)
{
    const auto dir = scratch("flat_patch");
    const auto mesh = write_mesh(dir, "flat.stl", make_flat_mesh(20.0, 40));
    ASSERT_EQ(run({"patch", "--input", mesh.string(), "--tool-radius", "5", "--tolerance", "0.5", "--planes", "12",
                   "--start", "0,0,0", "--out", (dir / "out").string()}),
              0);
    const Json j = load(dir / "out/patch.json");
    ASSERT_EQ(j["diameters"].size(), 12u);
    for (const auto& d : j["diameters"])
        EXPECT_NEAR(d["length"].get<double>(), 4.358898, 0.01 * 4.358898);
    EXPECT_TRUE(fs::exists(dir / "out/patch_boundary.obj"));
    EXPECT_EQ(j["config"]["planes"], 12);
    EXPECT_EQ(j["config"]["strategy"], "widest");
}

TEST(CliIo, CylinderLargestDiameterAlongGenerator)
{
    const auto dir = scratch("cyl_patch");
    const auto mesh = write_mesh(dir, "cyl.stl", make_cylinder_mesh(20.0, 60.0, 50, -kPi, kPi, 128));
    ASSERT_EQ(run({"patch", "--input", mesh.string(), "--start", "0.2,0.1,20", "--svg", "--out", (dir / "out").string()}),
              0);
    const Json j = load(dir / "out/patch.json");
    const Vec3 d = cli::json_vec3(j["largest_diameter"]["direction"]);
    EXPECT_GT(std::abs(d.x()), std::cos(kPi / 36.0));
    EXPECT_TRUE(fs::exists(dir / "out/sections/frame_00.svg"));
}

TEST(CliIo, MissingInputIsUsageError)
{
    std::string err;
    EXPECT_EQ(run({"patch", "--input", "/nonexistent/part.stl"}, &err), 2);
    EXPECT_NE(err.find("not found"), std::string::npos);
    EXPECT_EQ(std::system((std::string(MILLPATH_CLI_PATH) + " patch --input /nonexistent/part.stl 2>/dev/null").c_str()),
              2 << 8);
}

TEST(CliIo, UsageErrorsExitTwo)
{
    EXPECT_EQ(run({"path", "--surface", "plane", "--tolerance", "6"}), 2);
    EXPECT_EQ(run({"path", "--surface", "plane", "--planes", "3"}), 2);
    EXPECT_EQ(run({"path", "--surface", "plane", "--strategy", "zigzag"}), 2);
    EXPECT_EQ(run({"path", "--surface", "plane", "--paths", "2", "--overlap", "1.0"}), 2);
    EXPECT_EQ(run({"path", "--surface", "nosuch"}), 2);
    EXPECT_EQ(run({"path"}), 2);
    EXPECT_EQ(run({"path", "--surface", "plane", "--bogus"}), 2);
    EXPECT_EQ(run({}), 2);
}

TEST(CliIo, ComputationErrorExitsOne)
{
    const auto dir = scratch("compute_error");
    std::string err;
    EXPECT_EQ(run({"path", "--surface", "plane", "--strategy", "isophote-trace", "--out", dir.string()}, &err), 1);
    EXPECT_NE(err.find("isophote undefined"), std::string::npos);
}

TEST(CliIo, CylinderWidestPathCloses)
{
    const auto dir = scratch("cyl_path");
    const auto mesh = write_mesh(dir, "cyl.stl", make_cylinder_mesh(20.0, 60.0, 50, -kPi, kPi, 128));
    ASSERT_EQ(run({"path", "--input", mesh.string(), "--start", "0.2,0.1,20", "--steps", "200", "--out",
                   (dir / "out").string()}),
              0);
    const Json j = load(dir / "out/path.json");
    EXPECT_TRUE(j["paths"][0]["closed"].get<bool>());
    EXPECT_EQ(j["paths"][0]["stop_reason"], "closed");
    const std::string obj = slurp(dir / "out/path.obj");
    EXPECT_NE(obj.find("\nl "), std::string::npos);
}

TEST(CliIo, TorusBlendedStaysNearMeridian)
{
    const auto dir = scratch("torus_path");
    ASSERT_EQ(run({"path", "--surface", "torus", "--tool-radius", "1", "--tolerance", "0.1", "--strategy", "blended",
                   "--start", "0,0", "--steps", "10", "--out", dir.string()}),
              0);
    const Json j = load(dir / "path.json");
    double worst = 0.0;
    for (const auto& p : j["paths"][0]["points"]) {
        const Vec3 x = cli::json_vec3(p["position"]);
        worst = std::max(worst, std::abs(std::atan2(x.y(), x.x())));
    }
    EXPECT_GT(worst, 0.0);
    EXPECT_LT(worst, 0.01);
    EXPECT_TRUE(j.contains("baseline"));
    EXPECT_TRUE(fs::exists(dir / "report.csv"));
    EXPECT_TRUE(fs::exists(dir / "report.txt"));
}

TEST(CliIo, IsophoteTraceWritesPolyline)
{
    const auto dir = scratch("trace");
    ASSERT_EQ(run({"path", "--surface", "bump", "--strategy", "isophote-trace", "--start", "5,3", "--steps", "300",
                   "--out", dir.string()}),
              0);
    const std::string obj = slurp(dir / "isophote.obj");
    EXPECT_EQ(obj, slurp(dir / "path.obj"));
    EXPECT_GT(std::count(obj.begin(), obj.end(), 'v'), 10);
}

TEST(CliIo, ReportRoundTripIsExact)
{
    const auto dir = scratch("roundtrip");
    ASSERT_EQ(run({"path", "--surface", "bump", "--strategy", "blended", "--start", "-10,7", "--steps", "8", "--out",
                   (dir / "a").string()}),
              0);
    ASSERT_EQ(run({"report", (dir / "a/path.json").string(), "--out", (dir / "b").string()}), 0);
    EXPECT_EQ(slurp(dir / "a/report.csv"), slurp(dir / "b/report.csv"));
    EXPECT_EQ(slurp(dir / "a/report.txt"), slurp(dir / "b/report.txt"));
}

TEST(CliIo, ReportOnPlaneShowsNoChange)
{
    const auto dir = scratch("plane_report");
    for (const std::string s : {"widest", "blended"})
        ASSERT_EQ(run({"path", "--surface", "plane", "--strategy", s, "--steps", "6", "--out", (dir / s).string()}), 0);
    ASSERT_EQ(run({"report", (dir / "widest/path.json").string(), (dir / "blended/path.json").string(), "--out",
                   (dir / "r").string()}),
              0);
    std::istringstream csv(slurp(dir / "r/report.csv"));
    std::string line;
    std::getline(csv, line);
    std::vector<std::vector<std::string>> rows;
    while (std::getline(csv, line)) {
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ','))
            cells.push_back(cell);
        rows.push_back(cells);
    }
    // blended on the plane carries its own widest baseline, reported first
    ASSERT_EQ(rows.size(), 3u);
    for (const auto& r : rows) {
        EXPECT_EQ(r[4], rows[0][4]);
        EXPECT_EQ(r[5], rows[0][5]);
        EXPECT_EQ(r[9], "0");
    }
}

TEST(CliIo, ReportInputErrors)
{
    const auto dir = scratch("report_errors");
    EXPECT_EQ(run({"report", "--out", dir.string()}), 2);
    {
        std::ofstream f(dir / "bad.json");
        f << "{\"paths\": [ {\"strategy\": ";
    }
    EXPECT_NE(run({"report", (dir / "bad.json").string(), "--out", dir.string()}), 0);
    {
        std::ofstream f(dir / "empty.json");
        f << "{\"paths\": []}";
    }
    EXPECT_EQ(run({"report", (dir / "empty.json").string(), "--out", dir.string()}), 2);
    {
        std::ofstream f(dir / "partial.json");
        f << "{\"paths\": [{\"strategy\": \"widest\"}]}";
    }
    EXPECT_NE(run({"report", (dir / "partial.json").string(), "--out", dir.string()}), 0);
}

TEST(CliIo, ConfigFileWithFlagOverride)
{
    const auto dir = scratch("config");
    {
        std::ofstream f(dir / "run.ini");
        f << "surface = paraboloid\nsteps = 4\ntool-radius = 4\ntolerance = 0.4\nstart = 3,1\n";
    }
    ASSERT_EQ(run({"path", "--config", (dir / "run.ini").string(), "--steps", "3", "--out", (dir / "o").string()}), 0);
    const Json j = load(dir / "o/path.json");
    EXPECT_EQ(j["config"]["surface"], "paraboloid");
    EXPECT_EQ(j["config"]["steps"], 3);
    EXPECT_EQ(j["config"]["tool_radius"].get<double>(), 4.0);
    EXPECT_EQ(j["paths"][0]["points"].size(), 3u);
}

TEST(CliIo, SurfaceParametersApplied)
{
    const auto dir = scratch("params");
    ASSERT_EQ(run({"patch", "--surface", "sphere", "--param", "radius=30", "--start", "0,0", "--out", dir.string()}), 0);
    const Json j = load(dir / "patch.json");
    EXPECT_NEAR(cli::json_vec3(j["contact"]["position"]).z(), 30.0, 1e-9);
    EXPECT_EQ(run({"patch", "--surface", "sphere", "--param", "radius", "--out", dir.string()}), 2);
}

TEST(CliIo, SideSteppedPaths)
{
    const auto dir = scratch("multi");
    ASSERT_EQ(run({"path", "--surface", "plane", "--steps", "5", "--paths", "3", "--overlap", "0.2", "--out",
                   dir.string()}),
              0);
    const Json j = load(dir / "path.json");
    EXPECT_EQ(j["paths"].size(), 3u);
    EXPECT_EQ(j["side_steps"].size(), 2u);
    EXPECT_NEAR(j["side_steps"][0]["distance"].get<double>(), 0.8 * 2.179449, 1e-6);
    EXPECT_TRUE(fs::exists(dir / "path_2.csv"));
}

TEST(CliIo, OutputsAreDeterministic)
{
    const auto dir = scratch("determinism");
    const auto mesh = write_mesh(dir, "saddle.stl", tessellate_surface(surfaces::Saddle(), 40, 40));
    const std::vector<std::vector<std::string>> runs{
        {"patch", "--input", mesh.string(), "--svg"},
        {"path", "--surface", "torus", "--tool-radius", "1", "--tolerance", "0.1", "--strategy", "blended", "--steps",
         "6", "--paths", "2"},
        {"path", "--input", mesh.string(), "--strategy", "bisector", "--steps", "4"},
        {"offset", "--input", mesh.string()},
        {"directions", "--surface", "cylinder", "--tessellate", "24"},
    };
    int i = 0;
    for (const auto& args : runs) {
        const auto a = dir / ("a" + std::to_string(i));
        const auto b = dir / ("b" + std::to_string(i));
        auto with = [&](const fs::path& out) {
            auto v = args;
            v.push_back("--out");
            v.push_back(out.string());
            return v;
        };
        ASSERT_EQ(run(with(a)), 0) << args[0];
        ASSERT_EQ(run(with(b)), 0) << args[0];
        EXPECT_EQ(tree(a), tree(b)) << args[0];
        EXPECT_FALSE(tree(a).empty());
        ++i;
    }
    ASSERT_EQ(run({"report", (dir / "a1/path.json").string(), "--out", (dir / "r1").string()}), 0);
    ASSERT_EQ(run({"report", (dir / "a1/path.json").string(), "--out", (dir / "r2").string()}), 0);
    EXPECT_EQ(tree(dir / "r1"), tree(dir / "r2"));
}

TEST(CliIo, OffsetDebugFrames)
{
    const auto dir = scratch("offset");
    ASSERT_EQ(run({"offset", "--surface", "saddle", "--tessellate", "40", "--planes", "6", "--out", dir.string()}), 0);
    for (int i = 0; i < 6; ++i) {
        char name[40];
        std::snprintf(name, sizeof name, "offset_frame_%02d", i);
        ASSERT_TRUE(fs::exists(dir / (std::string(name) + ".json"))) << name;
        const Json j = load(dir / (std::string(name) + ".json"));
        // in-plane displacement is eps * cos(alpha) on tilted facets
        EXPECT_LE(j["min_distance"].get<double>(), 0.5 * (1.0 + 1e-9));
        EXPECT_GT(j["min_distance"].get<double>(), 0.45);
        EXPECT_TRUE(fs::exists(dir / (std::string(name) + ".svg")));
    }
    EXPECT_EQ(run({"offset", "--surface", "saddle", "--frame", "12", "--out", dir.string()}), 2);
}
