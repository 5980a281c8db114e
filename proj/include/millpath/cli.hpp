#pragma once

#include "millpath/mesh_gen.hpp"
#include "millpath/path_sim.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

namespace millpath::cli {

using Json = nlohmann::ordered_json;

/// Everything a run needs. Filled from flags and an optional key=value file.
struct RunConfig {
    std::string command;
    std::string input;
    std::string surface;
    std::vector<std::string> params; ///< key=value surface parameters
    int tessellate = 0;
    double radius = 5.0;
    double tolerance = 0.5;
    std::vector<double> axis{0.0, 0.0, 1.0};
    std::vector<double> seed{1.0, 0.0, 0.0};
    int planes = 12;
    std::string strategy = "widest";
    std::string start;
    std::vector<double> heading;
    int steps = 50;
    double overlap = 0.2;
    int paths = 1;
    double step_fraction = 1.0;
    int frame = -1;
    double disc_radius = 0.0;
    std::string out = "out";
    bool svg = false;
    std::vector<std::string> reports;

    ToolSpec tool() const
    {
        return {radius, tolerance, Vec3(axis[0], axis[1], axis[2]).normalized()};
    }

    std::map<std::string, double> surface_params() const
    {
        std::map<std::string, double> out;
        for (const auto& kv : params) {
            const auto eq = kv.find('=');
            if (eq == std::string::npos || eq == 0)
                throw MillError(ErrorKind::Usage, "surface parameter '" + kv + "' is not key=value");
            std::size_t used = 0;
            double v = 0.0;
            try {
                v = std::stod(kv.substr(eq + 1), &used);
            } catch (const std::exception&) {
                used = 0;
            }
            if (used == 0 || used != kv.size() - eq - 1)
                throw MillError(ErrorKind::Usage, "surface parameter '" + kv + "' has no numeric value");
            out[kv.substr(0, eq)] = v;
        }
        return out;
    }

    void validate() const
    {
        if (command == "report") {
            if (reports.empty())
                throw MillError(ErrorKind::Usage, "report needs at least one path JSON file");
            return;
        }
        if (input.empty() == surface.empty())
            throw MillError(ErrorKind::Usage, "give exactly one of --input or --surface");
        if (!input.empty() && !std::filesystem::exists(input))
            throw MillError(ErrorKind::Usage, "input file not found: " + input);
        if (axis.size() != 3 || Vec3(axis[0], axis[1], axis[2]).norm() <= 0.0)
            throw MillError(ErrorKind::Usage, "tool axis must be a nonzero 3-vector");
        if (seed.size() != 3)
            throw MillError(ErrorKind::Usage, "seed must be a 3-vector");
        if (!heading.empty() && heading.size() != 3)
            throw MillError(ErrorKind::Usage, "heading must be a 3-vector");
        tool().validate();
        if (planes < 4)
            throw MillError(ErrorKind::Usage, "planes must be at least 4");
        if (steps < 1 || paths < 1)
            throw MillError(ErrorKind::Usage, "steps and paths must be at least 1");
        if (paths > 1 && !(overlap > 0.0 && overlap < 1.0))
            throw MillError(ErrorKind::Usage, "overlap must lie in (0, 1)");
        if (!(step_fraction > 0.0 && step_fraction <= 1.0))
            throw MillError(ErrorKind::Usage, "step fraction must lie in (0, 1]");
        if (tessellate < 0)
            throw MillError(ErrorKind::Usage, "tessellation must be non-negative");
        parse_strategy(strategy);
        surface_params();
    }

    /// Every setting that affects the results; the output directory is left out.
    Json echo() const
    {
        Json j;
        j["command"] = command;
        j["input"] = input;
        j["surface"] = surface;
        j["params"] = params;
        j["tessellate"] = tessellate;
        j["tool_radius"] = round9(radius);
        j["tolerance"] = round9(tolerance);
        const Vec3 a = tool().axis;
        j["axis"] = {round9(a.x()), round9(a.y()), round9(a.z())};
        j["seed"] = {round9(seed[0]), round9(seed[1]), round9(seed[2])};
        j["planes"] = planes;
        j["strategy"] = strategy;
        j["start"] = start;
        j["heading"] = heading;
        j["steps"] = steps;
        j["overlap"] = round9(overlap);
        j["paths"] = paths;
        j["step_fraction"] = round9(step_fraction);
        j["frame"] = frame;
        j["disc_radius"] = round9(disc_radius);
        j["svg"] = svg;
        return j;
    }
};

inline int exit_code(ErrorKind k)
{
    switch (k) {
    case ErrorKind::Usage:
    case ErrorKind::Parse:
    case ErrorKind::NonManifold:
    case ErrorKind::Orientation: return 2;
    default: return 1;
    }
}

/// Output files collected in memory and written once at the end.
using FileSet = std::map<std::string, std::string>;

inline void write_files(const std::filesystem::path& dir, const FileSet& files)
{
    for (const auto& [name, text] : files) {
        const auto path = dir / name;
        std::filesystem::create_directories(path.parent_path());
        std::ofstream f(path, std::ios::binary);
        if (!f)
            throw MillError(ErrorKind::Usage, "cannot write " + path.string());
        f << text;
    }
}

inline Json vec_json(const Vec3& v) { return Json::array({round9(v.x()), round9(v.y()), round9(v.z())}); }
inline Json vec_json(const Vec2& v) { return Json::array({round9(v.x()), round9(v.y())}); }
inline Json num_json(double x) { return std::isfinite(x) ? Json(round9(x)) : Json(nullptr); }

/// Loaded surface (mesh or analytic) and the backend over it.
struct Workspace {
    std::unique_ptr<TriMesh> mesh;
    std::unique_ptr<AnalyticSurface> surface;
    std::unique_ptr<PathBackend> backend;
    std::string name;

    bool analytic() const { return !mesh; }
};

/// Mesh input, or a catalog surface used directly or tessellated into a mesh.
inline Workspace open_workspace(const RunConfig& cfg, bool need_mesh = false)
{
    Workspace w;
    if (!cfg.input.empty()) {
        w.mesh = std::make_unique<TriMesh>(load_mesh(cfg.input));
        w.name = std::filesystem::path(cfg.input).filename().string();
    } else {
        w.surface = make_surface(cfg.surface, cfg.surface_params());
        w.name = cfg.surface;
        const int grid = cfg.tessellate > 0 ? cfg.tessellate : need_mesh ? 80 : 0;
        if (grid > 0)
            w.mesh = std::make_unique<TriMesh>(tessellate_surface(*w.surface, grid, grid));
    }
    if (w.mesh)
        w.backend = std::make_unique<MeshBackend>(*w.mesh, w.name);
    else
        w.backend = std::make_unique<AnalyticBackend>(*w.surface);
    return w;
}

inline std::vector<double> parse_numbers(const std::string& text)
{
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        std::size_t used = 0;
        try {
            out.push_back(std::stod(item, &used));
        } catch (const std::exception&) {
            used = 0;
        }
        if (used == 0)
            throw MillError(ErrorKind::Usage, "cannot parse start value '" + item + "'");
    }
    return out;
}

/// Start: "facet:N" or "N" (mesh), "u,v" (analytic), "x,y,z" (either).
/// Empty picks the facet nearest the vertex centroid or the domain centre.
inline ContactPoint resolve_start(const Workspace& w, const std::string& spec)
{
    if (w.mesh) {
        const TriMesh& m = *w.mesh;
        std::string s = spec;
        if (s.rfind("facet:", 0) == 0)
            s = s.substr(6);
        if (s.empty()) {
            Vec3 c = Vec3::Zero();
            for (const auto& v : m.vertices)
                c += v;
            c /= static_cast<double>(m.vertices.size());
            return mesh_contact(m, nearest_on_mesh(m, c).facet);
        }
        const auto v = parse_numbers(s);
        if (v.size() == 1) {
            if (v[0] != std::floor(v[0]))
                throw MillError(ErrorKind::Usage, "facet index must be an integer");
            return mesh_contact(m, static_cast<int>(v[0]));
        }
        if (v.size() == 3) {
            const MeshPoint p = nearest_on_mesh(m, Vec3(v[0], v[1], v[2]));
            return mesh_contact(m, inset_from_edges(m, p.position, p.facet), p.facet);
        }
        throw MillError(ErrorKind::Usage, "mesh start must be a facet index or a point x,y,z");
    }
    const AnalyticSurface& s = *w.surface;
    if (spec.empty())
        return analytic_contact(s, Vec2(0.5 * (s.domain.u0 + s.domain.u1), 0.5 * (s.domain.v0 + s.domain.v1)));
    const auto v = parse_numbers(spec);
    if (v.size() == 2)
        return analytic_contact(s, Vec2(v[0], v[1]));
    if (v.size() == 3)
        return analytic_contact(s, nearest_point_oracle(s, Vec3(v[0], v[1], v[2])).params);
    throw MillError(ErrorKind::Usage, "surface start must be a parameter pair u,v or a point x,y,z");
}

inline Json contact_json(const ContactPoint& c)
{
    Json j;
    j["position"] = vec_json(c.position);
    j["normal"] = vec_json(c.normal);
    j["facet"] = c.facet;
    j["params"] = c.params ? vec_json(*c.params) : Json(nullptr);
    return j;
}

inline std::string polyline_obj(const std::vector<std::vector<Vec3>>& lines, bool closed)
{
    std::ostringstream out;
    write_obj_polylines(out, lines, closed);
    return out.str();
}

// ---------------------------------------------------------------------------
// patch

inline FileSet cmd_patch(const RunConfig& cfg)
{
    const Workspace w = open_workspace(cfg);
    const ContactPoint c = resolve_start(w, cfg.start);
    const Vec3 seed(cfg.seed[0], cfg.seed[1], cfg.seed[2]);
    PatchBoundary patch;
    try {
        patch = w.backend->patch(c, cfg.tool(), cfg.planes, seed);
    } catch (const MillError& e) {
        const std::string where = c.facet >= 0 ? "facet " + std::to_string(c.facet) : "contact";
        throw MillError(e.kind(), "patch at " + where + ": " + e.what());
    }
    FileSet files;
    Json j;
    j["config"] = cfg.echo();
    j["surface"] = w.backend->kind();
    j["contact"] = contact_json(c);
    j["reference_axis"] = vec_json(patch.reference_axis);
    j["planes"] = patch.planes;
    j["projection_rule"] = patch.projection_rule;
    Json samples = Json::array();
    for (int k = 0; k < patch.size(); ++k) {
        const auto& s = patch.samples[k];
        Json e;
        e["k"] = k;
        e["theta"] = round9(s.theta);
        e["valid"] = s.valid;
        e["unreliable"] = s.unreliable;
        e["position"] = s.valid ? vec_json(s.position) : Json(nullptr);
        e["normal"] = s.valid ? vec_json(s.normal) : Json(nullptr);
        e["facet"] = s.facet;
        e["params"] = s.params ? vec_json(*s.params) : Json(nullptr);
        samples.push_back(e);
    }
    j["samples"] = samples;
    Json diam = Json::array();
    for (const auto& d : patch_diameters(patch))
        diam.push_back({{"k", d.index}, {"theta", round9(d.dir.theta)}, {"length", round9(d.length)}});
    j["diameters"] = diam;
    const Diameter big = largest_diameter(patch);
    const Diameter small = smallest_diameter(patch);
    j["largest_diameter"] = {{"k", big.index}, {"theta", round9(big.dir.theta)}, {"length", round9(big.length)},
                             {"direction", vec_json(big.dir.direction)}};
    j["smallest_diameter"] = {{"k", small.index}, {"theta", round9(small.dir.theta)},
                              {"length", round9(small.length)}, {"direction", vec_json(small.dir.direction)}};
    const DirectionOnSurface wd = widest_stripe_direction(patch);
    j["widest_direction"] = {{"theta", round9(wd.theta)}, {"direction", vec_json(wd.direction)}};
    j["flags"] = patch.flags;
    Json frames = Json::array();
    for (std::size_t i = 0; i < patch.frames.size(); ++i) {
        const auto& f = patch.frames[i];
        Json e;
        e["index"] = i;
        e["angle"] = round9(f.frame.angle);
        e["ok"] = f.ok();
        e["error"] = f.error;
        e["flags"] = f.flags;
        e["repair_events"] = f.interference.events.size();
        frames.push_back(e);
    }
    j["frames"] = frames;
    files["patch.json"] = j.dump(2) + "\n";

    std::vector<Vec3> ring;
    for (int k : patch.valid_indices())
        ring.push_back(patch.samples[k].position);
    files["patch_boundary.obj"] = polyline_obj({ring}, true);

    if (cfg.svg && w.mesh) {
        for (std::size_t i = 0; i < patch.frames.size(); ++i) {
            const auto& f = patch.frames[i];
            if (!f.ok())
                continue;
            std::ostringstream svg;
            write_section_svg(svg, f.section, f.raw, f.repaired, 0.0, 800.0, {f.b1, f.b2});
            char name[40];
            std::snprintf(name, sizeof name, "sections/frame_%02zu.svg", i);
            files[name] = svg.str();
        }
    }
    return files;
}

// ---------------------------------------------------------------------------
// path JSON and reports

inline Json record_json(const ContactRecord& r)
{
    Json j;
    j["position"] = vec_json(r.position);
    j["normal"] = vec_json(r.normal);
    j["facet"] = r.facet;
    j["params"] = r.params ? vec_json(*r.params) : Json(nullptr);
    j["direction"] = vec_json(r.direction);
    j["theta_q"] = round9(r.theta_q);
    j["theta_w"] = round9(r.theta_w);
    j["theta_s"] = round9(r.theta_s);
    j["beta"] = round9(r.beta);
    j["residual"] = round9(r.residual);
    j["inclination"] = round9(r.inclination);
    j["diameter_max"] = round9(r.diameter_max);
    j["diameter_min"] = round9(r.diameter_min);
    j["width"] = round9(r.width);
    j["patch_radius"] = round9(r.patch_radius);
    j["step_length"] = round9(r.step_length);
    j["gaussian"] = num_json(r.gaussian);
    j["flags"] = r.flags;
    return j;
}

inline Json path_json(const ToolPath& p)
{
    Json j;
    j["strategy"] = to_string(p.strategy);
    j["surface"] = p.surface;
    j["stop_reason"] = p.stop_reason;
    j["closed"] = p.closed;
    j["tool"] = {{"radius", round9(p.tool.radius)}, {"tolerance", round9(p.tool.tolerance)},
                 {"axis", vec_json(p.tool.axis)}};
    j["planes"] = p.planes;
    j["step_fraction"] = round9(p.step_fraction);
    j["side_step_rule"] = p.side_step_rule;
    Json pts = Json::array();
    for (const auto& r : p.points)
        pts.push_back(record_json(r));
    j["points"] = pts;
    return j;
}

inline Vec3 json_vec3(const Json& j)
{
    if (!j.is_array() || j.size() != 3)
        throw MillError(ErrorKind::Parse, "expected a 3-vector");
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

inline double json_num(const Json& j)
{
    return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

inline ToolPath path_from_json(const Json& j)
{
    try {
        ToolPath p;
        p.strategy = parse_strategy(j.at("strategy").get<std::string>());
        p.surface = j.at("surface").get<std::string>();
        p.stop_reason = j.at("stop_reason").get<std::string>();
        p.closed = j.at("closed").get<bool>();
        const auto& t = j.at("tool");
        p.tool = {t.at("radius").get<double>(), t.at("tolerance").get<double>(), json_vec3(t.at("axis"))};
        p.planes = j.at("planes").get<int>();
        p.step_fraction = j.at("step_fraction").get<double>();
        p.side_step_rule = j.at("side_step_rule").get<std::string>();
        for (const auto& e : j.at("points")) {
            ContactRecord r;
            r.position = json_vec3(e.at("position"));
            r.normal = json_vec3(e.at("normal"));
            r.facet = e.at("facet").get<int>();
            if (!e.at("params").is_null())
                r.params = Vec2(e["params"][0].get<double>(), e["params"][1].get<double>());
            r.direction = json_vec3(e.at("direction"));
            r.theta_q = e.at("theta_q").get<double>();
            r.theta_w = e.at("theta_w").get<double>();
            r.theta_s = e.at("theta_s").get<double>();
            r.beta = e.at("beta").get<double>();
            r.residual = e.at("residual").get<double>();
            r.inclination = e.at("inclination").get<double>();
            r.diameter_max = e.at("diameter_max").get<double>();
            r.diameter_min = e.at("diameter_min").get<double>();
            r.width = e.at("width").get<double>();
            r.patch_radius = e.at("patch_radius").get<double>();
            r.step_length = e.at("step_length").get<double>();
            r.gaussian = json_num(e.at("gaussian"));
            for (const auto& f : e.at("flags"))
                r.flags.insert(f.get<std::string>());
            p.points.push_back(std::move(r));
        }
        return p;
    } catch (const nlohmann::json::exception& e) {
        throw MillError(ErrorKind::Parse, std::string("malformed path record: ") + e.what());
    }
}

struct ReportRow {
    std::string source;
    int index = 0;
    PathDiagnostics diag;
};

/// Diagnostics rows: the baseline first, then every path.
inline std::vector<ReportRow> report_rows(const std::vector<std::pair<std::string, ToolPath>>& paths,
                                          const std::optional<std::pair<std::string, ToolPath>>& baseline)
{
    std::vector<ReportRow> rows;
    const ToolPath* base = nullptr;
    if (baseline)
        base = &baseline->second;
    else
        for (const auto& [src, p] : paths)
            if (p.strategy == Strategy::Widest) {
                base = &p;
                break;
            }
    if (!base && !paths.empty())
        base = &paths.front().second;
    std::vector<ToolPath> all;
    std::vector<std::string> sources;
    if (baseline) {
        all.push_back(baseline->second);
        sources.push_back(baseline->first + "#baseline");
    }
    for (std::size_t i = 0; i < paths.size(); ++i) {
        all.push_back(paths[i].second);
        sources.push_back(paths[i].first);
    }
    const auto diags = base ? path_report(all, *base) : std::vector<PathDiagnostics>{};
    for (std::size_t i = 0; i < diags.size(); ++i)
        rows.push_back({sources[i], static_cast<int>(i), diags[i]});
    return rows;
}

inline FileSet report_files(const std::vector<ReportRow>& rows)
{
    std::ostringstream csv;
    csv << "row,source,strategy,points,inclination_min,inclination_max,inclination_mean,inclination_range,"
           "width_mean,width_change_percent,gaussian_min,gaussian_max,stop_reason\n";
    auto num = [](double x) { return std::isfinite(x) ? fmt9(x) : std::string(); };
    for (const auto& r : rows) {
        const auto& d = r.diag;
        csv << r.index << ',' << r.source << ',' << d.strategy << ',' << d.points << ',' << num(d.inclination_min)
            << ',' << num(d.inclination_max) << ',' << num(d.inclination_mean) << ',' << num(d.inclination_range())
            << ',' << num(d.width_mean) << ',' << num(d.width_change_percent) << ',' << num(d.gaussian_min) << ','
            << num(d.gaussian_max) << ",\"" << d.stop_reason << "\"\n";
    }
    std::ostringstream txt;
    const PathDiagnostics* base = rows.empty() ? nullptr : &rows.front().diag;
    for (const auto& r : rows) {
        const auto& d = r.diag;
        txt << "row " << r.index << " (" << d.strategy << ", " << r.source << "): inclination [" << fmt9(d.inclination_min)
            << ", " << fmt9(d.inclination_max) << "] range " << fmt9(d.inclination_range()) << " rad; mean width "
            << fmt9(d.width_mean) << " (" << fmt9(d.width_change_percent) << "% vs row 0)";
        if (std::isfinite(d.gaussian_min))
            txt << "; gaussian curvature [" << fmt9(d.gaussian_min) << ", " << fmt9(d.gaussian_max) << "]";
        if (base && &d != base) {
            const bool inside = d.inclination_min >= base->inclination_min && d.inclination_max <= base->inclination_max;
            txt << "; interval " << (inside ? "inside" : "not inside") << " row 0, range "
                << (d.inclination_range() <= base->inclination_range() ? "not wider" : "wider");
        }
        txt << "; stop: " << d.stop_reason << '\n';
    }
    return {{"report.csv", csv.str()}, {"report.txt", txt.str()}};
}

// ---------------------------------------------------------------------------
// path

inline FileSet cmd_path(const RunConfig& cfg)
{
    const Workspace w = open_workspace(cfg);
    const ContactPoint c = resolve_start(w, cfg.start);
    PathOptions opt;
    opt.tool = cfg.tool();
    opt.planes = cfg.planes;
    opt.strategy = parse_strategy(cfg.strategy);
    opt.max_steps = cfg.steps;
    opt.step_fraction = cfg.step_fraction;
    opt.seed = Vec3(cfg.seed[0], cfg.seed[1], cfg.seed[2]);
    if (!cfg.heading.empty())
        opt.heading = Vec3(cfg.heading[0], cfg.heading[1], cfg.heading[2]);

    const PathSet set = generate_paths(*w.backend, c, opt, cfg.paths, cfg.overlap);
    std::optional<ToolPath> baseline;
    if (opt.strategy == Strategy::Blended) {
        PathOptions b = opt;
        b.strategy = Strategy::Widest;
        baseline = generate_path(*w.backend, c, b);
    }

    Json j;
    j["config"] = cfg.echo();
    j["surface"] = w.backend->kind();
    j["start"] = contact_json(c);
    Json paths = Json::array();
    for (const auto& p : set.paths)
        paths.push_back(path_json(p));
    j["paths"] = paths;
    Json steps = Json::array();
    for (const auto& s : set.steps)
        steps.push_back({{"origin", s.origin}, {"distance", round9(s.distance)}, {"start", contact_json(s.start)}});
    j["side_steps"] = steps;
    j["side_step_rule"] = "side step from the path point of maximal stripe width";
    j["path_set_stop"] = set.stop_reason;
    if (baseline)
        j["baseline"] = path_json(*baseline);

    FileSet files;
    files["path.json"] = j.dump(2) + "\n";
    std::vector<std::vector<Vec3>> lines, patches;
    for (std::size_t i = 0; i < set.paths.size(); ++i) {
        const auto& p = set.paths[i];
        lines.push_back(p.polyline());
        for (const auto& r : p.points)
            patches.push_back(r.boundary);
        std::ostringstream csv;
        write_path_csv(csv, p);
        files["path_" + std::to_string(i) + ".csv"] = csv.str();
    }
    const bool closed = set.paths.size() == 1 && set.paths.front().closed;
    files["path.obj"] = polyline_obj(lines, closed);
    files["patches.obj"] = polyline_obj(patches, true);
    if (opt.strategy == Strategy::IsophoteTrace)
        files["isophote.obj"] = files["path.obj"];

    if (baseline) {
        // Diagnostics come from the emitted records so that `report` reproduces them.
        const Json reread = Json::parse(files["path.json"]);
        std::vector<std::pair<std::string, ToolPath>> emitted;
        for (const auto& p : reread["paths"])
            emitted.emplace_back("path.json", path_from_json(p));
        const auto base = std::make_pair(std::string("path.json"), path_from_json(reread["baseline"]));
        for (auto& [name, text] : report_files(report_rows(emitted, base)))
            files[name] = text;
    }
    return files;
}

// ---------------------------------------------------------------------------
// report

inline FileSet cmd_report(const RunConfig& cfg)
{
    std::vector<std::pair<std::string, ToolPath>> paths;
    std::optional<std::pair<std::string, ToolPath>> baseline;
    for (const auto& file : cfg.reports) {
        std::ifstream in(file);
        if (!in)
            throw MillError(ErrorKind::Usage, "cannot open path file " + file);
        Json j;
        try {
            j = Json::parse(in);
        } catch (const nlohmann::json::exception& e) {
            throw MillError(ErrorKind::Parse, file + ": malformed JSON: " + e.what());
        }
        const std::string name = std::filesystem::path(file).filename().string();
        if (!j.is_object() || !j.contains("paths") || !j["paths"].is_array())
            throw MillError(ErrorKind::Parse, file + ": no path records");
        for (const auto& p : j["paths"])
            paths.emplace_back(name, path_from_json(p));
        if (!baseline && j.contains("baseline"))
            baseline = std::make_pair(name, path_from_json(j["baseline"]));
    }
    if (paths.empty())
        throw MillError(ErrorKind::Usage, "no paths found in the report inputs");
    return report_files(report_rows(paths, baseline));
}

// ---------------------------------------------------------------------------
// offset

inline FileSet cmd_offset(const RunConfig& cfg)
{
    const Workspace w = open_workspace(cfg, true);
    const ContactPoint c = resolve_start(w, cfg.start);
    const TriMesh& m = *w.mesh;
    const ToolSpec tool = cfg.tool();
    const auto frames = make_section_frames(c.position, c.normal, Vec3(cfg.seed[0], cfg.seed[1], cfg.seed[2]),
                                            cfg.planes);
    if (cfg.frame >= cfg.planes)
        throw MillError(ErrorKind::Usage, "frame index out of range");
    FileSet files;
    for (int i = 0; i < cfg.planes; ++i) {
        if (cfg.frame >= 0 && i != cfg.frame)
            continue;
        FrameResult fr;
        try {
            fr = process_frame(m, c, tool, frames[i], default_window_radius(m, tool));
        } catch (const MillError& e) {
            throw MillError(e.kind(), "frame " + std::to_string(i) + " at facet " + std::to_string(c.facet) + ": " +
                                          e.what());
        }
        Json j;
        j["config"] = cfg.echo();
        j["frame"] = i;
        j["angle"] = round9(frames[i].angle);
        j["contact"] = contact_json(c);
        Json sec = Json::array();
        for (const auto& p : fr.section.points)
            sec.push_back(vec_json(p));
        j["section"] = sec;
        Json raw = Json::array();
        for (const auto& s : fr.raw.segments)
            raw.push_back({{"start", vec_json(s.start)}, {"end", vec_json(s.end)}, {"facet", s.facet}});
        j["raw_offset"] = raw;
        Json rep = Json::array();
        for (const auto& p : fr.repaired.points)
            rep.push_back(vec_json(p));
        j["repaired_offset"] = rep;
        Json events = Json::array();
        for (const auto& e : fr.repaired.log)
            events.push_back({{"kind", to_string(e.kind)}, {"location", vec_json(e.location)}, {"segment", e.segment}});
        j["events"] = events;
        j["flags"] = fr.flags;
        j["min_distance"] = num_json(fr.interference.min_distance);
        j["boundary_points"] = {vec_json(fr.b1), vec_json(fr.b2)};
        char name[40];
        std::snprintf(name, sizeof name, "offset_frame_%02d", i);
        files[std::string(name) + ".json"] = j.dump(2) + "\n";
        std::ostringstream svg;
        write_section_svg(svg, fr.section, fr.raw, fr.repaired, 0.0, 800.0, {fr.b1, fr.b2});
        files[std::string(name) + ".svg"] = svg.str();
    }
    return files;
}

// ---------------------------------------------------------------------------
// directions

inline FileSet cmd_directions(const RunConfig& cfg)
{
    const Workspace w = open_workspace(cfg, true);
    const TriMesh& m = *w.mesh;
    const double radius = cfg.disc_radius > 0.0 ? cfg.disc_radius : default_disc_radius(m);
    const Vec3 seed(cfg.seed[0], cfg.seed[1], cfg.seed[2]);
    std::vector<FacetDirectionRow> rows;
    int skipped = 0;
    for (int f = 0; f < m.facet_count(); ++f) {
        try {
            rows.push_back({f, disc_principal_directions(m, f, radius, cfg.planes, seed)});
        } catch (const MillError& e) {
            if (e.kind() != ErrorKind::Geometry)
                throw;
            ++skipped;
        }
    }
    std::ostringstream csv;
    write_direction_csv(csv, rows);
    Json j;
    j["config"] = cfg.echo();
    j["disc_radius"] = round9(radius);
    j["facets"] = m.facet_count();
    j["skipped_near_boundary"] = skipped;
    return {{"directions.csv", csv.str()}, {"directions.json", j.dump(2) + "\n"}};
}

// ---------------------------------------------------------------------------
// driver

inline void add_shared_options(CLI::App& app, RunConfig& cfg)
{
    app.add_option("-i,--input", cfg.input, "mesh file (STL or OBJ)");
    app.add_option("--surface", cfg.surface, "built-in surface: plane, paraboloid, saddle, sphere, cylinder, torus, bump");
    app.add_option("--param", cfg.params, "surface parameter key=value (repeatable)");
    app.add_option("--tessellate", cfg.tessellate, "tessellate the built-in surface into an N x N grid mesh");
    app.add_option("--tool-radius", cfg.radius, "ball-end radius r")->capture_default_str();
    app.add_option("--tolerance", cfg.tolerance, "scallop tolerance eps")->capture_default_str();
    app.add_option("--axis", cfg.axis, "tool axis x,y,z")->delimiter(',')->expected(3);
    app.add_option("--seed", cfg.seed, "in-plane seed for the section frames x,y,z")->delimiter(',')->expected(3);
    app.add_option("--planes", cfg.planes, "number of normal section planes n")->capture_default_str();
    app.add_option("--strategy", cfg.strategy, "widest|bisector|blended|isophote-trace")->capture_default_str();
    app.add_option("--start", cfg.start, "facet index, u,v or x,y,z")
        ->delimiter(',')
        ->expected(1, 3)
        ->multi_option_policy(CLI::MultiOptionPolicy::Join);
    app.add_option("--heading", cfg.heading, "initial moving direction x,y,z")->delimiter(',')->expected(3);
    app.add_option("--steps", cfg.steps, "maximal contact points per path")->capture_default_str();
    app.add_option("--overlap", cfg.overlap, "side-step overlap fraction in (0,1)")->capture_default_str();
    app.add_option("--paths", cfg.paths, "number of side-stepped paths")->capture_default_str();
    app.add_option("--step-fraction", cfg.step_fraction, "share of the patch step taken")->capture_default_str();
    app.add_option("--frame", cfg.frame, "single frame for the offset command (-1: all)");
    app.add_option("--disc-radius", cfg.disc_radius, "disc radius for the directions command (0: 3 x average edge)");
    app.add_option("-o,--out", cfg.out, "output directory")->capture_default_str();
    app.add_flag("--svg", cfg.svg, "write per-frame section SVG files");
}

/// Parses arguments, runs one subcommand, writes its files. Returns the exit code.
inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr)
{
    RunConfig cfg;
    CLI::App app{"Ball-end milling tool path planner"};
    app.set_config("--config", "", "key=value configuration file");
    app.require_subcommand(1);
    app.fallthrough();
    add_shared_options(app, cfg);
    auto* patch = app.add_subcommand("patch", "processed patch at one contact point");
    auto* path = app.add_subcommand("path", "tool path(s) under a strategy");
    auto* report = app.add_subcommand("report", "aggregate diagnostics of path JSON files");
    report->add_option("files", cfg.reports, "path JSON files");
    auto* offset = app.add_subcommand("offset", "per-frame offset debug output");
    auto* dirs = app.add_subcommand("directions", "per-facet principal directions from geodesic discs");
    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    }
    cfg.command = patch->parsed() ? "patch" : path->parsed() ? "path" : report->parsed() ? "report"
                : offset->parsed()                                                  ? "offset"
                                                                                    : "directions";
    (void)dirs;
    try {
        cfg.validate();
        FileSet files;
        if (cfg.command == "patch")
            files = cmd_patch(cfg);
        else if (cfg.command == "path")
            files = cmd_path(cfg);
        else if (cfg.command == "report")
            files = cmd_report(cfg);
        else if (cfg.command == "offset")
            files = cmd_offset(cfg);
        else
            files = cmd_directions(cfg);
        write_files(cfg.out, files);
        for (const auto& [name, text] : files)
            out << (std::filesystem::path(cfg.out) / name).string() << '\n';
        return 0;
    } catch (const MillError& e) {
        err << "error: " << e.what() << '\n';
        return exit_code(e.kind());
    } catch (const std::filesystem::filesystem_error& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    }
}

} // namespace millpath::cli
