#include "millpath/millpath.hpp"

#include <cstdio>

using namespace millpath;

int main()
{
    const ToolSpec tool{5.0, 0.5};
    const auto mesh = make_flat_mesh(20.0, 40);
    const auto patch = processed_patch(mesh, mesh_contact(mesh, nearest_on_mesh(mesh, Vec3(0.1, 0.1, 0)).facet), tool, 12);

    std::printf("processed patch on a flat mesh, r = %g, eps = %g\n", tool.radius, tool.tolerance);
    for (const auto& d : patch_diameters(patch))
        std::printf("  theta %6.2f deg  diameter %.6f\n", d.dir.theta * 180.0 / kPi, d.length);
    std::printf("closed form 2 sqrt(2 r eps - eps^2) = %.6f\n",
                2.0 * std::sqrt(2.0 * tool.radius * tool.tolerance - tool.tolerance * tool.tolerance));

    const auto torus = make_surface("torus");
    const AnalyticBackend backend(*torus);
    PathOptions opt;
    opt.tool = {1.0, 0.1};
    opt.max_steps = 10;
    const auto start = analytic_contact(*torus, Vec2(0.0, 0.0));
    const auto widest = generate_path(backend, start, opt);
    opt.strategy = Strategy::Blended;
    const auto blended = generate_path(backend, start, opt);

    std::printf("\ntorus, r = 1, eps = 0.1, 10 steps\n");
    for (const auto& d : path_report({widest, blended}, widest))
        std::printf("  %-8s inclination %.4f .. %.4f rad, mean width %.6f (%+.3f%%)\n", d.strategy.c_str(),
                    d.inclination_min, d.inclination_max, d.width_mean, d.width_change_percent);
}
