#pragma once

#include "millpath/common.hpp"
#include "millpath/mesh.hpp"
#include "millpath/mesh_gen.hpp"
#include "millpath/section.hpp"
#include "millpath/offset.hpp"
#include "millpath/tool_contact.hpp"
#include "millpath/patch_analysis.hpp"
#include "millpath/direction_planner.hpp"
#include "millpath/analytic_surface.hpp"
#include "millpath/path_sim.hpp"
