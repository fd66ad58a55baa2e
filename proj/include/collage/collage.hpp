#pragma once

#include "collage/config.hpp"
#include "collage/cost.hpp"
#include "collage/dp.hpp"
#include "collage/error.hpp"
#include "collage/evo.hpp"
#include "collage/graph.hpp"
#include "collage/graph_io.hpp"
#include "collage/matcher.hpp"
#include "collage/node_set.hpp"
#include "collage/oracle.hpp"
#include "collage/pattern.hpp"
#include "collage/pattern_gen.hpp"
#include "collage/placement.hpp"
#include "collage/placement_cost.hpp"
#include "collage/registry.hpp"
#include "collage/report.hpp"
