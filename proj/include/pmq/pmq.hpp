#pragma once

#include "pmq/constants.hpp"
#include "pmq/experiments.hpp"
#include "pmq/geometry.hpp"
#include "pmq/grid_function.hpp"
#include "pmq/limit_process.hpp"
#include "pmq/mu2.hpp"
#include "pmq/rng.hpp"
#include "pmq/special_functions.hpp"
#include "pmq/stats.hpp"
#include "pmq/tree.hpp"
