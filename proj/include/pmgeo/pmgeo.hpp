#pragma once

#include "pmgeo/align.hpp"
#include "pmgeo/baselines.hpp"
#include "pmgeo/camera.hpp"
#include "pmgeo/error.hpp"
#include "pmgeo/io.hpp"
#include "pmgeo/losses.hpp"
#include "pmgeo/metrics.hpp"
#include "pmgeo/parallel.hpp"
#include "pmgeo/random.hpp"
#include "pmgeo/stats.hpp"
#include "pmgeo/subproblem.hpp"
#include "pmgeo/types.hpp"
