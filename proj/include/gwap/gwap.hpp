#pragma once

#include "gwap/baselines.hpp"
#include "gwap/core.hpp"
#include "gwap/engine.hpp"
#include "gwap/error.hpp"
#include "gwap/metrics.hpp"
#include "gwap/simulator.hpp"
