#pragma once

#include "stlmon/ast.hpp"
#include "stlmon/metrics.hpp"
#include "stlmon/parser.hpp"
#include "stlmon/robustness.hpp"
#include "stlmon/sim.hpp"
#include "stlmon/trace.hpp"
