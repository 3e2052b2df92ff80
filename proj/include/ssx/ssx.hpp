#pragma once

#include "ssx/error.hpp"
#include "ssx/rng.hpp"
#include "ssx/numeric.hpp"
#include "ssx/linalg.hpp"
#include "ssx/kernels.hpp"
#include "ssx/marginals.hpp"
#include "ssx/scaling.hpp"
#include "ssx/grid.hpp"
#include "ssx/pathsim.hpp"
#include "ssx/parallel.hpp"
#include "ssx/stats.hpp"
#include "ssx/functionals.hpp"
#include "ssx/asymptotics.hpp"
#include "ssx/palm.hpp"
#include "ssx/harness.hpp"
#include "ssx/conditions.hpp"
#include "ssx/config.hpp"
#include "ssx/cli.hpp"
