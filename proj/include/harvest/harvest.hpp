#pragma once

#include "harvest/chain.hpp"
#include "harvest/config.hpp"
#include "harvest/grid.hpp"
#include "harvest/io.hpp"
#include "harvest/model.hpp"
#include "harvest/simulate.hpp"
#include "harvest/solver.hpp"
#include "harvest/svg.hpp"
#include "harvest/verify.hpp"
#include "harvest/version.hpp"
