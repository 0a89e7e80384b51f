#pragma once

#include "lppsim/errors.hpp"
#include "lppsim/rng.hpp"
#include "lppsim/stats.hpp"
#include "lppsim/parallel.hpp"
#include "lppsim/env.hpp"
#include "lppsim/paths.hpp"
#include "lppsim/discrepancy.hpp"
#include "lppsim/dp.hpp"
#include "lppsim/shape.hpp"
#include "lppsim/freepath.hpp"
#include "lppsim/loopdecomp.hpp"
#include "lppsim/variance.hpp"
#include "lppsim/svg.hpp"
#include "lppsim/experiment.hpp"
