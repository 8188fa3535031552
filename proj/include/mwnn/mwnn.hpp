#pragma once

#include "mwnn/errors.hpp"
#include "mwnn/rng.hpp"
#include "mwnn/angles.hpp"
#include "mwnn/core_linalg.hpp"
#include "mwnn/basis.hpp"
#include "mwnn/nelder_mead.hpp"
#include "mwnn/bounds.hpp"
#include "mwnn/measure.hpp"
#include "mwnn/solver.hpp"
#include "mwnn/experiments.hpp"
