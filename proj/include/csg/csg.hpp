#pragma once

#include "csg/game_model.hpp"
#include "csg/evaluation.hpp"
#include "csg/simplex.hpp"
#include "csg/best_response.hpp"
#include "csg/discretization.hpp"
#include "csg/strategy_transform.hpp"
#include "csg/equilibrium.hpp"
