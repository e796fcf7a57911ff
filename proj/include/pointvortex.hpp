#pragma once

#include "pointvortex/analysis.hpp"
#include "pointvortex/barycenter.hpp"
#include "pointvortex/clustering.hpp"
#include "pointvortex/degeneracy.hpp"
#include "pointvortex/disc.hpp"
#include "pointvortex/dynamics.hpp"
#include "pointvortex/errors.hpp"
#include "pointvortex/integrator.hpp"
#include "pointvortex/kernel.hpp"
#include "pointvortex/scenario.hpp"
#include "pointvortex/selfsimilar.hpp"
#include "pointvortex/state.hpp"
#include "pointvortex/vec2.hpp"
