#pragma once

#include "snls/blowup.hpp"
#include "snls/config.hpp"
#include "snls/experiments.hpp"
#include "snls/field_io.hpp"
#include "snls/grid.hpp"
#include "snls/groundstate.hpp"
#include "snls/integrator.hpp"
#include "snls/montecarlo.hpp"
#include "snls/noise.hpp"
#include "snls/norms.hpp"
#include "snls/observables.hpp"
#include "snls/spectral.hpp"
