#pragma once

// Umbrella header: Hamiltonian catalog, stability diagnostics, stochastic
// integration, ensemble statistics, the phase-space Master Equation solver
// and the scenario front end.

#include "stochmech/config.hpp"
#include "stochmech/covariance_oracle.hpp"
#include "stochmech/ensemble.hpp"
#include "stochmech/errors.hpp"
#include "stochmech/fokker_planck.hpp"
#include "stochmech/hamiltonian.hpp"
#include "stochmech/parallel.hpp"
#include "stochmech/phase_state.hpp"
#include "stochmech/rng.hpp"
#include "stochmech/scenario.hpp"
#include "stochmech/sde.hpp"
#include "stochmech/stability.hpp"
#include "stochmech/version.hpp"
