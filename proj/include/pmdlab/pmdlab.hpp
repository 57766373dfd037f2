#pragma once

/**
 * pmdlab — a header-only laboratory for tabular policy mirror descent with
 * temporal-difference critics.
 *
 * Include this header to pull in the whole library:
 *   - mdp.hpp       model, policies, backup operators, exact evaluation
 *   - mirror.hpp    mirror maps, divergences, the mirror-descent step
 *   - chain.hpp     ergodicity, stationary laws, mixing estimates, samplers
 *   - oracle.hpp    value iteration and exact mirror-descent references
 *   - algo.hpp      the three stochastic runners
 *   - analysis.hpp  certified error bounds, schedules, gap decomposition
 *   - harness.hpp   instance generator and the invariant check suite
 *   - io.hpp        JSON/CSV serialization
 *   - cli.hpp       the command-line front end
 */

#include "algo.hpp"
#include "analysis.hpp"
#include "chain.hpp"
#include "cli.hpp"
#include "errors.hpp"
#include "harness.hpp"
#include "io.hpp"
#include "mdp.hpp"
#include "mirror.hpp"
#include "oracle.hpp"
#include "rng.hpp"
