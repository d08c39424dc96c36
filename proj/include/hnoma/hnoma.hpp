#ifndef HNOMA_HNOMA_HPP
#define HNOMA_HNOMA_HPP

#include "hnoma/adaptive.hpp"
#include "hnoma/analysis.hpp"
#include "hnoma/ess_solver.hpp"
#include "hnoma/game.hpp"
#include "hnoma/noma_sim.hpp"
#include "hnoma/replicator.hpp"
#include "hnoma/rng.hpp"
#include "hnoma/special_math.hpp"

#endif  // HNOMA_HNOMA_HPP
