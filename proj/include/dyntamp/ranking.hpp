#pragma once

#include <vector>

#include "dyntamp/symbolic.hpp"
#include "dyntamp/trajopt.hpp"

namespace dyntamp::sym {

// Grounds each skeleton with a straight-line waypoint interpolation between
// its phase keyframes, evaluates the quadratic smoothness objective on that
// path and sorts ascending by cost (stable, so the lexicographic tie order
// from the search is preserved among equal costs).
std::vector<Skeleton> rank_skeletons(std::vector<Skeleton> skeletons,
                                     const kin::Workspace& ws,
                                     const opt::SolverConfig& cfg);

// Interpolation cost of one skeleton (exposed for tests).
double interpolation_cost(const Skeleton& skeleton, const kin::Workspace& ws,
                          const opt::SolverConfig& cfg);

}  // namespace dyntamp::sym
