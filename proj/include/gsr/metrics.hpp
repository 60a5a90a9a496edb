#pragma once

#include <utility>

#include "gsr/model.hpp"
#include "gsr/solver.hpp"

namespace gsr {

// One concrete chart: headstart R_0 = r and control limit A, 0 <= r < A.
struct ChartDesign {
  ModelParams params;
  double headstart = 0.0;
  double limit = 0.0;
};

void validate_design(const ChartDesign& design);

/*
 * The full set of operating characteristics for one design:
 *
 *   arl    = l(r)                          expected run length, no change
 *   add0   = d(r)                          delay when the change is at 0
 *   sadd   = sup_k add_k                   worst-case delay over change-points
 *   iadd   = I(r) = sum_k E_k[(T-k)^+]     integral delay
 *   riadd  = iadd / arl                    relative integral delay
 *   stadd  = (r*add0 + iadd) / (arl + r)   stationary delay
 *
 * stadd is also the lower bound on the worst-case delay of *any* chart with
 * the same ARL, hence lower_bound below is the identical value; the gap
 * sadd - lower_bound measures how close this design is to unimprovable.
 */
struct PerformanceReport {
  double arl = 0.0;
  double add0 = 0.0;
  double sadd = 0.0;
  long sadd_argmax = 0;  // -1: supremum attained in the k -> infinity limit
  double iadd = 0.0;
  double riadd = 0.0;
  double stadd = 0.0;
  double lower_bound = 0.0;
  DelayProfile profile;
  int resolution = 0;
};

PerformanceReport evaluate(const ChartDesign& design, const NumericsConfig& cfg = {});

// Same, reusing an already-built solver (the design's limit is the solver's).
PerformanceReport evaluate_with(ChartSolver& solver, double headstart);

// (value, argmax) of a delay profile; argmax -1 flags the steady-state limit.
// Refuses profiles that neither flattened nor ran to their cap.
std::pair<double, long> sadd_of(const DelayProfile& profile);

}  // namespace gsr
