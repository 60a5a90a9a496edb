#pragma once

#include <memory>
#include <vector>

#include "gsr/metrics.hpp"

namespace gsr {

/*
 * Design problem: among charts with a fixed ARL to false alarm gamma, find
 * the headstart minimizing the worst-case delay.  Concretely, for each
 * candidate r the limit A(r) is calibrated so that l(r) = gamma, the chart is
 * evaluated, and the objective
 *
 *     g(r) = sadd(r) - stadd(r)   >= 0
 *
 * (worst-case delay minus its design-independent lower bound at this ARL) is
 * minimized over r.  g is continuous but has a downward kink at the optimum
 * where the binding change-point switches between k = 0 and k -> infinity,
 * so the search is derivative-free: a geometric grid scan brackets the
 * minimum and golden-section refines it.
 */

struct CalibrationResult {
  double limit = 0.0;      // calibrated A
  double arl_achieved = 0.0;
  int evaluations = 0;     // solver builds spent
  int resolution = 0;
  double seed_limit = 0.0;  // analytic first guess xi * (gamma + r)
  double xi_value = 0.0;
};

// Finds A with |l(r) - gamma| <= cfg.rel_tol * gamma.  The ARL is strictly
// increasing in A, so the root is unique; the seed above comes from the
// approximation ARL ~ A/xi - r and usually lands within a few percent.
CalibrationResult calibrate_threshold(const ModelParams& params, double headstart,
                                      double gamma, const NumericsConfig& cfg = {});

// Same, handing back the solver already built at the calibrated limit.
struct CalibratedSolver {
  CalibrationResult result;
  std::unique_ptr<ChartSolver> solver;
};
CalibratedSolver calibrate_solver(const ModelParams& params, double headstart,
                                  double gamma, const NumericsConfig& cfg = {});

// One point of the constraint curve: calibrate A(r), then evaluate.
struct ProbePoint {
  double r = 0.0;
  double limit = 0.0;
  double arl = 0.0;
  double sadd = 0.0;
  double lower_bound = 0.0;
  double gap = 0.0;  // sadd - lower_bound
};

struct ProbeResult {
  ProbePoint point;
  PerformanceReport report;
  CalibrationResult calibration;
};

ProbeResult probe_design(const ModelParams& params, double gamma, double r,
                         const NumericsConfig& cfg = {});

struct OptimizerConfig {
  NumericsConfig numerics;
  int scan_points = 33;       // geometric grid size, including r = 0
  double r_hi = 0.0;          // search ceiling; 0 picks gamma * xi / 2
  double span = 500.0;        // ratio r_hi / first positive grid point
  double refine_rel_tol = 1e-3;  // golden-section r-resolution, relative
  int max_extensions = 3;     // r_hi growth attempts when argmin hits the end
  int max_escalations = 2;    // resolution doublings when the optimum moves
};

struct DesignResult {
  double mu = 0.0;
  double gamma = 0.0;
  double r_star = 0.0;
  double a_star = 0.0;
  double sadd = 0.0;
  double lower_bound = 0.0;
  double gap = 0.0;
  double arl_achieved = 0.0;
  PerformanceReport report;         // full metrics at (r_star, a_star)
  std::vector<ProbePoint> probes;   // the scan grid, ascending in r
  int resolution = 0;               // resolution of the accepted evaluation
  int evaluations = 0;              // total probes spent
  int extensions = 0;
  int escalations = 0;
  bool dense_fallback = false;      // scan looked non-unimodal
};

/*
 * Full search: geometric scan over [0, r_hi] (extended if the minimum sits on
 * the upper end), golden-section refinement to refine_rel_tol, then a
 * verification pass at doubled resolution around the candidate.  If the
 * candidate is no longer a local minimum there, the refinement is redone at
 * the doubled resolution, at most max_escalations times.  The returned
 * metrics always come from the highest resolution touched.
 */
DesignResult optimize_design(const ModelParams& params, double gamma,
                             const OptimizerConfig& cfg = {});

}  // namespace gsr
