#include "gsr/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "gsr/errors.hpp"

namespace gsr {

void validate_design(const ChartDesign& design) {
  validate_params(design.params);
  if (!(design.limit > 0.0) || !std::isfinite(design.limit))
    throw config_error("design: limit must be positive and finite");
  if (!(design.headstart >= 0.0) || !(design.headstart < design.limit))
    throw config_error("design: headstart must lie in [0, limit)");
}

std::pair<double, long> sadd_of(const DelayProfile& profile) {
  if (profile.add.empty())
    throw config_error("sadd_of: empty profile");
  if (!profile.converged && !profile.capped)
    throw numerical_error("sadd_of: profile neither reached steady state nor its "
                          "step cap; its supremum is not certified");
  long arg = 0;
  double best = profile.add[0];
  for (long k = 1; k < static_cast<long>(profile.add.size()); ++k) {
    if (profile.add[k] > best) {
      best = profile.add[k];
      arg = k;
    }
  }
  // The steady-state extrapolant wins only when it clears the best finite
  // value by more than a relative dead band; ties go to the finite k so the
  // reported argmax is stable under roundoff.
  if (profile.steady_state_add - best > 1e-9 * std::max(1.0, best))
    return {profile.steady_state_add, -1};
  return {best, arg};
}

PerformanceReport evaluate_with(ChartSolver& solver, double headstart) {
  const double r = headstart;
  if (!(r >= 0.0) || !(r < solver.limit()))
    throw config_error("evaluate: headstart must lie in [0, limit)");

  PerformanceReport report;
  report.resolution = solver.resolution();
  report.arl = solver.arl(r);
  report.add0 = solver.delay0(r);
  report.profile = solver.profile(r);
  const auto [sadd, argmax] = sadd_of(report.profile);
  report.sadd = sadd;
  report.sadd_argmax = argmax;
  report.iadd = solver.iadd(r);
  report.riadd = report.iadd / report.arl;
  // At r = 0 this expression reduces termwise to iadd / arl, so stadd and
  // riadd agree bit-for-bit there, as they should.
  report.stadd = (r * report.add0 + report.iadd) / (report.arl + r);
  report.lower_bound = report.stadd;
  return report;
}

PerformanceReport evaluate(const ChartDesign& design, const NumericsConfig& cfg) {
  validate_design(design);
  ChartSolver solver(design.params, design.limit, cfg);
  return evaluate_with(solver, design.headstart);
}

}  // namespace gsr
