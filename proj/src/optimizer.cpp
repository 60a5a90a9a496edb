#include "gsr/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include "gsr/errors.hpp"

namespace gsr {
namespace {

constexpr int kMaxBracketEvals = 50;
constexpr int kMaxRootEvals = 60;
constexpr double kInvPhi = 0.6180339887498949;  // 1/golden ratio

struct LimitEval {
  double limit = 0.0;
  double arl = 0.0;
  std::unique_ptr<ChartSolver> solver;
};

// Strict-weak order on probes: smaller gap wins, ties go to the smaller r so
// repeated searches with equal objective values stay reproducible.
bool better(const ProbePoint& a, const ProbePoint& b) {
  if (a.gap != b.gap) return a.gap < b.gap;
  return a.r < b.r;
}

}  // namespace

CalibratedSolver calibrate_solver(const ModelParams& params, double headstart,
                                  double gamma, const NumericsConfig& cfg) {
  validate_params(params);
  if (!std::isfinite(headstart) || headstart < 0.0)
    throw config_error("calibrate: headstart must be finite and nonnegative");
  if (!std::isfinite(gamma) || gamma <= 1.0)
    throw config_error("calibrate: gamma must exceed 1");
  if (!(cfg.rel_tol > 0.0) || cfg.rel_tol > 1e-2)
    throw config_error("calibrate: rel_tol must lie in (0, 1e-2]");

  const double xi_value = xi(params);
  const double seed = xi_value * (gamma + headstart);

  NumericsConfig sub = cfg;
  if (sub.resolution <= 0) sub.resolution = auto_resolution(params.mu, seed);

  // A must stay above the headstart or the start value is already absorbing.
  const double floor_limit =
      std::max(headstart > 0.0 ? headstart * (1.0 + 1e-9) : 0.0, 1e-6);

  int evals = 0;
  auto run = [&](double limit) -> LimitEval {
    limit = std::max(limit, floor_limit);
    auto solver = std::make_unique<ChartSolver>(params, limit, sub);
    const double arl = solver->arl(headstart);
    ++evals;
    return {limit, arl, std::move(solver)};
  };
  auto finish = [&](LimitEval&& e) -> CalibratedSolver {
    CalibrationResult result;
    result.limit = e.limit;
    result.arl_achieved = e.arl;
    result.evaluations = evals;
    result.resolution = sub.resolution;
    result.seed_limit = seed;
    result.xi_value = xi_value;
    return {result, std::move(e.solver)};
  };
  auto within = [&](const LimitEval& e) {
    return std::abs(e.arl - gamma) <= cfg.rel_tol * gamma;
  };

  LimitEval cur = run(seed);
  if (within(cur)) return finish(std::move(cur));

  // Bracket the root of f(A) = l(A) - gamma.  f is strictly increasing.
  bool have_lo = false, have_hi = false;
  double lo = 0.0, hi = 0.0;
  auto absorb = [&](const LimitEval& e) {
    if (e.arl < gamma) {
      if (!have_lo || e.limit > lo) lo = e.limit;
      have_lo = true;
    } else {
      if (!have_hi || e.limit < hi) hi = e.limit;
      have_hi = true;
    }
  };
  absorb(cur);

  // One slope-corrected step first: dl/dA is close to 1/xi.
  {
    double next = cur.limit - (cur.arl - gamma) * xi_value;
    next = std::clamp(next, cur.limit / 3.0, cur.limit * 3.0);
    LimitEval e = run(next);
    if (within(e)) return finish(std::move(e));
    absorb(e);
    cur = std::move(e);
  }

  while (!(have_lo && have_hi)) {
    if (evals >= kMaxBracketEvals)
      throw numerical_error("calibrate: failed to bracket the target ARL");
    double trial;
    if (!have_hi) {
      trial = (have_lo ? lo : cur.limit) * 1.6;
    } else {
      trial = hi / 1.6;
      if (trial <= floor_limit) {
        LimitEval e = run(floor_limit);
        if (within(e)) return finish(std::move(e));
        if (e.arl > gamma)
          throw config_error(
              "calibrate: gamma below the ARL at the smallest feasible limit");
        absorb(e);
        continue;
      }
    }
    LimitEval e = run(trial);
    if (within(e)) return finish(std::move(e));
    absorb(e);
  }

  // Safeguarded secant on the bracket; bisect when the secant step leaves it
  // or the endpoint values stop giving a usable slope.
  double flo = -1.0, fhi = 1.0;  // signs only matter until refreshed below
  {
    LimitEval e = run(lo);
    if (within(e)) return finish(std::move(e));
    flo = e.arl - gamma;
    if (flo > 0.0) throw numerical_error("calibrate: ARL not increasing in A");
  }
  {
    LimitEval e = run(hi);
    if (within(e)) return finish(std::move(e));
    fhi = e.arl - gamma;
    if (fhi < 0.0) throw numerical_error("calibrate: ARL not increasing in A");
  }
  while (evals < kMaxRootEvals) {
    double trial = hi - fhi * (hi - lo) / (fhi - flo);
    const double width = hi - lo;
    if (!std::isfinite(trial) || trial <= lo + 0.01 * width ||
        trial >= hi - 0.01 * width)
      trial = 0.5 * (lo + hi);
    LimitEval e = run(trial);
    if (within(e)) return finish(std::move(e));
    const double f = e.arl - gamma;
    if (f < 0.0) {
      lo = e.limit;
      flo = f;
    } else {
      hi = e.limit;
      fhi = f;
    }
    if (hi - lo <= 1e-12 * hi)
      throw numerical_error("calibrate: bracket collapsed before reaching tolerance");
  }
  throw numerical_error("calibrate: no convergence within the evaluation budget");
}

CalibrationResult calibrate_threshold(const ModelParams& params, double headstart,
                                      double gamma, const NumericsConfig& cfg) {
  return calibrate_solver(params, headstart, gamma, cfg).result;
}

ProbeResult probe_design(const ModelParams& params, double gamma, double r,
                         const NumericsConfig& cfg) {
  CalibratedSolver cal = calibrate_solver(params, r, gamma, cfg);
  ProbeResult out;
  out.report = evaluate_with(*cal.solver, r);
  out.calibration = cal.result;
  out.point.r = r;
  out.point.limit = cal.result.limit;
  out.point.arl = out.report.arl;
  out.point.sadd = out.report.sadd;
  out.point.lower_bound = out.report.lower_bound;
  out.point.gap = out.report.sadd - out.report.lower_bound;
  return out;
}

namespace {

std::vector<double> geometric_grid(double r_hi, int points, double span) {
  std::vector<double> grid;
  grid.reserve(static_cast<std::size_t>(points));
  grid.push_back(0.0);
  const double rho = std::pow(span, -1.0 / static_cast<double>(points - 2));
  for (int i = 1; i < points; ++i)
    grid.push_back(r_hi * std::pow(rho, static_cast<double>(points - 1 - i)));
  return grid;
}

// Count interior local minima of the scanned objective, ignoring wiggles
// below a small absolute dead band so solver noise does not masquerade as
// extra modes.
int count_local_minima(const std::vector<ProbePoint>& pts) {
  double scale = 0.0;
  for (const ProbePoint& p : pts) scale = std::max(scale, std::abs(p.gap));
  const double eps = 1e-9 * std::max(scale, 1.0);
  std::vector<int> signs;
  for (std::size_t i = 1; i < pts.size(); ++i) {
    const double d = pts[i].gap - pts[i - 1].gap;
    const int s = d > eps ? 1 : (d < -eps ? -1 : 0);
    if (s != 0 && (signs.empty() || signs.back() != s)) signs.push_back(s);
  }
  int minima = 0;
  for (std::size_t i = 1; i < signs.size(); ++i)
    if (signs[i - 1] == -1 && signs[i] == 1) ++minima;
  // A trailing descent means the minimum sits at the right edge; count it so
  // callers treat the scan as single-troughed only when the shape is clean.
  if (!signs.empty() && signs.back() == -1) ++minima;
  if (minima == 0 && !signs.empty() && signs.front() == 1) minima = 1;  // at r = 0
  return minima;
}

}  // namespace

DesignResult optimize_design(const ModelParams& params, double gamma,
                             const OptimizerConfig& cfg) {
  validate_params(params);
  if (!std::isfinite(gamma) || gamma <= 1.0)
    throw config_error("optimize: gamma must exceed 1");
  if (cfg.scan_points < 9)
    throw config_error("optimize: need at least 9 scan points");
  if (!(cfg.span > 1.0)) throw config_error("optimize: span must exceed 1");
  if (!(cfg.refine_rel_tol > 0.0) || cfg.refine_rel_tol > 0.1)
    throw config_error("optimize: refine_rel_tol must lie in (0, 0.1]");
  if (cfg.r_hi < 0.0 || !std::isfinite(cfg.r_hi))
    throw config_error("optimize: r_hi must be finite and nonnegative");

  const double xi_value = xi(params);
  NumericsConfig base = cfg.numerics;
  if (base.resolution <= 0)
    base.resolution = auto_resolution(params.mu, xi_value * gamma);

  DesignResult out;
  out.mu = params.mu;
  out.gamma = gamma;

  int evals = 0;
  auto probe = [&](double r, const NumericsConfig& nc) {
    ++evals;
    return probe_design(params, gamma, r, nc);
  };

  // Phase 1: geometric scan.  The headstart scale is set by the calibrated
  // limit, roughly gamma * xi, and useful headstarts stay below half of it.
  double r_hi = cfg.r_hi > 0.0 ? cfg.r_hi : 0.5 * gamma * xi_value;
  std::vector<double> grid;
  std::vector<ProbePoint> scan;
  std::size_t argmin = 0;
  auto run_scan = [&]() {
    grid = geometric_grid(r_hi, cfg.scan_points, cfg.span);
    scan.clear();
    scan.reserve(grid.size());
    argmin = 0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
      scan.push_back(probe(grid[i], base).point);
      if (better(scan[i], scan[argmin])) argmin = i;
    }
  };
  run_scan();
  while (argmin + 1 == grid.size() && out.extensions < cfg.max_extensions) {
    r_hi *= 1.6;
    ++out.extensions;
    run_scan();
  }

  if (count_local_minima(scan) > 1) {
    // Shape looks multimodal; rescan densely and trust that bracket instead.
    out.dense_fallback = true;
    const int dense_points = 4 * (cfg.scan_points - 1) + 1;
    grid.clear();
    scan.clear();
    argmin = 0;
    for (int i = 0; i < dense_points; ++i) {
      grid.push_back(r_hi * static_cast<double>(i) /
                     static_cast<double>(dense_points - 1));
      scan.push_back(probe(grid[i], base).point);
      if (better(scan[static_cast<std::size_t>(i)], scan[argmin]))
        argmin = static_cast<std::size_t>(i);
    }
  }
  out.probes = scan;

  const double bracket_lo = grid[argmin > 0 ? argmin - 1 : 0];
  const double bracket_hi = grid[std::min(argmin + 1, grid.size() - 1)];
  const double r_floor = grid[1];  // absolute scale for tolerances near r = 0

  // Phase 2: golden-section on [lo, hi], keeping the best probe seen.  The
  // comparison uses <= so ties shrink toward smaller r.
  auto refine = [&](double lo, double hi, const NumericsConfig& nc) {
    ProbeResult best = probe(scan[argmin].r, nc);
    auto consider = [&](ProbeResult&& p) {
      if (better(p.point, best.point)) best = std::move(p);
    };
    double a = lo, b = hi;
    double x1 = b - kInvPhi * (b - a);
    double x2 = a + kInvPhi * (b - a);
    ProbeResult p1 = probe(x1, nc);
    ProbeResult p2 = probe(x2, nc);
    while (b - a > cfg.refine_rel_tol * std::max(0.5 * (a + b), r_floor)) {
      if (p1.point.gap <= p2.point.gap) {
        b = x2;
        x2 = x1;
        p2 = std::move(p1);
        x1 = b - kInvPhi * (b - a);
        p1 = probe(x1, nc);
      } else {
        a = x1;
        x1 = x2;
        p1 = std::move(p2);
        x2 = a + kInvPhi * (b - a);
        p2 = probe(x2, nc);
      }
    }
    consider(std::move(p1));
    consider(std::move(p2));
    return best;
  };

  NumericsConfig cur_cfg = base;
  ProbeResult final = refine(bracket_lo, bracket_hi, cur_cfg);

  // Phase 3: verification at doubled resolution.  If the candidate is still
  // a local minimum against a +-0.5% stencil, accept the doubled-resolution
  // evaluation; otherwise redo the refinement there.
  for (;;) {
    NumericsConfig doubled = cur_cfg;
    doubled.resolution = std::min(cur_cfg.resolution * 2, 16384);
    const double h = 5.0 * cfg.refine_rel_tol;
    const double rm = final.point.r;
    const double rl = rm * (1.0 - h);
    const double rr = rm > 0.0 ? rm * (1.0 + h) : h * r_floor;
    ProbeResult pm = probe(rm, doubled);
    ProbeResult pl = rl < rm ? probe(rl, doubled) : ProbeResult(pm);
    ProbeResult pr = probe(rr, doubled);
    if (pm.point.gap <= pl.point.gap && pm.point.gap <= pr.point.gap) {
      final = std::move(pm);
      break;
    }
    if (out.escalations >= cfg.max_escalations) {
      // Budget exhausted: keep the best stencil point rather than searching.
      final = std::move(pm);
      if (better(pl.point, final.point)) final = std::move(pl);
      if (better(pr.point, final.point)) final = std::move(pr);
      break;
    }
    ++out.escalations;
    cur_cfg = doubled;
    final = refine(bracket_lo, bracket_hi, cur_cfg);
  }

  out.r_star = final.point.r;
  out.a_star = final.point.limit;
  out.sadd = final.report.sadd;
  out.lower_bound = final.report.lower_bound;
  out.gap = out.sadd - out.lower_bound;
  out.arl_achieved = final.report.arl;
  out.report = std::move(final.report);
  out.resolution = out.report.resolution;
  out.evaluations = evals;

  if (out.gap < -1e-9 * std::max(1.0, out.sadd))
    throw numerical_error("optimize: worst-case delay fell below its lower bound");
  if (!(out.r_star < out.a_star))
    throw numerical_error("optimize: headstart reached the control limit");
  return out;
}

}  // namespace gsr
