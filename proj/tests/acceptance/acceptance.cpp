// Acceptance gate: ten numbered end-to-end checks with frozen reference
// values and tolerances pinned as constants below.  Each criterion prints
// exactly one PASS/FAIL line (with a short detail, and the first failure
// messages when red); the process exits nonzero if any selected criterion
// fails.
//
// Usage: acceptance [--all] [--criterion N ...] [--cli PATH]
//
// Criteria share expensive artifacts — optimized designs and calibrated
// headstart grids — through a lazily filled cache, so running one criterion
// pays only for what it needs.  --cli is required by criterion 10 only.

#include <gsr/cli.hpp>
#include <gsr/metrics.hpp>
#include <gsr/model.hpp>
#include <gsr/montecarlo.hpp>
#include <gsr/optimizer.hpp>
#include <gsr/solver.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <iterator>
#include <limits>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <sys/wait.h>

namespace {

// ----------------------------------------------------------------------
// Pinned tolerances, budgets, and frozen reference values
// ----------------------------------------------------------------------

constexpr double kXiAnchor02 = 0.89004;   // limit constant at mu = 0.2
constexpr double kXiAnchor05 = 0.74762;   // limit constant at mu = 0.5
constexpr double kXiAnchorTol = 5e-5;     // absolute

struct ReferenceCell {
  double gamma;
  double mu;
  double r_star;
  double a_star;
  double sadd;
  double lower_bound;
};

// Criterion 2: moderate shifts, 1% relative, <= 120 s per cell.
constexpr ReferenceCell kModerateCells[] = {
    {100.0, 1.0, 3.05, 57.31, 5.46, 5.46},
    {100.0, 0.5, 10.32, 82.14, 12.68, 12.66},
    {500.0, 0.5, 14.36, 384.21, 22.52, 22.52},
    {300.0, 0.8, 5.70, 191.76, 10.13, 10.13},
};
constexpr double kModerateRelTol = 0.01;
constexpr double kModerateBudgetSec = 120.0;

// Criterion 3: large run-length budgets, 1% relative, <= 300 s per cell.
constexpr ReferenceCell kLargeBudgetCells[] = {
    {1000.0, 1.0, 4.66, 562.54, 9.65, 9.64},
    {900.0, 0.9, 5.57, 536.98, 11.10, 11.10},
};
constexpr double kLargeBudgetRelTol = 0.01;
constexpr double kLargeBudgetSec = 300.0;

// Criterion 4: faint shift, 2% relative, untimed (slow by nature).
constexpr ReferenceCell kFaintCell = {1000.0, 0.2, 75.34, 956.81, 94.09, 94.01};
constexpr double kFaintRelTol = 0.02;

// Criterion 5 grids: 33-point geometric headstart grid on [0, gamma*xi/2]
// (same construction the optimizer scans) for each (mu, gamma) pair.
constexpr double kGridMus[] = {0.2, 0.5, 1.0};
constexpr double kGridGammas[] = {100.0, 500.0, 1000.0};
constexpr int kGridPoints = 33;
constexpr double kGridSpan = 500.0;
constexpr double kDominanceSlack = -1e-9;  // sadd - lower_bound >= this

// Criterion 6: run-length lower bound holds exactly; threshold approximation
// arl ~ limit/xi - r within 3% relative.
constexpr double kArlApproxRelTol = 0.03;

// Criterion 8: Monte Carlo vs solver, 3 standard errors, <= 300 s total.
struct McDesignRef {
  double mu;
  double headstart;
  double limit;
};
constexpr McDesignRef kMcDesigns[] = {
    {0.3, 21.96, 102.11}, {0.5, 10.32, 82.14},  {0.7, 5.89, 70.14},
    {1.0, 3.05, 57.31},   {0.7, 6.72, 137.28},  {1.0, 3.77, 169.78},
};
constexpr std::int64_t kMcReplications = 100000;
constexpr std::uint64_t kMcSeed = 20260825;
constexpr double kMcSigmas = 3.0;
constexpr double kMcBudgetSec = 300.0;

// Criterion 9: doubling the solver resolution moves each reported metric by
// less than 0.05% (headstart held fixed, limit recalibrated).
constexpr double kSelfConvergenceRelTol = 5e-4;

// Criterion 10 commands (run through the CLI binary).
constexpr const char* kTableArgs =
    "table --paper-tables 1 --gamma 100 --mu 0.5,1.0 --jobs 1";
constexpr const char* kSimulateArgs =
    "simulate --mu 0.5 --limit 82.14 --r 10.32 "
    "--replications 100000 --seed 7";

// ----------------------------------------------------------------------
// Small utilities
// ----------------------------------------------------------------------

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmts(const char* fmt, ...) {
  char buffer[512];
  va_list args;
  va_start(args, fmt);
  std::vsnprintf(buffer, sizeof buffer, fmt, args);
  va_end(args);
  return buffer;
}

double rel_err(double value, double reference) {
  return std::abs(value - reference) / std::abs(reference);
}

void expect(std::vector<std::string>& failures, bool ok, std::string what) {
  if (!ok) failures.push_back(std::move(what));
}

std::string join_failures(const std::vector<std::string>& failures) {
  std::string out;
  const std::size_t shown = std::min<std::size_t>(failures.size(), 2);
  for (std::size_t i = 0; i < shown; ++i) {
    if (i > 0) out += " | ";
    out += failures[i];
  }
  if (failures.size() > shown)
    out += fmts(" (+%zu more)", failures.size() - shown);
  return out;
}

struct CommandResult {
  bool ran = false;
  int exit_code = -1;
  std::string output;
};

CommandResult run_command(const std::string& binary, const std::string& args) {
  CommandResult result;
  const std::string cmd = "'" + binary + "' " + args + " 2>/dev/null";
  FILE* pipe = ::popen(cmd.c_str(), "r");
  if (pipe == nullptr) return result;
  char buffer[4096];
  size_t got = 0;
  while ((got = std::fread(buffer, 1, sizeof(buffer), pipe)) > 0)
    result.output.append(buffer, got);
  const int status = ::pclose(pipe);
  if (status == -1 || !WIFEXITED(status)) return result;
  result.ran = true;
  result.exit_code = WEXITSTATUS(status);
  return result;
}

// ----------------------------------------------------------------------
// Shared, lazily computed artifacts
// ----------------------------------------------------------------------

struct TimedDesign {
  gsr::DesignResult result;
  double seconds = 0.0;
};

class Context {
 public:
  std::string cli_path;

  const TimedDesign& design(double gamma, double mu) {
    const auto key = std::make_pair(gamma, mu);
    auto it = designs_.find(key);
    if (it != designs_.end()) return it->second;
    const auto start = Clock::now();
    TimedDesign timed;
    timed.result = gsr::optimize_design(gsr::ModelParams{mu}, gamma);
    timed.seconds = seconds_since(start);
    return designs_.emplace(key, std::move(timed)).first->second;
  }

  // The criterion-5 grid: probe every headstart on the geometric grid with a
  // freshly calibrated limit, at a resolution pinned once per grid.
  const std::vector<gsr::ProbeResult>& grid(double mu, double gamma) {
    const auto key = std::make_pair(mu, gamma);
    auto it = grids_.find(key);
    if (it != grids_.end()) return it->second;

    const gsr::ModelParams params{mu};
    const double xi_value = xi_of(mu);
    gsr::NumericsConfig numerics;
    numerics.resolution = gsr::auto_resolution(mu, xi_value * gamma);

    const double r_hi = gamma * xi_value / 2.0;
    std::vector<double> headstarts;
    headstarts.reserve(kGridPoints);
    headstarts.push_back(0.0);
    const double rho =
        std::pow(kGridSpan, -1.0 / static_cast<double>(kGridPoints - 2));
    for (int i = 1; i < kGridPoints; ++i)
      headstarts.push_back(
          r_hi * std::pow(rho, static_cast<double>(kGridPoints - 1 - i)));

    std::vector<gsr::ProbeResult> probes;
    probes.reserve(headstarts.size());
    for (const double r : headstarts)
      probes.push_back(gsr::probe_design(params, gamma, r, numerics));
    return grids_.emplace(key, std::move(probes)).first->second;
  }

  double xi_of(double mu) {
    auto it = xi_.find(mu);
    if (it != xi_.end()) return it->second;
    return xi_.emplace(mu, gsr::xi(gsr::ModelParams{mu})).first->second;
  }

 private:
  std::map<std::pair<double, double>, TimedDesign> designs_;
  std::map<std::pair<double, double>, std::vector<gsr::ProbeResult>> grids_;
  std::map<double, double> xi_;
};

// Shared body of criteria 2-4: optimize each cell and compare all four
// reported values against the frozen references.
std::string check_cells(Context& ctx, const ReferenceCell* cells,
                        std::size_t count, double rel_tol, double budget_sec,
                        std::vector<std::string>& failures) {
  double worst_rel = 0.0;
  double slowest = 0.0;
  for (std::size_t i = 0; i < count; ++i) {
    const auto& cell = cells[i];
    const auto& timed = ctx.design(cell.gamma, cell.mu);
    const auto& res = timed.result;
    const auto tag = fmts("gamma=%g mu=%g", cell.gamma, cell.mu);

    const std::pair<const char*, std::pair<double, double>> values[] = {
        {"r_star", {res.r_star, cell.r_star}},
        {"a_star", {res.a_star, cell.a_star}},
        {"sadd", {res.sadd, cell.sadd}},
        {"lower_bound", {res.lower_bound, cell.lower_bound}},
    };
    for (const auto& [name, pair] : values) {
      const double rel = rel_err(pair.first, pair.second);
      worst_rel = std::max(worst_rel, rel);
      expect(failures, rel <= rel_tol,
             fmts("%s: %s=%.4f vs %.4f (%.2f%% > %.2f%%)", tag.c_str(), name,
                  pair.first, pair.second, 100.0 * rel, 100.0 * rel_tol));
    }
    slowest = std::max(slowest, timed.seconds);
    if (budget_sec > 0.0)
      expect(failures, timed.seconds <= budget_sec,
             fmts("%s: took %.1f s (budget %.0f s)", tag.c_str(),
                  timed.seconds, budget_sec));
  }
  std::string detail =
      fmts("%zu cell%s, worst deviation %.3f%% (tol %.0f%%), slowest %.1f s",
           count, count == 1 ? "" : "s", 100.0 * worst_rel, 100.0 * rel_tol,
           slowest);
  if (budget_sec > 0.0) detail += fmts(" (budget %.0f s)", budget_sec);
  return detail;
}

// ----------------------------------------------------------------------
// The ten criteria
// ----------------------------------------------------------------------

std::string criterion1(Context&, std::vector<std::string>& failures) {
  const auto xi02 = gsr::xi_detail(gsr::ModelParams{0.2});
  const auto xi05 = gsr::xi_detail(gsr::ModelParams{0.5});
  expect(failures, std::abs(xi02.value - kXiAnchor02) <= kXiAnchorTol,
         fmts("xi(0.2)=%.8f vs %.5f (tol %.0e)", xi02.value, kXiAnchor02,
              kXiAnchorTol));
  expect(failures, std::abs(xi05.value - kXiAnchor05) <= kXiAnchorTol,
         fmts("xi(0.5)=%.8f vs %.5f (tol %.0e)", xi05.value, kXiAnchor05,
              kXiAnchorTol));
  return fmts("xi(0.2)=%.6f [%ld terms], xi(0.5)=%.6f [%ld terms], tol 5e-5",
              xi02.value, xi02.terms, xi05.value, xi05.terms);
}

std::string criterion2(Context& ctx, std::vector<std::string>& failures) {
  return check_cells(ctx, kModerateCells, std::size(kModerateCells),
                     kModerateRelTol, kModerateBudgetSec, failures);
}

std::string criterion3(Context& ctx, std::vector<std::string>& failures) {
  return check_cells(ctx, kLargeBudgetCells, std::size(kLargeBudgetCells),
                     kLargeBudgetRelTol, kLargeBudgetSec, failures);
}

std::string criterion4(Context& ctx, std::vector<std::string>& failures) {
  std::string detail = check_cells(ctx, &kFaintCell, 1, kFaintRelTol,
                                   /*budget_sec=*/0.0, failures);
  const auto& timed = ctx.design(kFaintCell.gamma, kFaintCell.mu);
  detail += fmts(" (untimed), resolution %d", timed.result.resolution);
  return detail;
}

std::string criterion5(Context& ctx, std::vector<std::string>& failures) {
  int points = 0;
  double min_slack = std::numeric_limits<double>::infinity();
  for (const double mu : kGridMus) {
    for (const double gamma : kGridGammas) {
      const auto& probes = ctx.grid(mu, gamma);
      for (const auto& probe : probes) {
        const double slack = probe.point.sadd - probe.point.lower_bound;
        min_slack = std::min(min_slack, slack);
        expect(failures, slack >= kDominanceSlack,
               fmts("mu=%g gamma=%g r=%.4f: sadd-lower_bound=%.3e < %.0e", mu,
                    gamma, probe.point.r, slack, kDominanceSlack));
        ++points;
      }
    }
  }
  return fmts("%d calibrated points on 9 grids, min(sadd-lower_bound)=%.3e "
              "(slack floor %.0e)",
              points, min_slack, kDominanceSlack);
}

std::string criterion6(Context& ctx, std::vector<std::string>& failures) {
  struct Entry {
    double mu, r, limit, arl;
  };
  std::vector<Entry> entries;

  auto add_design = [&entries](const gsr::DesignResult& res) {
    entries.push_back({res.mu, res.r_star, res.a_star, res.arl_achieved});
    for (const auto& p : res.probes)
      entries.push_back({res.mu, p.r, p.limit, p.arl});
  };
  for (const auto& cell : kModerateCells)
    add_design(ctx.design(cell.gamma, cell.mu).result);
  for (const auto& cell : kLargeBudgetCells)
    add_design(ctx.design(cell.gamma, cell.mu).result);
  add_design(ctx.design(kFaintCell.gamma, kFaintCell.mu).result);
  for (const double mu : kGridMus)
    for (const double gamma : kGridGammas)
      for (const auto& probe : ctx.grid(mu, gamma))
        entries.push_back(
            {mu, probe.point.r, probe.point.limit, probe.point.arl});

  double worst_rel = 0.0;
  for (const auto& e : entries) {
    expect(failures, e.arl >= e.limit - e.r,
           fmts("mu=%g r=%.4f A=%.4f: arl=%.4f < A-r=%.4f", e.mu, e.r, e.limit,
                e.arl, e.limit - e.r));
    const double approx = e.limit / ctx.xi_of(e.mu) - e.r;
    const double rel = std::abs(e.arl - approx) / e.arl;
    worst_rel = std::max(worst_rel, rel);
    expect(failures, rel <= kArlApproxRelTol,
           fmts("mu=%g r=%.4f A=%.4f: |arl-(A/xi-r)|/arl=%.3f%% > %.0f%%",
                e.mu, e.r, e.limit, 100.0 * rel, 100.0 * kArlApproxRelTol));
  }
  return fmts("%zu designs: arl >= A-r everywhere, approximation off by "
              "<= %.3f%% (tol %.0f%%)",
              entries.size(), 100.0 * worst_rel, 100.0 * kArlApproxRelTol);
}

std::string criterion7(Context& ctx, std::vector<std::string>& failures) {
  int checked = 0;
  for (const double mu : kGridMus) {
    for (const double gamma : kGridGammas) {
      const auto& probe = ctx.grid(mu, gamma).front();
      const auto tag = fmts("mu=%g gamma=%g", mu, gamma);
      expect(failures, probe.point.r == 0.0,
             fmts("%s: first grid point is r=%g, not 0", tag.c_str(),
                  probe.point.r));
      expect(failures, probe.report.sadd_argmax == 0,
             fmts("%s: sadd_argmax=%ld at r=0", tag.c_str(),
                  probe.report.sadd_argmax));
      expect(failures, probe.report.stadd == probe.report.riadd,
             fmts("%s: stadd=%.17g != riadd=%.17g at r=0", tag.c_str(),
                  probe.report.stadd, probe.report.riadd));
      ++checked;
    }
  }
  return fmts("%d zero-headstart designs: worst delay at k=0 and "
              "stadd == riadd bit-for-bit",
              checked);
}

std::string criterion8(Context&, std::vector<std::string>& failures) {
  const auto start = Clock::now();
  double max_z = 0.0;
  int design_index = 0;
  for (const auto& ref : kMcDesigns) {
    const gsr::ModelParams params{ref.mu};
    const gsr::ChartDesign design{params, ref.headstart, ref.limit};
    const auto tag = fmts("mu=%g r=%g A=%g", ref.mu, ref.headstart, ref.limit);

    gsr::ChartSolver solver(params, ref.limit);
    const double arl_ref = solver.arl(ref.headstart);
    const auto profile = solver.profile(ref.headstart);
    if (profile.add.size() < 6) {
      failures.push_back(fmts("%s: delay profile too short (%zu entries)",
                              tag.c_str(), profile.add.size()));
      ++design_index;
      continue;
    }

    struct Quantity {
      const char* name;
      std::int64_t change_point;
      double reference;
    };
    const Quantity quantities[] = {
        {"arl", -1, arl_ref},
        {"add_0", 0, profile.add[0]},
        {"add_5", 5, profile.add[5]},
    };
    int quantity_index = 0;
    for (const auto& q : quantities) {
      gsr::SimulationPlan plan;
      plan.design = design;
      plan.change_point = q.change_point;
      plan.replications = kMcReplications;
      plan.seed = kMcSeed + 97 * static_cast<std::uint64_t>(design_index) +
                  static_cast<std::uint64_t>(quantity_index);
      const auto est = (q.change_point < 0) ? gsr::estimate_arl(plan)
                                            : gsr::estimate_add_k(plan);
      expect(failures, est.se > 0.0,
             fmts("%s %s: zero standard error", tag.c_str(), q.name));
      const double z =
          est.se > 0.0 ? (est.estimate - q.reference) / est.se : 0.0;
      max_z = std::max(max_z, std::abs(z));
      expect(failures, std::abs(z) <= kMcSigmas,
             fmts("%s %s: estimate=%.4f vs solver=%.4f, |z|=%.2f > %.0f",
                  tag.c_str(), q.name, est.estimate, q.reference, std::abs(z),
                  kMcSigmas));
      ++quantity_index;
    }
    ++design_index;
  }
  const double elapsed = seconds_since(start);
  expect(failures, elapsed <= kMcBudgetSec,
         fmts("took %.1f s (budget %.0f s)", elapsed, kMcBudgetSec));
  return fmts("6 designs x {arl, add_0, add_5} at %lld replications: "
              "max |z| = %.2f (gate %.0f), %.1f s",
              static_cast<long long>(kMcReplications), max_z, kMcSigmas,
              seconds_since(start));
}

std::string criterion9(Context& ctx, std::vector<std::string>& failures) {
  double max_drift = 0.0;
  for (const auto& cell : kModerateCells) {
    const auto& base = ctx.design(cell.gamma, cell.mu).result;
    const auto tag = fmts("gamma=%g mu=%g", cell.gamma, cell.mu);

    gsr::NumericsConfig doubled;
    doubled.resolution = 2 * base.resolution;
    auto calibrated = gsr::calibrate_solver(gsr::ModelParams{cell.mu},
                                            base.r_star, cell.gamma, doubled);
    const auto report =
        gsr::evaluate_with(*calibrated.solver, base.r_star);

    const std::pair<const char*, std::pair<double, double>> metrics[] = {
        {"a_star", {calibrated.result.limit, base.a_star}},
        {"sadd", {report.sadd, base.sadd}},
        {"lower_bound", {report.lower_bound, base.lower_bound}},
    };
    for (const auto& [name, pair] : metrics) {
      const double rel = rel_err(pair.first, pair.second);
      max_drift = std::max(max_drift, rel);
      expect(failures, rel < kSelfConvergenceRelTol,
             fmts("%s: %s drifts %.4f%% (>= %.2f%%) at resolution %d",
                  tag.c_str(), name, 100.0 * rel,
                  100.0 * kSelfConvergenceRelTol, doubled.resolution));
    }
  }
  return fmts("4 designs re-solved at doubled resolution (headstart fixed, "
              "limit recalibrated): max drift %.4f%% (tol %.2f%%)",
              100.0 * max_drift, 100.0 * kSelfConvergenceRelTol);
}

std::string criterion10(Context& ctx, std::vector<std::string>& failures) {
  if (ctx.cli_path.empty()) {
    failures.push_back("path to the command-line binary not supplied (--cli)");
    return "skipped: no --cli path";
  }

  const auto table_a = run_command(ctx.cli_path, kTableArgs);
  const auto table_b = run_command(ctx.cli_path, kTableArgs);
  expect(failures, table_a.ran && table_a.exit_code == gsr::cli::kExitOk,
         fmts("table run 1 exited %d", table_a.exit_code));
  expect(failures, table_b.ran && table_b.exit_code == gsr::cli::kExitOk,
         fmts("table run 2 exited %d", table_b.exit_code));
  expect(failures, !table_a.output.empty(), "table produced no output");
  expect(failures, table_a.output == table_b.output,
         "table CSV differs between identical runs");

  const auto sim_1 =
      run_command(ctx.cli_path, std::string(kSimulateArgs) + " --jobs 1");
  const auto sim_4 =
      run_command(ctx.cli_path, std::string(kSimulateArgs) + " --jobs 4");
  expect(failures, sim_1.ran && sim_1.exit_code == gsr::cli::kExitOk,
         fmts("simulate --jobs 1 exited %d", sim_1.exit_code));
  expect(failures, sim_4.ran && sim_4.exit_code == gsr::cli::kExitOk,
         fmts("simulate --jobs 4 exited %d", sim_4.exit_code));
  expect(failures, !sim_1.output.empty(), "simulate produced no output");
  expect(failures, sim_1.output == sim_4.output,
         "simulate output differs between 1 and 4 worker threads");

  return fmts("table rerun identical (%zu bytes); simulate 1-vs-4 threads "
              "identical (%zu bytes)",
              table_a.output.size(), sim_1.output.size());
}

}  // namespace

int main(int argc, char** argv) {
  bool all = false;
  std::set<int> selected;
  std::string cli_path;

  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--all") {
      all = true;
    } else if (arg == "--criterion" && i + 1 < argc) {
      const int id = std::atoi(argv[++i]);
      if (id < 1 || id > 10) {
        std::fprintf(stderr, "criterion id out of range: %s\n", argv[i]);
        return 2;
      }
      selected.insert(id);
    } else if (arg == "--cli" && i + 1 < argc) {
      cli_path = argv[++i];
    } else {
      std::fprintf(stderr,
                   "usage: %s [--all] [--criterion N ...] [--cli PATH]\n",
                   argv[0]);
      return 2;
    }
  }
  if (all || selected.empty())
    for (int id = 1; id <= 10; ++id) selected.insert(id);

  Context ctx;
  ctx.cli_path = cli_path;

  struct Criterion {
    int id;
    const char* name;
    std::string (*run)(Context&, std::vector<std::string>&);
  };
  const Criterion criteria[] = {
      {1, "limit-constant anchors", criterion1},
      {2, "optimizer reference designs, moderate shifts", criterion2},
      {3, "optimizer reference designs, large budgets", criterion3},
      {4, "optimizer reference design, faint shift", criterion4},
      {5, "delay bound dominance on headstart grids", criterion5},
      {6, "run-length bound and threshold approximation", criterion6},
      {7, "zero-headstart structure", criterion7},
      {8, "Monte Carlo agreement with the solver", criterion8},
      {9, "resolution self-convergence", criterion9},
      {10, "CLI determinism", criterion10},
  };

  int failed = 0;
  int ran = 0;
  for (const auto& criterion : criteria) {
    if (selected.find(criterion.id) == selected.end()) continue;
    ++ran;
    std::vector<std::string> failures;
    const auto start = Clock::now();
    const std::string detail = criterion.run(ctx, failures);
    const double elapsed = seconds_since(start);
    const bool pass = failures.empty();
    if (!pass) ++failed;
    std::printf("C%-2d %-4s %-48s %7.1fs  %s%s%s\n", criterion.id,
                pass ? "PASS" : "FAIL", criterion.name, elapsed,
                detail.c_str(), pass ? "" : " -- ",
                pass ? "" : join_failures(failures).c_str());
    std::fflush(stdout);
  }

  std::printf("acceptance: %d/%d criteria passed\n", ran - failed, ran);
  return failed == 0 ? 0 : 1;
}
