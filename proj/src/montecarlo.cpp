#include "gsr/montecarlo.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "gsr/errors.hpp"
#include "gsr/model.hpp"
#include "gsr/parallel.hpp"

namespace gsr {
namespace {

constexpr std::int64_t kBlockReps = 4096;

void validate_plan(const SimulationPlan& plan) {
  validate_params(plan.design.params);
  if (!std::isfinite(plan.design.limit) || plan.design.limit <= 0.0)
    throw config_error("simulate: limit must be positive and finite");
  if (!std::isfinite(plan.design.headstart) || plan.design.headstart < 0.0)
    throw config_error("simulate: headstart must be finite and nonnegative");
  if (plan.replications < 1)
    throw config_error("simulate: need at least one replication");
  if (plan.change_point < -1)
    throw config_error("simulate: change_point must be -1 (never) or >= 0");
  if (plan.max_steps < 0)
    throw config_error("simulate: max_steps must be nonnegative");
}

// Step cap: generous multiples of the expected run length, so censoring is a
// sign of a misconfigured plan rather than a routine event.  User-supplied
// caps below 10x the expected length are rejected as biased.
std::int64_t resolve_cap(const SimulationPlan& plan) {
  const double mu = plan.design.params.mu;
  const double xi_value = xi(plan.design.params);
  const double pre_scale =
      std::max(1.0, plan.design.limit / xi_value - plan.design.headstart);

  double expected;
  double auto_cap;
  if (plan.change_point < 0) {
    expected = pre_scale;
    auto_cap = 50.0 * pre_scale + 50.0;
  } else {
    const double delay_scale = 2.0 * std::log1p(plan.design.limit) / (mu * mu) + 10.0;
    const double k = static_cast<double>(plan.change_point);
    expected = std::min(pre_scale, k + delay_scale);
    auto_cap = k + 50.0 * delay_scale + 50.0;
  }

  if (plan.max_steps > 0) {
    if (plan.change_point >= 0 && plan.max_steps <= plan.change_point)
      throw config_error("simulate: max_steps must exceed the change point");
    if (static_cast<double>(plan.max_steps) < 10.0 * expected)
      throw config_error(
          "simulate: max_steps is under 10x the expected run length; raise it "
          "or pass 0 to size the cap automatically");
    return plan.max_steps;
  }
  if (!(auto_cap < 9e18))
    throw numerical_error("simulate: automatic step cap overflows; supply max_steps");
  return static_cast<std::int64_t>(std::ceil(auto_cap));
}

template <class F>
RunLength run_loop(const ChartDesign& design, std::int64_t max_steps, F&& observation) {
  const double mu = design.params.mu;
  double stat = design.headstart;
  for (std::int64_t n = 1; n <= max_steps; ++n) {
    const double x = observation(n);
    stat = (1.0 + stat) * std::exp(mu * (x - 0.5 * mu));
    if (stat >= design.limit) return {n, false};
  }
  return {max_steps, true};
}

RunLength one_replication(const ChartDesign& design, std::int64_t change_point,
                          std::int64_t cap, std::uint64_t seed, std::int64_t rep) {
  ReplicationRng rng(seed, rep);
  const double mu = design.params.mu;
  return run_loop(design, cap, [&](std::int64_t n) {
    double x = rng.next_normal();
    if (change_point >= 0 && n > change_point) x += mu;
    return x;
  });
}

// Exact per-block tallies; grand totals are reduced in block order after the
// parallel section, so sums are identical for any thread count.
struct BlockStat {
  std::int64_t used = 0;       // runs entering the mean
  std::int64_t discarded = 0;  // stopped at or before the change point
  std::int64_t censored = 0;
  std::int64_t sum = 0;
  unsigned __int128 sum_sq = 0;
};

std::vector<BlockStat> run_blocks(const SimulationPlan& plan, std::int64_t cap,
                                  int jobs, bool condition_on_survival) {
  const std::int64_t blocks = (plan.replications + kBlockReps - 1) / kBlockReps;
  std::vector<BlockStat> stats(static_cast<std::size_t>(blocks));
  parallel_for_blocks(blocks, jobs, [&](std::int64_t b) {
    BlockStat s;
    const std::int64_t first = b * kBlockReps;
    const std::int64_t last = std::min(first + kBlockReps, plan.replications);
    for (std::int64_t rep = first; rep < last; ++rep) {
      const RunLength run =
          one_replication(plan.design, plan.change_point, cap, plan.seed, rep);
      if (condition_on_survival && !run.censored && run.t <= plan.change_point) {
        ++s.discarded;
        continue;
      }
      if (run.censored) {
        ++s.censored;
        continue;
      }
      const std::int64_t value =
          condition_on_survival ? run.t - plan.change_point : run.t;
      ++s.used;
      s.sum += value;
      s.sum_sq += static_cast<unsigned __int128>(value) *
                  static_cast<unsigned __int128>(value);
    }
    stats[static_cast<std::size_t>(b)] = s;
  });
  return stats;
}

struct Totals {
  std::int64_t used = 0;
  std::int64_t discarded = 0;
  std::int64_t censored = 0;
  __int128 sum = 0;
  unsigned __int128 sum_sq = 0;
};

Totals reduce(const std::vector<BlockStat>& stats) {
  Totals t;
  for (const BlockStat& s : stats) {
    t.used += s.used;
    t.discarded += s.discarded;
    t.censored += s.censored;
    t.sum += s.sum;
    t.sum_sq += s.sum_sq;
  }
  return t;
}

EstimateWithError mean_with_error(const Totals& t) {
  const long double n = static_cast<long double>(t.used);
  const long double sum = static_cast<long double>(t.sum);
  const long double mean = sum / n;
  long double se = 0.0L;
  if (t.used > 1) {
    const long double ss = static_cast<long double>(t.sum_sq) - sum * sum / n;
    se = std::sqrt(std::max(ss, 0.0L) / (n - 1.0L) / n);
  }
  return {static_cast<double>(mean), static_cast<double>(se), t.used};
}

}  // namespace

RunLength run_length_with(const ChartDesign& design, std::int64_t max_steps,
                          const std::function<double(std::int64_t)>& observation) {
  validate_params(design.params);
  if (!std::isfinite(design.limit) || design.limit <= 0.0)
    throw config_error("simulate: limit must be positive and finite");
  if (!std::isfinite(design.headstart) || design.headstart < 0.0)
    throw config_error("simulate: headstart must be finite and nonnegative");
  if (max_steps < 1) throw config_error("simulate: max_steps must be positive");
  return run_loop(design, max_steps, observation);
}

RunLength simulate_run_length(const SimulationPlan& plan, std::int64_t replication) {
  validate_plan(plan);
  if (replication < 0 || replication >= plan.replications)
    throw config_error("simulate: replication index out of range");
  return one_replication(plan.design, plan.change_point, resolve_cap(plan),
                         plan.seed, replication);
}

EstimateWithError estimate_arl(const SimulationPlan& plan, int jobs) {
  validate_plan(plan);
  if (plan.change_point >= 0)
    throw config_error("estimate_arl: change_point must be -1 (no change)");
  const Totals t = reduce(run_blocks(plan, resolve_cap(plan), jobs, false));
  if (t.censored > 0)
    throw numerical_error(
        "estimate_arl: " + std::to_string(t.censored) +
        " replications hit the step cap; the mean would be biased low");
  return mean_with_error(t);
}

EstimateWithError estimate_add_k(const SimulationPlan& plan, int jobs) {
  validate_plan(plan);
  if (plan.change_point < 0)
    throw config_error("estimate_add_k: change_point must be >= 0");
  const Totals t = reduce(run_blocks(plan, resolve_cap(plan), jobs, true));
  if (t.used < 100)
    throw numerical_error(
        "estimate_add_k: only " + std::to_string(t.used) +
        " replications survived the change point; raise replications");
  if (t.censored * 100 > t.used)
    throw numerical_error("estimate_add_k: over 1% of surviving runs were censored");
  return mean_with_error(t);
}

}  // namespace gsr
