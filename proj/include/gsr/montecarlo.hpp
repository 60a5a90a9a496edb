#pragma once

#include <cstdint>
#include <functional>

#include "gsr/metrics.hpp"
#include "gsr/normal.hpp"

namespace gsr {

/*
 * Simulation oracle for the chart: draws run lengths directly from the
 * recursion R_n = (1 + R_{n-1}) * exp{mu (X_n - mu/2)} and estimates the same
 * quantities the integral-equation solver computes, with standard errors.
 * Everything is reproducible: replication i consumes its own counter-based
 * stream derived from (seed, i), so results are identical no matter how the
 * work is split across threads.
 */

struct SimulationPlan {
  ChartDesign design;
  std::int64_t change_point = -1;  // last in-control sample index; -1 = never
  std::int64_t replications = 1;
  std::uint64_t seed = 0;
  std::int64_t max_steps = 0;  // per-run cap; 0 picks ~50x the expected length
};

struct RunLength {
  std::int64_t t = 0;
  bool censored = false;  // hit max_steps before crossing the limit
};

struct EstimateWithError {
  double estimate = 0.0;
  double se = 0.0;
  std::int64_t effective_replications = 0;
};

// Stateless-seekable generator: output j of replication i depends only on
// (seed, i, j).  Uniforms are strictly inside (0, 1) so the normal inverse
// CDF never sees 0 or 1.
class ReplicationRng {
 public:
  ReplicationRng(std::uint64_t seed, std::int64_t replication)
      : key_(mix(mix(seed) ^ (kStride * (static_cast<std::uint64_t>(replication) + 1)))) {}

  std::uint64_t next_u64() { return mix(key_ + kStride * ++counter_); }

  double next_uniform() {
    return (static_cast<double>(next_u64() >> 12) + 0.5) * 0x1p-52;
  }

  double next_normal() { return normal_quantile(next_uniform()); }

 private:
  static constexpr std::uint64_t kStride = 0x9E3779B97F4A7C15ull;

  static std::uint64_t mix(std::uint64_t x) {
    x ^= x >> 30;
    x *= 0xBF58476D1CE4E5B9ull;
    x ^= x >> 27;
    x *= 0x94D049BB133111EBull;
    x ^= x >> 31;
    return x;
  }

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

// Runs the recursion on caller-supplied observations X_1, X_2, ...; used by
// tests to force exact crossing times.  Stops at the first n with R_n >= A.
RunLength run_length_with(const ChartDesign& design, std::int64_t max_steps,
                          const std::function<double(std::int64_t)>& observation);

// One replication of the plan: X_n ~ N(0,1) for n <= change_point, N(mu,1)
// after.  Deterministic given (plan.seed, replication).
RunLength simulate_run_length(const SimulationPlan& plan, std::int64_t replication);

// Mean run length with no change (plan.change_point must be -1).  Any
// censored replication invalidates the mean, so it raises an error.
EstimateWithError estimate_arl(const SimulationPlan& plan, int jobs = 1);

// Mean of T - k over runs with T > k (plan.change_point = k >= 0); runs
// stopping at or before k are discarded by the conditioning and reported via
// effective_replications.  Censored runs are excluded from the average and
// tolerated only while they stay under 1% of the accepted count.  Fewer than
// 100 accepted runs is refused outright.
EstimateWithError estimate_add_k(const SimulationPlan& plan, int jobs = 1);

}  // namespace gsr
