#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <vector>

#include "gsr/errors.hpp"
#include "gsr/montecarlo.hpp"
#include "gsr/solver.hpp"

using namespace gsr;

namespace {

const ChartDesign kSmallDesign{ModelParams{1.0}, 0.0, 20.0};

SimulationPlan small_plan(std::int64_t replications, std::uint64_t seed) {
  SimulationPlan plan;
  plan.design = kSmallDesign;
  plan.replications = replications;
  plan.seed = seed;
  return plan;
}

}  // namespace

TEST_CASE("replication streams are reproducible and well distributed") {
  ReplicationRng a(42, 7), b(42, 7), c(42, 8);
  bool all_equal = true, any_equal = false;
  for (int i = 0; i < 1000; ++i) {
    const std::uint64_t va = a.next_u64();
    all_equal = all_equal && (va == b.next_u64());
    any_equal = any_equal || (va == c.next_u64());
  }
  CHECK(all_equal);        // same (seed, replication) replays exactly
  CHECK_FALSE(any_equal);  // different replication index decorrelates

  ReplicationRng rng(123, 0);
  double sum = 0.0, min_u = 1.0, max_u = 0.0;
  const int n = 1000000;
  for (int i = 0; i < n; ++i) {
    const double u = rng.next_uniform();
    sum += u;
    min_u = std::min(min_u, u);
    max_u = std::max(max_u, u);
  }
  CHECK(min_u > 0.0);
  CHECK(max_u < 1.0);
  CHECK(std::abs(sum / n - 0.5) < 4.0 / std::sqrt(12.0 * n));

  ReplicationRng gauss(9, 0);
  double zsum = 0.0, zsq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double z = gauss.next_normal();
    zsum += z;
    zsq += z * z;
  }
  CHECK(std::abs(zsum / n) < 4.0 / std::sqrt(static_cast<double>(n)));
  CHECK(zsq / n == doctest::Approx(1.0).epsilon(0.01));
}

TEST_CASE("stubbed observations force exact crossing times") {
  const ChartDesign design{ModelParams{0.5}, 1.0, 2.0};
  // One step: R_1 = (1+1) e^{0.5 (3 - 0.25)} >> 2.
  const RunLength one =
      run_length_with(design, 50, [](std::int64_t) { return 3.0; });
  CHECK(one.t == 1);
  CHECK_FALSE(one.censored);

  // The crossing condition A <= (1+r) e^{mu x - mu^2/2} solved for x gives
  // the exact one-step boundary; just above crosses, just below does not.
  const double boundary = (std::log(2.0 / (1.0 + 1.0)) / 0.5) + 0.25;
  const RunLength hit =
      run_length_with(design, 50, [&](std::int64_t) { return boundary + 1e-9; });
  CHECK(hit.t == 1);
  const RunLength miss_first = run_length_with(
      design, 50, [&](std::int64_t n) { return n == 1 ? boundary - 1e-9 : 10.0; });
  CHECK(miss_first.t == 2);

  // Observations pinned far below keep the statistic down forever.
  const RunLength censored =
      run_length_with(design, 50, [](std::int64_t) { return -10.0; });
  CHECK(censored.censored);
  CHECK(censored.t == 50);
}

TEST_CASE("a headstart at or above the limit still takes one step") {
  SimulationPlan plan;
  plan.design = ChartDesign{ModelParams{1.0}, 5.0, 2.0};
  plan.replications = 4;
  const RunLength run = simulate_run_length(plan, 0);
  CHECK(run.t >= 1);
  CHECK_FALSE(run.censored);
}

TEST_CASE("run-length mean matches the integral-equation value") {
  const SimulationPlan plan = small_plan(200000, 2024);
  const EstimateWithError est = estimate_arl(plan);
  CHECK(est.effective_replications == plan.replications);
  CHECK(est.se > 0.0);
  ChartSolver solver(kSmallDesign.params, kSmallDesign.limit, {});
  const double exact = solver.arl(0.0);
  CHECK(std::abs(est.estimate - exact) < 3.0 * est.se);
  // The general lower bound ARL >= A - r holds with room to spare.
  CHECK(est.estimate + 3.0 * est.se >= kSmallDesign.limit);
}

TEST_CASE("identical results for any thread count") {
  const SimulationPlan plan = small_plan(50000, 99);
  const EstimateWithError serial = estimate_arl(plan, 1);
  const EstimateWithError pooled = estimate_arl(plan, 4);
  CHECK(serial.estimate == pooled.estimate);
  CHECK(serial.se == pooled.se);
  CHECK(serial.effective_replications == pooled.effective_replications);
}

TEST_CASE("delay estimates condition on surviving the change point") {
  SimulationPlan plan;
  plan.design = ChartDesign{ModelParams{0.5}, 10.32, 82.14};
  plan.replications = 100000;
  plan.seed = 31337;

  plan.change_point = 0;  // no run can stop at or before time zero
  const EstimateWithError add0 = estimate_add_k(plan);
  CHECK(add0.effective_replications == plan.replications);
  ChartSolver solver(plan.design.params, plan.design.limit, {});
  CHECK(std::abs(add0.estimate - solver.delay0(10.32)) < 3.0 * add0.se);

  plan.change_point = 5;
  const EstimateWithError add5 = estimate_add_k(plan);
  CHECK(add5.effective_replications < plan.replications);
  const DelayProfile prof = solver.profile(10.32);
  CHECK(std::abs(add5.estimate - prof.add[5]) < 3.0 * add5.se);

  // The discarded fraction is a binomial estimate of 1 - P(T > 5).
  const double p = prof.survival[5];
  const double accepted =
      static_cast<double>(add5.effective_replications) / plan.replications;
  CHECK(std::abs(accepted - p) <
        3.0 * std::sqrt(p * (1.0 - p) / plan.replications));
}

TEST_CASE("censoring invalidates the run-length mean") {
  SimulationPlan plan;
  plan.design = ChartDesign{ModelParams{1.0}, 0.0, 30.0};
  plan.replications = 300000;
  plan.seed = 5150;
  plan.max_steps = 540;  // ~10x the expected run length: rare but real censoring
  CHECK_THROWS_AS(estimate_arl(plan), numerical_error);
}

TEST_CASE("too few survivors is refused with guidance") {
  SimulationPlan plan;
  plan.design = ChartDesign{ModelParams{1.0}, 0.0, 3.0};
  plan.replications = 10000;
  plan.seed = 8;
  plan.change_point = 60;  // survival beyond 60 is ~e^-11
  CHECK_THROWS_AS(estimate_add_k(plan), numerical_error);
}

TEST_CASE("plan validation") {
  SimulationPlan plan = small_plan(100, 1);
  plan.replications = 0;
  CHECK_THROWS_AS(estimate_arl(plan), config_error);

  plan = small_plan(100, 1);
  plan.change_point = -2;
  CHECK_THROWS_AS(estimate_arl(plan), config_error);

  plan = small_plan(100, 1);
  plan.change_point = 3;
  CHECK_THROWS_AS(estimate_arl(plan), config_error);  // ARL needs no change

  plan = small_plan(100, 1);
  CHECK_THROWS_AS(estimate_add_k(plan), config_error);  // delay needs one

  plan = small_plan(100, 1);
  plan.max_steps = 40;  // far below 10x the expected run length
  CHECK_THROWS_AS(estimate_arl(plan), config_error);

  plan = small_plan(100, 1);
  plan.change_point = 50;
  plan.max_steps = 45;  // cap below the change point can never accept
  CHECK_THROWS_AS(estimate_add_k(plan), config_error);

  plan = small_plan(100, 1);
  CHECK_THROWS_AS(simulate_run_length(plan, 100), config_error);
  CHECK_THROWS_AS(simulate_run_length(plan, -1), config_error);
}
