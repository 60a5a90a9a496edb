#pragma once

#include <Eigen/Dense>
#include <memory>
#include <optional>
#include <vector>

#include "gsr/model.hpp"
#include "gsr/quadrature.hpp"

namespace gsr {

/*
 * Everything here rests on one construction.  Let T = min{n >= 1 : R_n >= A}
 * and let K_s(x, y) = kernel_density(x, y) under regime s, restricted to the
 * continuation region y in (0, A).  Conditioning on the first step gives
 * renewal equations of the second kind:
 *
 *   run length   l(x) = 1 + Int_0^A K_pre(x,y)  l(y) dy     (ARL to false alarm)
 *   delay        d(x) = 1 + Int_0^A K_post(x,y) d(y) dy     (all-post-change delay)
 *   int. delay   I(x) = d(x) + Int_0^A K_pre(x,y) I(y) dy   (sum_k E_k[(T-k)^+])
 *
 * Replacing the integrals with a quadrature rule (nodes y_j, weights w_j)
 * turns each into a dense linear system (I - K) f = g with
 * K(i,j) = kernel_density(y_i, y_j) * w_j, solved by LU with partial
 * pivoting.  K is sub-stochastic (row sums < 1: some mass always escapes
 * above A), so I - K is safely invertible at any sane resolution.
 */

struct NumericsConfig {
  int resolution = 0;     // total node count; 0 picks automatically
  double rel_tol = 1e-4;  // calibration tolerance on |ARL - gamma| / gamma
  double stall_tol = 1e-7;  // ADD_k flatness threshold (relative change)
  int stall_run = 10;       // consecutive flat steps declaring steady state
};

// Node-count heuristic: the transition density sharpens and the calibrated
// limit grows as the shift gets fainter, so faint shifts need more nodes.
// limit_scale is the control limit (or an estimate of it, e.g. xi * gamma).
int auto_resolution(double mu, double limit_scale);

struct Discretization {
  double limit = 0.0;  // the control limit A; nodes live in (0, A)
  PanelLayout layout;

  int size() const { return static_cast<int>(layout.nodes.size()); }
};

Discretization build_discretization(double limit, int resolution);

// Dense Nystrom form of the one-step transition operator restricted to the
// continuation region: entries(i, j) = kernel_density(node_i, node_j) * w_j.
// Row i integrates a function of the next state against the transition
// density out of node_i.
struct KernelMatrix {
  Regime regime = Regime::pre_change;
  Eigen::MatrixXd entries;
};

KernelMatrix build_operator(const Discretization& disc, const ModelParams& params,
                            Regime regime);

/*
 * A function known at the quadrature nodes and extended off the grid through
 * the very equation it solves (Nystrom interpolation):
 *
 *     f(x) = g(x) + sum_j kernel_density(x, y_j) * w_j * f(y_j),
 *
 * where the inhomogeneous term g is a constant, optionally plus another
 * NodeFunction (used for the integral delay, whose g is d itself).
 * Evaluating at a node reproduces the stored value because the node values
 * solve exactly that relation.
 */
class NodeFunction {
 public:
  NodeFunction(Discretization disc, ModelParams params, Regime regime,
               Eigen::VectorXd values, double constant_term,
               std::shared_ptr<const NodeFunction> base = nullptr);

  double operator()(double x) const;
  const Eigen::VectorXd& node_values() const { return values_; }
  const Discretization& discretization() const { return disc_; }

 private:
  Discretization disc_;
  ModelParams params_;
  Regime regime_;
  Eigen::VectorXd values_;
  double constant_term_;
  std::shared_ptr<const NodeFunction> base_;
};

NodeFunction solve_arl(const Discretization& disc, const ModelParams& params,
                       const KernelMatrix& pre_op);
NodeFunction solve_delay(const Discretization& disc, const ModelParams& params,
                         const KernelMatrix& post_op);
NodeFunction solve_iadd(const Discretization& disc, const ModelParams& params,
                        const KernelMatrix& pre_op, const NodeFunction& delay);

/*
 * The conditional-delay sequence.  Starting from the exact point mass at r,
 * propagate the pre-change sub-stochastic operator:
 *
 *   p_1(y) = K_pre(r, y),      p_{k+1}(y) = Int p_k(x) K_pre(x, y) dx,
 *
 * all restricted to (0, A).  Then survival_k = <p_k, 1> = P(T > k | no
 * change) and add_k = <p_k, d> / <p_k, 1> is the expected residual delay
 * when the change happens after k in-control steps, conditional on no alarm
 * so far.  The sequence flattens geometrically; iteration stops once the
 * relative change stays below stall_tol for stall_run consecutive steps, or
 * at the hard cap k_max.
 */
struct DelayProfile {
  std::vector<double> add;       // add[k], k = 0, 1, ...
  std::vector<double> survival;  // survival[k] = P(T > k), survival[0] = 1
  double sadd = 0.0;             // max over add[] and the steady-state value
  long sadd_argmax = 0;          // -1 when the steady-state limit wins
  double steady_state_add = 0.0;
  bool converged = false;  // stall criterion met (or mass fully absorbed)
  bool capped = false;     // ended by hitting k_max instead

  // Partial sums with geometric tails, for identities and the integral
  // delay: sum_k survival_k ~ ARL and sum_k survival_k * add_k ~ IADD.
  double survival_sum = 0.0;
  double survival_tail = 0.0;
  double iadd_sum = 0.0;
  double iadd_tail = 0.0;
};

DelayProfile add_sequence(const Discretization& disc, const ModelParams& params,
                          const KernelMatrix& pre_op, const NodeFunction& delay,
                          double r, long k_max, double stall_tol,
                          int stall_run = 10);

// Convenience wrapper owning one discretization and caching the operators,
// factorizations and solutions, so a calibration loop pays for the pre-change
// system only and a full evaluation reuses everything.
class ChartSolver {
 public:
  ChartSolver(const ModelParams& params, double limit, const NumericsConfig& cfg = {});

  ChartSolver(const ChartSolver&) = delete;
  ChartSolver& operator=(const ChartSolver&) = delete;

  double limit() const { return disc_.limit; }
  int resolution() const { return disc_.size(); }
  const Discretization& discretization() const { return disc_; }
  const ModelParams& params() const { return params_; }

  double arl(double r);     // l(r)
  double delay0(double r);  // d(r) = ADD_0
  double iadd(double r);    // I(r)

  // k_max = 0 derives the cap from the ARL scale (20 * ARL, clamped).
  DelayProfile profile(double r, long k_max = 0);

  const NodeFunction& run_length_fn();
  const NodeFunction& delay_fn();
  const NodeFunction& iadd_fn();

 private:
  const KernelMatrix& pre_op();
  const KernelMatrix& post_op();

  ModelParams params_;
  NumericsConfig cfg_;
  Discretization disc_;
  std::optional<KernelMatrix> pre_, post_;
  std::shared_ptr<const NodeFunction> ell_, d_, iadd_;
};

}  // namespace gsr
