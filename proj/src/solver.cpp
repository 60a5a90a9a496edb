#include "gsr/solver.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "gsr/errors.hpp"
#include "gsr/metrics.hpp"

namespace gsr {

namespace {

constexpr double kConditionLimit = 1e12;

double half_shift(const ModelParams& params, Regime regime) {
  const double m = params.shift();
  return regime == Regime::pre_change ? 0.5 * m : -0.5 * m;
}

Eigen::PartialPivLU<Eigen::MatrixXd> factor_system(const KernelMatrix& op,
                                                   const char* what) {
  const Eigen::Index n = op.entries.rows();
  Eigen::MatrixXd system = Eigen::MatrixXd::Identity(n, n) - op.entries;
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(std::move(system));
  const double rc = lu.rcond();
  if (!(rc > 1.0 / kConditionLimit))
    throw numerical_error(std::string(what) +
                          ": condition estimate of I - K exceeds 1e12 (rcond = " +
                          std::to_string(rc) + "); raise the resolution");
  return lu;
}

// The solved node values must satisfy f = g + K f to LU accuracy; anything
// worse means the system was solved wrong, not just coarsely.
void check_residual(const KernelMatrix& op, const Eigen::VectorXd& f,
                    const Eigen::VectorXd& g, const char* what) {
  const Eigen::VectorXd res = f - g - op.entries * f;
  const double rel =
      res.lpNorm<Eigen::Infinity>() / f.lpNorm<Eigen::Infinity>();
  if (!(rel < 1e-8))
    throw numerical_error(std::string(what) +
                          ": fixed-point residual " + std::to_string(rel) +
                          " exceeds 1e-8 of the solution norm");
}

// Cache the profile's supremum in its own fields; sadd_of owns the max and
// tie-break rule so it is stated in exactly one place.
void finalize_sadd(DelayProfile& prof) {
  const auto [value, argmax] = sadd_of(prof);
  prof.sadd = value;
  prof.sadd_argmax = argmax;
}

}  // namespace

int auto_resolution(double mu, double limit_scale) {
  const double m = std::abs(mu);
  if (m >= 0.25) return 768;
  if (m >= 0.12) return limit_scale <= 250.0 ? 1152 : 1536;
  return 2048;
}

Discretization build_discretization(double limit, int resolution) {
  if (!(limit > 0.0) || !std::isfinite(limit))
    throw config_error("build_discretization: limit must be positive and finite");
  Discretization disc;
  disc.limit = limit;
  disc.layout = composite_layout(limit, resolution);
  return disc;
}

KernelMatrix build_operator(const Discretization& disc, const ModelParams& params,
                            Regime regime) {
  validate_params(params);
  if (disc.size() == 0) throw config_error("build_operator: empty discretization");

  const auto& nodes = disc.layout.nodes;
  const auto& weights = disc.layout.weights;
  const int n = disc.size();
  const double m = params.shift();
  const double h = half_shift(params, regime);

  KernelMatrix op;
  op.regime = regime;
  op.entries.resize(n, n);
  for (int j = 0; j < n; ++j) {
    const double yj = nodes[j];
    const double wj = weights[j];
    for (int i = 0; i < n; ++i)
      op.entries(i, j) = detail::kernel_density_raw(m, h, nodes[i], yj) * wj;
  }

  // Sub-stochasticity: each row integrates the transition density over
  // (0, A), which is < 1.  A row sum above 1 + 1e-8 means the quadrature is
  // too coarse for this (mu, A) and every downstream answer would be junk.
  const double max_row = op.entries.rowwise().sum().maxCoeff();
  if (!(max_row <= 1.0 + 1e-8))
    throw numerical_error("build_operator: row sum " + std::to_string(max_row) +
                          " exceeds 1; resolution too coarse for mu = " +
                          std::to_string(params.mu) +
                          ", limit = " + std::to_string(disc.limit));
  return op;
}

NodeFunction::NodeFunction(Discretization disc, ModelParams params, Regime regime,
                           Eigen::VectorXd values, double constant_term,
                           std::shared_ptr<const NodeFunction> base)
    : disc_(std::move(disc)),
      params_(params),
      regime_(regime),
      values_(std::move(values)),
      constant_term_(constant_term),
      base_(std::move(base)) {}

double NodeFunction::operator()(double x) const {
  if (!(x >= 0.0) || !std::isfinite(x))
    throw config_error("NodeFunction: evaluation point must be finite and >= 0");
  const double m = params_.shift();
  const double h = half_shift(params_, regime_);
  const auto& nodes = disc_.layout.nodes;
  const auto& weights = disc_.layout.weights;
  double acc = constant_term_ + (base_ ? (*base_)(x) : 0.0);
  for (int j = 0; j < disc_.size(); ++j)
    acc += detail::kernel_density_raw(m, h, x, nodes[j]) * weights[j] * values_[j];
  return acc;
}

NodeFunction solve_arl(const Discretization& disc, const ModelParams& params,
                       const KernelMatrix& pre_op) {
  if (pre_op.regime != Regime::pre_change)
    throw config_error("solve_arl: needs the pre-change operator");
  auto lu = factor_system(pre_op, "solve_arl");
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(disc.size());
  Eigen::VectorXd ell = lu.solve(ones);
  check_residual(pre_op, ell, ones, "solve_arl");
  return NodeFunction(disc, params, Regime::pre_change, std::move(ell), 1.0);
}

NodeFunction solve_delay(const Discretization& disc, const ModelParams& params,
                         const KernelMatrix& post_op) {
  if (post_op.regime != Regime::post_change)
    throw config_error("solve_delay: needs the post-change operator");
  auto lu = factor_system(post_op, "solve_delay");
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(disc.size());
  Eigen::VectorXd d = lu.solve(ones);
  check_residual(post_op, d, ones, "solve_delay");
  return NodeFunction(disc, params, Regime::post_change, std::move(d), 1.0);
}

NodeFunction solve_iadd(const Discretization& disc, const ModelParams& params,
                        const KernelMatrix& pre_op, const NodeFunction& delay) {
  if (pre_op.regime != Regime::pre_change)
    throw config_error("solve_iadd: needs the pre-change operator");
  if (delay.node_values().size() != disc.size())
    throw config_error("solve_iadd: delay solution does not match the discretization");
  auto lu = factor_system(pre_op, "solve_iadd");
  Eigen::VectorXd ivals = lu.solve(delay.node_values());
  check_residual(pre_op, ivals, delay.node_values(), "solve_iadd");
  auto base = std::make_shared<const NodeFunction>(delay);
  return NodeFunction(disc, params, Regime::pre_change, std::move(ivals), 0.0,
                      std::move(base));
}

DelayProfile add_sequence(const Discretization& disc, const ModelParams& params,
                          const KernelMatrix& pre_op, const NodeFunction& delay,
                          double r, long k_max, double stall_tol, int stall_run) {
  validate_params(params);
  if (!(r >= 0.0) || !(r < disc.limit))
    throw config_error("add_sequence: headstart must lie in [0, limit)");
  if (pre_op.regime != Regime::pre_change)
    throw config_error("add_sequence: needs the pre-change operator");
  if (k_max < 1) throw config_error("add_sequence: k_max must be >= 1");
  if (!(stall_tol > 0.0) || stall_run < 1)
    throw config_error("add_sequence: bad stall parameters");

  const int n = disc.size();
  const auto& nodes = disc.layout.nodes;
  const auto& weights = disc.layout.weights;
  const double m = params.shift();
  const double h_pre = half_shift(params, Regime::pre_change);
  const Eigen::VectorXd& dvals = delay.node_values();

  DelayProfile prof;
  prof.add.push_back(delay(r));  // ADD_0: the change is in effect from step 1
  prof.survival.push_back(1.0);

  // First transition from the exact point mass at r, no grid smearing.
  Eigen::VectorXd mass(n);
  for (int j = 0; j < n; ++j)
    mass[j] = detail::kernel_density_raw(m, h_pre, r, nodes[j]) * weights[j];

  Eigen::VectorXd next(n);
  int stall = 0;
  for (long k = 1; k <= k_max; ++k) {
    const double q = mass.sum();
    if (!(q > 1e-300)) {  // everything absorbed: the sequence is over
      prof.converged = true;
      break;
    }
    const double a = mass.dot(dvals) / q;
    prof.add.push_back(a);
    prof.survival.push_back(q);

    const double previous = prof.add[prof.add.size() - 2];
    if (std::abs(a - previous) <= stall_tol * std::max(1.0, std::abs(a))) {
      if (++stall >= stall_run) {
        prof.converged = true;
        break;
      }
    } else {
      stall = 0;
    }
    if (k == k_max) break;
    next.noalias() = pre_op.entries.transpose() * mass;
    mass.swap(next);
  }
  prof.capped = !prof.converged;

  // Steady state: last value plus a guarded Aitken correction, since the
  // stall criterion leaves a small geometric remainder behind.
  const size_t len = prof.add.size();
  double steady = prof.add.back();
  if (prof.converged && len >= 3) {
    const double d1 = prof.add[len - 2] - prof.add[len - 3];
    const double d2 = prof.add[len - 1] - prof.add[len - 2];
    if (d1 != 0.0 && d2 != 0.0 && (d1 > 0.0) == (d2 > 0.0)) {
      const double beta = d2 / d1;
      if (beta > 0.0 && beta < 0.9999) {
        const double corr = d2 * beta / (1.0 - beta);
        if (std::abs(corr) <= 1e-3 * std::max(1.0, std::abs(steady)))
          steady += corr;
      }
    }
  }
  prof.steady_state_add = steady;
  finalize_sadd(prof);

  // Partial sums plus geometric survival tails.  survival decays at the
  // quasi-stationary rate by the time the profile flattens, so the ratio of
  // the last two terms extrapolates the remainder.
  prof.survival_sum = 0.0;
  prof.iadd_sum = 0.0;
  for (size_t k = 0; k < len; ++k) {
    prof.survival_sum += prof.survival[k];
    prof.iadd_sum += prof.survival[k] * prof.add[k];
  }
  if (len >= 2) {
    const double beta = prof.survival[len - 1] / prof.survival[len - 2];
    if (beta > 0.0 && beta < 1.0) {
      prof.survival_tail = prof.survival[len - 1] * beta / (1.0 - beta);
      prof.iadd_tail = prof.steady_state_add * prof.survival_tail;
    }
  }
  return prof;
}

ChartSolver::ChartSolver(const ModelParams& params, double limit,
                         const NumericsConfig& cfg)
    : params_(params), cfg_(cfg) {
  validate_params(params_);
  const int resolution =
      cfg_.resolution > 0 ? cfg_.resolution : auto_resolution(params_.mu, limit);
  disc_ = build_discretization(limit, resolution);
}

const KernelMatrix& ChartSolver::pre_op() {
  if (!pre_) pre_ = build_operator(disc_, params_, Regime::pre_change);
  return *pre_;
}

const KernelMatrix& ChartSolver::post_op() {
  if (!post_) post_ = build_operator(disc_, params_, Regime::post_change);
  return *post_;
}

const NodeFunction& ChartSolver::run_length_fn() {
  if (!ell_)
    ell_ = std::make_shared<const NodeFunction>(solve_arl(disc_, params_, pre_op()));
  return *ell_;
}

const NodeFunction& ChartSolver::delay_fn() {
  if (!d_)
    d_ = std::make_shared<const NodeFunction>(solve_delay(disc_, params_, post_op()));
  return *d_;
}

const NodeFunction& ChartSolver::iadd_fn() {
  if (!iadd_) {
    delay_fn();  // make sure d_ exists
    auto lu = factor_system(pre_op(), "solve_iadd");
    Eigen::VectorXd ivals = lu.solve(d_->node_values());
    check_residual(pre_op(), ivals, d_->node_values(), "solve_iadd");
    iadd_ = std::make_shared<const NodeFunction>(
        disc_, params_, Regime::pre_change, std::move(ivals), 0.0, d_);
  }
  return *iadd_;
}

double ChartSolver::arl(double r) { return run_length_fn()(r); }
double ChartSolver::delay0(double r) { return delay_fn()(r); }
double ChartSolver::iadd(double r) { return iadd_fn()(r); }

DelayProfile ChartSolver::profile(double r, long k_max) {
  if (k_max <= 0) {
    const double scale = std::max(arl(r), 100.0);
    k_max = std::clamp(20L * static_cast<long>(std::ceil(scale)), 2000L, 200000L);
  }
  return add_sequence(disc_, params_, pre_op(), delay_fn(), r, k_max,
                      cfg_.stall_tol, cfg_.stall_run);
}

}  // namespace gsr
