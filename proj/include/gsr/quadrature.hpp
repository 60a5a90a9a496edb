#pragma once

#include <vector>

namespace gsr {

// Nodes and weights of a Gauss-Legendre rule on [-1, 1], ascending order.
struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

// q-point Gauss-Legendre rule, exact for polynomials of degree <= 2q - 1.
// Roots of the Legendre polynomial are found by Newton iteration on the
// three-term recurrence; q up to a few hundred is fine.
QuadratureRule gauss_legendre(int q);

/*
 * Composite quadrature layout over (0, upper].  The interval is split into
 * panels whose boundaries shrink geometrically toward 0,
 *
 *     0 = t_0 < t_1 < ... < t_P = upper,   t_i = upper * rho^(P-i),
 *
 * with rho chosen so the first panel has width O(1) (clamped to [0.30, 0.85]
 * so degenerate ratios cannot occur).  Each panel carries its own
 * Gauss-Legendre rule; orders are balanced so the total node count equals the
 * requested resolution exactly.  The grading keeps plenty of nodes near 0,
 * where the transition density of the detection statistic is most peaked for
 * faint shifts.
 */
struct PanelLayout {
  std::vector<double> breaks;   // P + 1 panel boundaries, breaks[0] == 0
  std::vector<int> orders;      // per-panel rule order, sums to resolution
  std::vector<double> nodes;    // all nodes, strictly ascending, in (0, upper)
  std::vector<double> weights;  // matching weights, all positive
};

PanelLayout composite_layout(double upper, int resolution);

}  // namespace gsr
