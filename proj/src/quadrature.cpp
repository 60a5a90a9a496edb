#include "gsr/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <string>

#include "gsr/errors.hpp"

namespace gsr {

namespace {

// Legendre P_q and its derivative at x via the three-term recurrence
//   (k+1) P_{k+1}(x) = (2k+1) x P_k(x) - k P_{k-1}(x).
struct LegendreEval {
  double p;       // P_q(x)
  double dp;      // P_q'(x)
};

LegendreEval legendre(int q, double x) {
  double p0 = 1.0, p1 = x;
  for (int k = 1; k < q; ++k) {
    const double p2 = ((2 * k + 1) * x * p1 - k * p0) / (k + 1);
    p0 = p1;
    p1 = p2;
  }
  // Standard identity, valid away from x = +-1 (roots are strictly inside).
  const double dp = q * (x * p1 - p0) / (x * x - 1.0);
  return {p1, dp};
}

}  // namespace

QuadratureRule gauss_legendre(int q) {
  if (q < 1) throw config_error("gauss_legendre: order must be at least 1");
  QuadratureRule rule;
  rule.nodes.resize(q);
  rule.weights.resize(q);
  for (int i = 0; i < q; ++i) {
    // Chebyshev-style first guess for the i-th root, descending from +1.
    double x = std::cos(M_PI * (i + 0.75) / (q + 0.5));
    LegendreEval ev{};
    for (int it = 0; it < 100; ++it) {
      ev = legendre(q, x);
      const double dx = ev.p / ev.dp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    ev = legendre(q, x);
    rule.nodes[q - 1 - i] = x;  // store ascending
    rule.weights[q - 1 - i] = 2.0 / ((1.0 - x * x) * ev.dp * ev.dp);
  }
  return rule;
}

PanelLayout composite_layout(double upper, int resolution) {
  if (!(upper > 0.0) || !std::isfinite(upper))
    throw config_error("composite_layout: upper bound must be positive and finite");
  if (resolution < 8 || resolution > 16384)
    throw config_error("composite_layout: resolution must lie in [8, 16384], got " +
                       std::to_string(resolution));

  const int panels = std::max(1, (resolution + 32) / 64);

  PanelLayout layout;
  layout.breaks.resize(panels + 1);
  layout.breaks[0] = 0.0;
  layout.breaks[panels] = upper;
  if (panels > 1) {
    // First panel width ~ upper * rho^(P-1) ~ 1 when rho = upper^(-1/(P-1)).
    double rho = std::pow(upper, -1.0 / (panels - 1));
    rho = std::clamp(rho, 0.30, 0.85);
    for (int i = panels - 1; i >= 1; --i)
      layout.breaks[i] = layout.breaks[i + 1] * rho;
  }

  // Balance per-panel orders so they sum to the requested resolution, giving
  // the spare nodes to the widest (upper) panels.
  layout.orders.assign(panels, resolution / panels);
  const int extra = resolution % panels;
  for (int p = panels - extra; p < panels; ++p) layout.orders[p] += 1;

  layout.nodes.reserve(resolution);
  layout.weights.reserve(resolution);
  std::map<int, QuadratureRule> rules;
  for (int p = 0; p < panels; ++p) {
    const int q = layout.orders[p];
    auto it = rules.find(q);
    if (it == rules.end()) it = rules.emplace(q, gauss_legendre(q)).first;
    const QuadratureRule& rule = it->second;
    const double a = layout.breaks[p], b = layout.breaks[p + 1];
    const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
    for (int j = 0; j < q; ++j) {
      layout.nodes.push_back(mid + half * rule.nodes[j]);
      layout.weights.push_back(half * rule.weights[j]);
    }
  }
  return layout;
}

}  // namespace gsr
