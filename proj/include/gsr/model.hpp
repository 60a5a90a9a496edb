#pragma once

#include <cmath>
#include "gsr/normal.hpp"

namespace gsr {

/*
 * Observation model: X_1, X_2, ... are independent N(0,1) until an unknown
 * change-point, N(mu,1) afterwards, with the shift magnitude mu != 0 known.
 * The detection statistic is driven by the per-observation score
 *
 *     S(x) = mu * (x - mu/2),
 *
 * the log-likelihood ratio of one observation, and evolves as
 *
 *     R_n = (1 + R_{n-1}) * exp{ S(X_n) },   R_0 = r >= 0,
 *
 * with an alarm at the first n >= 1 such that R_n >= A.  All operating
 * characteristics depend on mu only through |mu| (replace X by -X), so the
 * transition kernel and the overshoot constant below use |mu| throughout.
 */

struct ModelParams {
  double mu = 0.0;

  double shift() const { return std::abs(mu); }
};

// Throws config_error unless mu is finite and nonzero.
void validate_params(const ModelParams& params);

// Which measure one observation is drawn from.
enum class Regime { pre_change, post_change };

// Score S(x) = mu * (x - mu/2), with the sign convention of mu as given.
double score(const ModelParams& params, double x);

/*
 * One-step transition law of the statistic.  Given R_{n-1} = x,
 * R_n = (1+x) * e^{S(X)} <= y  iff  X <= ln(y/(1+x))/|mu| + |mu|/2 - m_X,
 * where m_X is 0 pre-change and |mu| post-change.  Hence
 *
 *     P(R_n <= y | x) = Phi( ln(y/(1+x)) / |mu| + s*|mu|/2 ),
 *
 * s = +1 pre-change, s = -1 post-change, and the density in y is
 * phi(z) / (|mu| * y) with the same z.
 */
double kernel_cdf(const ModelParams& params, Regime regime, double x, double y);
double kernel_density(const ModelParams& params, Regime regime, double x, double y);

namespace detail {
// Unchecked kernels shared with the dense-operator builder so that matrix
// entries and pointwise evaluations are bit-identical.  m = |mu|,
// h = +m/2 pre-change, -m/2 post-change.
inline double kernel_cdf_raw(double m, double h, double x, double y) {
  return normal_cdf(std::log(y / (1.0 + x)) / m + h);
}
inline double kernel_density_raw(double m, double h, double x, double y) {
  return normal_pdf(std::log(y / (1.0 + x)) / m + h) / (m * y);
}
}  // namespace detail

/*
 * Limiting average exponential overshoot
 *
 *     xi(mu) = (2/mu^2) * exp{ -2 * sum_{m>=1} Phi(-(|mu|/2) sqrt(m)) / m },
 *
 * the renewal-theoretic constant in the threshold approximation
 * ARL ~ A/xi - r.  The series is summed until a term drops below
 * series_tol/100, then a closed-form bound on the remainder is added:
 * with c = |mu|/2 and U = c*sqrt(M),
 *
 *     sum_{m>M} Phi(-c sqrt(m))/m  <=  (1/M) * Int_M^inf Phi(-c sqrt(t)) dt
 *                                   =  (1/(M c^2)) * [ (1-U^2) Phi(-U) + U phi(U) ].
 */
struct XiResult {
  double value = 0.0;
  long terms = 0;  // truncation index M of the series
};

XiResult xi_detail(const ModelParams& params, double series_tol = 1e-12);
double xi(const ModelParams& params, double series_tol = 1e-12);

}  // namespace gsr
