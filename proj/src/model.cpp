#include "gsr/model.hpp"

#include <cmath>
#include <string>

#include "gsr/errors.hpp"

namespace gsr {

void validate_params(const ModelParams& params) {
  if (!std::isfinite(params.mu) || params.mu == 0.0)
    throw config_error("model: mu must be finite and nonzero");
}

double score(const ModelParams& params, double x) {
  validate_params(params);
  return params.mu * (x - 0.5 * params.mu);
}

namespace {

void check_states(double x, double y) {
  if (!(x >= 0.0) || !std::isfinite(x))
    throw config_error("kernel: state x must be finite and >= 0");
  if (!(y > 0.0))
    throw config_error("kernel: state y must be > 0");
}

double half_shift(const ModelParams& params, Regime regime) {
  const double m = params.shift();
  return regime == Regime::pre_change ? 0.5 * m : -0.5 * m;
}

}  // namespace

double kernel_cdf(const ModelParams& params, Regime regime, double x, double y) {
  validate_params(params);
  check_states(x, y);
  return detail::kernel_cdf_raw(params.shift(), half_shift(params, regime), x, y);
}

double kernel_density(const ModelParams& params, Regime regime, double x, double y) {
  validate_params(params);
  check_states(x, y);
  return detail::kernel_density_raw(params.shift(), half_shift(params, regime), x, y);
}

XiResult xi_detail(const ModelParams& params, double series_tol) {
  validate_params(params);
  if (!(series_tol > 0.0))
    throw config_error("xi: series tolerance must be positive");

  const double m = params.shift();
  const double c = 0.5 * m;
  const double term_cut = 0.01 * series_tol;
  constexpr long kMaxTerms = 20'000'000;

  double sum = 0.0;
  long M = 0;
  for (long k = 1; k <= kMaxTerms; ++k) {
    const double term = normal_cdf(-c * std::sqrt(static_cast<double>(k))) / k;
    sum += term;
    if (term < term_cut) {
      M = k;
      break;
    }
  }
  if (M == 0)
    throw numerical_error("xi: series did not converge within the iteration budget "
                          "(mu too close to zero)");

  // Closed-form remainder bound; see the header comment.
  const double U = c * std::sqrt(static_cast<double>(M));
  const double tail =
      ((1.0 - U * U) * normal_cdf(-U) + U * normal_pdf(U)) / (M * c * c);
  sum += tail;

  const double value = (2.0 / (m * m)) * std::exp(-2.0 * sum);
  if (!(value > 0.0 && value < 1.0))
    throw numerical_error("xi: computed value " + std::to_string(value) +
                          " escaped (0, 1); mu = " + std::to_string(params.mu));
  return {value, M};
}

double xi(const ModelParams& params, double series_tol) {
  return xi_detail(params, series_tol).value;
}

}  // namespace gsr
