#pragma once

#include <clmack/asymptotics.hpp>
#include <clmack/error.hpp>
#include <clmack/model.hpp>
#include <clmack/triangle.hpp>

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace clmack {

struct OracleResult {
  std::size_t i = 0;
  double L_alpha = 0.0;           // true standardized conditional MSEP
  double term1 = 0.0;             // process term
  double term2 = 0.0;             // estimation-error term
  double term3 = 0.0;             // cross term, 2 A1 A2
  double future_count_mean = 0.0; // E[N] = alpha lambda_i P(D > T-i+1)
  double A1 = 0.0;                // alpha^{-1/2} (E[S] - C (prod f - 1))
  double A2 = 0.0;                // alpha^{1/2} (prod f - prod f_hat)
};

namespace detail {

struct OracleInputs {
  double c = 0.0;      // C_{i,T-i+1}
  double p_hat = 1.0;  // prod f_hat over the remaining development years
  double en = 0.0;     // E[N]
  double ez = 0.0;
  double ez2 = 0.0;
  std::size_t d = 0;
};

inline OracleInputs oracle_inputs(const Triangle& tri, const ModelSpec& spec,
                                  std::span<const double> f_hat, std::size_t i) {
  if (!spec.special()) throw UnsupportedModel("the exact MSEP oracle needs the special model");
  const std::size_t T = spec.T;
  if (tri.size() != T) throw InvalidInput("triangle size does not match the model");
  if (i < 2 || i > T) throw InvalidInput("accident year must lie in 2..T");
  if (f_hat.size() + 1 != T) throw InvalidInput("f_hat must have length T-1");
  OracleInputs in;
  in.d = T - i + 1;
  in.c = tri(i, in.d);
  if (!(in.c > 0.0))
    throw EstimationError("diagonal cell C(" + std::to_string(i) + "," + std::to_string(in.d) +
                              ") is zero",
                          i, in.d);
  for (std::size_t s = in.d; s < T; ++s) in.p_hat *= f_hat[s - 1];
  const auto& ind = spec.independent_delay();
  double tail = 0.0;
  for (std::size_t t = in.d + 1; t <= T; ++t) tail += ind.q[t - 1];
  in.en = spec.alpha * spec.lambda[i - 1] * tail;
  in.ez = ind.claim_size.mean();
  in.ez2 = ind.claim_size.second_moment();
  return in;
}

} // namespace detail

/// L = E[(S - C (p_hat - 1))^2] / C for the future compound Poisson sum S,
/// computed as (E[N] E[Z^2] + (E[S] - C (p_hat - 1))^2) / C.
inline double true_std_cmsep(const Triangle& tri, const ModelSpec& spec,
                             std::span<const double> f_hat, std::size_t i) {
  const auto in = detail::oracle_inputs(tri, spec, f_hat, i);
  const double bias = in.en * in.ez - in.c * (in.p_hat - 1.0);
  return (in.en * in.ez2 + bias * bias) / in.c;
}

/// L together with its split into process, estimation-error and cross terms
/// around the limit factors f.
inline OracleResult decompose(const Triangle& tri, const ModelSpec& spec,
                              std::span<const double> f_hat, std::size_t i) {
  const auto in = detail::oracle_inputs(tri, spec, f_hat, i);
  const auto f = limit_dev_factors(spec);
  const auto m = dist_moments(spec);
  double g = 1.0;
  for (std::size_t s = in.d; s < spec.T; ++s) g *= f[s - 1];
  const double es = in.en * in.ez;
  const double ec = spec.alpha * spec.lambda[i - 1] * in.ez * m.p_le[in.d - 1];
  const double h = in.c - ec;

  OracleResult r;
  r.i = i;
  r.future_count_mean = in.en;
  r.L_alpha = true_std_cmsep(tri, spec, f_hat, i);
  r.term1 = (in.en * in.ez2 + (g - 1.0) * (g - 1.0) * h * h) / in.c;
  r.term2 = in.c * (g - in.p_hat) * (g - in.p_hat);
  r.term3 = 2.0 * (es - in.c * (g - 1.0)) * (g - in.p_hat);
  const double ra = std::sqrt(spec.alpha);
  r.A1 = ra > 0.0 ? (es - in.c * (g - 1.0)) / ra : 0.0;
  r.A2 = ra * (g - in.p_hat);
  return r;
}

} // namespace clmack
