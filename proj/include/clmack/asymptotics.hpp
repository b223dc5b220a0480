#pragma once

#include <clmack/error.hpp>
#include <clmack/model.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace clmack {

/// Large-exposure limit f_t = E[Z 1{D <= t+1}] / E[Z 1{D <= t}], t = 1..T-1.
inline std::vector<double> limit_dev_factors(const ModelSpec& spec) {
  spec.validate();
  const auto m = dist_moments(spec);
  std::vector<double> f(spec.T - 1);
  for (std::size_t t = 1; t < spec.T; ++t) {
    if (!(m.ez_le_t(t) > 0.0))
      throw InvalidInput("E[Z 1{D <= " + std::to_string(t) + "}] is zero");
    f[t - 1] = m.ez_le_t(t + 1) / m.ez_le_t(t);
  }
  return f;
}

/// Limit scale of the variance estimator,
///   sigma^2_t = (f_t - 1)(E[Z^2 1{D=t+1}]/E[Z 1{D=t+1}]
///                         + (f_t - 1) E[Z^2 1{D<=t}]/E[Z 1{D<=t}]).
/// Zero when no mass sits at t+1.
inline std::vector<double> limit_sigma2(const ModelSpec& spec) {
  const auto f = limit_dev_factors(spec);
  const auto m = dist_moments(spec);
  std::vector<double> s2(spec.T - 1, 0.0);
  for (std::size_t t = 1; t < spec.T; ++t) {
    const double g = f[t - 1] - 1.0;
    const double at_next = m.ez_at[t];
    if (!(at_next > 0.0) || g == 0.0) continue;
    s2[t - 1] = g * (m.ez2_at[t] / at_next + g * m.ez2_le[t - 1] / m.ez_le[t - 1]);
  }
  return s2;
}

/// Size-weighted delay law recovered from development factors:
/// q~_1 = 1/prod f, q~_{t+1} = (f_t - 1) prod_{s<t} f_s / prod f.
inline std::vector<double> f_to_qtilde(std::span<const double> f) {
  for (std::size_t t = 0; t < f.size(); ++t)
    if (!(f[t] > 0.0))
      throw InvalidInput("development factor " + std::to_string(t + 1) + " must be > 0");
  double total = 1.0;
  for (double x : f) total *= x;
  std::vector<double> q(f.size() + 1);
  q[0] = 1.0 / total;
  double head = 1.0;
  for (std::size_t t = 0; t < f.size(); ++t) {
    q[t + 1] = (f[t] - 1.0) * head / total;
    head *= f[t];
  }
  return q;
}

/// Scale gamma_i^2 of the estimation-error limit gamma_i^2 chi^2_1. The
/// closed form exists only for D independent of Z.
inline double gamma2(const ModelSpec& spec, std::size_t i) {
  if (!spec.independent())
    throw UnsupportedModel("gamma_i^2 has no closed form for a dependent (D,Z) law");
  if (i < 2 || i > spec.T) throw InvalidInput("accident year must lie in 2..T");
  const auto f = limit_dev_factors(spec);
  const auto s2 = limit_sigma2(spec);
  const auto m = dist_moments(spec);
  const std::size_t T = spec.T, d = T - i + 1;

  double prod2 = 1.0;
  for (std::size_t s = d; s < T; ++s) prod2 *= f[s - 1] * f[s - 1];
  double sum = 0.0;
  for (std::size_t t = d; t < T; ++t) {
    double exposure = 0.0;
    for (std::size_t j = 1; j <= T - t; ++j) exposure += spec.lambda[j - 1] * m.ez * m.p_le[t - 1];
    sum += s2[t - 1] / (f[t - 1] * f[t - 1]) / exposure;
  }
  return spec.lambda[i - 1] * m.ez * m.p_le[d - 1] * prod2 * sum;
}

struct ProcessTermExpectation {
  double lhs = 0.0; // via the limit variance of the centred diagonal
  double rhs = 0.0; // sum_t f_{d}..f_{t-1} sigma^2_t f_{t+1}^2..f_{T-1}^2
};

/// Two closed forms for the mean of the process-term limit in the special
/// model; they agree identically.
inline ProcessTermExpectation process_term_expectation(const ModelSpec& spec, std::size_t i) {
  if (!spec.special())
    throw UnsupportedModel("process-term expectation needs the special (compound Poisson) model");
  if (i < 2 || i > spec.T) throw InvalidInput("accident year must lie in 2..T");
  const auto f = limit_dev_factors(spec);
  const auto s2 = limit_sigma2(spec);
  const auto m = dist_moments(spec);
  const std::size_t T = spec.T, d = T - i + 1;
  const double lambda = spec.lambda[i - 1];
  const double p_le = m.p_le[d - 1];
  const double p_gt = 1.0 - p_le;

  double g = 1.0;
  for (std::size_t s = d; s < T; ++s) g *= f[s - 1];
  const double var_h = lambda * m.ez2 * p_le;

  ProcessTermExpectation out;
  out.lhs = (lambda * m.ez2 * p_gt + var_h * (g - 1.0) * (g - 1.0)) / (lambda * m.ez * p_le);
  for (std::size_t t = d; t < T; ++t) {
    double term = s2[t - 1];
    for (std::size_t s = d; s < t; ++s) term *= f[s - 1];
    for (std::size_t s = t + 1; s < T; ++s) term *= f[s - 1] * f[s - 1];
    out.rhs += term;
  }
  return out;
}

/// Limit covariance of alpha^{-1/2}(S_j - E S_j) for renewal claim counts,
///   Sigma_{s,t} = lambda E[Z^2 1{D=s}1{D=t}]
///               + lambda (lambda^2 var(Y) - 1) E[Z 1{D=s}] E[Z 1{D=t}].
/// Poisson counting has lambda^2 var(Y) = 1.
inline Eigen::MatrixXd renewal_clt_cov(const ModelSpec& spec, std::size_t j) {
  spec.validate();
  if (j < 1 || j > spec.T) throw InvalidInput("accident year must lie in 1..T");
  const auto m = dist_moments(spec);
  const double lambda = spec.lambda[j - 1];
  const double excess = lambda * lambda * m.var_y[j - 1] - 1.0;
  const auto T = static_cast<Eigen::Index>(spec.T);
  Eigen::MatrixXd sigma(T, T);
  for (Eigen::Index s = 0; s < T; ++s)
    for (Eigen::Index t = 0; t < T; ++t)
      sigma(s, t) = (s == t ? lambda * m.ez2_at[s] : 0.0) + lambda * excess * m.ez_at[s] * m.ez_at[t];
  return sigma;
}

struct HfMoments {
  double var_h = 0.0;
  double var_f = 0.0;
  double cov_hf = 0.0;
};

/// Joint normal limit of the centred diagonal H and the centred future
/// increment F, split after development year t.
inline HfMoments hf_moments(const ModelSpec& spec, std::size_t j, std::size_t t) {
  spec.validate();
  if (j < 1 || j > spec.T || t < 1 || t > spec.T) throw InvalidInput("index out of range");
  const auto m = dist_moments(spec);
  const double lambda = spec.lambda[j - 1];
  const double excess = lambda * lambda * m.var_y[j - 1] - 1.0;
  const double ez_le = m.ez_le[t - 1], ez2_le = m.ez2_le[t - 1];
  const double ez_gt = m.ez - ez_le, ez2_gt = m.ez2 - ez2_le;
  return {lambda * ez2_le + lambda * excess * ez_le * ez_le,
          lambda * ez2_gt + lambda * excess * ez_gt * ez_gt, lambda * excess * ez_le * ez_gt};
}

/// Eigenvalues (descending) of a symmetric positive semidefinite matrix:
/// the weights mu_k in W'W = sum_k mu_k Q_k^2 for W ~ N(0, cov).
inline std::vector<double> quadratic_form_eigs(const Eigen::MatrixXd& cov) {
  if (cov.rows() != cov.cols()) throw InvalidInput("covariance matrix must be square");
  if ((cov - cov.transpose()).cwiseAbs().maxCoeff() > 1e-10)
    throw InvalidInput("covariance matrix is not symmetric");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) throw InvalidInput("eigen decomposition failed");
  std::vector<double> mu(solver.eigenvalues().data(),
                         solver.eigenvalues().data() + solver.eigenvalues().size());
  std::sort(mu.begin(), mu.end(), std::greater<>());
  return mu;
}

struct AsymptoticQuantities {
  std::vector<double> f_limit;
  std::vector<double> sigma2_limit;
  std::vector<double> q_tilde;
  std::vector<double> gamma2;     // accident years 2..T; empty for dependent laws
  std::vector<Eigen::MatrixXd> clt_cov; // accident years 1..T
  std::vector<HfMoments> hf;      // accident year i split at T-i+1, i = 1..T
};

inline AsymptoticQuantities asymptotic_quantities(const ModelSpec& spec) {
  AsymptoticQuantities a;
  a.f_limit = limit_dev_factors(spec);
  a.sigma2_limit = limit_sigma2(spec);
  a.q_tilde = f_to_qtilde(a.f_limit);
  if (spec.independent())
    for (std::size_t i = 2; i <= spec.T; ++i) a.gamma2.push_back(gamma2(spec, i));
  for (std::size_t j = 1; j <= spec.T; ++j) {
    a.clt_cov.push_back(renewal_clt_cov(spec, j));
    a.hf.push_back(hf_moments(spec, j, spec.T - j + 1));
  }
  return a;
}

} // namespace clmack
