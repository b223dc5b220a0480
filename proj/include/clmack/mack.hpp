#pragma once

#include <clmack/detail/text.hpp>
#include <clmack/error.hpp>
#include <clmack/triangle.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace clmack {

/// How the last variance parameter sigma^2_{T-1} is produced. The estimator
/// formula only covers t <= T-2 (a single row is left at t = T-1).
struct TailRule {
  enum class Kind { mack_extrapolation, user_supplied };

  Kind kind = Kind::mack_extrapolation;
  double value = 0.0;

  static TailRule mack() { return {}; }
  static TailRule user_supplied(double v) {
    if (!std::isfinite(v) || v < 0.0) throw InvalidInput("tail variance must be finite and >= 0");
    return {Kind::user_supplied, v};
  }

  /// "mack" or "value:<x>".
  static TailRule parse(std::string_view text) {
    if (text == "mack") return mack();
    if (text.starts_with("value:")) {
      auto v = detail::parse_double(text.substr(6));
      if (!v) throw InvalidInput("bad tail rule value in '" + std::string(text) + "'");
      return user_supplied(*v);
    }
    throw InvalidInput("unknown tail rule '" + std::string(text) + "' (expected mack|value:<x>)");
  }

  std::string to_string() const {
    return kind == Kind::mack_extrapolation ? "mack" : "value:" + detail::format_double(value);
  }

  friend bool operator==(const TailRule&, const TailRule&) = default;
};

struct DevEstimates {
  std::vector<double> f_hat;      // f̂_1 .. f̂_{T-1}
  std::vector<double> sigma2_hat; // σ̂²_1 .. σ̂²_{T-1}
  TailRule tail_rule;
};

/// f̂_t = sum_{i<=T-t} C_{i,t+1} / sum_{i<=T-t} C_{i,t}, t = 1..T-1.
inline std::vector<double> dev_factors(const Triangle& tri) {
  const std::size_t n = tri.size();
  std::vector<double> f(n > 0 ? n - 1 : 0);
  for (std::size_t t = 1; t + 1 <= n; ++t) {
    double num = 0.0, den = 0.0;
    for (std::size_t i = 1; i <= n - t; ++i) {
      num += tri(i, t + 1);
      den += tri(i, t);
    }
    if (!(den > 0.0))
      throw EstimationError("development factor " + std::to_string(t) +
                                " has a zero column sum in development year " + std::to_string(t),
                            0, t);
    f[t - 1] = num / den;
  }
  return f;
}

/// σ̂²_t for t = 1..T-1 given f̂. Entries up to T-2 use the weighted
/// residual formula; the last one comes from `tail`. A zero C_{i,t} inside a
/// residual sum is an error.
inline std::vector<double> sigma2(const Triangle& tri, std::span<const double> f_hat,
                                  TailRule tail) {
  const std::size_t n = tri.size();
  if (n < 2) throw InvalidInput("variance estimates need T >= 2");
  if (f_hat.size() != n - 1) throw InvalidInput("f_hat must have length T-1");
  if (tail.kind == TailRule::Kind::mack_extrapolation && n < 3)
    throw InvalidInput("Mack tail extrapolation needs T >= 3");

  std::vector<double> s2(n - 1, 0.0);
  for (std::size_t t = 1; t + 2 <= n; ++t) {
    double acc = 0.0;
    for (std::size_t i = 1; i <= n - t; ++i) {
      const double c = tri(i, t);
      if (!(c > 0.0))
        throw EstimationError("zero cell C(" + std::to_string(i) + "," + std::to_string(t) +
                                  ") inside the variance sum",
                              i, t);
      const double r = tri(i, t + 1) / c - f_hat[t - 1];
      acc += c * r * r;
    }
    s2[t - 1] = acc / static_cast<double>(n - t - 1);
  }

  if (tail.kind == TailRule::Kind::user_supplied) {
    s2[n - 2] = tail.value;
  } else if (n == 3) {
    s2[1] = s2[0];
  } else {
    const double last = s2[n - 3], prev = s2[n - 4];
    const double ratio = prev > 0.0 ? last * last / prev : 0.0;
    s2[n - 2] = std::min({ratio, prev, last});
  }
  return s2;
}

inline std::vector<double> sigma2(const Triangle& tri, TailRule tail) {
  auto f = dev_factors(tri);
  return sigma2(tri, f, tail);
}

inline DevEstimates estimate(const Triangle& tri, TailRule tail = TailRule::mack()) {
  DevEstimates est;
  est.f_hat = dev_factors(tri);
  est.sigma2_hat = sigma2(tri, est.f_hat, tail);
  est.tail_rule = tail;
  return est;
}

struct ClPrediction {
  Triangle completed;           // observed cells untouched, the rest Ĉ_{i,t}
  std::vector<double> ultimate; // Ĉ_{i,T}, i = 1..T
};

/// Chain-ladder completion Ĉ_{i,t} = C_{i,T-i+1} prod_{s=T-i+1}^{t-1} f̂_s.
inline ClPrediction cl_predict(const Triangle& tri, std::span<const double> f_hat) {
  const std::size_t n = tri.size();
  if (f_hat.size() + 1 != n) throw InvalidInput("f_hat must have length T-1");
  std::vector<double> cells(n * n);
  std::vector<double> ultimate(n);
  for (std::size_t i = 1; i <= n; ++i) {
    const std::size_t d = tri.diagonal(i);
    for (std::size_t t = 1; t <= d; ++t) cells[(i - 1) * n + t - 1] = tri(i, t);
    double c = tri(i, d);
    for (std::size_t t = d + 1; t <= n; ++t) {
      c *= f_hat[t - 2];
      cells[(i - 1) * n + t - 1] = c;
    }
    ultimate[i - 1] = c;
  }
  return {Triangle::from_cumulative(n, std::move(cells)), std::move(ultimate)};
}

struct MsepRow {
  std::size_t i = 0;
  double latest = 0.0;              // C_{i,T-i+1}
  std::vector<double> path;         // Ĉ_{i,t}, t = T-i+1..T
  double cl_prediction = 0.0;       // Ĉ_{i,T}
  double mack_msep = 0.0;
  double standardized_msep = 0.0;   // L̂ = mack_msep / C_{i,T-i+1}
  double process_part = 0.0;
  double estimation_error_part = 0.0;
};

struct MsepReport {
  std::vector<MsepRow> rows; // accident years 2..T
  std::vector<double> f_hat;
  std::vector<double> sigma2_hat;
  TailRule tail_rule;

  const MsepRow& row(std::size_t i) const { return rows.at(i - 2); }
};

/// Mack's conditional MSEP estimator for every accident year i >= 2:
///
///   Ĉ_{i,T}^2 sum_{t=T-i+1}^{T-1} (σ̂²_t / f̂²_t) (1/Ĉ_{i,t} + 1/sum_{j<=T-t} C_{j,t})
///
/// The 1/Ĉ_{i,t} addends form the process part, the column-sum addends the
/// estimation-error part.
inline MsepReport mack_msep(const Triangle& tri, std::span<const double> f_hat,
                            std::span<const double> sigma2_hat, TailRule tail = TailRule::mack()) {
  const std::size_t n = tri.size();
  if (f_hat.size() + 1 != n || sigma2_hat.size() + 1 != n)
    throw InvalidInput("estimate vectors must have length T-1");

  std::vector<double> colsum(n, 0.0);
  for (std::size_t t = 1; t + 1 <= n; ++t)
    for (std::size_t i = 1; i <= n - t; ++i) colsum[t - 1] += tri(i, t);

  MsepReport report;
  report.f_hat.assign(f_hat.begin(), f_hat.end());
  report.sigma2_hat.assign(sigma2_hat.begin(), sigma2_hat.end());
  report.tail_rule = tail;

  for (std::size_t i = 2; i <= n; ++i) {
    MsepRow row;
    row.i = i;
    const std::size_t d = tri.diagonal(i);
    row.latest = tri(i, d);
    row.path.reserve(n - d + 1);
    double c = row.latest;
    row.path.push_back(c);
    for (std::size_t t = d; t + 1 <= n; ++t) {
      c *= f_hat[t - 1];
      row.path.push_back(c);
    }
    row.cl_prediction = c;

    const double ult2 = row.cl_prediction * row.cl_prediction;
    double process = 0.0, estimation = 0.0;
    for (std::size_t t = d; t + 1 <= n; ++t) {
      const double chat = row.path[t - d];
      const double f = f_hat[t - 1];
      if (!(chat > 0.0))
        throw EstimationError("predicted cell C(" + std::to_string(i) + "," + std::to_string(t) +
                                  ") is zero",
                              i, t);
      if (!(colsum[t - 1] > 0.0))
        throw EstimationError("zero column sum in development year " + std::to_string(t), i, t);
      if (!(f > 0.0))
        throw EstimationError("non-positive development factor " + std::to_string(t), i, t);
      const double w = sigma2_hat[t - 1] / (f * f);
      process += w / chat;
      estimation += w / colsum[t - 1];
    }
    row.process_part = ult2 * process;
    row.estimation_error_part = ult2 * estimation;
    if (!(row.latest > 0.0))
      throw EstimationError("latest cell C(" + std::to_string(i) + "," + std::to_string(d) +
                                ") is zero",
                            i, d);
    row.standardized_msep = (row.process_part + row.estimation_error_part) / row.latest;
    row.mack_msep = row.standardized_msep * row.latest;
    report.rows.push_back(std::move(row));
  }
  return report;
}

inline MsepReport mack_msep(const Triangle& tri, const DevEstimates& est) {
  return mack_msep(tri, est.f_hat, est.sigma2_hat, est.tail_rule);
}

} // namespace clmack
