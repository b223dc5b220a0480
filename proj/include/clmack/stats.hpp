#pragma once

#include <clmack/error.hpp>

#include <boost/math/distributions/chi_squared.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace clmack::stats {

/// Neumaier compensated sum, accumulated in input order.
class CompensatedSum {
public:
  void add(double x) {
    const double t = sum_ + x;
    if (std::fabs(sum_) >= std::fabs(x))
      comp_ += (sum_ - t) + x;
    else
      comp_ += (x - t) + sum_;
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

inline double sum(std::span<const double> x) {
  CompensatedSum s;
  for (double v : x) s.add(v);
  return s.value();
}

inline double mean(std::span<const double> x) {
  if (x.empty()) throw InvalidInput("mean of an empty sample");
  return sum(x) / static_cast<double>(x.size());
}

/// Sample variance with divisor n-1 (two-pass).
inline double variance(std::span<const double> x) {
  if (x.size() < 2) return 0.0;
  const double m = mean(x);
  CompensatedSum s;
  for (double v : x) s.add((v - m) * (v - m));
  return s.value() / static_cast<double>(x.size() - 1);
}

inline double sd(std::span<const double> x) { return std::sqrt(variance(x)); }

/// Standard error of the mean.
inline double se(std::span<const double> x) {
  return x.empty() ? 0.0 : sd(x) / std::sqrt(static_cast<double>(x.size()));
}

inline double covariance(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw InvalidInput("covariance needs equal-length samples");
  if (x.size() < 2) return 0.0;
  const double mx = mean(x), my = mean(y);
  CompensatedSum s;
  for (std::size_t k = 0; k < x.size(); ++k) s.add((x[k] - mx) * (y[k] - my));
  return s.value() / static_cast<double>(x.size() - 1);
}

inline double correlation(std::span<const double> x, std::span<const double> y) {
  const double sx = sd(x), sy = sd(y);
  if (!(sx > 0.0) || !(sy > 0.0)) return 0.0;
  return covariance(x, y) / (sx * sy);
}

/// Quantile with linear interpolation between order statistics (R type 7).
inline double quantile(std::vector<double> x, double p) {
  if (x.empty()) throw InvalidInput("quantile of an empty sample");
  std::sort(x.begin(), x.end());
  const double h = (static_cast<double>(x.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, x.size() - 1);
  return x[lo] + (h - static_cast<double>(lo)) * (x[hi] - x[lo]);
}

inline double median(std::vector<double> x) { return quantile(std::move(x), 0.5); }

struct OlsFit {
  double intercept = 0.0;
  double slope = 0.0;
  double se_intercept = 0.0;
  double se_slope = 0.0;
  double residual_variance = 0.0;
  std::size_t n = 0;
};

/// Simple linear regression y = a + b x with classical standard errors.
inline OlsFit ols(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw InvalidInput("regression needs equal-length samples");
  if (x.size() < 3) throw InvalidInput("regression needs at least 3 points");
  const double mx = mean(x), my = mean(y);
  CompensatedSum sxx, sxy;
  for (std::size_t k = 0; k < x.size(); ++k) {
    sxx.add((x[k] - mx) * (x[k] - mx));
    sxy.add((x[k] - mx) * (y[k] - my));
  }
  if (!(sxx.value() > 0.0)) throw InvalidInput("regressor has zero variance");
  OlsFit fit;
  fit.n = x.size();
  fit.slope = sxy.value() / sxx.value();
  fit.intercept = my - fit.slope * mx;
  CompensatedSum rss;
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double r = y[k] - fit.intercept - fit.slope * x[k];
    rss.add(r * r);
  }
  const double n = static_cast<double>(x.size());
  fit.residual_variance = rss.value() / (n - 2.0);
  fit.se_slope = std::sqrt(fit.residual_variance / sxx.value());
  fit.se_intercept = std::sqrt(fit.residual_variance * (1.0 / n + mx * mx / sxx.value()));
  return fit;
}

/// Limiting Kolmogorov tail P(K > x) = 2 sum_{k>=1} (-1)^{k-1} exp(-2 k^2 x^2).
inline double kolmogorov_q(double x) {
  if (x <= 0.0) return 1.0;
  if (x < 0.2) return 1.0;
  double total = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * x * x);
    total += (k % 2 == 1 ? term : -term);
    if (term < 1e-16) break;
  }
  return std::clamp(2.0 * total, 0.0, 1.0);
}

struct KsResult {
  double statistic = 0.0;
  double p_value = 1.0;
  std::size_t n = 0;
};

/// One-sample Kolmogorov-Smirnov test against a continuous CDF. The p-value
/// uses the asymptotic law with Stephens' finite-n correction.
inline KsResult ks_test(std::vector<double> x, const std::function<double(double)>& cdf) {
  if (x.empty()) throw InvalidInput("KS test of an empty sample");
  std::sort(x.begin(), x.end());
  const double n = static_cast<double>(x.size());
  double d = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double f = cdf(x[k]);
    d = std::max({d, static_cast<double>(k + 1) / n - f, f - static_cast<double>(k) / n});
  }
  const double rn = std::sqrt(n);
  return {d, kolmogorov_q((rn + 0.12 + 0.11 / rn) * d), x.size()};
}

inline double chi_squared_cdf(double df, double x) {
  if (x <= 0.0) return 0.0;
  return boost::math::cdf(boost::math::chi_squared_distribution<double>(df), x);
}

struct Histogram {
  std::vector<double> edges; // bins.size() + 1 edges
  std::vector<std::size_t> counts;
};

/// Freedman-Diaconis bin width 2 IQR n^{-1/3}; falls back to one bin for a
/// degenerate sample and caps the bin count at max_bins.
inline Histogram fd_histogram(const std::vector<double>& x, std::size_t max_bins = 1000) {
  if (x.empty()) throw InvalidInput("histogram of an empty sample");
  const auto [lo_it, hi_it] = std::minmax_element(x.begin(), x.end());
  const double lo = *lo_it, hi = *hi_it;
  const double iqr = quantile(x, 0.75) - quantile(x, 0.25);
  std::size_t bins = 1;
  if (hi > lo && iqr > 0.0) {
    const double width = 2.0 * iqr / std::cbrt(static_cast<double>(x.size()));
    bins = static_cast<std::size_t>(std::ceil((hi - lo) / width));
    bins = std::clamp<std::size_t>(bins, 1, max_bins);
  }
  Histogram h;
  const double span = hi > lo ? hi - lo : 1.0;
  h.edges.resize(bins + 1);
  for (std::size_t k = 0; k <= bins; ++k)
    h.edges[k] = lo + span * static_cast<double>(k) / static_cast<double>(bins);
  h.counts.assign(bins, 0);
  for (double v : x) {
    auto k = static_cast<std::size_t>((v - lo) / span * static_cast<double>(bins));
    h.counts[std::min(k, bins - 1)] += 1;
  }
  return h;
}

} // namespace clmack::stats
