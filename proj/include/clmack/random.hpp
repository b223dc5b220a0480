#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>

namespace clmack {

/// Philox4x32-10 block function (Salmon et al., "Parallel random numbers:
/// as easy as 1, 2, 3"). Pure function of (counter, key).
inline std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> ctr,
                                               std::array<std::uint32_t, 2> key) {
  constexpr std::uint32_t kMul0 = 0xD2511F53u, kMul1 = 0xCD9E8D57u;
  constexpr std::uint32_t kWeyl0 = 0x9E3779B9u, kWeyl1 = 0xBB67AE85u;
  for (int round = 0; round < 10; ++round) {
    const std::uint64_t p0 = std::uint64_t{kMul0} * ctr[0];
    const std::uint64_t p1 = std::uint64_t{kMul1} * ctr[2];
    ctr = {static_cast<std::uint32_t>(p1 >> 32) ^ ctr[1] ^ key[0], static_cast<std::uint32_t>(p1),
           static_cast<std::uint32_t>(p0 >> 32) ^ ctr[3] ^ key[1], static_cast<std::uint32_t>(p0)};
    key[0] += kWeyl0;
    key[1] += kWeyl1;
  }
  return ctr;
}

/// Counter-based random stream.
///
/// Stream (seed, replication, substream) reads Philox blocks at counters
/// (block_lo, block_hi, replication, substream) under key = seed. Distinct
/// (replication, substream) pairs therefore never share blocks, and the
/// values a replication sees do not depend on which thread runs it or in
/// what order replications are scheduled.
///
/// Satisfies UniformRandomBitGenerator with 64-bit output.
class Stream {
public:
  using result_type = std::uint64_t;

  Stream(std::uint64_t seed, std::uint32_t replication, std::uint32_t substream)
      : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
        replication_(replication), substream_(substream) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() {
    if (pos_ == 4) refill();
    const std::uint64_t lo = buf_[pos_], hi = buf_[pos_ + 1];
    pos_ += 2;
    return (hi << 32) | lo;
  }

  /// Uniform on the open interval (0, 1).
  double uniform() { return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53; }

private:
  void refill() {
    buf_ = philox4x32({static_cast<std::uint32_t>(block_), static_cast<std::uint32_t>(block_ >> 32),
                       replication_, substream_},
                      key_);
    ++block_;
    pos_ = 0;
  }

  std::array<std::uint32_t, 2> key_;
  std::uint32_t replication_;
  std::uint32_t substream_;
  std::uint64_t block_ = 0;
  std::array<std::uint32_t, 4> buf_{};
  int pos_ = 4;
};

namespace detail {

/// log(n!) - log(sqrt(2 pi n) (n/e)^n), Loader (2000).
inline double stirlerr(double n) {
  constexpr double s0 = 1.0 / 12, s1 = 1.0 / 360, s2 = 1.0 / 1260, s3 = 1.0 / 1680,
                   s4 = 1.0 / 1188;
  if (n <= 15.0) {
    if (n == 0.0) return 0.0; // limit is taken as lgamma(1) with the n log n term 0
    return std::lgamma(n + 1.0) - (n + 0.5) * std::log(n) + n -
           0.5 * std::log(2.0 * std::numbers::pi);
  }
  const double nn = n * n;
  if (n > 500) return (s0 - s1 / nn) / n;
  if (n > 80) return (s0 - (s1 - s2 / nn) / nn) / n;
  if (n > 35) return (s0 - (s1 - (s2 - s3 / nn) / nn) / nn) / n;
  return (s0 - (s1 - (s2 - (s3 - s4 / nn) / nn) / nn) / nn) / n;
}

/// x log(x/np) + np - x without cancellation, Loader (2000).
inline double bd0(double x, double np) {
  if (std::fabs(x - np) < 0.1 * (x + np)) {
    double v = (x - np) / (x + np);
    double s = (x - np) * v;
    double ej = 2.0 * x * v;
    v *= v;
    for (int j = 1; j < 1000; ++j) {
      ej *= v;
      const double s1 = s + ej / (2 * j + 1);
      if (s1 == s) return s1;
      s = s1;
    }
    return s;
  }
  return x * std::log(x / np) + np - x;
}

/// log P(N = k) for N ~ Poisson(mean).
inline double log_poisson_pmf(double k, double mean) {
  if (k == 0.0) return -mean;
  return -stirlerr(k) - bd0(k, mean) - 0.5 * std::log(2.0 * std::numbers::pi * k);
}

/// log P(K = k) for K ~ Binomial(n, p), 0 < k < n.
inline double log_binomial_pmf(double k, double n, double p) {
  const double q = 1.0 - p;
  if (k == 0.0) return n * std::log1p(-p);
  if (k == n) return n * std::log(p);
  return stirlerr(n) - stirlerr(k) - stirlerr(n - k) - bd0(k, n * p) - bd0(n - k, n * q) +
         0.5 * std::log(n / (2.0 * std::numbers::pi * k * (n - k)));
}

} // namespace detail

/// Exact Poisson variate. Sequential inversion below mean 10, Hörmann's
/// transformed rejection (PTRS) with Loader's accurate log-pmf above.
template <class Rng>
std::uint64_t sample_poisson(Rng& rng, double mean) {
  if (!(mean > 0.0)) return 0;
  if (mean < 10.0) {
    double p = std::exp(-mean);
    double cdf = p;
    const double u = rng.uniform();
    std::uint64_t k = 0;
    while (u > cdf) {
      ++k;
      p *= mean / static_cast<double>(k);
      const double next = cdf + p;
      if (next == cdf) break;
      cdf = next;
    }
    return k;
  }
  const double slam = std::sqrt(mean);
  const double b = 0.931 + 2.53 * slam;
  const double a = -0.059 + 0.02483 * b;
  const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
  const double vr = 0.9277 - 3.6224 / (b - 2.0);
  for (;;) {
    const double u = rng.uniform() - 0.5;
    const double v = rng.uniform();
    const double us = 0.5 - std::fabs(u);
    const double k = std::floor((2.0 * a / us + b) * u + mean + 0.43);
    if (us >= 0.07 && v <= vr) return static_cast<std::uint64_t>(k);
    if (k < 0.0 || (us < 0.013 && v > us)) continue;
    if (std::log(v) + std::log(inv_alpha) - std::log(a / (us * us) + b) <=
        detail::log_poisson_pmf(k, mean))
      return static_cast<std::uint64_t>(k);
  }
}

/// Exact binomial variate. Inversion when n min(p,1-p) < 10, otherwise
/// Hörmann's BTRS.
template <class Rng>
std::uint64_t sample_binomial(Rng& rng, std::uint64_t n, double p) {
  if (n == 0 || !(p > 0.0)) return 0;
  if (p >= 1.0) return n;
  if (p > 0.5) return n - sample_binomial(rng, n, 1.0 - p);
  const double dn = static_cast<double>(n);
  const double q = 1.0 - p;
  if (dn * p < 10.0) {
    const double ratio = p / q;
    double pk = std::exp(dn * std::log1p(-p));
    double cdf = pk;
    const double u = rng.uniform();
    std::uint64_t k = 0;
    while (u > cdf && k < n) {
      pk *= ratio * static_cast<double>(n - k) / static_cast<double>(k + 1);
      ++k;
      const double next = cdf + pk;
      if (next == cdf) break;
      cdf = next;
    }
    return k;
  }
  const double spq = std::sqrt(dn * p * q);
  const double b = 1.15 + 2.53 * spq;
  const double a = -0.0873 + 0.0248 * b + 0.01 * p;
  const double c = dn * p + 0.5;
  const double vr = 0.92 - 4.2 / b;
  const double alpha = (2.83 + 5.1 / b) * spq;
  const double m = std::floor((dn + 1.0) * p);
  const double log_mode = detail::log_binomial_pmf(m, dn, p);
  for (;;) {
    const double u = rng.uniform() - 0.5;
    double v = rng.uniform();
    const double us = 0.5 - std::fabs(u);
    const double k = std::floor((2.0 * a / us + b) * u + c);
    if (k < 0.0 || k > dn) continue;
    if (us >= 0.07 && v <= vr) return static_cast<std::uint64_t>(k);
    v = std::log(v * alpha / (a / (us * us) + b));
    if (v <= detail::log_binomial_pmf(k, dn, p) - log_mode) return static_cast<std::uint64_t>(k);
  }
}

/// Standard normal via Box-Muller (cosine branch only, no cached state).
template <class Rng>
double sample_normal(Rng& rng) {
  const double u1 = rng.uniform();
  const double u2 = rng.uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

/// Gamma(shape, scale) via Marsaglia-Tsang; shape < 1 by the U^{1/a} boost.
template <class Rng>
double sample_gamma(Rng& rng, double shape, double scale) {
  if (!(shape > 0.0)) return 0.0;
  if (shape < 1.0) {
    const double g = sample_gamma(rng, shape + 1.0, 1.0);
    return scale * g * std::pow(rng.uniform(), 1.0 / shape);
  }
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x, v;
    do {
      x = sample_normal(rng);
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = rng.uniform();
    if (u < 1.0 - 0.0331 * x * x * x * x) return scale * d * v;
    if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return scale * d * v;
  }
}

template <class Rng>
double sample_exponential(Rng& rng, double rate) {
  return -std::log(rng.uniform()) / rate;
}

} // namespace clmack
