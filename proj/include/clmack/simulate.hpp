#pragma once

#include <clmack/error.hpp>
#include <clmack/model.hpp>
#include <clmack/random.hpp>
#include <clmack/triangle.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <variant>
#include <vector>

namespace clmack {

/// M = sup{m >= 1 : Y_1 + ... + Y_m <= alpha} (0 if the first step already
/// exceeds alpha) for steps with mean 1/lambda.
///
/// Exponential and integer-shape gamma steps are Erlang, so M is
/// floor(N / k) for N ~ Poisson(k lambda alpha); this shortcut is exact and
/// used unless `allow_shortcut` is false. Other steps are summed one by one.
template <class Rng>
std::uint64_t sample_renewal_count(Rng& rng, double alpha, double lambda,
                                   const InterarrivalDist& y, bool allow_shortcut = true) {
  using F = InterarrivalDist::Family;
  if (!(alpha > 0.0)) return 0;
  if (y.family == F::deterministic) return static_cast<std::uint64_t>(std::floor(alpha * lambda));
  if (allow_shortcut) {
    if (y.family == F::exponential) return sample_poisson(rng, alpha * lambda);
    if (y.family == F::gamma && y.shape == std::floor(y.shape) && y.shape <= 1e6) {
      const auto k = static_cast<std::uint64_t>(y.shape);
      return sample_poisson(rng, y.shape * lambda * alpha) / k;
    }
  }
  std::uint64_t m = 0;
  double clock = y.sample(rng, lambda);
  while (clock <= alpha) {
    ++m;
    clock += y.sample(rng, lambda);
  }
  return m;
}

namespace detail {

inline std::vector<double> suffix_sums(const std::vector<double>& p) {
  std::vector<double> rest(p.size() + 1, 0.0);
  for (std::size_t k = p.size(); k-- > 0;) rest[k] = rest[k + 1] + p[k];
  return rest;
}

/// One step of multinomial thinning: how many of `left` items fall in a
/// bucket of probability p, given mass `rest` for this and later buckets.
template <class Rng>
std::uint64_t thin(Rng& rng, std::uint64_t left, double p, double rest, double rest_after) {
  if (left == 0 || !(p > 0.0)) return 0;
  if (!(rest_after > 0.0)) return left;
  return sample_binomial(rng, left, std::min(1.0, p / rest));
}

} // namespace detail

struct SimulatedRow {
  std::uint64_t claims = 0;          // M_i
  std::vector<double> cumulative;    // C_{i,1..T}
  std::vector<std::uint64_t> counts; // claims with D = t
};

struct SimulatedSquare {
  Triangle triangle;                              // full square, run-off mask implied
  std::vector<std::vector<std::uint64_t>> counts; // per-cell claim counts
  std::vector<std::uint64_t> claims;              // M_i
};

/// Substream used for accident year i of a replication.
inline std::uint32_t row_substream(std::size_t i) { return static_cast<std::uint32_t>(i); }

/// One accident year: draw M_i, then allocate M_i i.i.d. (D, Z) pairs to
/// development years. Every row has its own stream, so a row is identical
/// whether simulated alone or as part of a square.
inline SimulatedRow simulate_row(const ModelSpec& spec, std::uint64_t seed,
                                 std::uint32_t replication, std::size_t i,
                                 bool allow_shortcut = true) {
  const std::size_t T = spec.T;
  Stream rng(seed, replication, row_substream(i));
  const double lambda = spec.lambda.at(i - 1);

  SimulatedRow row;
  row.counts.assign(T, 0);
  row.cumulative.assign(T, 0.0);
  if (spec.counting.kind == Counting::Kind::poisson)
    row.claims = sample_poisson(rng, spec.alpha * lambda);
  else
    row.claims = sample_renewal_count(rng, spec.alpha, lambda, spec.counting.interarrival,
                                      allow_shortcut);

  std::vector<double> inc(T, 0.0);
  if (const auto* ind = std::get_if<IndependentDelay>(&spec.delay)) {
    const auto rest = detail::suffix_sums(ind->q);
    std::uint64_t left = row.claims;
    for (std::size_t t = 0; t < T; ++t) {
      const std::uint64_t n = detail::thin(rng, left, ind->q[t], rest[t], rest[t + 1]);
      left -= n;
      row.counts[t] = n;
      inc[t] = ind->claim_size.sample_sum(rng, n);
    }
  } else {
    const auto& table = std::get<JointTable>(spec.delay);
    std::vector<double> probs(table.size());
    for (std::size_t k = 0; k < table.size(); ++k) probs[k] = table[k].p;
    const auto rest = detail::suffix_sums(probs);
    std::uint64_t left = row.claims;
    for (std::size_t k = 0; k < table.size(); ++k) {
      const std::uint64_t n = detail::thin(rng, left, probs[k], rest[k], rest[k + 1]);
      left -= n;
      row.counts[table[k].d - 1] += n;
      inc[table[k].d - 1] += table[k].z * static_cast<double>(n);
    }
  }
  double acc = 0.0;
  for (std::size_t t = 0; t < T; ++t) {
    acc += inc[t];
    row.cumulative[t] = acc;
  }
  return row;
}

namespace detail {

inline SimulatedSquare assemble(const ModelSpec& spec, std::uint64_t seed,
                                std::uint32_t replication) {
  const std::size_t T = spec.T;
  SimulatedSquare sq;
  std::vector<double> cells;
  cells.reserve(T * T);
  for (std::size_t i = 1; i <= T; ++i) {
    auto row = simulate_row(spec, seed, replication, i);
    cells.insert(cells.end(), row.cumulative.begin(), row.cumulative.end());
    sq.counts.push_back(std::move(row.counts));
    sq.claims.push_back(row.claims);
  }
  sq.triangle = Triangle::from_cumulative(T, std::move(cells));
  return sq;
}

} // namespace detail

/// Special model: independent compound Poisson cells with intensity
/// alpha lambda_i q_t (Poisson thinning of the row count makes the cells
/// independent).
inline SimulatedSquare simulate_special(const ModelSpec& spec, std::uint64_t seed,
                                        std::uint32_t replication) {
  spec.validate();
  if (spec.counting.kind != Counting::Kind::poisson)
    throw InvalidInput("simulate_special needs Poisson counting");
  return detail::assemble(spec, seed, replication);
}

/// General model with renewal claim counts per accident year.
inline SimulatedSquare simulate_general(const ModelSpec& spec, std::uint64_t seed,
                                        std::uint32_t replication) {
  spec.validate();
  if (spec.counting.kind != Counting::Kind::renewal)
    throw InvalidInput("simulate_general needs renewal counting");
  return detail::assemble(spec, seed, replication);
}

inline SimulatedSquare simulate(const ModelSpec& spec, std::uint64_t seed,
                                std::uint32_t replication) {
  return spec.counting.kind == Counting::Kind::poisson ? simulate_special(spec, seed, replication)
                                                       : simulate_general(spec, seed, replication);
}

} // namespace clmack
