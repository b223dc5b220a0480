#pragma once

#include <clmack/error.hpp>
#include <clmack/random.hpp>

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <string>
#include <variant>
#include <vector>

namespace clmack {

/// Claim size law Z. Finite second moment and positive mean are required.
class ClaimSizeDist {
public:
  enum class Family { point_mass, gamma, lognormal, discrete };

  static ClaimSizeDist point_mass(double value) {
    ClaimSizeDist z;
    z.family_ = Family::point_mass;
    z.a_ = value;
    z.validate();
    return z;
  }
  static ClaimSizeDist gamma(double shape, double scale) {
    ClaimSizeDist z;
    z.family_ = Family::gamma;
    z.a_ = shape;
    z.b_ = scale;
    z.validate();
    return z;
  }
  static ClaimSizeDist lognormal(double mu, double sigma) {
    ClaimSizeDist z;
    z.family_ = Family::lognormal;
    z.a_ = mu;
    z.b_ = sigma;
    z.validate();
    return z;
  }
  static ClaimSizeDist discrete(std::vector<double> values, std::vector<double> probs) {
    ClaimSizeDist z;
    z.family_ = Family::discrete;
    z.values_ = std::move(values);
    z.probs_ = std::move(probs);
    z.validate();
    return z;
  }

  Family family() const noexcept { return family_; }
  /// point_mass: value; gamma: shape; lognormal: mu.
  double param1() const noexcept { return a_; }
  /// gamma: scale; lognormal: sigma.
  double param2() const noexcept { return b_; }
  const std::vector<double>& values() const noexcept { return values_; }
  const std::vector<double>& probs() const noexcept { return probs_; }

  double mean() const {
    switch (family_) {
    case Family::point_mass: return a_;
    case Family::gamma: return a_ * b_;
    case Family::lognormal: return std::exp(a_ + 0.5 * b_ * b_);
    case Family::discrete: {
      double m = 0.0;
      for (std::size_t k = 0; k < values_.size(); ++k) m += values_[k] * probs_[k];
      return m;
    }
    }
    return 0.0;
  }

  double second_moment() const {
    switch (family_) {
    case Family::point_mass: return a_ * a_;
    case Family::gamma: return a_ * (a_ + 1.0) * b_ * b_;
    case Family::lognormal: return std::exp(2.0 * a_ + 2.0 * b_ * b_);
    case Family::discrete: {
      double m = 0.0;
      for (std::size_t k = 0; k < values_.size(); ++k) m += values_[k] * values_[k] * probs_[k];
      return m;
    }
    }
    return 0.0;
  }

  double variance() const {
    if (family_ == Family::point_mass) return 0.0;
    if (family_ == Family::gamma) return a_ * b_ * b_;
    const double m = mean();
    return second_moment() - m * m;
  }

  template <class Rng>
  double sample(Rng& rng) const {
    switch (family_) {
    case Family::point_mass: return a_;
    case Family::gamma: return sample_gamma(rng, a_, b_);
    case Family::lognormal: return std::exp(a_ + b_ * sample_normal(rng));
    case Family::discrete: {
      const double u = rng.uniform();
      double cdf = 0.0;
      for (std::size_t k = 0; k < values_.size(); ++k) {
        cdf += probs_[k];
        if (u <= cdf) return values_[k];
      }
      return values_.back();
    }
    }
    return 0.0;
  }

  /// Sum of n i.i.d. draws, using closed-form convolutions where they exist.
  template <class Rng>
  double sample_sum(Rng& rng, std::uint64_t n) const {
    if (n == 0) return 0.0;
    switch (family_) {
    case Family::point_mass: return a_ * static_cast<double>(n);
    case Family::gamma: return sample_gamma(rng, a_ * static_cast<double>(n), b_);
    case Family::discrete: {
      double total = 0.0, rest = 1.0;
      std::uint64_t left = n;
      for (std::size_t k = 0; k + 1 < values_.size() && left > 0; ++k) {
        const double p = rest > 0.0 ? std::min(1.0, probs_[k] / rest) : 0.0;
        const std::uint64_t m = sample_binomial(rng, left, p);
        total += values_[k] * static_cast<double>(m);
        left -= m;
        rest -= probs_[k];
      }
      return total + values_.back() * static_cast<double>(left);
    }
    case Family::lognormal: {
      double total = 0.0;
      for (std::uint64_t k = 0; k < n; ++k) total += sample(rng);
      return total;
    }
    }
    return 0.0;
  }

  friend bool operator==(const ClaimSizeDist&, const ClaimSizeDist&) = default;

private:
  void validate() const {
    switch (family_) {
    case Family::point_mass:
      if (!(a_ > 0.0) || !std::isfinite(a_)) throw InvalidInput("point_mass value must be > 0");
      break;
    case Family::gamma:
      if (!(a_ > 0.0) || !(b_ > 0.0) || !std::isfinite(a_) || !std::isfinite(b_))
        throw InvalidInput("gamma claim size needs shape > 0 and scale > 0");
      break;
    case Family::lognormal:
      if (!std::isfinite(a_) || !(b_ >= 0.0) || !std::isfinite(b_))
        throw InvalidInput("lognormal claim size needs finite mu and sigma >= 0");
      break;
    case Family::discrete: {
      if (values_.empty() || values_.size() != probs_.size())
        throw InvalidInput("discrete claim size needs matching non-empty values/probs");
      double total = 0.0;
      for (std::size_t k = 0; k < values_.size(); ++k) {
        if (!std::isfinite(values_[k]) || values_[k] < 0.0 || !(probs_[k] >= 0.0))
          throw InvalidInput("discrete claim size needs values >= 0 and probs >= 0");
        total += probs_[k];
      }
      if (std::fabs(total - 1.0) > 1e-9) throw InvalidInput("discrete probs must sum to 1");
      if (!(mean() > 0.0)) throw InvalidInput("claim size mean must be > 0");
      break;
    }
    }
  }

  Family family_ = Family::point_mass;
  double a_ = 1.0;
  double b_ = 0.0;
  std::vector<double> values_;
  std::vector<double> probs_;
};

/// Renewal step law, normalized per accident year to mean 1/lambda_i. Only
/// the shape is stored: exponential, gamma(shape), lognormal(sigma) or a
/// deterministic step.
struct InterarrivalDist {
  enum class Family { exponential, gamma, lognormal, deterministic };

  Family family = Family::exponential;
  double shape = 1.0; // gamma shape, or lognormal sigma

  static InterarrivalDist exponential() { return {}; }
  static InterarrivalDist gamma(double shape) {
    if (!(shape > 0.0) || !std::isfinite(shape))
      throw InvalidInput("gamma interarrival shape must be > 0");
    return {Family::gamma, shape};
  }
  static InterarrivalDist lognormal(double sigma) {
    if (!(sigma >= 0.0) || !std::isfinite(sigma))
      throw InvalidInput("lognormal interarrival sigma must be finite and >= 0");
    return {Family::lognormal, sigma};
  }
  static InterarrivalDist deterministic() { return {Family::deterministic, 0.0}; }

  /// Squared coefficient of variation; var(Y) = cv2 / lambda^2.
  double cv2() const {
    switch (family) {
    case Family::exponential: return 1.0;
    case Family::gamma: return 1.0 / shape;
    case Family::lognormal: return std::expm1(shape * shape);
    case Family::deterministic: return 0.0;
    }
    return 0.0;
  }

  /// A step with mean 1/lambda.
  template <class Rng>
  double sample(Rng& rng, double lambda) const {
    switch (family) {
    case Family::exponential: return sample_exponential(rng, lambda);
    case Family::gamma: return sample_gamma(rng, shape, 1.0 / (shape * lambda));
    case Family::lognormal:
      return std::exp(-std::log(lambda) - 0.5 * shape * shape + shape * sample_normal(rng));
    case Family::deterministic: return 1.0 / lambda;
    }
    return 0.0;
  }

  friend bool operator==(const InterarrivalDist&, const InterarrivalDist&) = default;
};

struct Counting {
  enum class Kind { poisson, renewal };
  Kind kind = Kind::poisson;
  InterarrivalDist interarrival;

  static Counting poisson() { return {}; }
  static Counting renewal(InterarrivalDist y) { return {Kind::renewal, y}; }

  friend bool operator==(const Counting&, const Counting&) = default;
};

/// D independent of Z: delay probabilities q_t plus a claim size law.
struct IndependentDelay {
  std::vector<double> q;
  ClaimSizeDist claim_size;

  friend bool operator==(const IndependentDelay&, const IndependentDelay&) = default;
};

/// Finite joint law of (D, Z).
struct JointCell {
  std::size_t d = 1;
  double z = 0.0;
  double p = 0.0;

  friend bool operator==(const JointCell&, const JointCell&) = default;
};

using JointTable = std::vector<JointCell>;
using DelayLaw = std::variant<IndependentDelay, JointTable>;

/// Largest expected claim count per accident year the samplers accept.
inline constexpr double kMaxCountMean = 1e12;

struct ModelSpec {
  std::size_t T = 0;
  double alpha = 0.0;
  std::vector<double> lambda;
  DelayLaw delay;
  Counting counting;

  bool independent() const { return std::holds_alternative<IndependentDelay>(delay); }
  /// Compound Poisson cells with D independent of Z.
  bool special() const { return independent() && counting.kind == Counting::Kind::poisson; }

  const IndependentDelay& independent_delay() const {
    if (!independent()) throw UnsupportedModel("model has a joint (D,Z) law");
    return std::get<IndependentDelay>(delay);
  }

  void validate() const {
    if (T < 1) throw InvalidInput("T must be >= 1");
    if (!std::isfinite(alpha) || alpha < 0.0) throw InvalidInput("alpha must be finite and >= 0");
    if (lambda.size() != T) throw InvalidInput("lambda must have T entries");
    for (double l : lambda)
      if (!(l > 0.0) || !std::isfinite(l)) throw InvalidInput("every lambda_i must be > 0");
    for (double l : lambda) {
      double count_mean = alpha * l;
      if (counting.kind == Counting::Kind::renewal &&
          counting.interarrival.family == InterarrivalDist::Family::gamma)
        count_mean *= counting.interarrival.shape;
      if (count_mean > kMaxCountMean)
        throw InvalidInput("alpha * lambda exceeds the supported count range");
    }
    if (const auto* ind = std::get_if<IndependentDelay>(&delay)) {
      if (ind->q.size() != T) throw InvalidInput("q must have T entries");
      double total = 0.0;
      for (double q : ind->q) {
        if (!(q >= 0.0) || q > 1.0) throw InvalidInput("every q_t must lie in [0,1]");
        total += q;
      }
      if (std::fabs(total - 1.0) > 1e-9) throw InvalidInput("q must sum to 1");
    } else {
      const auto& table = std::get<JointTable>(delay);
      if (table.empty()) throw InvalidInput("joint (D,Z) table is empty");
      double total = 0.0;
      std::vector<double> ez(T, 0.0);
      for (const auto& cell : table) {
        if (cell.d < 1 || cell.d > T) throw InvalidInput("joint table delay outside 1..T");
        if (!std::isfinite(cell.z) || cell.z < 0.0 || !(cell.p >= 0.0))
          throw InvalidInput("joint table needs z >= 0 and p >= 0");
        total += cell.p;
        ez[cell.d - 1] += cell.z * cell.p;
      }
      if (std::fabs(total - 1.0) > 1e-9) throw InvalidInput("joint table probabilities must sum to 1");
      for (std::size_t t = 0; t < T; ++t)
        if (!(ez[t] > 0.0))
          throw InvalidInput("E[Z 1{D=" + std::to_string(t + 1) + "}] must be > 0");
    }
  }
};

/// Exact moments of (D, Z) and of the counting process.
struct DistMoments {
  double ez = 0.0;                // E[Z]
  double ez2 = 0.0;               // E[Z^2]
  std::vector<double> p_at;       // P(D = t)
  std::vector<double> p_le;       // P(D <= t)
  std::vector<double> ez_at;      // E[Z 1{D = t}]
  std::vector<double> ez2_at;     // E[Z^2 1{D = t}]
  std::vector<double> ez_le;      // E[Z 1{D <= t}]
  std::vector<double> ez2_le;     // E[Z^2 1{D <= t}]
  std::vector<double> lambda;
  std::vector<double> var_y;      // var of the renewal step per accident year

  /// 1-based accessors.
  double ez_at_t(std::size_t t) const { return ez_at[t - 1]; }
  double ez_le_t(std::size_t t) const { return ez_le[t - 1]; }
};

inline DistMoments dist_moments(const ModelSpec& spec) {
  const std::size_t T = spec.T;
  DistMoments m;
  m.p_at.assign(T, 0.0);
  m.ez_at.assign(T, 0.0);
  m.ez2_at.assign(T, 0.0);
  if (const auto* ind = std::get_if<IndependentDelay>(&spec.delay)) {
    m.ez = ind->claim_size.mean();
    m.ez2 = ind->claim_size.second_moment();
    for (std::size_t t = 0; t < T; ++t) {
      m.p_at[t] = ind->q[t];
      m.ez_at[t] = m.ez * ind->q[t];
      m.ez2_at[t] = m.ez2 * ind->q[t];
    }
  } else {
    for (const auto& cell : std::get<JointTable>(spec.delay)) {
      m.p_at[cell.d - 1] += cell.p;
      m.ez_at[cell.d - 1] += cell.p * cell.z;
      m.ez2_at[cell.d - 1] += cell.p * cell.z * cell.z;
    }
    for (std::size_t t = 0; t < T; ++t) {
      m.ez += m.ez_at[t];
      m.ez2 += m.ez2_at[t];
    }
  }
  m.p_le.resize(T);
  m.ez_le.resize(T);
  m.ez2_le.resize(T);
  std::partial_sum(m.p_at.begin(), m.p_at.end(), m.p_le.begin());
  std::partial_sum(m.ez_at.begin(), m.ez_at.end(), m.ez_le.begin());
  std::partial_sum(m.ez2_at.begin(), m.ez2_at.end(), m.ez2_le.begin());
  m.lambda = spec.lambda;
  m.var_y.resize(T);
  const double cv2 =
      spec.counting.kind == Counting::Kind::poisson ? 1.0 : spec.counting.interarrival.cv2();
  for (std::size_t i = 0; i < T; ++i) m.var_y[i] = cv2 / (spec.lambda[i] * spec.lambda[i]);
  return m;
}

} // namespace clmack
