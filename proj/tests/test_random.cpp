#include <clmack/random.hpp>
#include <clmack/stats.hpp>

#include <catch_amalgamated.hpp>

#include <boost/math/distributions/gamma.hpp>

#include <cmath>
#include <functional>
#include <map>
#include <vector>

using namespace clmack;

namespace {

// Pearson chi-square GOF against a pmf; cells below 5 expected counts are pooled.
double gof_p_value(const std::map<std::uint64_t, double>& observed, double n,
                   const std::function<double(std::uint64_t)>& pmf, std::uint64_t lo, std::uint64_t hi) {
  double stat = 0.0, pooled_obs = 0.0, pooled_exp = 0.0;
  int cells = 0;
  double covered = 0.0;
  for (std::uint64_t k = lo; k <= hi; ++k) {
    const double e = n * pmf(k);
    covered += e;
    const auto it = observed.find(k);
    const double o = it == observed.end() ? 0.0 : it->second;
    pooled_obs += o;
    pooled_exp += e;
    if (pooled_exp >= 5.0) {
      stat += (pooled_obs - pooled_exp) * (pooled_obs - pooled_exp) / pooled_exp;
      pooled_obs = pooled_exp = 0.0;
      ++cells;
    }
  }
  double total_obs = 0.0;
  for (const auto& [k, v] : observed) total_obs += v;
  // leftover mass (outside [lo,hi] plus the unfinished pool) forms one cell
  double inside = 0.0;
  for (const auto& [k, v] : observed)
    if (k >= lo && k <= hi) inside += v;
  const double last_obs = pooled_obs + (total_obs - inside);
  const double last_exp = pooled_exp + (n - covered);
  if (last_exp > 0.0) {
    stat += (last_obs - last_exp) * (last_obs - last_exp) / last_exp;
    ++cells;
  }
  return 1.0 - stats::chi_squared_cdf(cells - 1, stat);
}

double poisson_pmf(std::uint64_t k, double mean) {
  return std::exp(static_cast<double>(k) * std::log(mean) - mean - std::lgamma(static_cast<double>(k) + 1.0));
}

double binomial_pmf(std::uint64_t k, std::uint64_t n, double p) {
  const double dn = static_cast<double>(n), dk = static_cast<double>(k);
  return std::exp(std::lgamma(dn + 1) - std::lgamma(dk + 1) - std::lgamma(dn - dk + 1) + dk * std::log(p) +
                  (dn - dk) * std::log1p(-p));
}

} // namespace

TEST_CASE("philox known-answer vectors") {
  using A4 = std::array<std::uint32_t, 4>;
  CHECK(philox4x32({0, 0, 0, 0}, {0, 0}) == A4{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8});
  CHECK(philox4x32({0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, {0xffffffff, 0xffffffff}) ==
        A4{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd});
  CHECK(philox4x32({0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, {0xa4093822, 0x299f31d0}) ==
        A4{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1});
}

TEST_CASE("streams are deterministic and distinct") {
  Stream a(42, 3, 7), b(42, 3, 7), c(42, 4, 7), d(43, 3, 7);
  std::vector<std::uint64_t> va, vb, vc, vd;
  for (int k = 0; k < 20; ++k) {
    va.push_back(a());
    vb.push_back(b());
    vc.push_back(c());
    vd.push_back(d());
  }
  CHECK(va == vb);
  CHECK(va != vc);
  CHECK(va != vd);
}

TEST_CASE("uniforms lie in the open unit interval and pass KS") {
  Stream s(1, 0, 0);
  std::vector<double> u(20000);
  for (auto& x : u) {
    x = s.uniform();
    REQUIRE(x > 0.0);
    REQUIRE(x < 1.0);
  }
  const auto ks = stats::ks_test(u, [](double x) { return x; });
  CHECK(ks.p_value > 0.001);
}

TEST_CASE("log pmfs agree with lgamma evaluation") {
  for (double mean : {0.5, 7.0, 35.0, 1e3, 1e5})
    for (double k : {0.0, 1.0, std::floor(mean), std::floor(mean) + 17.0})
      CHECK(detail::log_poisson_pmf(k, mean) ==
            Catch::Approx(k * std::log(mean) - mean - std::lgamma(k + 1.0)).epsilon(1e-10));
  for (double n : {20.0, 400.0, 1e6})
    for (double p : {0.1, 0.5})
      for (double k : {1.0, std::floor(n * p), std::floor(n * p) + 3.0})
        CHECK(detail::log_binomial_pmf(k, n, p) ==
              Catch::Approx(std::lgamma(n + 1) - std::lgamma(k + 1) - std::lgamma(n - k + 1) + k * std::log(p) +
                            (n - k) * std::log1p(-p))
                  .epsilon(1e-9));
}

TEST_CASE("poisson sampler matches its pmf") {
  for (double mean : {0.3, 4.0, 12.5, 60.0, 2500.0}) {
    Stream s(7, 1, static_cast<std::uint32_t>(mean * 10));
    const int n = 40000;
    std::map<std::uint64_t, double> counts;
    std::vector<double> x(n);
    for (int k = 0; k < n; ++k) {
      const auto v = sample_poisson(s, mean);
      counts[v] += 1.0;
      x[k] = static_cast<double>(v);
    }
    INFO("mean " << mean);
    CHECK(std::fabs(stats::mean(x) - mean) < 4.0 * std::sqrt(mean / n));
    const auto lo = static_cast<std::uint64_t>(std::max(0.0, mean - 8.0 * std::sqrt(mean) - 2.0));
    const auto hi = static_cast<std::uint64_t>(mean + 8.0 * std::sqrt(mean) + 5.0);
    CHECK(gof_p_value(counts, n, [mean](std::uint64_t k) { return poisson_pmf(k, mean); }, lo, hi) > 1e-4);
  }
}

TEST_CASE("poisson sampler at very large means has the right moments") {
  Stream s(9, 2, 0);
  const double mean = 4e6;
  const int n = 20000;
  std::vector<double> x(n);
  for (auto& v : x) v = static_cast<double>(sample_poisson(s, mean));
  CHECK(std::fabs(stats::mean(x) - mean) < 4.0 * std::sqrt(mean / n));
  // var of the sample variance for a Poisson: (mu + 2 mu^2 (n/(n-1))) / n approx 2 mu^2 / n
  CHECK(std::fabs(stats::variance(x) - mean) < 4.0 * mean * std::sqrt(2.0 / n));
}

TEST_CASE("binomial sampler matches its pmf") {
  struct Case {
    std::uint64_t n;
    double p;
  };
  for (const auto& c : {Case{10, 0.3}, Case{200, 0.02}, Case{500, 0.4}, Case{1000, 0.93}, Case{100000, 0.25}}) {
    Stream s(11, 0, static_cast<std::uint32_t>(c.n));
    const int reps = 40000;
    std::map<std::uint64_t, double> counts;
    std::vector<double> x(reps);
    for (int k = 0; k < reps; ++k) {
      const auto v = sample_binomial(s, c.n, c.p);
      REQUIRE(v <= c.n);
      counts[v] += 1.0;
      x[k] = static_cast<double>(v);
    }
    const double mu = static_cast<double>(c.n) * c.p, sd = std::sqrt(mu * (1 - c.p));
    INFO("n " << c.n << " p " << c.p);
    CHECK(std::fabs(stats::mean(x) - mu) < 4.0 * sd / std::sqrt(reps));
    const auto lo = static_cast<std::uint64_t>(std::max(0.0, mu - 8.0 * sd - 2.0));
    const auto hi = static_cast<std::uint64_t>(std::min(static_cast<double>(c.n), mu + 8.0 * sd + 2.0));
    CHECK(gof_p_value(counts, reps, [&](std::uint64_t k) { return binomial_pmf(k, c.n, c.p); }, lo, hi) > 1e-4);
  }
  Stream s(1, 1, 1);
  CHECK(sample_binomial(s, 0, 0.5) == 0);
  CHECK(sample_binomial(s, 17, 0.0) == 0);
  CHECK(sample_binomial(s, 17, 1.0) == 17);
}

TEST_CASE("gamma and normal samplers pass KS") {
  Stream s(5, 0, 0);
  std::vector<double> g(20000), z(20000), small(20000);
  for (auto& v : g) v = sample_gamma(s, 2.5, 0.7);
  for (auto& v : small) v = sample_gamma(s, 0.4, 2.0);
  for (auto& v : z) v = sample_normal(s);
  CHECK(stats::ks_test(g, [](double x) {
          return boost::math::cdf(boost::math::gamma_distribution<double>(2.5, 0.7), x);
        }).p_value > 1e-3);
  CHECK(stats::ks_test(small, [](double x) {
          return boost::math::cdf(boost::math::gamma_distribution<double>(0.4, 2.0), x);
        }).p_value > 1e-3);
  CHECK(stats::ks_test(z, [](double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }).p_value > 1e-3);
}
