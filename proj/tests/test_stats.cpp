#include <clmack/random.hpp>
#include <clmack/stats.hpp>

#include <catch_amalgamated.hpp>

#include <boost/math/distributions/chi_squared.hpp>

#include <cmath>
#include <numeric>
#include <vector>

using namespace clmack;

TEST_CASE("compensated sums") {
  std::vector<double> x{1e16, 1.0, -1e16, 1.0};
  CHECK(stats::sum(x) == 2.0);
  std::vector<double> tenth(1000000, 0.1);
  CHECK(stats::sum(tenth) == Catch::Approx(100000.0).epsilon(1e-15));
  CHECK(stats::mean(std::vector<double>{1, 2, 3, 4}) == 2.5);
  CHECK(stats::variance(std::vector<double>{1, 2, 3, 4}) == Catch::Approx(5.0 / 3.0));
  CHECK(stats::covariance(std::vector<double>{1, 2, 3}, std::vector<double>{2, 4, 6}) == Catch::Approx(2.0));
  CHECK(stats::correlation(std::vector<double>{1, 2, 3}, std::vector<double>{3, 2, 1}) == Catch::Approx(-1.0));
}

TEST_CASE("type 7 quantiles") {
  const std::vector<double> x{3, 1, 4, 1, 5, 9, 2, 6};
  CHECK(stats::median(x) == 3.5);
  CHECK(stats::quantile(x, 0.0) == 1.0);
  CHECK(stats::quantile(x, 1.0) == 9.0);
  CHECK(stats::quantile(x, 0.25) == Catch::Approx(1.75));
  CHECK(stats::median(std::vector<double>{7}) == 7.0);
}

TEST_CASE("least squares on known data") {
  const std::vector<double> x{1, 2, 3, 4, 5};
  const std::vector<double> y{2.1, 3.9, 6.2, 7.8, 10.1};
  const auto fit = stats::ols(x, y);
  // closed form: sxx = 10, sxy = 19.9
  CHECK(fit.slope == Catch::Approx(1.99));
  CHECK(fit.intercept == Catch::Approx(6.02 - 1.99 * 3.0));
  double rss = 0.0;
  for (std::size_t k = 0; k < 5; ++k) rss += std::pow(y[k] - fit.intercept - fit.slope * x[k], 2);
  CHECK(fit.residual_variance == Catch::Approx(rss / 3.0));
  CHECK(fit.se_slope == Catch::Approx(std::sqrt(rss / 3.0 / 10.0)));
  CHECK(fit.se_intercept == Catch::Approx(std::sqrt(rss / 3.0 * (0.2 + 9.0 / 10.0))));
  CHECK_THROWS_AS(stats::ols(std::vector<double>{1, 1, 1}, std::vector<double>{1, 2, 3}), InvalidInput);
  CHECK_THROWS_AS(stats::ols(std::vector<double>{1, 2}, std::vector<double>{1, 2}), InvalidInput);
}

TEST_CASE("Kolmogorov tail values") {
  // reference values of the limiting distribution
  CHECK(stats::kolmogorov_q(1.36) == Catch::Approx(0.0494).margin(5e-4));
  CHECK(stats::kolmogorov_q(1.63) == Catch::Approx(0.0098).margin(2e-4));
  CHECK(stats::kolmogorov_q(0.5) == Catch::Approx(0.9639).margin(5e-4));
  CHECK(stats::kolmogorov_q(0.0) == 1.0);
}

TEST_CASE("KS test against chi-square draws") {
  const boost::math::chi_squared_distribution<double> chi(3.0);
  std::size_t rejections = 0;
  const std::size_t trials = 200;
  for (std::uint32_t r = 0; r < trials; ++r) {
    Stream s(4, r, 0);
    std::vector<double> x(500);
    for (auto& v : x) v = 2.0 * sample_gamma(s, 1.5, 1.0);
    if (stats::ks_test(x, [&](double v) { return boost::math::cdf(chi, v); }).p_value < 0.05) ++rejections;
  }
  // size near 5 %: binomial(200, 0.05) has sd about 3
  CHECK(rejections <= 22);

  Stream s(4, 9999, 0);
  std::vector<double> wrong(500);
  for (auto& v : wrong) v = 2.0 * sample_gamma(s, 2.0, 1.0);
  CHECK(stats::ks_test(wrong, [&](double v) { return boost::math::cdf(chi, v); }).p_value < 1e-3);
}

TEST_CASE("Freedman-Diaconis histogram") {
  std::vector<double> x(1000);
  std::iota(x.begin(), x.end(), 0.0);
  const auto h = stats::fd_histogram(x);
  std::size_t total = 0;
  for (auto c : h.counts) total += c;
  CHECK(total == 1000);
  CHECK(h.edges.front() == 0.0);
  CHECK(h.edges.back() == 999.0);
  CHECK(h.counts.size() == 10); // width 2 * 499.5 / 10 = 99.9
  const auto one = stats::fd_histogram(std::vector<double>(10, 3.0));
  CHECK(one.counts == std::vector<std::size_t>{10});
  CHECK(stats::fd_histogram(x, 3).counts.size() == 3);
}
