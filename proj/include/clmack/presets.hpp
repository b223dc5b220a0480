#pragma once

#include <clmack/asymptotics.hpp>
#include <clmack/mack.hpp>
#include <clmack/model.hpp>
#include <clmack/triangle.hpp>

#include <sstream>
#include <string_view>
#include <vector>

namespace clmack {

/// Taylor & Ashe (1983) cumulative paid claims, the classic 10 x 10 triangle.
inline constexpr std::string_view kTaylorAsheCsv =
    "dev_1,dev_2,dev_3,dev_4,dev_5,dev_6,dev_7,dev_8,dev_9,dev_10\n"
    "accident_1,357848,1124788,1735330,2218270,2745596,3319994,3466336,3606286,3833515,3901463\n"
    "accident_2,352118,1236139,2170033,3353322,3799067,4120063,4647867,4914039,5339085,\n"
    "accident_3,290507,1292306,2218525,3235179,3985995,4132918,4628910,4909315,,\n"
    "accident_4,310608,1418858,2195047,3757447,4029929,4381982,4588268,,,\n"
    "accident_5,443160,1136350,2128333,2897821,3402672,3873311,,,,\n"
    "accident_6,396132,1333217,2180715,2985752,3691712,,,,,\n"
    "accident_7,440832,1288463,2419861,3483130,,,,,,\n"
    "accident_8,359480,1421128,2864498,,,,,,,\n"
    "accident_9,376686,1363294,,,,,,,,\n"
    "accident_10,344014,,,,,,,,,\n";

inline Triangle taylor_ashe() {
  std::istringstream in{std::string(kTaylorAsheCsv)};
  return parse_csv(in);
}

struct Calibration {
  std::vector<double> q_hat;      // size-weighted delay law from f_hat
  std::vector<double> lambda_hat; // first column over its first entry
  std::vector<double> f_hat;
  std::vector<double> sigma2_hat;
  TailRule tail_rule;
};

inline Calibration calibrate(const Triangle& tri, TailRule tail = TailRule::mack()) {
  Calibration c;
  const auto est = estimate(tri, tail);
  c.f_hat = est.f_hat;
  c.sigma2_hat = est.sigma2_hat;
  c.tail_rule = tail;
  c.q_hat = f_to_qtilde(c.f_hat);
  const double first = tri(1, 1);
  if (!(first > 0.0)) throw EstimationError("first cell C(1,1) is zero", 1, 1);
  for (std::size_t i = 1; i <= tri.size(); ++i) c.lambda_hat.push_back(tri(i, 1) / first);
  return c;
}

struct Preset {
  ModelSpec spec;
  std::vector<std::size_t> accident_years;
  std::uint32_t replications = 0;
  TailRule tail_rule;
};

/// Model calibrated on the Taylor-Ashe triangle: q and lambda from
/// calibrate(), Z = 1, alpha = 4e6, years 3, 5, 8. The last variance
/// parameter is pinned at its limit value (see README).
inline Preset sec5_preset() {
  const auto cal = calibrate(taylor_ashe());
  Preset p;
  p.spec.T = 10;
  p.spec.alpha = 4e6;
  p.spec.lambda = cal.lambda_hat;
  p.spec.delay = IndependentDelay{cal.q_hat, ClaimSizeDist::point_mass(1.0)};
  p.spec.counting = Counting::poisson();
  p.spec.validate();
  p.accident_years = {3, 5, 8};
  p.replications = 20000;
  p.tail_rule = TailRule::user_supplied(limit_sigma2(p.spec).back());
  return p;
}

} // namespace clmack
