#pragma once

#include <clmack/asymptotics.hpp>
#include <clmack/detail/text.hpp>
#include <clmack/error.hpp>
#include <clmack/json.hpp>
#include <clmack/mack.hpp>
#include <clmack/model.hpp>
#include <clmack/oracle.hpp>
#include <clmack/parallel.hpp>
#include <clmack/simulate.hpp>
#include <clmack/stats.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace clmack {

inline constexpr const char* kVersion = "0.1.0";

/// Estimation failures above this share of replications abort a run.
inline constexpr double kMaxFailureRate = 0.001;

struct ExperimentConfig {
  ModelSpec spec;
  std::uint32_t replications = 1;
  std::uint64_t seed = 0;
  std::vector<std::size_t> accident_years;
  std::vector<double> alpha_grid;
  std::filesystem::path output_dir; // empty: nothing is written
  unsigned threads = 0;             // 0: hardware concurrency; never changes results
  TailRule tail_rule;
  std::vector<std::pair<std::size_t, std::size_t>> audit_cells{{3, 4}};
  double se_tol = 4.0;
  double ks_level = 0.01;
  double rel_tol = 0.05;
};

struct Check {
  std::string name;
  double value = 0.0;
  double threshold = 0.0;
  bool passed = false;
  std::string detail;
};

struct ExperimentResult {
  std::string experiment;
  std::vector<Check> checks;
  std::size_t failures = 0;
  std::size_t replications = 0;
  bool aborted = false;
  std::string diagnostics;
  Json results = Json::object();

  bool passed() const {
    if (aborted) return false;
    return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.passed; });
  }
  const Check* find(const std::string& name) const {
    for (const auto& c : checks)
      if (c.name == name) return &c;
    return nullptr;
  }
};

namespace detail {

inline void validate_config(const ExperimentConfig& cfg) {
  cfg.spec.validate();
  if (cfg.replications < 1) throw InvalidInput("replications must be >= 1");
  for (std::size_t i : cfg.accident_years)
    if (i < 2 || i > cfg.spec.T) throw InvalidInput("accident years must lie in 2..T");
  if (!(cfg.se_tol > 0.0) || !(cfg.ks_level > 0.0 && cfg.ks_level < 1.0) || !(cfg.rel_tol > 0.0))
    throw InvalidInput("tolerances must be positive (ks_level in (0,1))");
}

inline Json config_json(const ExperimentConfig& cfg) {
  Json cells = Json::array();
  for (const auto& [i, t] : cfg.audit_cells) cells.push_back({i, t});
  return {{"spec", to_json(cfg.spec)},
          {"replications", cfg.replications},
          {"seed", cfg.seed},
          {"accident_years", cfg.accident_years},
          {"alpha_grid", cfg.alpha_grid},
          {"tail_rule", cfg.tail_rule.to_string()},
          {"audit_cells", cells},
          {"se_tol", cfg.se_tol},
          {"ks_level", cfg.ks_level},
          {"rel_tol", cfg.rel_tol}};
}

/// |x - target| <= tol * se, with a tiny floor so that exactly degenerate
/// samples (se = 0) compare equal up to rounding.
inline Check se_check(std::string name, double x, double target, double se, double tol) {
  const double floor = 1e-9 * std::max({1.0, std::fabs(x), std::fabs(target)});
  const double dev = std::fabs(x - target);
  const double z = se > 0.0 ? dev / se : (dev <= floor ? 0.0 : INFINITY);
  Check c{std::move(name), z, tol, z <= tol || dev <= floor, ""};
  c.detail = "estimate " + format_double(x) + ", target " + format_double(target) + ", se " +
             format_double(se);
  return c;
}

inline Check rel_check(std::string name, double x, double target, double tol) {
  const double rel = target != 0.0 ? std::fabs(x / target - 1.0) : std::fabs(x);
  Check c{std::move(name), rel, tol, rel <= tol, ""};
  c.detail = "estimate " + format_double(x) + ", target " + format_double(target);
  return c;
}

inline Check ks_check(std::string name, const stats::KsResult& ks, double level) {
  Check c{std::move(name), ks.p_value, level, ks.p_value >= level, ""};
  c.detail = "D " + format_double(ks.statistic) + ", n " + std::to_string(ks.n);
  return c;
}

inline Json check_json(const Check& c) {
  return {{"name", c.name},
          {"value", c.value},
          {"threshold", c.threshold},
          {"passed", c.passed},
          {"detail", c.detail}};
}

/// Per-replication outcome: a row of results or the estimation error text.
template <class Row>
struct RepOutcome {
  std::optional<Row> row;
  std::string error;
};

template <class Row, class Fn>
std::vector<RepOutcome<Row>> run_replications(std::size_t n, unsigned threads, Fn&& fn) {
  std::vector<RepOutcome<Row>> out(n);
  parallel_for(n, threads, [&](std::size_t r) {
    try {
      out[r].row = fn(static_cast<std::uint32_t>(r));
    } catch (const EstimationError& e) {
      out[r].error = e.what();
    }
  });
  return out;
}

/// Counts failed replications and marks the result aborted above the cap.
template <class Row>
bool tally_failures(ExperimentResult& res, const std::vector<RepOutcome<Row>>& reps) {
  res.replications += reps.size();
  std::size_t failed = 0;
  std::string first;
  for (std::size_t r = 0; r < reps.size(); ++r) {
    if (reps[r].row) continue;
    if (failed++ == 0) first = "replication " + std::to_string(r) + ": " + reps[r].error;
  }
  res.failures += failed;
  const double rate = reps.empty() ? 0.0 : static_cast<double>(failed) / static_cast<double>(reps.size());
  Check c{"failure_rate", rate, kMaxFailureRate, rate <= kMaxFailureRate,
          std::to_string(failed) + " of " + std::to_string(reps.size()) + " replications failed"};
  res.checks.push_back(c);
  if (!c.passed) {
    res.aborted = true;
    res.diagnostics = c.detail + "; first failure at " + first;
  }
  return !res.aborted;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidInput("cannot write " + path.string());
  out << text;
}

inline std::string csv_line(std::initializer_list<std::string> fields) {
  std::string s;
  bool first = true;
  for (const auto& f : fields) {
    if (!first) s += ',';
    s += f;
    first = false;
  }
  return s + '\n';
}

inline std::string histogram_csv(const std::vector<double>& x) {
  std::string s = "bin_left,bin_right,count\n";
  if (x.empty()) return s;
  const auto h = stats::fd_histogram(x);
  for (std::size_t k = 0; k < h.counts.size(); ++k)
    s += csv_line({format_double(h.edges[k]), format_double(h.edges[k + 1]),
                   std::to_string(h.counts[k])});
  return s;
}

inline void finish(const ExperimentConfig& cfg, ExperimentResult& res) {
  if (cfg.output_dir.empty()) return;
  std::filesystem::create_directories(cfg.output_dir);
  Json checks = Json::array();
  for (const auto& c : res.checks) checks.push_back(check_json(c));
  Json summary = {{"experiment", res.experiment},
                  {"version", kVersion},
                  {"config", config_json(cfg)},
                  {"replications", res.replications},
                  {"failures", res.failures},
                  {"aborted", res.aborted},
                  {"diagnostics", res.diagnostics},
                  {"results", res.results},
                  {"checks", checks},
                  {"passed", res.passed()}};
  write_text(cfg.output_dir / "summary.json", summary.dump(2) + "\n");
}

inline std::string year_tag(std::size_t i) { return "i" + std::to_string(i); }

inline double prod_range(const std::vector<double>& f, std::size_t from, std::size_t to) {
  double p = 1.0;
  for (std::size_t s = from; s < to; ++s) p *= f[s - 1];
  return p;
}

} // namespace detail

/// Paired Mack estimate and exact oracle per replication and accident year.
struct FigureRow {
  std::vector<double> L_hat;
  std::vector<OracleResult> oracle;
};

/// Simulates triangles, computes Mack's standardized MSEP and the exact
/// standardized conditional MSEP for each configured accident year, and
/// compares their means with each other and with the limit mean.
inline ExperimentResult figure_experiment(const ExperimentConfig& cfg) {
  detail::validate_config(cfg);
  if (!cfg.spec.special()) throw InvalidInput("figure experiment needs the special model");
  if (cfg.accident_years.empty()) throw InvalidInput("no accident years requested");
  const auto& years = cfg.accident_years;

  auto reps = detail::run_replications<FigureRow>(cfg.replications, cfg.threads, [&](std::uint32_t r) {
    const auto sq = simulate_special(cfg.spec, cfg.seed, r);
    const auto tri = sq.triangle.observed_only();
    const auto f_hat = dev_factors(tri);
    const auto s2 = sigma2(tri, f_hat, cfg.tail_rule);
    const auto report = mack_msep(tri, f_hat, s2, cfg.tail_rule);
    FigureRow row;
    for (std::size_t i : years) {
      row.L_hat.push_back(report.row(i).standardized_msep);
      row.oracle.push_back(decompose(sq.triangle, cfg.spec, f_hat, i));
    }
    return row;
  });

  ExperimentResult res;
  res.experiment = "figure";
  if (!detail::tally_failures(res, reps)) {
    detail::finish(cfg, res);
    return res;
  }

  for (std::size_t k = 0; k < years.size(); ++k) {
    const std::size_t i = years[k];
    const std::string tag = detail::year_tag(i);
    std::vector<double> lhat, ltrue, diff;
    std::size_t identity_violations = 0;
    std::string pairs = "replication,L_hat,L_true,term1,term2,term3\n";
    for (std::size_t r = 0; r < reps.size(); ++r) {
      if (!reps[r].row) continue;
      const auto& o = reps[r].row->oracle[k];
      const double lh = reps[r].row->L_hat[k];
      lhat.push_back(lh);
      ltrue.push_back(o.L_alpha);
      diff.push_back(lh - o.L_alpha);
      const double parts = o.term1 + o.term2 + o.term3;
      if (std::fabs(parts - o.L_alpha) > 1e-10 * std::max(std::fabs(o.L_alpha), o.term1 + o.term2))
        ++identity_violations;
      pairs += detail::csv_line({std::to_string(r), detail::format_double(lh),
                                 detail::format_double(o.L_alpha), detail::format_double(o.term1),
                                 detail::format_double(o.term2), detail::format_double(o.term3)});
    }
    const double theory = process_term_expectation(cfg.spec, i).rhs + gamma2(cfg.spec, i);
    const double md = stats::mean(diff), sed = stats::se(diff);
    const double mh = stats::mean(lhat), mt = stats::mean(ltrue);
    res.results[tag] = {{"n", lhat.size()},
                        {"mean_L_hat", mh},
                        {"sd_L_hat", stats::sd(lhat)},
                        {"mean_L_true", mt},
                        {"sd_L_true", stats::sd(ltrue)},
                        {"mean_diff", md},
                        {"se_diff", sed},
                        {"limit_mean", theory},
                        {"identity_violations", identity_violations},
                        {"histogram_bins", "each series binned on its own Freedman-Diaconis grid"}};
    res.checks.push_back(detail::se_check("mean_diff_" + tag, md, 0.0, sed, cfg.se_tol));
    if (lhat.size() >= 2) {
      res.checks.push_back(detail::rel_check("mean_L_hat_vs_limit_" + tag, mh, theory, cfg.rel_tol));
      res.checks.push_back(detail::rel_check("mean_L_true_vs_limit_" + tag, mt, theory, cfg.rel_tol));
    }
    res.checks.push_back({"decomposition_identity_" + tag, static_cast<double>(identity_violations),
                          0.0, identity_violations == 0, "replications where terms do not sum to L"});
    if (!cfg.output_dir.empty()) {
      std::filesystem::create_directories(cfg.output_dir);
      detail::write_text(cfg.output_dir / ("pairs_" + tag + ".csv"), pairs);
      detail::write_text(cfg.output_dir / ("hist_L_hat_" + tag + ".csv"), detail::histogram_csv(lhat));
      detail::write_text(cfg.output_dir / ("hist_L_true_" + tag + ".csv"), detail::histogram_csv(ltrue));
    }
  }
  detail::finish(cfg, res);
  return res;
}

struct ConvergenceRow {
  double f_dev = 0.0;              // max_t |f_hat_t - f_t|
  double pred_dev = 0.0;           // max_{i>=2} |C_hat_{i,T}/C_{i,T} - 1|
  std::vector<double> pred_by_year; // |C_hat_{i,T}/C_{i,T} - 1|, i = 2..T
};

/// Medians over replications of the factor and predictor deviations for
/// each exposure in alpha_grid.
inline ExperimentResult convergence_study(const ExperimentConfig& cfg) {
  detail::validate_config(cfg);
  if (cfg.alpha_grid.empty()) throw InvalidInput("convergence study needs an alpha grid");
  for (std::size_t k = 1; k < cfg.alpha_grid.size(); ++k)
    if (!(cfg.alpha_grid[k] > cfg.alpha_grid[k - 1]))
      throw InvalidInput("alpha grid must be strictly increasing");

  ExperimentResult res;
  res.experiment = "convergence";
  Json table = Json::array();
  std::string csv = "alpha,median_f_dev,median_pred_dev,failures\n";
  std::vector<double> f_medians, pred_medians;
  const std::size_t T = cfg.spec.T;
  for (double alpha : cfg.alpha_grid) {
    ModelSpec spec = cfg.spec;
    spec.alpha = alpha;
    spec.validate();
    const auto f = limit_dev_factors(spec);
    auto reps = detail::run_replications<ConvergenceRow>(cfg.replications, cfg.threads, [&](std::uint32_t r) {
      const auto sq = simulate(spec, cfg.seed, r);
      const auto tri = sq.triangle.observed_only();
      const auto f_hat = dev_factors(tri);
      ConvergenceRow row;
      for (std::size_t t = 0; t + 1 < T; ++t)
        row.f_dev = std::max(row.f_dev, std::fabs(f_hat[t] - f[t]));
      for (std::size_t i = 2; i <= T; ++i) {
        const std::size_t d = T - i + 1;
        const double actual = sq.triangle(i, T);
        if (!(actual > 0.0)) throw EstimationError("zero ultimate C(" + std::to_string(i) + ",T)", i, T);
        const double dev = std::fabs(sq.triangle(i, d) * detail::prod_range(f_hat, d, T) / actual - 1.0);
        row.pred_by_year.push_back(dev);
        row.pred_dev = std::max(row.pred_dev, dev);
      }
      return row;
    });
    const std::size_t before = res.failures;
    if (!detail::tally_failures(res, reps)) {
      res.checks.back().name = "failure_rate_alpha_" + detail::format_double(alpha);
      detail::finish(cfg, res);
      return res;
    }
    res.checks.back().name = "failure_rate_alpha_" + detail::format_double(alpha);
    std::vector<double> fd, pd;
    std::vector<std::vector<double>> by_year(T - 1);
    for (const auto& rep : reps) {
      if (!rep.row) continue;
      fd.push_back(rep.row->f_dev);
      pd.push_back(rep.row->pred_dev);
      for (std::size_t k = 0; k + 1 < T; ++k) by_year[k].push_back(rep.row->pred_by_year[k]);
    }
    Json per_year = Json::object();
    for (std::size_t k = 0; k + 1 < T; ++k) per_year[detail::year_tag(k + 2)] = stats::median(by_year[k]);
    f_medians.push_back(stats::median(fd));
    pred_medians.push_back(stats::median(pd));
    table.push_back({{"alpha", alpha},
                     {"median_f_dev", f_medians.back()},
                     {"median_pred_dev", pred_medians.back()},
                     {"median_pred_dev_by_year", per_year}});
    csv += detail::csv_line({detail::format_double(alpha), detail::format_double(f_medians.back()),
                             detail::format_double(pred_medians.back()),
                             std::to_string(res.failures - before)});
  }
  res.results["grid"] = table;
  bool decreasing = true;
  for (std::size_t k = 1; k < f_medians.size(); ++k) decreasing = decreasing && f_medians[k] < f_medians[k - 1];
  res.checks.push_back({"median_f_dev_decreasing", decreasing ? 1.0 : 0.0, 1.0, decreasing,
                        "median of max_t |f_hat_t - f_t| strictly decreasing over the grid"});
  res.checks.push_back({"median_pred_dev_at_largest_alpha", pred_medians.back(), 0.01,
                        pred_medians.back() < 0.01,
                        "median of max_i |C_hat_iT / C_iT - 1| at alpha " +
                            detail::format_double(cfg.alpha_grid.back())});
  if (!cfg.output_dir.empty()) {
    std::filesystem::create_directories(cfg.output_dir);
    detail::write_text(cfg.output_dir / "convergence.csv", csv);
  }
  detail::finish(cfg, res);
  return res;
}

/// Kolmogorov-Smirnov test of (T-t-1) sigma2_hat_t / sigma2_t against
/// chi^2_{T-t-1} for every t <= T-2 with sigma2_t > 0.
inline ExperimentResult sigma2_distribution_test(const ExperimentConfig& cfg) {
  detail::validate_config(cfg);
  const std::size_t T = cfg.spec.T;
  if (T < 3) throw InvalidInput("variance test needs T >= 3");
  const auto s2 = limit_sigma2(cfg.spec);
  const TailRule tail = TailRule::user_supplied(0.0); // the tail entry is not tested

  auto reps = detail::run_replications<std::vector<double>>(cfg.replications, cfg.threads, [&](std::uint32_t r) {
    const auto tri = simulate(cfg.spec, cfg.seed, r).triangle.observed_only();
    return sigma2(tri, dev_factors(tri), tail);
  });
  ExperimentResult res;
  res.experiment = "sigma2";
  if (!detail::tally_failures(res, reps)) {
    detail::finish(cfg, res);
    return res;
  }
  std::string csv = "t,df,n,statistic,p_value\n";
  for (std::size_t t = 1; t + 2 <= T; ++t) {
    const std::string tag = "t" + std::to_string(t);
    if (!(s2[t - 1] > 0.0)) {
      res.results[tag] = {{"skipped", "limit variance is zero"}};
      continue;
    }
    const double df = static_cast<double>(T - t - 1);
    std::vector<double> x;
    for (const auto& rep : reps)
      if (rep.row) x.push_back(df * (*rep.row)[t - 1] / s2[t - 1]);
    const auto ks = stats::ks_test(x, [df](double v) { return stats::chi_squared_cdf(df, v); });
    res.results[tag] = {{"df", df}, {"n", ks.n}, {"statistic", ks.statistic}, {"p_value", ks.p_value},
                        {"mean_scaled", stats::mean(x)}};
    res.checks.push_back(detail::ks_check("ks_sigma2_" + tag, ks, cfg.ks_level));
    csv += detail::csv_line({std::to_string(t), detail::format_double(df), std::to_string(ks.n),
                             detail::format_double(ks.statistic), detail::format_double(ks.p_value)});
  }
  if (!cfg.output_dir.empty()) {
    std::filesystem::create_directories(cfg.output_dir);
    detail::write_text(cfg.output_dir / "sigma2_ks.csv", csv);
  }
  detail::finish(cfg, res);
  return res;
}

struct EstimationErrorRow {
  double statistic = 0.0;  // C_{i,T-i+1} (prod f - prod f_hat)^2
  double gamma2_hat = 0.0; // plug-in estimate
};

/// Distribution of C_{i,T-i+1}(prod f - prod f_hat)^2 against its
/// gamma_i^2 chi^2_1 limit, and the plug-in estimate of gamma_i^2.
inline ExperimentResult estimation_error_test(const ExperimentConfig& cfg, std::size_t i) {
  detail::validate_config(cfg);
  const std::size_t T = cfg.spec.T;
  if (i < 2 || i > T) throw InvalidInput("accident year must lie in 2..T");
  const auto f = limit_dev_factors(cfg.spec);
  const std::size_t d = T - i + 1;
  const double g = detail::prod_range(f, d, T);

  auto reps = detail::run_replications<EstimationErrorRow>(cfg.replications, cfg.threads, [&](std::uint32_t r) {
    const auto tri = simulate(cfg.spec, cfg.seed, r).triangle.observed_only();
    const auto f_hat = dev_factors(tri);
    const auto s2 = sigma2(tri, f_hat, cfg.tail_rule);
    const auto report = mack_msep(tri, f_hat, s2, cfg.tail_rule);
    const double gap = g - detail::prod_range(f_hat, d, T);
    const double c = tri(i, d);
    return EstimationErrorRow{c * gap * gap, report.row(i).estimation_error_part / c};
  });
  ExperimentResult res;
  res.experiment = "estimation_error";
  if (!detail::tally_failures(res, reps)) {
    detail::finish(cfg, res);
    return res;
  }
  std::vector<double> x, gh;
  std::string csv = "replication,statistic,gamma2_hat\n";
  for (std::size_t r = 0; r < reps.size(); ++r) {
    if (!reps[r].row) continue;
    x.push_back(reps[r].row->statistic);
    gh.push_back(reps[r].row->gamma2_hat);
    csv += detail::csv_line({std::to_string(r), detail::format_double(x.back()),
                             detail::format_double(gh.back())});
  }
  const std::string tag = detail::year_tag(i);
  Json out = {{"i", i}, {"n", x.size()}, {"mean_statistic", stats::mean(x)},
              {"se_statistic", stats::se(x)}, {"mean_gamma2_hat", stats::mean(gh)}};
  if (cfg.spec.independent()) {
    const double g2 = gamma2(cfg.spec, i);
    out["gamma2"] = g2;
    if (g2 > 0.0) {
      res.checks.push_back(detail::rel_check("mean_statistic_vs_gamma2_" + tag, stats::mean(x), g2, cfg.rel_tol));
      res.checks.push_back(detail::rel_check("mean_gamma2_hat_vs_gamma2_" + tag, stats::mean(gh), g2, cfg.rel_tol));
      const auto ks = stats::ks_test(x, [g2](double v) { return stats::chi_squared_cdf(1.0, v / g2); });
      out["ks_statistic"] = ks.statistic;
      out["ks_p_value"] = ks.p_value;
      res.checks.push_back(detail::ks_check("ks_statistic_" + tag, ks, cfg.ks_level));
    } else {
      const double top = *std::max_element(x.begin(), x.end());
      res.checks.push_back({"statistic_zero_" + tag, top, 0.0, top <= 1e-12, "gamma2 is zero"});
    }
  } else {
    out["gamma2"] = nullptr;
    out["note"] = "no closed form for a dependent (D,Z) law; empirical mean only";
  }
  res.results[tag] = out;
  if (!cfg.output_dir.empty()) {
    std::filesystem::create_directories(cfg.output_dir);
    detail::write_text(cfg.output_dir / ("estimation_error_" + tag + ".csv"), csv);
  }
  detail::finish(cfg, res);
  return res;
}

/// Mean of the cross term and the correlation of its two factors.
inline ExperimentResult cross_term_test(const ExperimentConfig& cfg, std::size_t i) {
  detail::validate_config(cfg);
  if (!cfg.spec.special()) throw InvalidInput("cross-term test needs the special model");
  if (i < 2 || i > cfg.spec.T) throw InvalidInput("accident year must lie in 2..T");
  auto reps = detail::run_replications<OracleResult>(cfg.replications, cfg.threads, [&](std::uint32_t r) {
    const auto sq = simulate_special(cfg.spec, cfg.seed, r);
    const auto f_hat = dev_factors(sq.triangle.observed_only());
    return decompose(sq.triangle, cfg.spec, f_hat, i);
  });
  ExperimentResult res;
  res.experiment = "cross_term";
  if (!detail::tally_failures(res, reps)) {
    detail::finish(cfg, res);
    return res;
  }
  std::vector<double> t3, a1, a2;
  std::string csv = "replication,term3,A1,A2\n";
  for (std::size_t r = 0; r < reps.size(); ++r) {
    if (!reps[r].row) continue;
    t3.push_back(reps[r].row->term3);
    a1.push_back(reps[r].row->A1);
    a2.push_back(reps[r].row->A2);
    csv += detail::csv_line({std::to_string(r), detail::format_double(t3.back()),
                             detail::format_double(a1.back()), detail::format_double(a2.back())});
  }
  const std::string tag = detail::year_tag(i);
  const double corr = stats::correlation(a1, a2);
  // atanh(r) has standard error 1/sqrt(n-3) under zero correlation
  const double n = static_cast<double>(a1.size());
  const double se_z = n > 3.0 ? 1.0 / std::sqrt(n - 3.0) : INFINITY;
  res.results[tag] = {{"n", t3.size()}, {"mean_term3", stats::mean(t3)}, {"se_term3", stats::se(t3)},
                      {"corr_A1_A2", corr}, {"se_atanh_corr", se_z}};
  res.checks.push_back(detail::se_check("mean_term3_" + tag, stats::mean(t3), 0.0, stats::se(t3), cfg.se_tol));
  res.checks.push_back(detail::se_check("corr_A1_A2_" + tag, std::atanh(std::clamp(corr, -0.999999, 0.999999)),
                                        0.0, se_z, cfg.se_tol));
  if (!cfg.output_dir.empty()) {
    std::filesystem::create_directories(cfg.output_dir);
    detail::write_text(cfg.output_dir / ("cross_term_" + tag + ".csv"), csv);
  }
  detail::finish(cfg, res);
  return res;
}

struct AuditCell {
  std::size_t i = 0, t = 0;
  stats::OlsFit mean_fit;     // C_{i,t+1} on C_{i,t}
  stats::OlsFit variance_fit; // squared deviation from the model mean on C_{i,t}
  double intercept_theory = 0.0;
  double variance_theory = 0.0;
  double f_t = 0.0;
};

struct AuditReport {
  std::vector<AuditCell> cells;
  std::size_t replications = 0;
};

/// Regresses C_{i,t+1} on C_{i,t} across replications. Under the special
/// model the conditional mean is C_{i,t} + E[M] P(D=t+1) E[Z] (slope 1) and
/// the conditional variance E[M] P(D=t+1) E[Z^2] (flat in C_{i,t}).
inline ExperimentResult mack_assumption_audit(const ExperimentConfig& cfg, AuditReport* report = nullptr) {
  detail::validate_config(cfg);
  if (!cfg.spec.special()) throw InvalidInput("assumption audit needs the special model");
  if (cfg.replications < 1000) throw InvalidInput("assumption audit needs at least 1000 replications");
  const std::size_t T = cfg.spec.T;
  for (const auto& [i, t] : cfg.audit_cells)
    if (i < 1 || i > T || t < 1 || t >= T) throw InvalidInput("audit cell outside 1..T x 1..T-1");

  using Pairs = std::vector<std::pair<double, double>>;
  auto reps = detail::run_replications<Pairs>(cfg.replications, cfg.threads, [&](std::uint32_t r) {
    Pairs p;
    for (const auto& [i, t] : cfg.audit_cells) {
      const auto row = simulate_row(cfg.spec, cfg.seed, r, i);
      p.emplace_back(row.cumulative[t - 1], row.cumulative[t]);
    }
    return p;
  });
  ExperimentResult res;
  res.experiment = "audit";
  detail::tally_failures(res, reps);
  const auto m = dist_moments(cfg.spec);
  const auto f = limit_dev_factors(cfg.spec);
  AuditReport audit;
  audit.replications = cfg.replications;
  std::string csv = "i,t,slope,se_slope,intercept,se_intercept,intercept_theory,var_slope,se_var_slope,"
                    "var_intercept,se_var_intercept,variance_theory\n";
  for (std::size_t k = 0; k < cfg.audit_cells.size(); ++k) {
    const auto [i, t] = cfg.audit_cells[k];
    const std::string tag = "i" + std::to_string(i) + "_t" + std::to_string(t);
    AuditCell cell;
    cell.i = i;
    cell.t = t;
    const double em = cfg.spec.alpha * cfg.spec.lambda[i - 1];
    cell.intercept_theory = em * m.ez_at[t];
    cell.variance_theory = em * m.ez2_at[t];
    cell.f_t = f[t - 1];
    std::vector<double> x, y, e2;
    for (const auto& rep : reps) {
      x.push_back(rep.row->at(k).first);
      y.push_back(rep.row->at(k).second);
      const double e = y.back() - x.back() - cell.intercept_theory;
      e2.push_back(e * e);
    }
    cell.mean_fit = stats::ols(x, y);
    cell.variance_fit = stats::ols(x, e2);
    const auto& mf = cell.mean_fit;
    const auto& vf = cell.variance_fit;
    res.checks.push_back(detail::se_check("mean_slope_one_" + tag, mf.slope, 1.0, mf.se_slope, cfg.se_tol));
    res.checks.push_back(detail::se_check("mean_intercept_" + tag, mf.intercept, cell.intercept_theory,
                                          mf.se_intercept, cfg.se_tol));
    res.checks.push_back(detail::se_check("variance_slope_zero_" + tag, vf.slope, 0.0,
                                          vf.se_slope, cfg.se_tol));
    res.checks.push_back(detail::se_check("variance_level_" + tag, stats::mean(e2), cell.variance_theory,
                                          stats::se(e2), cfg.se_tol));
    const double z_mack = mf.se_slope > 0.0 ? (mf.slope - cell.f_t) / mf.se_slope : 0.0;
    res.results[tag] = {{"slope", mf.slope},
                        {"se_slope", mf.se_slope},
                        {"intercept", mf.intercept},
                        {"se_intercept", mf.se_intercept},
                        {"intercept_theory", cell.intercept_theory},
                        {"variance_slope", vf.slope},
                        {"se_variance_slope", vf.se_slope},
                        {"variance_intercept", vf.intercept},
                        {"se_variance_intercept", vf.se_intercept},
                        {"variance_theory", cell.variance_theory},
                        {"limit_f_t", cell.f_t},
                        {"slope_minus_f_t_in_se", z_mack}};
    csv += detail::csv_line({std::to_string(i), std::to_string(t), detail::format_double(mf.slope),
                             detail::format_double(mf.se_slope), detail::format_double(mf.intercept),
                             detail::format_double(mf.se_intercept), detail::format_double(cell.intercept_theory),
                             detail::format_double(vf.slope), detail::format_double(vf.se_slope),
                             detail::format_double(vf.intercept), detail::format_double(vf.se_intercept),
                             detail::format_double(cell.variance_theory)});
    audit.cells.push_back(cell);
  }
  if (!cfg.output_dir.empty()) {
    std::filesystem::create_directories(cfg.output_dir);
    detail::write_text(cfg.output_dir / "audit.csv", csv);
  }
  if (report) *report = std::move(audit);
  detail::finish(cfg, res);
  return res;
}

/// Empirical covariance of alpha^{-1/2}(S - E S) for the incremental row S of
/// accident year j against the closed-form limit, plus the split moments of
/// the diagonal H and the future increment F. One pass per configured year
/// (year 1 when none is configured).
inline ExperimentResult renewal_cov_test(const ExperimentConfig& cfg) {
  detail::validate_config(cfg);
  const std::size_t T = cfg.spec.T;
  const std::vector<std::size_t> years =
      cfg.accident_years.empty() ? std::vector<std::size_t>{1} : cfg.accident_years;
  if (!(cfg.spec.alpha > 0.0)) throw InvalidInput("covariance test needs alpha > 0");
  const double scale = 1.0 / std::sqrt(cfg.spec.alpha);

  ExperimentResult res;
  res.experiment = "renewal_cov";
  std::string csv = "j,s,t,empirical,se,limit\n";
  for (std::size_t j : years) {
    auto reps = detail::run_replications<std::vector<double>>(cfg.replications, cfg.threads, [&](std::uint32_t r) {
      const auto row = simulate_row(cfg.spec, cfg.seed, r, j);
      std::vector<double> inc(T);
      double prev = 0.0;
      for (std::size_t t = 0; t < T; ++t) {
        inc[t] = (row.cumulative[t] - prev) * scale;
        prev = row.cumulative[t];
      }
      return inc;
    });
    detail::tally_failures(res, reps);
    res.checks.back().name = "failure_rate_j" + std::to_string(j);
    const std::size_t n = reps.size();
    std::vector<std::vector<double>> col(T, std::vector<double>(n));
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t t = 0; t < T; ++t) col[t][r] = (*reps[r].row)[t];
    std::vector<double> mu(T);
    for (std::size_t t = 0; t < T; ++t) mu[t] = stats::mean(col[t]);

    // entry (s,t): mean of centred products with its standard error
    auto moment = [&](const std::vector<double>& a, double ma, const std::vector<double>& b, double mb) {
      std::vector<double> prod(n);
      for (std::size_t r = 0; r < n; ++r) prod[r] = (a[r] - ma) * (b[r] - mb);
      const double nn = static_cast<double>(n);
      return std::pair{stats::mean(prod) * nn / std::max(1.0, nn - 1.0), stats::se(prod)};
    };

    const auto sigma = renewal_clt_cov(cfg.spec, j);
    const std::string jt = "j" + std::to_string(j);
    Json emp = Json::array();
    for (std::size_t s = 0; s < T; ++s) {
      std::vector<double> emp_row;
      for (std::size_t t = 0; t < T; ++t) {
        const auto [c, se] = moment(col[s], mu[s], col[t], mu[t]);
        emp_row.push_back(c);
        const double lim = sigma(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(t));
        if (t >= s)
          res.checks.push_back(detail::se_check("cov_" + jt + "_" + std::to_string(s + 1) + "_" +
                                                    std::to_string(t + 1),
                                                c, lim, se, cfg.se_tol));
        csv += detail::csv_line({std::to_string(j), std::to_string(s + 1), std::to_string(t + 1),
                                 detail::format_double(c), detail::format_double(se),
                                 detail::format_double(lim)});
      }
      emp.push_back(emp_row);
    }

    // H: cumulative diagonal of year j, F: the remaining increments
    const std::size_t d = T - j + 1;
    std::vector<double> h(n, 0.0), fu(n, 0.0);
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t t = 0; t < T; ++t) (t < d ? h[r] : fu[r]) += col[t][r];
    const double mh = stats::mean(h), mf = stats::mean(fu);
    const auto hf = hf_moments(cfg.spec, j, d);
    const auto [vh, se_vh] = moment(h, mh, h, mh);
    const auto [vf, se_vf] = moment(fu, mf, fu, mf);
    const auto [chf, se_chf] = moment(h, mh, fu, mf);
    res.checks.push_back(detail::se_check("var_H_" + jt, vh, hf.var_h, se_vh, cfg.se_tol));
    if (d < T) {
      res.checks.push_back(detail::se_check("var_F_" + jt, vf, hf.var_f, se_vf, cfg.se_tol));
      res.checks.push_back(detail::se_check("cov_HF_" + jt, chf, hf.cov_hf, se_chf, cfg.se_tol));
    }
    Json lim = Json::array();
    for (std::size_t s = 0; s < T; ++s) {
      std::vector<double> row;
      for (std::size_t t = 0; t < T; ++t)
        row.push_back(sigma(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(t)));
      lim.push_back(row);
    }
    res.results[jt] = {{"empirical_cov", emp},
                       {"limit_cov", lim},
                       {"split", d},
                       {"var_H", vh},
                       {"var_H_limit", hf.var_h},
                       {"var_F", vf},
                       {"var_F_limit", hf.var_f},
                       {"cov_HF", chf},
                       {"cov_HF_limit", hf.cov_hf}};
  }
  if (!cfg.output_dir.empty()) {
    std::filesystem::create_directories(cfg.output_dir);
    detail::write_text(cfg.output_dir / "renewal_cov.csv", csv);
  }
  detail::finish(cfg, res);
  return res;
}

} // namespace clmack
