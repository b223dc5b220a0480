// clmack command-line front end.

#include <clmack/harness.hpp>
#include <clmack/json.hpp>
#include <clmack/mack.hpp>
#include <clmack/presets.hpp>
#include <clmack/simulate.hpp>
#include <clmack/triangle.hpp>

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace {

using namespace clmack;

constexpr int kExitOk = 0;
constexpr int kExitCheckFailed = 1;
constexpr int kExitInvalid = 2;

struct Options {
  std::string config;
  std::string preset;
  std::optional<std::uint64_t> seed;
  std::optional<double> alpha;
  std::optional<std::uint32_t> reps;
  std::vector<std::size_t> years;
  std::vector<double> alpha_grid;
  std::string out;
  std::optional<unsigned> threads;
  std::string tail_rule;
  std::size_t year = 0;
  std::vector<std::size_t> cell;
  std::uint32_t replication = 0;
  std::string triangle;
  bool json = false;
};

// "limit" pins the tail at the model's limiting value.
TailRule resolve_tail(const std::string& text, const ModelSpec& spec) {
  if (text == "limit") return TailRule::user_supplied(limit_sigma2(spec).back());
  return TailRule::parse(text);
}

Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open config file " + path);
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw InvalidInput("config file " + path + " is not valid JSON: " + e.what());
  }
}

/// Preset, then config file, then flags (flags already include CLMACK_* env).
ExperimentConfig resolve(const Options& o) {
  ExperimentConfig cfg;
  std::string tail = "mack";
  bool have_spec = false;
  if (!o.preset.empty()) {
    if (o.preset != "sec5") throw InvalidInput("unknown preset '" + o.preset + "'");
    const auto p = sec5_preset();
    cfg.spec = p.spec;
    cfg.accident_years = p.accident_years;
    cfg.replications = p.replications;
    cfg.tail_rule = p.tail_rule;
    tail = "limit";
    have_spec = true;
  }
  if (!o.config.empty()) {
    const Json j = read_json_file(o.config);
    if (j.contains("spec")) {
      cfg.spec = model_spec_from_json(j.at("spec"));
      have_spec = true;
    } else if (j.contains("T")) {
      cfg.spec = model_spec_from_json(j);
      have_spec = true;
    }
    try {
      if (j.contains("replications")) cfg.replications = j.at("replications").get<std::uint32_t>();
      if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
      if (j.contains("accident_years")) cfg.accident_years = j.at("accident_years").get<std::vector<std::size_t>>();
      if (j.contains("alpha_grid")) cfg.alpha_grid = j.at("alpha_grid").get<std::vector<double>>();
      if (j.contains("threads")) cfg.threads = j.at("threads").get<unsigned>();
      if (j.contains("tail_rule")) tail = j.at("tail_rule").get<std::string>();
      if (j.contains("se_tol")) cfg.se_tol = j.at("se_tol").get<double>();
      if (j.contains("ks_level")) cfg.ks_level = j.at("ks_level").get<double>();
      if (j.contains("rel_tol")) cfg.rel_tol = j.at("rel_tol").get<double>();
      if (j.contains("audit_cells")) {
        cfg.audit_cells.clear();
        for (const auto& c : j.at("audit_cells"))
          cfg.audit_cells.emplace_back(c.at(0).get<std::size_t>(), c.at(1).get<std::size_t>());
      }
    } catch (const nlohmann::json::exception& e) {
      throw InvalidInput(std::string("config file field has the wrong type: ") + e.what());
    }
  }
  if (!have_spec) throw InvalidInput("no model given (use --preset or --config)");
  if (o.alpha) cfg.spec.alpha = *o.alpha;
  if (o.seed) cfg.seed = *o.seed;
  if (o.reps) cfg.replications = *o.reps;
  if (!o.years.empty()) cfg.accident_years = o.years;
  if (!o.alpha_grid.empty()) cfg.alpha_grid = o.alpha_grid;
  if (o.threads) cfg.threads = *o.threads;
  if (!o.tail_rule.empty()) tail = o.tail_rule;
  if (o.cell.size() == 2) cfg.audit_cells = {{o.cell[0], o.cell[1]}};
  cfg.output_dir = o.out;
  cfg.spec.validate();
  cfg.tail_rule = resolve_tail(tail, cfg.spec);
  return cfg;
}

int report(const ExperimentResult& res) {
  if (res.aborted) std::cerr << "aborted: " << res.diagnostics << '\n';
  for (const auto& c : res.checks)
    std::printf("%s %s value=%s threshold=%s %s\n", c.passed ? "PASS" : "FAIL", c.name.c_str(),
                detail::format_double(c.value).c_str(), detail::format_double(c.threshold).c_str(),
                c.detail.c_str());
  return res.passed() ? kExitOk : kExitCheckFailed;
}

void print_vector(const char* name, const std::vector<double>& v) {
  std::printf("%-11s", name);
  for (double x : v) std::printf(" %.6g", x);
  std::printf("\n");
}

int run_calibrate(const Options& o) {
  const auto tri = load_csv(o.triangle);
  const auto cal = calibrate(tri, TailRule::parse(o.tail_rule.empty() ? "mack" : o.tail_rule));
  if (o.json) {
    const Json j = {{"q_hat", cal.q_hat},
                    {"lambda_hat", cal.lambda_hat},
                    {"f_hat", cal.f_hat},
                    {"sigma2_hat", cal.sigma2_hat},
                    {"tail_rule", cal.tail_rule.to_string()}};
    std::cout << j.dump(2) << '\n';
    return kExitOk;
  }
  print_vector("q_hat", cal.q_hat);
  print_vector("lambda_hat", cal.lambda_hat);
  print_vector("f_hat", cal.f_hat);
  print_vector("sigma2_hat", cal.sigma2_hat);
  std::printf("tail_rule   %s\n", cal.tail_rule.to_string().c_str());
  return kExitOk;
}

int run_estimate(const Options& o) {
  const auto tri = load_csv(o.triangle);
  const auto rep = mack_msep(tri, estimate(tri, TailRule::parse(o.tail_rule.empty() ? "mack" : o.tail_rule)));
  if (o.json) {
    std::cout << to_json(rep).dump(2) << '\n';
    return kExitOk;
  }
  std::printf("%3s %14s %14s %16s %14s %14s\n", "i", "latest", "ultimate", "mack_msep", "std_msep",
              "std_err");
  for (const auto& r : rep.rows)
    std::printf("%3zu %14.2f %14.2f %16.6g %14.6g %14.2f\n", r.i, r.latest, r.cl_prediction,
                r.mack_msep, r.standardized_msep, std::sqrt(r.mack_msep));
  std::printf("tail_rule %s\n", rep.tail_rule.to_string().c_str());
  return kExitOk;
}

int run_simulate(const Options& o) {
  const auto cfg = resolve(o);
  if (cfg.output_dir.empty()) throw InvalidInput("simulate needs --out");
  std::filesystem::create_directories(cfg.output_dir);
  for (std::uint32_t r = 0; r < cfg.replications; ++r) {
    const auto sq = simulate(cfg.spec, cfg.seed, o.replication + r);
    save_csv(sq.triangle, cfg.output_dir / ("triangle_r" + std::to_string(o.replication + r) + ".csv"));
  }
  const Json summary = {{"experiment", "simulate"},
                        {"version", kVersion},
                        {"config", detail::config_json(cfg)},
                        {"first_replication", o.replication}};
  detail::write_text(cfg.output_dir / "summary.json", summary.dump(2) + "\n");
  return kExitOk;
}

void add_run_options(CLI::App* sub, Options& o) {
  sub->add_option("--config", o.config, "JSON config (model spec and experiment settings)")->envname("CLMACK_CONFIG");
  sub->add_option("--preset", o.preset, "built-in parameter set (sec5)")->envname("CLMACK_PRESET");
  sub->add_option("--seed", o.seed, "master seed")->envname("CLMACK_SEED");
  sub->add_option("--alpha", o.alpha, "exposure")->envname("CLMACK_ALPHA");
  sub->add_option("--reps", o.reps, "replications")->envname("CLMACK_REPS");
  sub->add_option("--years", o.years, "accident years, e.g. 3,5,8")->delimiter(',')->envname("CLMACK_YEARS");
  sub->add_option("--out", o.out, "output directory")->envname("CLMACK_OUT");
  sub->add_option("--threads", o.threads, "worker cap (results do not depend on it)")->envname("CLMACK_THREADS");
  sub->add_option("--tail-rule", o.tail_rule, "mack | value:<x> | limit")->envname("CLMACK_TAIL_RULE");
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Chain-ladder / Mack reserving: estimators, simulators and experiments"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kVersion));
  Options o;

  auto* cal = app.add_subcommand("calibrate", "q_hat, lambda_hat, f_hat, sigma2_hat from a triangle CSV");
  cal->add_option("triangle", o.triangle, "triangle CSV")->required();
  cal->add_option("--tail-rule", o.tail_rule, "mack | value:<x>")->envname("CLMACK_TAIL_RULE");
  cal->add_flag("--json", o.json, "print JSON");

  auto* est = app.add_subcommand("estimate", "chain-ladder predictions and Mack MSEP");
  est->add_option("triangle", o.triangle, "triangle CSV")->required();
  est->add_option("--tail-rule", o.tail_rule, "mack | value:<x>")->envname("CLMACK_TAIL_RULE");
  est->add_flag("--json", o.json, "print JSON");

  auto* sim = app.add_subcommand("simulate", "write simulated squares as triangle CSVs");
  add_run_options(sim, o);
  sim->add_option("--replication", o.replication, "first replication index");

  auto* exp = app.add_subcommand("experiment", "paired Mack estimate vs exact MSEP per accident year");
  add_run_options(exp, o);
  auto* conv = app.add_subcommand("convergence", "factor and predictor deviations over an alpha grid");
  add_run_options(conv, o);
  conv->add_option("--alpha-grid", o.alpha_grid, "exposures, e.g. 1e3,1e4,1e5")->delimiter(',');
  auto* aud = app.add_subcommand("audit", "regression audit of the Mack conditions");
  add_run_options(aud, o);
  aud->add_option("--cell", o.cell, "i,t")->delimiter(',')->expected(2);
  auto* s2t = app.add_subcommand("sigma2-test", "KS test of the scaled variance estimates");
  add_run_options(s2t, o);
  auto* eet = app.add_subcommand("estimation-error", "estimation-error term against its limit");
  add_run_options(eet, o);
  eet->add_option("--year", o.year, "accident year")->required();
  auto* xt = app.add_subcommand("cross-term", "mean of the cross term");
  add_run_options(xt, o);
  xt->add_option("--year", o.year, "accident year")->required();
  auto* rc = app.add_subcommand("renewal-cov", "covariance of the scaled incremental row");
  add_run_options(rc, o);

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitInvalid;
  }

  try {
    if (*cal) return run_calibrate(o);
    if (*est) return run_estimate(o);
    if (*sim) return run_simulate(o);
    if (*exp) return report(figure_experiment(resolve(o)));
    if (*conv) {
      auto cfg = resolve(o);
      if (cfg.alpha_grid.empty()) cfg.alpha_grid = {1e3, 1e4, 1e5};
      return report(convergence_study(cfg));
    }
    if (*aud) return report(mack_assumption_audit(resolve(o)));
    if (*s2t) return report(sigma2_distribution_test(resolve(o)));
    if (*eet) return report(estimation_error_test(resolve(o), o.year));
    if (*xt) return report(cross_term_test(resolve(o), o.year));
    if (*rc) return report(renewal_cov_test(resolve(o)));
  } catch (const InvalidInput& e) {
    std::cerr << "invalid input: " << e.what() << '\n';
    return kExitInvalid;
  } catch (const UnsupportedModel& e) {
    std::cerr << "unsupported model: " << e.what() << '\n';
    return kExitInvalid;
  } catch (const EstimationError& e) {
    std::cerr << "estimation failed: " << e.what() << '\n';
    return kExitInvalid;
  }
  return kExitInvalid;
}
