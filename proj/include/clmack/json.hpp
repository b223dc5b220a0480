#pragma once

#include <clmack/asymptotics.hpp>
#include <clmack/error.hpp>
#include <clmack/mack.hpp>
#include <clmack/model.hpp>

#include <json.hpp>

#include <string>
#include <vector>

namespace clmack {

using Json = nlohmann::ordered_json;

namespace detail {

template <class T>
T json_get(const Json& j, const char* key, const std::string& where) {
  if (!j.is_object() || !j.contains(key))
    throw InvalidInput(where + ": missing field '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw InvalidInput(where + ": field '" + key + "' has the wrong type");
  }
}

} // namespace detail

inline Json to_json(const ClaimSizeDist& z) {
  using F = ClaimSizeDist::Family;
  switch (z.family()) {
  case F::point_mass: return {{"family", "point_mass"}, {"value", z.param1()}};
  case F::gamma: return {{"family", "gamma"}, {"shape", z.param1()}, {"scale", z.param2()}};
  case F::lognormal: return {{"family", "lognormal"}, {"mu", z.param1()}, {"sigma", z.param2()}};
  case F::discrete: return {{"family", "discrete"}, {"values", z.values()}, {"probs", z.probs()}};
  }
  return {};
}

inline ClaimSizeDist claim_size_from_json(const Json& j) {
  const std::string where = "claim_size";
  const auto family = detail::json_get<std::string>(j, "family", where);
  if (family == "point_mass") return ClaimSizeDist::point_mass(detail::json_get<double>(j, "value", where));
  if (family == "gamma")
    return ClaimSizeDist::gamma(detail::json_get<double>(j, "shape", where),
                                detail::json_get<double>(j, "scale", where));
  if (family == "lognormal")
    return ClaimSizeDist::lognormal(detail::json_get<double>(j, "mu", where),
                                    detail::json_get<double>(j, "sigma", where));
  if (family == "discrete")
    return ClaimSizeDist::discrete(detail::json_get<std::vector<double>>(j, "values", where),
                                   detail::json_get<std::vector<double>>(j, "probs", where));
  throw InvalidInput("unknown claim size family '" + family + "'");
}

inline Json to_json(const InterarrivalDist& y) {
  using F = InterarrivalDist::Family;
  switch (y.family) {
  case F::exponential: return {{"family", "exponential"}};
  case F::gamma: return {{"family", "gamma"}, {"shape", y.shape}};
  case F::lognormal: return {{"family", "lognormal"}, {"sigma", y.shape}};
  case F::deterministic: return {{"family", "deterministic"}};
  }
  return {};
}

inline InterarrivalDist interarrival_from_json(const Json& j) {
  const std::string where = "interarrival";
  const auto family = detail::json_get<std::string>(j, "family", where);
  if (family == "exponential") return InterarrivalDist::exponential();
  if (family == "gamma") return InterarrivalDist::gamma(detail::json_get<double>(j, "shape", where));
  if (family == "lognormal") return InterarrivalDist::lognormal(detail::json_get<double>(j, "sigma", where));
  if (family == "deterministic") return InterarrivalDist::deterministic();
  throw InvalidInput("unknown interarrival family '" + family + "'");
}

inline Json to_json(const Counting& c) {
  if (c.kind == Counting::Kind::poisson) return {{"kind", "poisson"}};
  return {{"kind", "renewal"}, {"interarrival", to_json(c.interarrival)}};
}

inline Counting counting_from_json(const Json& j) {
  const auto kind = detail::json_get<std::string>(j, "kind", "counting");
  if (kind == "poisson") return Counting::poisson();
  if (kind == "renewal") {
    if (!j.contains("interarrival")) throw InvalidInput("renewal counting needs 'interarrival'");
    return Counting::renewal(interarrival_from_json(j.at("interarrival")));
  }
  throw InvalidInput("unknown counting kind '" + kind + "'");
}

inline Json to_json(const ModelSpec& spec) {
  Json j;
  j["T"] = spec.T;
  j["alpha"] = spec.alpha;
  j["lambda"] = spec.lambda;
  if (const auto* ind = std::get_if<IndependentDelay>(&spec.delay)) {
    j["q"] = ind->q;
    j["claim_size"] = to_json(ind->claim_size);
  } else {
    Json rows = Json::array();
    for (const auto& c : std::get<JointTable>(spec.delay))
      rows.push_back({{"d", c.d}, {"z", c.z}, {"p", c.p}});
    j["joint"] = rows;
  }
  j["counting"] = to_json(spec.counting);
  return j;
}

inline ModelSpec model_spec_from_json(const Json& j) {
  const std::string where = "model spec";
  ModelSpec spec;
  spec.T = detail::json_get<std::size_t>(j, "T", where);
  spec.alpha = detail::json_get<double>(j, "alpha", where);
  spec.lambda = detail::json_get<std::vector<double>>(j, "lambda", where);
  const bool has_q = j.contains("q"), has_joint = j.contains("joint");
  if (has_q == has_joint) throw InvalidInput("model spec needs exactly one of 'q' or 'joint'");
  if (has_q) {
    if (!j.contains("claim_size")) throw InvalidInput("model spec with 'q' needs 'claim_size'");
    spec.delay = IndependentDelay{detail::json_get<std::vector<double>>(j, "q", where),
                                  claim_size_from_json(j.at("claim_size"))};
  } else {
    JointTable table;
    for (const auto& row : j.at("joint"))
      table.push_back({detail::json_get<std::size_t>(row, "d", "joint"),
                       detail::json_get<double>(row, "z", "joint"),
                       detail::json_get<double>(row, "p", "joint")});
    spec.delay = std::move(table);
  }
  spec.counting = j.contains("counting") ? counting_from_json(j.at("counting")) : Counting::poisson();
  spec.validate();
  return spec;
}

inline Json to_json(const MsepReport& r) {
  Json rows = Json::array();
  for (const auto& row : r.rows)
    rows.push_back({{"i", row.i},
                    {"latest", row.latest},
                    {"cl_prediction", row.cl_prediction},
                    {"mack_msep", row.mack_msep},
                    {"standardized_msep", row.standardized_msep},
                    {"process_part", row.process_part},
                    {"estimation_error_part", row.estimation_error_part}});
  return {{"f_hat", r.f_hat},
          {"sigma2_hat", r.sigma2_hat},
          {"tail_rule", r.tail_rule.to_string()},
          {"rows", rows}};
}

inline Json to_json(const AsymptoticQuantities& a) {
  Json cov = Json::array();
  for (const auto& m : a.clt_cov) {
    Json rows = Json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      std::vector<double> row(static_cast<std::size_t>(m.cols()));
      for (Eigen::Index c = 0; c < m.cols(); ++c) row[static_cast<std::size_t>(c)] = m(r, c);
      rows.push_back(row);
    }
    cov.push_back(rows);
  }
  Json hf = Json::array();
  for (const auto& h : a.hf)
    hf.push_back({{"var_h", h.var_h}, {"var_f", h.var_f}, {"cov_hf", h.cov_hf}});
  return {{"f_limit", a.f_limit},   {"sigma2_limit", a.sigma2_limit}, {"q_tilde", a.q_tilde},
          {"gamma2", a.gamma2},     {"clt_cov", cov},                 {"hf_moments", hf}};
}

} // namespace clmack
