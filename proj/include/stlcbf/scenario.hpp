#pragma once

#include <chrono>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

#include "stlcbf/cbf.hpp"
#include "stlcbf/controller.hpp"
#include "stlcbf/monitor.hpp"
#include "stlcbf/parser.hpp"
#include "stlcbf/plant.hpp"
#include "stlcbf/sim.hpp"
#include "stlcbf/stlt.hpp"
#include "stlcbf/transform.hpp"

namespace stlcbf {

using json = nlohmann::json;

/// A complete run description. Every field has a default except the
/// predicates and the formula.
struct ScenarioConfig {
  PredicateTable predicates;
  std::string formula;
  TransformConfig transform;
  TStarPolicy t_star;
  std::map<int, double> margins;
  ControllerParams controller;
  Plant plant;
  Disturbance disturbance;
  SimOptions sim;
  std::optional<std::string> csv_path;
  std::optional<std::string> svg_path;
};

namespace detail {

inline void reject_unknown(const json& j, std::initializer_list<const char*> allowed,
                           const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [k, v] : j.items())
    if (!ok.count(k)) throw ConfigError("unknown key '" + k + "' in " + where);
}

inline double get_number(const json& j, const std::string& where) {
  if (!j.is_number()) throw ConfigError(where + " must be a number");
  return j.get<double>();
}

inline Eigen::VectorXd get_vector(const json& j, const std::string& where) {
  if (!j.is_array() || j.empty()) throw ConfigError(where + " must be a non-empty array");
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i)
    v(static_cast<Eigen::Index>(i)) = get_number(j[i], where + "[" + std::to_string(i) + "]");
  return v;
}

inline Eigen::MatrixXd get_matrix(const json& j, const std::string& where) {
  if (!j.is_array() || j.empty() || !j[0].is_array())
    throw ConfigError(where + " must be an array of rows");
  const auto rows = j.size(), cols = j[0].size();
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < rows; ++r) {
    const auto row = get_vector(j[r], where + "[" + std::to_string(r) + "]");
    if (static_cast<std::size_t>(row.size()) != cols) throw ConfigError(where + " is ragged");
    m.row(static_cast<Eigen::Index>(r)) = row.transpose();
  }
  return m;
}

inline json vector_json(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

inline json matrix_json(const Eigen::MatrixXd& m) {
  json a = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) a.push_back(vector_json(m.row(r).transpose()));
  return a;
}

inline int node_key(const std::string& k, const std::string& where) {
  try {
    std::size_t used = 0;
    const int v = std::stoi(k, &used);
    if (used == k.size() && v >= 0) return v;
  } catch (const std::exception&) {
  }
  throw ConfigError(where + ": node key '" + k + "' is not a non-negative integer");
}

inline PredicateDef predicate_from_json(const std::string& name, const json& j) {
  const std::string where = "predicates." + name;
  if (!j.is_object() || !j.contains("type")) throw ConfigError(where + " needs a type");
  const auto type = j["type"].get<std::string>();
  try {
    if (type == "ball") {
      reject_unknown(j, {"type", "center", "radius"}, where);
      return PredicateDef::ball(name, get_vector(j.at("center"), where + ".center"),
                                get_number(j.at("radius"), where + ".radius"));
    }
    if (type == "affine") {
      reject_unknown(j, {"type", "a", "b"}, where);
      return PredicateDef::affine(name, get_vector(j.at("a"), where + ".a"),
                                  get_number(j.at("b"), where + ".b"));
    }
  } catch (const json::exception& e) {
    throw ConfigError(where + ": " + e.what());
  } catch (const SpecError& e) {
    throw ConfigError(where + ": " + e.what());
  }
  throw ConfigError(where + ": unsupported type '" + type + "'");
}

inline json predicate_json(const PredicateDef& p) {
  if (auto* b = std::get_if<shape::Ball>(&p.shape))
    return {{"type", "ball"}, {"center", vector_json(b->center)}, {"radius", b->radius}};
  if (auto* a = std::get_if<shape::Affine>(&p.shape))
    return {{"type", "affine"}, {"a", vector_json(a->a)}, {"b", a->b}};
  throw ConfigError("predicate '" + p.name + "' cannot be serialized");
}

inline DisturbanceTerm term_from_json(const json& j, const std::string& where) {
  if (!j.is_object() || !j.contains("type")) throw ConfigError(where + " needs a type");
  const auto type = j["type"].get<std::string>();
  if (type == "constant") {
    reject_unknown(j, {"type", "value"}, where);
    return DisturbanceTerm::constant(get_number(j.at("value"), where + ".value"));
  }
  if (type == "sinusoid") {
    reject_unknown(j, {"type", "amplitude", "frequency", "phase"}, where);
    return DisturbanceTerm::sinusoid(get_number(j.at("amplitude"), where + ".amplitude"),
                                     get_number(j.at("frequency"), where + ".frequency"),
                                     j.contains("phase") ? get_number(j["phase"], where + ".phase")
                                                         : 0.0);
  }
  throw ConfigError(where + ": unsupported disturbance type '" + type + "'");
}

}  // namespace detail

/// Parses and validates a scenario. Unknown keys are rejected at every level.
inline ScenarioConfig scenario_from_json(const json& j) {
  using namespace detail;
  ScenarioConfig c;
  try {
    reject_unknown(j, {"predicates", "formula", "transform", "timing", "margins", "controller",
                       "plant", "disturbance", "sim", "outputs"},
                   "scenario");
    if (!j.contains("predicates") || !j.contains("formula"))
      throw ConfigError("scenario needs 'predicates' and 'formula'");
    if (!j["predicates"].is_object()) throw ConfigError("predicates must be an object");
    for (const auto& [name, pj] : j["predicates"].items()) c.predicates.add(predicate_from_json(name, pj));
    if (!j["formula"].is_string()) throw ConfigError("formula must be a string");
    c.formula = j["formula"].get<std::string>();

    if (j.contains("transform")) {
      const auto& t = j["transform"];
      reject_unknown(t, {"kappa", "gf_split"}, "transform");
      if (t.contains("kappa")) c.transform.kappa = get_number(t["kappa"], "transform.kappa");
      if (t.contains("gf_split")) {
        for (const auto& [key, sj] : t["gf_split"].items()) {
          const std::string where = "transform.gf_split." + key;
          reject_unknown(sj, {"p_f", "deltas"}, where);
          GfSplit s;
          s.p_f = sj.at("p_f").get<int>();
          if (sj.contains("deltas"))
            for (const auto& d : sj["deltas"]) s.deltas.push_back(get_number(d, where + ".deltas"));
          // Normalise the key so equivalent spellings match the formatter.
          c.transform.gf_split[format_formula(parse_formula_unchecked(key))] = s;
        }
      }
    }
    if (j.contains("timing")) {
      reject_unknown(j["timing"], {"t_star"}, "timing");
      if (j["timing"].contains("t_star"))
        for (const auto& [k, v] : j["timing"]["t_star"].items())
          c.t_star[node_key(k, "timing.t_star")] = get_number(v, "timing.t_star." + k);
    }
    if (j.contains("margins")) {
      if (!j["margins"].is_object()) throw ConfigError("margins must be an object");
      for (const auto& [k, v] : j["margins"].items())
        c.margins[node_key(k, "margins")] = get_number(v, "margins." + k);
    }
    if (j.contains("plant")) {
      const auto& p = j["plant"];
      const auto type = p.value("type", std::string("unicycle"));
      if (type == "unicycle") {
        reject_unknown(p, {"type", "l"}, "plant");
        plant::Unicycle u;
        if (p.contains("l")) u.l = get_number(p["l"], "plant.l");
        STLCBF_THROW_UNLESS(u.l > 0.0, ConfigError, "plant.l must be positive");
        c.plant = Plant(u);
      } else if (type == "linear") {
        reject_unknown(p, {"type", "A", "f0", "B"}, "plant");
        plant::LinearAffine lin;
        lin.A = get_matrix(p.at("A"), "plant.A");
        if (p.contains("f0")) lin.f0 = get_vector(p["f0"], "plant.f0");
        lin.B = get_matrix(p.at("B"), "plant.B");
        c.plant = Plant(lin);
      } else {
        throw ConfigError("plant.type must be 'unicycle' or 'linear'");
      }
    }
    const auto n = c.plant.state_dim();
    const auto m = c.plant.input_dim();

    auto& cp = c.controller;
    cp.W = Eigen::MatrixXd::Identity(m, m);
    if (j.contains("controller")) {
      const auto& k = j["controller"];
      reject_unknown(k, {"lambda", "c", "gamma", "varsigma", "varrho", "eps_smooth", "rho0",
                         "rho_inf", "alpha", "W", "input_bounds", "eta0", "r_hat0", "eta_reset",
                         "e_guard"},
                     "controller");
      auto num = [&](const char* key, double& dst) {
        if (k.contains(key)) dst = get_number(k[key], std::string("controller.") + key);
      };
      num("lambda", cp.lambda);
      num("c", cp.c);
      num("gamma", cp.gamma);
      num("varsigma", cp.varsigma);
      num("varrho", cp.varrho);
      num("eps_smooth", cp.eps_smooth);
      num("rho0", cp.rho0);
      num("rho_inf", cp.rho_inf);
      num("alpha", cp.alpha_gain);
      num("r_hat0", cp.r_hat0);
      num("eta_reset", cp.eta_reset);
      num("e_guard", cp.e_guard);
      if (k.contains("W")) cp.W = get_matrix(k["W"], "controller.W");
      if (k.contains("input_bounds") && !k["input_bounds"].is_null())
        cp.input_bounds = get_vector(k["input_bounds"], "controller.input_bounds");
      if (k.contains("eta0") && !k["eta0"].is_null()) cp.eta0 = get_number(k["eta0"], "controller.eta0");
    }
    if (cp.e_guard <= 0.0) cp.e_guard = cp.guard();
    try {
      cp.validate(m);
    } catch (const Error& e) {
      throw ConfigError(std::string("controller: ") + e.what());
    }

    if (j.contains("disturbance")) {
      const auto& d = j["disturbance"];
      if (!d.is_array()) throw ConfigError("disturbance must be an array of channels");
      if (static_cast<Eigen::Index>(d.size()) > n)
        throw ConfigError("disturbance has more channels than the plant state");
      for (std::size_t i = 0; i < d.size(); ++i) {
        std::vector<DisturbanceTerm> ch;
        const std::string where = "disturbance[" + std::to_string(i) + "]";
        if (!d[i].is_array()) throw ConfigError(where + " must be an array of terms");
        for (const auto& tj : d[i]) ch.push_back(term_from_json(tj, where));
        c.disturbance.channels.push_back(std::move(ch));
      }
    }

    c.sim.x0 = Eigen::VectorXd::Zero(n);
    if (j.contains("sim")) {
      const auto& s = j["sim"];
      reject_unknown(s, {"dt", "horizon", "x0", "x_hat0", "z0"}, "sim");
      if (s.contains("dt")) c.sim.dt = get_number(s["dt"], "sim.dt");
      if (s.contains("horizon") && !s["horizon"].is_null())
        c.sim.horizon = get_number(s["horizon"], "sim.horizon");
      if (s.contains("x0")) c.sim.x0 = get_vector(s["x0"], "sim.x0");
      if (s.contains("x_hat0")) c.sim.x_hat0 = get_vector(s["x_hat0"], "sim.x_hat0");
      if (s.contains("z0")) c.sim.z0 = get_vector(s["z0"], "sim.z0");
    }
    STLCBF_THROW_UNLESS(c.sim.dt > 0.0, ConfigError, "sim.dt must be positive");
    STLCBF_THROW_UNLESS(c.sim.x0.size() == n, ConfigError, "sim.x0 must match the plant state");
    for (const auto* v : {&c.sim.x_hat0, &c.sim.z0})
      STLCBF_THROW_UNLESS(!*v || (*v)->size() == n, ConfigError,
                          "initial estimates must match the plant state");

    if (j.contains("outputs")) {
      const auto& o = j["outputs"];
      reject_unknown(o, {"csv", "svg"}, "outputs");
      if (o.contains("csv") && !o["csv"].is_null()) c.csv_path = o["csv"].get<std::string>();
      if (o.contains("svg") && !o["svg"].is_null()) c.svg_path = o["svg"].get<std::string>();
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("scenario: ") + e.what());
  } catch (const ParseError& e) {
    throw ConfigError(std::string("scenario: ") + e.what());
  }
  return c;
}

inline ScenarioConfig load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("config '" + path + "' is not valid JSON: " + e.what());
  }
  return scenario_from_json(j);
}

/// The effective configuration with every default written out.
inline json scenario_to_json(const ScenarioConfig& c) {
  using namespace detail;
  json j;
  json preds = json::object();
  for (const auto& name : c.predicates.names()) preds[name] = predicate_json(c.predicates.at(name));
  j["predicates"] = preds;
  j["formula"] = c.formula;
  json split = json::object();
  for (const auto& [k, s] : c.transform.gf_split) split[k] = {{"p_f", s.p_f}, {"deltas", s.deltas}};
  j["transform"] = {{"kappa", c.transform.kappa}, {"gf_split", split}};
  json ts = json::object();
  for (const auto& [k, v] : c.t_star) ts[std::to_string(k)] = v;
  j["timing"] = {{"t_star", ts}};
  json margins = json::object();
  for (const auto& [k, v] : c.margins) margins[std::to_string(k)] = v;
  j["margins"] = margins;
  const auto& p = c.controller;
  json k = {{"lambda", p.lambda},       {"c", p.c},
            {"gamma", p.gamma},         {"varsigma", p.varsigma},
            {"varrho", p.varrho},       {"eps_smooth", p.eps_smooth},
            {"rho0", p.rho0},           {"rho_inf", p.rho_inf},
            {"alpha", p.alpha_gain},    {"W", matrix_json(p.weight(c.plant.input_dim()))},
            {"r_hat0", p.r_hat0},       {"eta_reset", p.eta_reset},
            {"e_guard", p.guard()}};
  k["input_bounds"] = p.input_bounds ? vector_json(*p.input_bounds) : json(nullptr);
  k["eta0"] = p.eta0 ? json(*p.eta0) : json(nullptr);
  j["controller"] = k;
  if (auto* u = std::get_if<plant::Unicycle>(&c.plant.model())) {
    j["plant"] = {{"type", "unicycle"}, {"l", u->l}};
  } else {
    const auto& lin = std::get<plant::LinearAffine>(c.plant.model());
    j["plant"] = {{"type", "linear"},
                  {"A", matrix_json(lin.A)},
                  {"f0", vector_json(lin.f0)},
                  {"B", matrix_json(lin.B)}};
  }
  json dist = json::array();
  for (const auto& ch : c.disturbance.channels) {
    json cj = json::array();
    for (const auto& t : ch) {
      if (t.kind == DisturbanceTerm::Kind::Constant)
        cj.push_back({{"type", "constant"}, {"value", t.value}});
      else
        cj.push_back({{"type", "sinusoid"},
                      {"amplitude", t.value},
                      {"frequency", t.frequency},
                      {"phase", t.phase}});
    }
    dist.push_back(cj);
  }
  j["disturbance"] = dist;
  json s = {{"dt", c.sim.dt}, {"x0", vector_json(c.sim.x0)}};
  s["horizon"] = c.sim.horizon ? json(*c.sim.horizon) : json(nullptr);
  if (c.sim.x_hat0) s["x_hat0"] = vector_json(*c.sim.x_hat0);
  if (c.sim.z0) s["z0"] = vector_json(*c.sim.z0);
  j["sim"] = s;
  json o = json::object();
  o["csv"] = c.csv_path ? json(*c.csv_path) : json(nullptr);
  o["svg"] = c.svg_path ? json(*c.svg_path) : json(nullptr);
  j["outputs"] = o;
  return j;
}

/// Every intermediate artifact of the formula-to-certificate pipeline.
struct Pipeline {
  Formula original = Formula::top();
  TransformResult transformed;
  TimedTree timed;
  CbfSpec spec;
};

inline Formula parse_scenario_formula(const ScenarioConfig& c) {
  return parse_formula(c.formula, c.predicates);
}

inline Pipeline build_pipeline(const ScenarioConfig& c) {
  Pipeline p;
  p.original = parse_scenario_formula(c);
  p.transformed = to_desired_form(p.original, c.predicates, c.transform);
  p.timed = assign_times(build_tree(p.transformed.formula), c.t_star);
  p.spec = synthesize(p.timed, p.transformed.predicates, c.margins, c.transform.kappa);
  return p;
}

struct RunReport {
  std::optional<Verdict> verdict;  ///< against the original formula
  double min_hhat = 0.0;
  double max_e_ratio = 0.0;  ///< max e / rho over non-expired rows
  double min_e_ratio = 0.0;
  double max_estimation_error = 0.0;  ///< max |x - x_hat| over the run
  std::map<std::string, std::size_t> flag_counts;
  int resets = 0;
  double wall_seconds = 0.0;
};

struct RunResult {
  Pipeline pipeline;
  TrajectoryLog log;
  RunReport report;
};

inline RunReport summarize(const TrajectoryLog& log) {
  RunReport r;
  r.min_hhat = std::numeric_limits<double>::infinity();
  r.max_e_ratio = -std::numeric_limits<double>::infinity();
  r.min_e_ratio = std::numeric_limits<double>::infinity();
  for (const auto& row : log.rows) {
    if (row.flags & flag::expired) continue;
    r.min_hhat = std::min(r.min_hhat, row.hhat);
    r.max_e_ratio = std::max(r.max_e_ratio, row.e / row.rho);
    r.min_e_ratio = std::min(r.min_e_ratio, row.e / row.rho);
    r.max_estimation_error = std::max(r.max_estimation_error, (row.x - row.x_hat).norm());
  }
  r.flag_counts = {{"guard_clamp", log.count(flag::guard_clamp)},
                   {"qp_saturated", log.count(flag::qp_saturated)},
                   {"qp_infeasible", log.count(flag::qp_infeasible)},
                   {"qp_degenerate", log.count(flag::qp_degenerate)},
                   {"reset_fault", log.count(flag::reset_fault)},
                   {"hhat_negative", log.count(flag::hhat_negative)}};
  r.resets = log.resets;
  return r;
}

/// parse -> transform -> tree -> synth -> simulate -> monitor.
inline RunResult run_scenario(const ScenarioConfig& c) {
  const auto start = std::chrono::steady_clock::now();
  RunResult out;
  out.pipeline = build_pipeline(c);
  out.log = simulate(out.pipeline.spec, c.plant, c.disturbance, c.controller, c.sim);
  out.report = summarize(out.log);
  const auto sig = out.log.signal();
  out.report.verdict = monitor(out.pipeline.original, c.predicates, sig, 0.0);
  out.report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

}  // namespace stlcbf
