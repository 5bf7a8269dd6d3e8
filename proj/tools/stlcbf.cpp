// Command-line front end over the stlcbf pipeline.
//
// Exit codes: 0 ok / satisfied, 2 config or parse error, 3 specification
// violated, 4 integration fault. Machine-readable lines start with "REPORT:".

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <random>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "json.hpp"

#include "stlcbf/generate.hpp"
#include "stlcbf/log_io.hpp"
#include "stlcbf/scenario.hpp"
#include "stlcbf/svg.hpp"

namespace fs = std::filesystem;
using namespace stlcbf;

namespace {

enum Exit { kOk = 0, kConfig = 2, kViolated = 3, kFault = 4 };

struct Globals {
  std::string config;
  std::string out = ".";
  std::optional<std::uint64_t> seed;
  std::optional<double> dt;
};

ScenarioConfig load(const Globals& g, const std::string& path) {
  auto c = load_scenario(path);
  if (g.dt) {
    if (!(*g.dt > 0.0)) throw ConfigError("--dt must be positive");
    c.sim.dt = *g.dt;
  }
  return c;
}

ScenarioConfig require_config(const Globals& g) {
  if (g.config.empty()) throw ConfigError("--config is required");
  return load(g, g.config);
}

std::string g17(double v) { return format_g17(v); }

void print_ast(const Formula& f, int indent) {
  std::string pad(static_cast<std::size_t>(indent) * 2, ' ');
  switch (f.kind()) {
    case FormulaKind::True: std::cout << pad << "T\n"; return;
    case FormulaKind::Pred: std::cout << pad << f.name() << "\n"; return;
    case FormulaKind::NotPred: std::cout << pad << "!" << f.name() << "\n"; return;
    case FormulaKind::And: std::cout << pad << "&\n"; break;
    case FormulaKind::Always: std::cout << pad << "G" << detail::format_interval(f.interval()) << "\n"; break;
    case FormulaKind::Eventually: std::cout << pad << "F" << detail::format_interval(f.interval()) << "\n"; break;
    case FormulaKind::Until: std::cout << pad << "U" << detail::format_interval(f.interval()) << "\n"; break;
  }
  for (const auto& c : f.children()) print_ast(c, indent + 1);
}

json ast_json(const Formula& f) {
  json j;
  static const char* kinds[] = {"true", "pred", "not", "and", "G", "F", "U"};
  j["op"] = kinds[static_cast<int>(f.kind())];
  if (!f.name().empty()) j["name"] = f.name();
  if (f.kind() == FormulaKind::Always || f.kind() == FormulaKind::Eventually ||
      f.kind() == FormulaKind::Until)
    j["interval"] = {f.interval().lo, f.interval().hi};
  if (!f.children().empty()) {
    j["children"] = json::array();
    for (const auto& c : f.children()) j["children"].push_back(ast_json(c));
  }
  return j;
}

int cmd_parse(const Globals& g, const std::string& formula_text, int random_count, bool as_json) {
  if (random_count > 0) {
    std::vector<std::string> names{"p0", "p1", "p2"};
    if (!g.config.empty()) names = load(g, g.config).predicates.names();
    std::mt19937_64 rng(g.seed.value_or(0));
    for (int i = 0; i < random_count; ++i)
      std::cout << format_formula(random_formula(rng, names, FormulaShape{})) << "\n";
    std::cout << "REPORT: parse random=" << random_count << " seed=" << g.seed.value_or(0) << "\n";
    return kOk;
  }
  Formula f;
  if (!formula_text.empty()) {
    f = g.config.empty() ? parse_formula_unchecked(formula_text)
                         : parse_formula(formula_text, load(g, g.config).predicates);
  } else {
    f = parse_scenario_formula(require_config(g));
  }
  if (as_json) {
    std::cout << ast_json(f).dump(2) << "\n";
  } else {
    std::cout << "formula: " << format_formula(f) << "\n";
    print_ast(f, 0);
  }
  std::cout << "REPORT: parse nodes=" << f.size() << " horizon=" << g17(f.horizon()) << "\n";
  return kOk;
}

int cmd_transform(const Globals& g, bool as_json) {
  const auto c = require_config(g);
  const auto f = parse_scenario_formula(c);
  const auto r = to_desired_form(f, c.predicates, c.transform);
  if (as_json) {
    json j;
    j["input"] = format_formula(f);
    j["output"] = format_formula(r.formula);
    j["trace"] = json::array();
    for (const auto& e : r.trace)
      j["trace"].push_back(
          {{"rule", e.rule}, {"from", format_formula(e.source)}, {"to", format_formula(e.result)}});
    j["warnings"] = r.warnings;
    std::cout << j.dump(2) << "\n";
  } else {
    std::cout << "input:  " << format_formula(f) << "\n";
    for (const auto& e : r.trace)
      std::cout << "  [" << e.rule << "] " << format_formula(e.source) << "  =>  "
                << format_formula(e.result) << "\n";
    for (const auto& w : r.warnings) std::cout << "warning: " << w << "\n";
    std::cout << "output: " << format_formula(r.formula) << "\n";
  }
  std::cout << "REPORT: transform steps=" << r.trace.size() << " warnings=" << r.warnings.size()
            << "\n";
  return kOk;
}

int cmd_tree(const Globals& g, bool as_json) {
  const auto c = require_config(g);
  const auto r = to_desired_form(parse_scenario_formula(c), c.predicates, c.transform);
  const auto timed = assign_times(build_tree(r.formula), c.t_star);
  if (as_json) {
    json j;
    j["horizon"] = timed.horizon;
    j["nodes"] = json::array();
    for (const auto& n : timed.tree.nodes) {
      const auto& t = timed.at(n.index);
      json nj = {{"index", n.index},     {"kind", to_string(n.kind)},
                 {"formula", format_formula(n.formula)},
                 {"active", t.active},   {"terminal", t.terminal},
                 {"children", n.children}};
      if (n.parent) nj["parent"] = *n.parent;
      if (t.t_star) nj["t_star"] = *t.t_star;
      if (t.release) nj["release"] = *t.release;
      j["nodes"].push_back(nj);
    }
    j["switching"] = json::array();
    for (const auto& s : timed.switching) j["switching"].push_back({{"t", s.t}, {"release", s.release}});
    std::cout << j.dump(2) << "\n";
  } else {
    for (const auto& n : timed.tree.nodes) {
      const auto& t = timed.at(n.index);
      std::cout << n.index << "\t" << to_string(n.kind) << "\tparent="
                << (n.parent ? std::to_string(*n.parent) : "-") << "\tactive=" << t.active
                << "\tterminal=" << t.terminal;
      if (t.release) std::cout << "\trelease=" << *t.release;
      std::cout << "\t" << format_formula(n.formula) << "\n";
    }
    std::cout << "switching:";
    for (const auto& s : timed.switching) std::cout << " " << s.t << (s.release ? "*" : "");
    std::cout << "\n";
  }
  std::cout << "REPORT: tree nodes=" << timed.tree.size() << " horizon=" << g17(timed.horizon)
            << " switching=" << timed.switching.size() << "\n";
  return kOk;
}

int cmd_synth(const Globals& g, bool as_json) {
  const auto c = require_config(g);
  const auto p = build_pipeline(c);
  json j = json::array();
  for (const auto& n : p.spec.tree().nodes) {
    if (n.is_leaf()) continue;
    const auto& t = p.timed.at(n.index);
    const auto& par = p.spec.params[static_cast<std::size_t>(n.index)];
    if (as_json) {
      j.push_back({{"index", n.index}, {"kind", to_string(n.kind)}, {"active", t.active},
                   {"terminal", t.terminal}, {"a", par.slope}, {"b", par.offset}});
    } else {
      char line[160];
      std::snprintf(line, sizeof line, "%3d  %-4s  [%g, %g]  a=%.2f  b=%g  ", n.index,
                    to_string(n.kind), t.active, t.terminal, par.slope, par.offset);
      std::cout << line << format_formula(n.formula) << "\n";
    }
  }
  if (as_json) std::cout << j.dump(2) << "\n";
  for (const auto& n : p.spec.tree().nodes)
    if (n.is_temporal()) {
      const auto& par = p.spec.params[static_cast<std::size_t>(n.index)];
      std::cout << "REPORT: synth node=" << n.index << " a=" << g17(par.slope)
                << " b=" << g17(par.offset) << "\n";
    }
  return kOk;
}

struct JobOutcome {
  int code = kOk;
  std::string report;
  std::string error;
};

JobOutcome run_one(const Globals& g, const std::string& path, bool write_svg,
                   const std::string& emit_config) {
  JobOutcome o;
  const std::string stem = fs::path(path).stem().string();
  try {
    const auto c = load(g, path);
    if (!emit_config.empty()) {
      std::ofstream ec(emit_config);
      if (!ec) throw ConfigError("cannot write '" + emit_config + "'");
      ec << scenario_to_json(c).dump(2) << "\n";
    }
    const auto r = run_scenario(c);
    fs::create_directories(g.out);
    const fs::path csv = fs::path(g.out) / c.csv_path.value_or(stem + ".csv");
    {
      std::ofstream os(csv);
      if (!os) throw ConfigError("cannot write '" + csv.string() + "'");
      write_csv(os, r.log);
    }
    std::string svg_note;
    if (write_svg) {
      const fs::path svg = fs::path(g.out) / c.svg_path.value_or(stem + ".svg");
      std::ofstream os(svg);
      if (!os) throw ConfigError("cannot write '" + svg.string() + "'");
      os << render_svg(r.log, r.pipeline.transformed.predicates);
      svg_note = " svg=" + svg.string();
    }
    const auto& rep = r.report;
    std::ostringstream os;
    os << "REPORT: simulate scenario=" << stem
       << " verdict=" << (rep.verdict->satisfied ? "satisfied" : "violated")
       << " robustness=" << g17(rep.verdict->robustness) << " min_hhat=" << g17(rep.min_hhat)
       << " min_e_ratio=" << g17(rep.min_e_ratio) << " max_e_ratio=" << g17(rep.max_e_ratio)
       << " resets=" << rep.resets;
    for (const auto& [k, v] : rep.flag_counts) os << " " << k << "=" << v;
    os << " steps=" << r.log.rows.size() << " wall_s=" << g17(rep.wall_seconds)
       << " csv=" << csv.string() << svg_note;
    o.report = os.str();
    o.code = rep.verdict->satisfied ? kOk : kViolated;
  } catch (const IntegrationError& e) {
    o.code = kFault;
    o.error = e.what();
    o.report = "REPORT: simulate scenario=" + stem + " fault=integration";
  } catch (const Error& e) {
    o.code = kConfig;
    o.error = e.what();
    o.report = "REPORT: simulate scenario=" + stem + " error=config";
  } catch (const std::exception& e) {
    o.code = kConfig;
    o.error = e.what();
    o.report = "REPORT: simulate scenario=" + stem + " error=config";
  }
  return o;
}

int worst(int a, int b) {
  auto rank = [](int c) { return c == kConfig ? 3 : c == kFault ? 2 : c == kViolated ? 1 : 0; };
  return rank(a) >= rank(b) ? a : b;
}

int cmd_simulate(const Globals& g, const std::vector<std::string>& batch, unsigned jobs,
                 bool write_svg, const std::string& emit_config) {
  std::vector<std::string> paths = batch;
  if (paths.empty()) {
    if (g.config.empty()) throw ConfigError("--config or --batch is required");
    paths.push_back(g.config);
  }
  std::vector<JobOutcome> results(paths.size());
  std::atomic<std::size_t> next{0};
  const unsigned workers =
      std::max(1u, std::min<unsigned>(jobs ? jobs : std::thread::hardware_concurrency(),
                                      static_cast<unsigned>(paths.size())));
  auto work = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < paths.size();)
      results[i] = run_one(g, paths[i], write_svg, paths.size() == 1 ? emit_config : "");
  };
  std::vector<std::thread> pool;
  for (unsigned w = 1; w < workers; ++w) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();

  int code = kOk;
  for (const auto& r : results) {
    if (!r.error.empty()) std::cerr << "error: " << r.error << "\n";
    std::cout << r.report << "\n";
    code = worst(code, r.code);
  }
  return code;
}

int cmd_monitor(const Globals& g, const std::string& csv_path, const std::string& formula_text) {
  std::ifstream in(csv_path);
  if (!in) throw ConfigError("cannot open CSV '" + csv_path + "'");
  const auto signal = read_state_csv(in);
  const auto c = require_config(g);
  const auto f = formula_text.empty() ? parse_scenario_formula(c)
                                      : parse_formula(formula_text, c.predicates);
  const auto v = monitor(f, c.predicates, signal, 0.0);
  std::cout << "REPORT: monitor verdict=" << (v.satisfied ? "satisfied" : "violated")
            << " robustness=" << g17(v.robustness) << " samples=" << signal.size() << "\n";
  return v.satisfied ? kOk : kViolated;
}

int cmd_plot(const Globals& g, const std::string& csv_path) {
  std::ifstream in(csv_path);
  if (!in) throw ConfigError("cannot open CSV '" + csv_path + "'");
  const auto log = read_log_csv(in);
  PredicateTable preds;
  if (!g.config.empty()) preds = load(g, g.config).predicates;
  fs::create_directories(g.out);
  const fs::path svg = fs::path(g.out) / (fs::path(csv_path).stem().string() + ".svg");
  std::ofstream os(svg);
  if (!os) throw ConfigError("cannot write '" + svg.string() + "'");
  os << render_svg(log, preds);
  std::cout << "REPORT: plot svg=" << svg.string() << " rows=" << log.rows.size() << "\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Compile nested STL specifications into control barrier functions and run them"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--config", g.config, "scenario JSON");
  app.add_option("--out", g.out, "output directory")->capture_default_str();
  app.add_option("--seed", g.seed, "seed for randomized corpora");
  app.add_option("--dt", g.dt, "integration step override (s)");

  bool as_json = false;
  std::string formula_text;
  int random_count = 0;
  auto* parse = app.add_subcommand("parse", "parse a formula and print its syntax tree");
  parse->add_option("--formula", formula_text, "formula text (default: the config's)");
  parse->add_option("--random", random_count, "emit N random formulas instead");
  parse->add_flag("--json", as_json);

  auto* transform = app.add_subcommand("transform", "rewrite into desired form with a trace");
  transform->add_flag("--json", as_json);
  auto* tree = app.add_subcommand("tree", "build and time the specification tree");
  tree->add_flag("--json", as_json);
  auto* synth = app.add_subcommand("synth", "synthesize certificate coefficients");
  synth->add_flag("--json", as_json);

  std::vector<std::string> batch;
  unsigned jobs = 0;
  bool no_svg = false;
  std::string emit_config;
  auto* simulate = app.add_subcommand("simulate", "closed-loop run, CSV log and verdict");
  simulate->add_option("--batch", batch, "scenario files run concurrently")->expected(1, -1);
  simulate->add_option("--jobs", jobs, "worker threads (default: hardware)");
  simulate->add_flag("--no-svg", no_svg, "skip the SVG figure");
  simulate->add_option("--emit-config", emit_config, "write the effective config here");

  std::string csv_path;
  auto* mon = app.add_subcommand("monitor", "check a CSV trajectory against a formula");
  mon->add_option("--csv", csv_path, "trajectory CSV")->required();
  mon->add_option("--formula", formula_text, "formula text (default: the config's)");
  auto* plot = app.add_subcommand("plot", "render a CSV log as SVG");
  plot->add_option("--csv", csv_path, "trajectory CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfig;
  }

  try {
    if (*parse) return cmd_parse(g, formula_text, random_count, as_json);
    if (*transform) return cmd_transform(g, as_json);
    if (*tree) return cmd_tree(g, as_json);
    if (*synth) return cmd_synth(g, as_json);
    if (*simulate) return cmd_simulate(g, batch, jobs, !no_svg, emit_config);
    if (*mon) return cmd_monitor(g, csv_path, formula_text);
    if (*plot) return cmd_plot(g, csv_path);
  } catch (const IntegrationError& e) {
    std::cerr << "integration fault: " << e.what() << "\n";
    return kFault;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kConfig;
  }
  return kConfig;
}
