#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "causalfield/error.hpp"
#include "causalfield/harness.hpp"
#include "causalfield/weyl.hpp"

namespace fs = std::filesystem;
using namespace causalfield;

namespace {

struct Common {
  std::string config;
  std::string out = ".";
  std::uint64_t seed = 0;
  bool seed_set = false;
  int threads = 0;
  bool strict_vacuous = false;
};

void add_common(CLI::App* app, Common& c, bool config_required) {
  auto* opt = app->add_option("--config", c.config, "JSON input file");
  if (config_required) opt->required();
  app->add_option("--out", c.out, "output directory");
  app->add_option_function<std::uint64_t>("--seed", [&c](const std::uint64_t& s) {
    c.seed = s;
    c.seed_set = true;
  }, "campaign seed");
  app->add_option("--threads", c.threads, "worker threads")->check(CLI::PositiveNumber);
  app->add_flag("--strict-vacuous", c.strict_vacuous, "count vacuous scenarios as failures");
}

RunOptions run_options(const Common& c) {
  RunOptions o;
  if (c.seed_set) o.seed = c.seed;
  o.threads = c.threads;
  o.cache_dir = ImplementerCache::default_dir();
  return o;
}

Json read_json(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::ConfigError, path + ": cannot open");
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return Json::parse(ss.str());
  } catch (const nlohmann::json::parse_error& e) {
    const std::string text = ss.str();
    const auto upto = std::min<std::size_t>(e.byte ? e.byte - 1 : 0, text.size());
    const auto line = 1 + std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(upto), '\n');
    throw Error(ErrorCode::ConfigError, path + ":" + std::to_string(line) + ": " + e.what());
  }
}

void print_summary(const Report& r) {
  for (const auto& s : r.scenarios) {
    std::printf("%-13s %-34s %8.2fs", to_string(s.status), s.name.c_str(), s.wall_time);
    if (!s.message.empty()) std::printf("  %s", s.message.c_str());
    std::printf("\n");
  }
  std::printf("pass %zu  fail %zu  vacuous %zu  out_of_scope %zu\n", r.count(Status::Pass),
              r.count(Status::Fail), r.count(Status::Vacuous), r.count(Status::OutOfScope));
  if (!r.matches_golden()) std::printf("report differs from the golden statuses\n");
}

int finish(const Report& r, const Common& c) {
  const std::string path = (fs::path(c.out) / "report.json").string();
  write_report(r, path);
  print_summary(r);
  std::printf("report written to %s\n", path.c_str());
  return r.failed(c.strict_vacuous) ? 1 : 0;
}

// Single-scenario campaign built from a JSON file of inputs and tolerances.
Campaign single(const std::string& name, const std::string& op, const Common& c) {
  Campaign camp;
  camp.name = name;
  camp.path = c.config;
  Scenario s;
  s.name = name;
  s.operation = op;
  if (!c.config.empty()) {
    const Json j = read_json(c.config);
    s.inputs = j.value("inputs", j);
    s.tolerances = j.value("tolerances", Json::object());
    camp.seed = j.value("seed", camp.seed);
  }
  camp.scenarios.push_back(s);
  return camp;
}

int cmd_verify(const Common& c, bool plots) {
  const Campaign camp = load_campaign(c.config);
  const Report r = run_campaign(camp, run_options(c));
  if (plots) {
    for (const auto& s : r.scenarios)
      for (PlotKind k : {PlotKind::Convergence, PlotKind::Cones, PlotKind::Phases}) {
        try {
          emit_plot(r, s.name, k, c.out);
        } catch (const Error& e) {
          if (e.code() != ErrorCode::MissingSeries) throw;
        }
      }
  }
  return finish(r, c);
}

int cmd_cones(const Common& c) {
  const Report r = run_campaign(single("cones", "geometry.cone_overlay", c), run_options(c));
  try {
    std::printf("%s\n", emit_plot(r, "cones", PlotKind::Cones, c.out).c_str());
  } catch (const Error& e) {
    std::fprintf(stderr, "%s\n", e.what());
  }
  return finish(r, c);
}

int cmd_implementer(const Common& c) {
  const Report r = run_campaign(single("implementer", "weyl.implementer_report", c), run_options(c));
  for (const auto& [k, v] : r.scenarios.front().measured.items())
    std::printf("%-24s %s\n", k.c_str(), v.dump().c_str());
  return finish(r, c);
}

int cmd_cocycle(const Common& c) {
  const Json session = read_json(c.config);
  const RunOptions o = run_options(c);
  const Json out = run_cocycle_session(session, o.seed.value_or(session.value("seed", std::uint64_t{1})), o.cache_dir);
  fs::create_directories(c.out);
  const std::string beta = (fs::path(c.out) / "beta.json").string();
  const std::string residuals = (fs::path(c.out) / "residuals.json").string();
  std::ofstream(beta, std::ios::binary) << Json{{"universe", out.at("universe")}, {"beta", out.at("beta")}}.dump(2) << '\n';
  Json rep = out;
  rep.erase("beta");
  std::ofstream(residuals, std::ios::binary) << rep.dump(2) << '\n';
  bool ok = true;
  for (const auto& r : out.at("residuals")) {
    std::printf("pair %-3zu residual %.3e  bound %.3e  %s\n", r.at("pair").get<std::size_t>(),
                r.at("max_angle").get<double>(), r.at("bound").get<double>(), r.at("ok").get<bool>() ? "ok" : "FAIL");
    ok = ok && r.at("ok").get<bool>();
  }
  for (const auto& [k, v] : out.at("checks").items())
    if (v.is_object() && v.at("value").get<double>() > v.at("max").get<double>()) ok = false;
  std::printf("beta table %s\nresidual report %s\n", beta.c_str(), residuals.c_str());
  return ok ? 0 : 1;
}

int cmd_plot(const Common& c, const std::string& report, const std::string& scenario, const std::string& kind) {
  const Report r = read_report(report.empty() ? c.config : report);
  std::vector<PlotKind> kinds;
  if (kind == "all")
    kinds = {PlotKind::Convergence, PlotKind::Cones, PlotKind::Phases};
  else
    kinds = {plot_kind_from_string(kind)};
  int written = 0;
  for (const auto& s : r.scenarios) {
    if (!scenario.empty() && s.name != scenario) continue;
    for (PlotKind k : kinds) {
      try {
        std::printf("%s\n", emit_plot(r, s.name, k, c.out).c_str());
        ++written;
      } catch (const Error& e) {
        if (!scenario.empty() && kind != "all") throw;
      }
    }
  }
  if (written == 0) throw Error(ErrorCode::MissingSeries, "no plot could be drawn");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Lattice checks of causal perturbations, scattering maps and cocycles"};
  app.require_subcommand(1);

  Common verify, cones, impl, cocycle, plot;
  bool plots = false;
  auto* v = app.add_subcommand("verify", "run a campaign and write report.json");
  add_common(v, verify, true);
  v->add_flag("--plots", plots, "also emit every available SVG plot");

  auto* co = app.add_subcommand("cones", "cone overlay of a perturbation");
  add_common(co, cones, false);

  auto* im = app.add_subcommand("implementer", "build one implementer and report its checks");
  add_common(im, impl, false);

  auto* cc = app.add_subcommand("cocycle", "run a cocycle session; writes beta.json and residuals.json");
  add_common(cc, cocycle, true);

  std::string report, scenario, kind = "all";
  auto* pl = app.add_subcommand("plot", "emit SVG plots from a report");
  add_common(pl, plot, false);
  pl->add_option("--report", report, "report.json (defaults to --config)");
  pl->add_option("--scenario", scenario, "scenario name");
  pl->add_option("--kind", kind, "convergence, cones, phases or all")
      ->check(CLI::IsMember({"convergence", "cones", "phases", "all"}));

  CLI11_PARSE(app, argc, argv);

  try {
    if (v->parsed()) return cmd_verify(verify, plots);
    if (co->parsed()) return cmd_cones(cones);
    if (im->parsed()) return cmd_implementer(impl);
    if (cc->parsed()) return cmd_cocycle(cocycle);
    if (pl->parsed()) return cmd_plot(plot, report, scenario, kind);
  } catch (const Error& e) {
    std::fprintf(stderr, "%s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 2;
}
