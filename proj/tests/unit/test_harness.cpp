#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "causalfield/error.hpp"
#include "causalfield/harness.hpp"

using namespace causalfield;
namespace fs = std::filesystem;

namespace {

std::string error_of(const std::string& text) {
  try {
    parse_campaign(text, "c.json");
  } catch (const Error& e) {
    return e.what();
  }
  return {};
}

Json without_timestamp(const Report& r) {
  Json j = to_json(r);
  j.erase("timestamp");
  return j;
}

Report sample_report() {
  Report r;
  r.campaign = "sample";
  ScenarioResult conv;
  conv.name = "conv";
  conv.operation = "lattice.propagator_identities";
  conv.status = Status::Pass;
  conv.series.push_back({"self-convergence", "dx", "error", {0.1, 0.05, 0.025}, {0.01, 0.0025, 0.000625}, true});
  ScenarioResult cones;
  cones.name = "cones";
  cones.operation = "geometry.cone_overlay";
  cones.status = Status::Pass;
  cones.regions = {{"nt", 2}, {"nx", 3}, {"layers", Json::array({{{"name", "outer"}, {"rows", {"###", ".#."}}}})}};
  ScenarioResult phases;
  phases.name = "phases";
  phases.operation = "weyl.implementers";
  phases.status = Status::Vacuous;
  phases.series.push_back({"alpha", "Re", "Im", {1.0, 0.0}, {0.0, 1.0}, false});
  r.scenarios = {conv, cones, phases};
  return r;
}

}  // namespace

TEST_CASE("empty scenario list gives an empty passing report") {
  const Campaign c = parse_campaign(R"({"name": "empty", "scenarios": []})");
  const Report r = run_campaign(c);
  CHECK(r.scenarios.empty());
  CHECK_FALSE(r.failed(true));
  CHECK(r.matches_golden());
  CHECK(to_json(r).at("schema") == 1);
}

TEST_CASE("config errors name the file and line") {
  CHECK(error_of("{\n  \"scenarios\": [\n    {\"name\": \"a\", \"operation\": \"no.such\"}\n  ]\n}")
            .find("c.json:3:") != std::string::npos);
  CHECK(error_of("{\n  \"scenarios\": [\n    {\"name\": \"a\", \"operation\": \"quick.geometry\"},\n"
                 "    {\"name\": \"a\", \"operation\": \"quick.geometry\"}\n  ]\n}")
            .find("c.json:4:") != std::string::npos);
  CHECK(error_of("{\n  \"scenarios\": [\n  ,\n}").find("c.json:3:") != std::string::npos);
  CHECK(error_of("{\"scenarios\": [{\"name\": \"a\", \"operation\": \"quick.geometry\", \"expect\": \"maybe\"}]}")
            .find("ConfigError") != std::string::npos);
  CHECK(error_of(R"({"scenarios": [{"name": "a", "operation": "geometry.cone_overlay",
                   "inputs": {"perturbation": {"file": "missing.bin"}}}]})")
            .find("input file not found") != std::string::npos);
}

TEST_CASE("module and operation combine") {
  const Campaign c = parse_campaign(R"({"scenarios": [{"name": "a", "module": "quick", "operation": "geometry"}]})");
  CHECK(c.scenarios.front().operation == "quick.geometry");
}

TEST_CASE("a failing scenario does not stop the campaign") {
  const Campaign c = parse_campaign(R"({"scenarios": [
    {"name": "bad", "operation": "geometry.cone_overlay",
     "inputs": {"perturbation": {"bumps": [{"center": [24, 48], "radius": [8, 8], "p00": -3.0}]}}},
    {"name": "good", "operation": "quick.geometry"}]})");
  const Report r = run_campaign(c);
  REQUIRE(r.scenarios.size() == 2);
  CHECK(r.scenarios[0].status == Status::Fail);
  CHECK(r.scenarios[1].status == Status::Pass);
  CHECK(r.failed(false));
}

TEST_CASE("tolerances override bounds") {
  const Campaign c = parse_campaign(R"({"scenarios": [
    {"name": "strict", "operation": "lattice.causal_support", "inputs": {"bumps": 1},
     "tolerances": {"max_leak_rel": -1.0}}]})");
  CHECK(run_campaign(c).scenarios.front().status == Status::Fail);
}

TEST_CASE("vacuous scenarios are never passes") {
  Report r;
  ScenarioResult v;
  v.name = "v";
  v.status = Status::Vacuous;
  v.expect = "pass";
  r.scenarios.push_back(v);
  CHECK_FALSE(r.failed(false));
  CHECK(r.failed(true));
  CHECK_FALSE(r.matches_golden());
  CHECK(r.count(Status::Pass) == 0);
}

TEST_CASE("exhausted budget makes scenarios vacuous") {
  const Campaign c = parse_campaign(R"({"budget_seconds": 1e-12, "scenarios": [
    {"name": "a", "operation": "lattice.causal_support", "inputs": {"bumps": 1}},
    {"name": "b", "operation": "quick.geometry"}]})");
  const Report r = run_campaign(c);
  CHECK(r.scenarios.back().status == Status::Vacuous);
  CHECK_FALSE(r.failed(false));
}

TEST_CASE("reports are deterministic apart from the timestamp") {
  const Campaign c = parse_campaign(R"({"seed": 9, "threads": 2, "scenarios": [
    {"name": "g", "operation": "quick.geometry"},
    {"name": "s", "operation": "lattice.causal_support", "inputs": {"bumps": 2}},
    {"name": "k", "operation": "quick.cocycle"}]})");
  const Report a = run_campaign(c), b = run_campaign(c);
  CHECK(without_timestamp(a).dump() == without_timestamp(b).dump());
  RunOptions other;
  other.seed = 10;
  CHECK(without_timestamp(run_campaign(c, other)).dump() != without_timestamp(a).dump());
}

TEST_CASE("report JSON round trip") {
  const Report r = sample_report();
  const auto path = fs::temp_directory_path() / "causalfield-unit-report.json";
  write_report(r, path.string());
  const Report back = read_report(path.string());
  CHECK(to_json(back).dump() == to_json(r).dump());
  fs::remove(path);
  CHECK_THROWS_AS(report_from_json(Json{{"schema", 2}}), Error);
}

TEST_CASE("fitted slope and seeds") {
  CHECK(fitted_slope({1, 2, 4}, {3, 12, 48}) == doctest::Approx(2.0));
  CHECK_THROWS_AS(fitted_slope({1}, {1}), Error);
  CHECK(scenario_seed(1, "a") != scenario_seed(1, "b"));
  CHECK(scenario_seed(1, "a") == scenario_seed(1, "a"));
}

TEST_CASE("plots are deterministic and annotated") {
  const Report r = sample_report();
  const std::string conv = render_plot(r, "conv", PlotKind::Convergence);
  CHECK(conv == render_plot(r, "conv", PlotKind::Convergence));
  CHECK(conv.find("fitted slope 2.000") != std::string::npos);
  CHECK(render_plot(r, "cones", PlotKind::Cones).find("<g id=\"layer0\"") != std::string::npos);
  CHECK(render_plot(r, "phases", PlotKind::Phases).find("max ||alpha|-1| = 0.00e+00") != std::string::npos);
  CHECK_THROWS_AS(render_plot(r, "cones", PlotKind::Convergence), Error);
  CHECK_THROWS_AS(render_plot(r, "conv", PlotKind::Cones), Error);
  CHECK_THROWS_AS(render_plot(r, "missing", PlotKind::Phases), Error);
  const auto dir = fs::temp_directory_path() / "causalfield-unit-plots";
  const std::string path = emit_plot(r, "conv", PlotKind::Convergence, dir.string());
  CHECK(fs::path(path).filename() == "conv-convergence.svg");
  fs::remove_all(dir);
}

TEST_CASE("synthetic cocycle session") {
  const Json session = Json::parse(R"({
    "universe": {"nt": 6, "nx": 6, "c": 1.0},
    "oracle": {"kind": "synthetic", "beta": ["generic"]},
    "pairs": [{"r1": {"t": [4, 5], "x": [0, 1]}, "r2": {"t": [0, 1], "x": [3, 4]}}],
    "gamma_quadruples": 20})");
  const Json out = run_cocycle_session(session, 3);
  CHECK(out.at("checks").at("residual_excess").at("value") == 0.0);
  CHECK(out.at("checks").at("delta_gamma").at("value") == 0.0);
  CHECK_FALSE(out.at("beta").empty());
  CHECK_THROWS_AS(run_cocycle_session(Json{{"pairs", Json::array()}}, 1), Error);
}

TEST_CASE("every operation is registered") {
  for (const char* op : {"geometry.metric_formulas", "geometry.cone_overlay", "lattice.propagator_identities",
                         "lattice.causal_support", "scattering.laws", "weyl.identities", "weyl.implementers",
                         "weyl.implementer_report", "cocycle.synthetic", "cocycle.session", "scope.full_scale"})
    CHECK(has_operation(op));
}
