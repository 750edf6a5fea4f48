#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace causalfield {

using Json = nlohmann::ordered_json;

enum class Status { Pass, Fail, Vacuous, OutOfScope };
const char* to_string(Status s);
Status status_from_string(const std::string& s);

struct Scenario {
  std::string name;
  std::string operation;
  Json inputs = Json::object();
  Json tolerances = Json::object();
  std::vector<int> refinement;
  std::string expect;  // golden status; empty when not pinned
  int line = 0;        // line of the scenario in its config file
};

struct Campaign {
  std::string name = "campaign";
  std::string path;
  std::uint64_t seed = 1;
  int threads = 1;
  double budget_seconds = 0.0;  // 0 means unlimited
  std::vector<Scenario> scenarios;
};

/// Throws ConfigError naming the file and line.
Campaign parse_campaign(const std::string& text, const std::string& path = "<config>");
Campaign load_campaign(const std::string& path);

struct Series {
  std::string name;
  std::string x_label;
  std::string y_label;
  std::vector<double> x;
  std::vector<double> y;
  bool log_log = false;
};

struct ScenarioResult {
  std::string name;
  std::string operation;
  Status status = Status::Fail;
  std::string message;
  Json measured = Json::object();
  Json slopes = Json::object();
  std::vector<Series> series;
  Json regions = Json::object();  // {nt, nx, layers: [{name, rows}]}
  std::string expect;
  double wall_time = 0.0;
};

struct Report {
  int schema = 1;
  std::string campaign;
  std::uint64_t seed = 1;
  int threads = 1;
  Json environment = Json::object();
  std::string started;
  std::vector<ScenarioResult> scenarios;

  std::size_t count(Status s) const;
  /// Some scenario failed (or was vacuous under strict_vacuous).
  bool failed(bool strict_vacuous) const;
  /// Every pinned scenario reached its expected status.
  bool matches_golden() const;
};

/// Timing and start time live under "timestamp" so the rest is reproducible.
Json to_json(const Report& r);
Report report_from_json(const Json& j);
void write_report(const Report& r, const std::string& path);
Report read_report(const std::string& path);

struct RunOptions {
  std::optional<std::uint64_t> seed;
  int threads = 0;  // 0 keeps the campaign value
  std::string cache_dir;
};

std::vector<std::string> operations();
bool has_operation(const std::string& name);
/// Runs one scenario; every exception becomes a failed result.
ScenarioResult run_scenario(const Scenario& s, std::uint64_t seed, const std::string& cache_dir = {});
/// Scenarios run on a worker pool; results keep the config order.
Report run_campaign(const Campaign& c, const RunOptions& opt = {});

/// Per-scenario seed derived from the campaign seed and the scenario name.
std::uint64_t scenario_seed(std::uint64_t campaign_seed, const std::string& name);
/// Least-squares slope of log y against log x.
double fitted_slope(const std::vector<double>& x, const std::vector<double>& y);

enum class PlotKind { Convergence, Cones, Phases };
PlotKind plot_kind_from_string(const std::string& s);
const char* to_string(PlotKind k);
/// Deterministic SVG; throws MissingSeries when the scenario lacks the data.
std::string render_plot(const Report& r, const std::string& scenario, PlotKind kind);
/// Writes <out_dir>/<scenario>-<kind>.svg and returns the path.
std::string emit_plot(const Report& r, const std::string& scenario, PlotKind kind,
                      const std::string& out_dir);

/// Cocycle session: universe, oracle source, region pairs and tolerances in; beta table
/// and residual report out.
Json run_cocycle_session(const Json& session, std::uint64_t seed, const std::string& cache_dir = {});

}  // namespace causalfield
