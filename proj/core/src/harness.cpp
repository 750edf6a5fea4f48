#include "causalfield/harness.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <numbers>
#include <random>
#include <sstream>
#include <thread>

#include "causalfield/cocycle.hpp"
#include "causalfield/error.hpp"
#include "scenario_ops.hpp"

namespace causalfield {

namespace fs = std::filesystem;

const char* to_string(Status s) {
  switch (s) {
    case Status::Pass: return "pass";
    case Status::Fail: return "fail";
    case Status::Vacuous: return "vacuous";
    case Status::OutOfScope: return "out_of_scope";
  }
  return "fail";
}

Status status_from_string(const std::string& s) {
  for (Status v : {Status::Pass, Status::Fail, Status::Vacuous, Status::OutOfScope})
    if (s == to_string(v)) return v;
  throw Error(ErrorCode::FormatError, "unknown status '" + s + "'");
}

// ---------------------------------------------------------------------------
// campaign files

namespace {

int line_of(const std::string& text, std::size_t offset) {
  offset = std::min(offset, text.size());
  return 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(offset), '\n'));
}

[[noreturn]] void config_error(const std::string& path, int line, const std::string& what) {
  throw Error(ErrorCode::ConfigError, path + ":" + std::to_string(line) + ": " + what);
}

// Offset of the object holding "name": "<name>", searched from `from`.
std::size_t find_scenario(const std::string& text, const std::string& name, std::size_t from) {
  const std::string quoted = "\"" + name + "\"";
  for (std::size_t pos = text.find("\"name\"", from); pos != std::string::npos;
       pos = text.find("\"name\"", pos + 1)) {
    std::size_t v = text.find_first_not_of(" \t\r\n:", pos + 6);
    if (v != std::string::npos && text.compare(v, quoted.size(), quoted) == 0) return pos;
  }
  return std::string::npos;
}

void resolve_files(Json& j, const fs::path& base, const std::string& path, int line) {
  if (j.is_object()) {
    for (auto& [k, v] : j.items()) {
      if ((k == "file" || k == "log") && v.is_string()) {
        fs::path p(v.get<std::string>());
        if (p.is_relative()) p = base / p;
        if (k == "file" && !fs::exists(p)) config_error(path, line, "input file not found: " + p.string());
        v = p.lexically_normal().string();
      } else {
        resolve_files(v, base, path, line);
      }
    }
  } else if (j.is_array()) {
    for (auto& v : j) resolve_files(v, base, path, line);
  }
}

}  // namespace

Campaign parse_campaign(const std::string& text, const std::string& path) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    config_error(path, line_of(text, e.byte == 0 ? 0 : e.byte - 1), e.what());
  }
  if (!j.is_object()) config_error(path, 1, "campaign must be a JSON object");
  Campaign c;
  c.path = path;
  const fs::path base = fs::path(path).has_parent_path() ? fs::path(path).parent_path() : fs::path(".");
  try {
    c.name = j.value("name", fs::path(path).stem().string());
    c.seed = j.value("seed", std::uint64_t{1});
    c.threads = j.value("threads", 1);
    c.budget_seconds = j.value("budget_seconds", 0.0);
  } catch (const nlohmann::json::exception& e) {
    config_error(path, 1, e.what());
  }
  if (c.threads < 1) config_error(path, 1, "threads must be positive");
  const Json scenarios = j.value("scenarios", Json::array());
  if (!scenarios.is_array()) config_error(path, 1, "scenarios must be an array");
  std::size_t cursor = 0;
  for (const auto& s : scenarios) {
    Scenario sc;
    int line = line_of(text, cursor);
    if (!s.is_object() || !s.contains("name") || !s.at("name").is_string())
      config_error(path, line, "scenario without a name");
    sc.name = s.at("name").get<std::string>();
    const std::size_t at = find_scenario(text, sc.name, cursor);
    if (at != std::string::npos) {
      cursor = at + 1;
      line = line_of(text, at);
    }
    sc.line = line;
    for (const auto& other : c.scenarios)
      if (other.name == sc.name) config_error(path, line, "duplicate scenario '" + sc.name + "'");
    try {
      sc.operation = s.at("operation").get<std::string>();
      if (s.contains("module") && sc.operation.find('.') == std::string::npos)
        sc.operation = s.at("module").get<std::string>() + "." + sc.operation;
      sc.inputs = s.value("inputs", Json::object());
      sc.tolerances = s.value("tolerances", Json::object());
      sc.refinement = s.value("refinement", std::vector<int>{});
      sc.expect = s.value("expect", std::string{});
    } catch (const nlohmann::json::exception& e) {
      config_error(path, line, "scenario '" + sc.name + "': " + e.what());
    }
    if (!has_operation(sc.operation))
      config_error(path, line, "scenario '" + sc.name + "' names unknown operation '" + sc.operation + "'");
    if (!sc.expect.empty()) {
      try {
        status_from_string(sc.expect);
      } catch (const Error&) {
        config_error(path, line, "scenario '" + sc.name + "' expects unknown status '" + sc.expect + "'");
      }
    }
    resolve_files(sc.inputs, base, path, line);
    c.scenarios.push_back(std::move(sc));
  }
  return c;
}

Campaign load_campaign(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) config_error(path, 0, "cannot open campaign file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_campaign(ss.str(), path);
}

// ---------------------------------------------------------------------------
// reports

std::size_t Report::count(Status s) const {
  return static_cast<std::size_t>(
      std::count_if(scenarios.begin(), scenarios.end(), [&](const auto& r) { return r.status == s; }));
}

bool Report::failed(bool strict_vacuous) const {
  return count(Status::Fail) > 0 || (strict_vacuous && count(Status::Vacuous) > 0);
}

bool Report::matches_golden() const {
  return std::all_of(scenarios.begin(), scenarios.end(), [](const auto& r) {
    return r.expect.empty() || r.expect == to_string(r.status);
  });
}

namespace {

Json series_json(const Series& s) {
  return {{"name", s.name}, {"x_label", s.x_label}, {"y_label", s.y_label},
          {"log_log", s.log_log}, {"x", s.x}, {"y", s.y}};
}

Series series_from(const Json& j) {
  return {j.at("name"), j.at("x_label"), j.at("y_label"), j.at("x"), j.at("y"), j.at("log_log")};
}

Json environment() {
  Json e;
#if defined(__clang__)
  e["compiler"] = std::string("clang ") + __clang_version__;
#elif defined(__GNUC__)
  e["compiler"] = std::string("gcc ") + __VERSION__;
#else
  e["compiler"] = "unknown";
#endif
  e["cxx_standard"] = static_cast<long>(__cplusplus);
  e["eigen"] = std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
               std::to_string(EIGEN_MINOR_VERSION);
#ifdef NDEBUG
  e["build"] = "release";
#else
  e["build"] = "debug";
#endif
  e["pointer_bits"] = static_cast<int>(8 * sizeof(void*));
  return e;
}

std::string utc_now() {
  const std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

Json to_json(const Report& r) {
  Json j;
  j["schema"] = r.schema;
  j["campaign"] = r.campaign;
  j["seed"] = r.seed;
  j["threads"] = r.threads;
  j["environment"] = r.environment;
  j["summary"] = {{"pass", r.count(Status::Pass)},
                  {"fail", r.count(Status::Fail)},
                  {"vacuous", r.count(Status::Vacuous)},
                  {"out_of_scope", r.count(Status::OutOfScope)}};
  Json list = Json::array();
  Json wall = Json::object();
  double total = 0.0;
  for (const auto& s : r.scenarios) {
    Json e;
    e["name"] = s.name;
    e["operation"] = s.operation;
    e["status"] = to_string(s.status);
    if (!s.expect.empty()) e["expect"] = s.expect;
    e["message"] = s.message;
    e["measured"] = s.measured;
    e["slopes"] = s.slopes;
    Json series = Json::array();
    for (const auto& x : s.series) series.push_back(series_json(x));
    e["series"] = series;
    if (!s.regions.empty()) e["regions"] = s.regions;
    list.push_back(e);
    wall[s.name] = s.wall_time;
    total += s.wall_time;
  }
  j["scenarios"] = list;
  j["timestamp"] = {{"started", r.started}, {"wall_time", wall}, {"total_wall_time", total}};
  return j;
}

Report report_from_json(const Json& j) {
  try {
    Report r;
    r.schema = j.at("schema").get<int>();
    if (r.schema != 1) throw Error(ErrorCode::FormatError, "unsupported report schema " + std::to_string(r.schema));
    r.campaign = j.at("campaign");
    r.seed = j.at("seed");
    r.threads = j.at("threads");
    r.environment = j.value("environment", Json::object());
    const Json ts = j.value("timestamp", Json::object());
    r.started = ts.value("started", std::string{});
    for (const auto& e : j.at("scenarios")) {
      ScenarioResult s;
      s.name = e.at("name");
      s.operation = e.at("operation");
      s.status = status_from_string(e.at("status"));
      s.expect = e.value("expect", std::string{});
      s.message = e.value("message", std::string{});
      s.measured = e.value("measured", Json::object());
      s.slopes = e.value("slopes", Json::object());
      for (const auto& x : e.value("series", Json::array())) s.series.push_back(series_from(x));
      s.regions = e.value("regions", Json::object());
      if (ts.contains("wall_time")) s.wall_time = ts.at("wall_time").value(s.name, 0.0);
      r.scenarios.push_back(std::move(s));
    }
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::FormatError, std::string("malformed report: ") + e.what());
  }
}

void write_report(const Report& r, const std::string& path) {
  const fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::FormatError, "cannot write " + path);
  out << to_json(r).dump(2) << '\n';
}

Report read_report(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::FormatError, "cannot read " + path);
  Json j;
  try {
    j = Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::FormatError, path + ": " + e.what());
  }
  return report_from_json(j);
}

// ---------------------------------------------------------------------------
// running

std::vector<std::string> operations() {
  std::vector<std::string> out;
  for (const auto& [k, v] : detail::registry()) out.push_back(k);
  return out;
}

bool has_operation(const std::string& name) { return detail::registry().count(name) > 0; }

std::uint64_t scenario_seed(std::uint64_t campaign_seed, const std::string& name) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : name) h = (h ^ ch) * 1099511628211ULL;
  std::uint64_t z = campaign_seed + 0x9e3779b97f4a7c15ULL * (h | 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

ScenarioResult run_scenario(const Scenario& s, std::uint64_t seed, const std::string& cache_dir) {
  ScenarioResult r;
  r.name = s.name;
  r.operation = s.operation;
  r.expect = s.expect;
  const auto t0 = std::chrono::steady_clock::now();
  detail::Context ctx{s, seed, cache_dir, r, {}, {}, false};
  try {
    const auto it = detail::registry().find(s.operation);
    if (it == detail::registry().end())
      throw Error(ErrorCode::ScenarioError, "unknown operation '" + s.operation + "'");
    it->second(ctx);
    if (ctx.out_of_scope) {
      r.status = Status::OutOfScope;
      r.message = "not reproducible at desk scale";
    } else if (!ctx.failures.empty()) {
      r.status = Status::Fail;
      std::string msg;
      for (const auto& f : ctx.failures) msg += (msg.empty() ? "" : "; ") + f;
      r.message = msg;
    } else if (!ctx.vacuous.empty()) {
      r.status = Status::Vacuous;
      r.message = ctx.vacuous;
    } else {
      r.status = Status::Pass;
    }
  } catch (const Error& e) {
    r.status = e.code() == ErrorCode::NotCausallyOrdered ? Status::Vacuous : Status::Fail;
    r.message = e.what();
  } catch (const std::exception& e) {
    r.status = Status::Fail;
    r.message = std::string("ScenarioError: ") + e.what();
  }
  r.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

Report run_campaign(const Campaign& c, const RunOptions& opt) {
  Report rep;
  rep.campaign = c.name;
  rep.seed = opt.seed.value_or(c.seed);
  rep.threads = opt.threads > 0 ? opt.threads : c.threads;
  rep.environment = environment();
  rep.started = utc_now();
  rep.scenarios.resize(c.scenarios.size());
  const auto t0 = std::chrono::steady_clock::now();
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < c.scenarios.size(); i = next++) {
      const Scenario& s = c.scenarios[i];
      const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      if (c.budget_seconds > 0.0 && elapsed > c.budget_seconds) {
        ScenarioResult r;
        r.name = s.name;
        r.operation = s.operation;
        r.expect = s.expect;
        r.status = Status::Vacuous;
        r.message = "resource budget exhausted before the scenario started";
        rep.scenarios[i] = std::move(r);
        continue;
      }
      rep.scenarios[i] = run_scenario(s, scenario_seed(rep.seed, s.name), opt.cache_dir);
    }
  };
  const int n = std::max(1, std::min<int>(rep.threads, static_cast<int>(c.scenarios.size())));
  std::vector<std::thread> pool;
  for (int k = 1; k < n; ++k) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  return rep;
}

double fitted_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = std::min(x.size(), y.size());
  if (n < 2) throw Error(ErrorCode::MissingSeries, "slope needs at least two points");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double lx = std::log(x[i]), ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

// ---------------------------------------------------------------------------
// plots

PlotKind plot_kind_from_string(const std::string& s) {
  for (PlotKind k : {PlotKind::Convergence, PlotKind::Cones, PlotKind::Phases})
    if (s == to_string(k)) return k;
  throw Error(ErrorCode::MissingSeries, "unknown plot kind '" + s + "'");
}

const char* to_string(PlotKind k) {
  switch (k) {
    case PlotKind::Convergence: return "convergence";
    case PlotKind::Cones: return "cones";
    case PlotKind::Phases: return "phases";
  }
  return "convergence";
}

namespace {

constexpr int kWidth = 640;
constexpr int kHeight = 480;
constexpr double kLeft = 80, kRight = 610, kTop = 40, kBottom = 420;

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char ch : s) {
    switch (ch) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += ch;
    }
  }
  return out;
}

struct Svg {
  std::ostringstream os;
  Svg(const std::string& title) {
    os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
       << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
       << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\" font-family=\"DejaVu Sans Mono\" font-size=\"12\">\n"
       << "<rect id=\"background\" x=\"0\" y=\"0\" width=\"" << kWidth << "\" height=\"" << kHeight
       << "\" fill=\"#ffffff\"/>\n";
    text("title", kWidth / 2.0, 22, title, "middle", 14);
  }
  void text(const std::string& id, double x, double y, const std::string& s, const char* anchor = "start",
            int size = 12) {
    os << "<text id=\"" << id << "\" x=\"" << fmt("%.2f", x) << "\" y=\"" << fmt("%.2f", y)
       << "\" text-anchor=\"" << anchor << "\" font-size=\"" << size << "\">" << xml_escape(s) << "</text>\n";
  }
  void line(double x0, double y0, double x1, double y1, const char* stroke, double w = 1.0) {
    os << "<line x1=\"" << fmt("%.2f", x0) << "\" y1=\"" << fmt("%.2f", y0) << "\" x2=\"" << fmt("%.2f", x1)
       << "\" y2=\"" << fmt("%.2f", y1) << "\" stroke=\"" << stroke << "\" stroke-width=\"" << fmt("%.2f", w)
       << "\"/>\n";
  }
  void circle(double x, double y, double r, const char* fill, const char* stroke = "none") {
    os << "<circle cx=\"" << fmt("%.2f", x) << "\" cy=\"" << fmt("%.2f", y) << "\" r=\"" << fmt("%.2f", r)
       << "\" fill=\"" << fill << "\" stroke=\"" << stroke << "\"/>\n";
  }
  std::string done() {
    os << "</svg>\n";
    return os.str();
  }
};

const ScenarioResult& find_result(const Report& r, const std::string& name) {
  for (const auto& s : r.scenarios)
    if (s.name == name) return s;
  throw Error(ErrorCode::MissingSeries, "report has no scenario '" + name + "'");
}

struct Axis {
  double lo, hi;
  bool log;
  double to_unit(double v) const {
    const double a = log ? std::log10(v) : v, l = log ? std::log10(lo) : lo, h = log ? std::log10(hi) : hi;
    return h > l ? (a - l) / (h - l) : 0.5;
  }
};

Axis axis_for(const std::vector<double>& v, bool log) {
  double lo = *std::min_element(v.begin(), v.end()), hi = *std::max_element(v.begin(), v.end());
  if (log) {
    lo = std::pow(10.0, std::floor(std::log10(lo)));
    hi = std::pow(10.0, std::ceil(std::log10(hi)));
    if (hi <= lo) hi = lo * 10.0;
  } else {
    const double pad = hi > lo ? 0.05 * (hi - lo) : 1.0;
    lo -= pad;
    hi += pad;
  }
  return {lo, hi, log};
}

std::string convergence_plot(const ScenarioResult& s) {
  const auto it = std::find_if(s.series.begin(), s.series.end(), [](const Series& x) { return x.log_log; });
  if (it == s.series.end() || it->x.size() < 2)
    throw Error(ErrorCode::MissingSeries, "scenario '" + s.name + "' has no convergence series");
  const Series& se = *it;
  for (std::size_t i = 0; i < se.x.size(); ++i)
    if (!(se.x[i] > 0.0) || !(se.y[i] > 0.0))
      throw Error(ErrorCode::MissingSeries, "convergence series needs positive values");
  const double slope = fitted_slope(se.x, se.y);
  Svg svg(s.name + ": " + se.name);
  const Axis ax = axis_for(se.x, true), ay = axis_for(se.y, true);
  auto px = [&](double v) { return kLeft + ax.to_unit(v) * (kRight - kLeft); };
  auto py = [&](double v) { return kBottom - ay.to_unit(v) * (kBottom - kTop); };
  svg.os << "<g id=\"axes\">\n";
  svg.line(kLeft, kBottom, kRight, kBottom, "#000000");
  svg.line(kLeft, kBottom, kLeft, kTop, "#000000");
  for (double d = ax.lo; d <= ax.hi * 1.0001; d *= 10.0) {
    svg.line(px(d), kBottom, px(d), kBottom + 5, "#000000");
    svg.text("xtick", px(d), kBottom + 18, fmt("%.0e", d), "middle");
  }
  for (double d = ay.lo; d <= ay.hi * 1.0001; d *= 10.0) {
    svg.line(kLeft - 5, py(d), kLeft, py(d), "#000000");
    svg.text("ytick", kLeft - 8, py(d) + 4, fmt("%.0e", d), "end");
  }
  svg.text("xlabel", (kLeft + kRight) / 2, kHeight - 20, se.x_label, "middle");
  svg.text("ylabel", 12, kTop - 10, se.y_label);
  svg.os << "</g>\n<g id=\"data\">\n";
  svg.os << "<polyline fill=\"none\" stroke=\"#1f4e79\" stroke-width=\"1.5\" points=\"";
  for (std::size_t i = 0; i < se.x.size(); ++i)
    svg.os << (i ? " " : "") << fmt("%.2f", px(se.x[i])) << ',' << fmt("%.2f", py(se.y[i]));
  svg.os << "\"/>\n";
  for (std::size_t i = 0; i < se.x.size(); ++i) svg.circle(px(se.x[i]), py(se.y[i]), 3.5, "#1f4e79");
  svg.os << "</g>\n";
  svg.text("slope", kRight - 10, kTop + 20, "fitted slope " + fmt("%.3f", slope), "end");
  return svg.done();
}

std::string cones_plot(const ScenarioResult& s) {
  if (s.regions.empty() || !s.regions.contains("layers"))
    throw Error(ErrorCode::MissingSeries, "scenario '" + s.name + "' has no cone overlay");
  static const char* colors[] = {"#d9e7f5", "#7fa7d1", "#1f4e79", "#c04000"};
  const auto& layers = s.regions.at("layers");
  const int nt = s.regions.at("nt"), nx = s.regions.at("nx");
  Svg svg(s.name + ": cone overlay");
  const double cw = (kRight - kLeft) / nx, ch = (kBottom - kTop) / nt;
  std::size_t k = 0;
  for (const auto& layer : layers) {
    const char* color = colors[std::min<std::size_t>(k, 3)];
    svg.os << "<g id=\"layer" << k << "\" fill=\"" << color << "\">\n";
    const auto& rows = layer.at("rows");
    for (int r = 0; r < nt && r < static_cast<int>(rows.size()); ++r) {
      const std::string row = rows[static_cast<std::size_t>(r)];
      for (int x = 0; x < nx && x < static_cast<int>(row.size()); ++x) {
        if (row[static_cast<std::size_t>(x)] != '#') continue;
        int run = 1;
        while (x + run < nx && x + run < static_cast<int>(row.size()) && row[static_cast<std::size_t>(x + run)] == '#')
          ++run;
        svg.os << "<rect x=\"" << fmt("%.2f", kLeft + x * cw) << "\" y=\"" << fmt("%.2f", kTop + r * ch)
               << "\" width=\"" << fmt("%.2f", run * cw) << "\" height=\"" << fmt("%.2f", ch) << "\"/>\n";
        x += run - 1;
      }
    }
    svg.os << "</g>\n";
    svg.os << "<rect x=\"" << fmt("%.2f", kLeft + 10.0 + 150.0 * k) << "\" y=\"" << kBottom + 22
           << "\" width=\"12\" height=\"12\" fill=\"" << color << "\"/>\n";
    svg.text("legend" + std::to_string(k), kLeft + 28.0 + 150.0 * k, kBottom + 32, layer.at("name"));
    ++k;
  }
  svg.os << "<rect id=\"frame\" x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << kRight - kLeft
         << "\" height=\"" << kBottom - kTop << "\" fill=\"none\" stroke=\"#000000\"/>\n";
  svg.text("xlabel", (kLeft + kRight) / 2, kHeight - 12, "x (nodes)", "middle");
  svg.text("ylabel", 12, kTop - 10, "t (nodes, up)");
  return svg.done();
}

std::string phases_plot(const ScenarioResult& s) {
  const auto it = std::find_if(s.series.begin(), s.series.end(), [](const Series& x) { return !x.log_log; });
  if (it == s.series.end() || it->x.empty())
    throw Error(ErrorCode::MissingSeries, "scenario '" + s.name + "' has no phase series");
  const Series& se = *it;
  Svg svg(s.name + ": " + se.name + " on the unit circle");
  const double cx = kWidth / 2.0, cy = (kTop + kBottom) / 2.0, rad = 0.45 * (kBottom - kTop);
  svg.os << "<g id=\"axes\">\n";
  svg.circle(cx, cy, rad, "none", "#000000");
  svg.line(cx - rad - 10, cy, cx + rad + 10, cy, "#999999", 0.5);
  svg.line(cx, cy - rad - 10, cx, cy + rad + 10, "#999999", 0.5);
  svg.os << "</g>\n<g id=\"data\">\n";
  double dev = 0.0;
  for (std::size_t i = 0; i < se.x.size(); ++i) {
    dev = std::max(dev, std::abs(std::hypot(se.x[i], se.y[i]) - 1.0));
    svg.circle(cx + rad * se.x[i], cy - rad * se.y[i], 4.0, "#c04000");
  }
  svg.os << "</g>\n";
  svg.text("deviation", kRight, kBottom + 30, "max ||alpha|-1| = " + fmt("%.2e", dev), "end");
  svg.text("xlabel", cx, kHeight - 12, se.x_label, "middle");
  svg.text("ylabel", 12, kTop - 10, se.y_label);
  return svg.done();
}

}  // namespace

std::string render_plot(const Report& r, const std::string& scenario, PlotKind kind) {
  const ScenarioResult& s = find_result(r, scenario);
  switch (kind) {
    case PlotKind::Convergence: return convergence_plot(s);
    case PlotKind::Cones: return cones_plot(s);
    case PlotKind::Phases: return phases_plot(s);
  }
  throw Error(ErrorCode::MissingSeries, "unknown plot kind");
}

std::string emit_plot(const Report& r, const std::string& scenario, PlotKind kind, const std::string& out_dir) {
  const std::string svg = render_plot(r, scenario, kind);
  fs::create_directories(out_dir);
  const std::string path = (fs::path(out_dir) / (scenario + "-" + to_string(kind) + ".svg")).string();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::FormatError, "cannot write " + path);
  out << svg;
  return path;
}

// ---------------------------------------------------------------------------
// cocycle sessions

namespace {

Region cells_region(const Universe& u, const Json& j) {
  const LatticeSpec spec = u.cell_spec();
  Region r(spec);
  auto add = [&](int t, int x) {
    if (t < 0 || t >= u.nt || x < 0 || x >= u.nx)
      throw Error(ErrorCode::ConfigError, "cell (" + std::to_string(t) + "," + std::to_string(x) + ") outside the universe");
    r.insert(u.node(u.cell(t, x)));
  };
  if (j.is_object()) {
    const auto t = j.at("t").get<std::array<int, 2>>(), x = j.at("x").get<std::array<int, 2>>();
    for (int a = t[0]; a <= t[1]; ++a)
      for (int b = x[0]; b <= x[1]; ++b) add(a, b);
  } else {
    for (const auto& c : j) add(c.at(0).get<int>(), c.at(1).get<int>());
  }
  return r;
}

Coboundary coboundary_from(const Universe& u, const Json& kinds, std::uint64_t seed) {
  Coboundary b = Coboundary::trivial();
  std::uint64_t k = 0;
  for (const auto& name : kinds) {
    const std::string s = name.get<std::string>();
    const std::uint64_t sd = seed + 101 * ++k;
    if (s == "trivial") continue;
    if (s == "additive") b = b * Coboundary::additive(u, sd);
    else if (s == "bilinear") b = b * Coboundary::bilinear(u, sd);
    else if (s == "generic") b = b * Coboundary::generic(sd);
    else throw Error(ErrorCode::ConfigError, "unknown coboundary kind '" + s + "'");
  }
  return b;
}

Json functional_json(const Universe& u, const SiteFunctional& f) {
  Json out = Json::array();
  for (int t = 0; t < u.nt; ++t)
    for (int x = 0; x < u.nx; ++x)
      for (int k = 0; k < u.components; ++k) {
        const auto v = f.at(u.cell(t, x), k, u.components);
        if (v != 0) out.push_back({t, x, k, v});
      }
  return out;
}

}  // namespace

Json run_cocycle_session(const Json& session, std::uint64_t seed, const std::string& cache_dir) {
  Universe u;
  const Json uj = session.value("universe", Json::object());
  u.nt = uj.value("nt", u.nt);
  u.nx = uj.value("nx", u.nx);
  u.components = uj.value("components", u.components);
  u.bound = uj.value("bound", u.bound);
  u.c = uj.value("c", u.c);
  u.periodic = uj.value("periodic", u.periodic);
  auto geo = std::make_shared<const CellGeometry>(u);

  const Json src = session.value("oracle", Json{{"kind", "synthetic"}});
  const std::string kind = src.value("kind", std::string("synthetic"));
  const Json tol = session.value("tolerances", Json::object());
  const double sigma = tol.value("sigma", 3.0);
  const double floor = tol.value("floor", kind == "measured" ? 1e-12 : 0.0);

  std::optional<Coboundary> reference;
  std::shared_ptr<ImplementerCache> cache;
  std::optional<PhaseOracle> restricted;
  if (kind == "synthetic") {
    reference = coboundary_from(u, src.value("beta", Json::array({"generic", "bilinear"})),
                                src.value("seed", seed));
    restricted = coboundary_oracle(geo, *reference, OracleDomain::Ordered);
  } else if (kind == "measured") {
    CellEmbedding e;
    e.lattice = detail::spec_from_json(src.value("lattice", Json::object()), e.lattice);
    if (src.contains("cell_nodes")) e.cell_nodes = src.at("cell_nodes").get<std::array<int, 2>>();
    if (src.contains("origin")) e.origin = src.at("origin").get<std::array<int, 2>>();
    if (src.contains("radius")) e.radius = src.at("radius").get<std::array<double, 2>>();
    e.unit_kinetic.p00 = src.value("unit_p00", 0.05);
    e.unit_kinetic.pij = {src.value("unit_pij", 0.05), 0.0, 0.0};
    e.unit_potential = src.value("unit_q", 0.15);
    if (src.contains("scale")) e.scale = src.at("scale").get<double>();
    cache = std::make_shared<ImplementerCache>(cache_dir);
    AlphaOptions ao;
    ao.n_max = src.value("n_max", 4);
    ao.probes = src.value("probes", 1);
    ao.seed = seed;
    restricted = measured_oracle(geo, e, cache, ao, src.value("log", std::string{}));
  } else {
    throw Error(ErrorCode::ConfigError, "unknown oracle kind '" + kind + "'");
  }

  std::vector<RegionPair> pairs;
  for (const auto& p : session.value("pairs", Json::array()))
    pairs.push_back({cells_region(u, p.at("r1")), cells_region(u, p.at("r2"))});
  if (pairs.empty()) throw Error(ErrorCode::ConfigError, "cocycle session lists no region pairs");

  const Json ej = session.value("extend", Json::object());
  ExtendOptions eo;
  eo.alternatives = ej.value("alternatives", eo.alternatives);
  eo.seed = seed + 1;
  eo.tol = tol.value("extend", floor);
  const PhaseOracle extended = extend_phase(*restricted, eo);

  const Json tj = session.value("trivialize", Json::object());
  TrivializeOptions to;
  to.sweeps = tj.value("sweeps", to.sweeps);
  to.checks_per_pair = tj.value("checks_per_pair", to.checks_per_pair);
  to.seed = seed + 2;
  to.tol = tol.value("persistence", floor);
  const Trivialization triv = trivialize(extended, pairs, to);

  Json out;
  out["universe"] = {{"nt", u.nt}, {"nx", u.nx}, {"components", u.components}, {"c", u.c}, {"periodic", u.periodic}};
  out["oracle"] = kind;
  Json residuals = Json::array();
  Json checks = Json::object();
  double worst = 0.0, largest = 0.0, largest_bound = 0.0;
  for (const auto& r : triv.residuals) {
    const double bound = sigma * r.max_error + floor;
    residuals.push_back({{"pair", r.pair}, {"max_angle", r.max_angle}, {"max_error", r.max_error},
                         {"bound", bound}, {"ok", r.max_angle <= bound}});
    worst = std::max(worst, r.max_angle - bound);
    if (r.max_angle >= largest) {
      largest = r.max_angle;
      largest_bound = bound;
    }
  }
  out["residuals"] = residuals;
  checks["residual_excess"] = {{"value", std::max(worst, 0.0)}, {"max", 0.0}};
  checks["max_residual_angle"] = largest;
  checks["max_residual_bound"] = largest_bound;
  checks["steps"] = triv.steps.size();

  if (reference) {
    const int quads = session.value("gamma_quadruples", 200);
    const auto g = gamma_check(triv.beta, *reference, *geo, pairs, seed + 3, quads);
    checks["delta_gamma"] = {{"value", g.max_defect}, {"max", tol.value("gamma", 0.0)}};
    checks["delta_gamma_checked"] = g.checked;
  }

  Json table = Json::array();
  std::mt19937_64 rng(seed + 4);
  const int samples = session.value("beta_samples", 4);
  for (std::size_t i = 0; i < pairs.size(); ++i)
    for (const auto& t : pair_triples(*geo, pairs[i], rng(), samples)) {
      const SiteFunctional r = t.n + t.p + t.q;
      const Phase b = triv.beta(r);
      table.push_back({{"pair", i}, {"functional", functional_json(u, r)}, {"angle", b.radians()}, {"error", b.error}});
    }
  out["beta"] = table;
  out["checks"] = checks;
  out["alpha_evaluations"] = restricted->evaluations();
  out["gamma_ambiguity"] = "beta is determined up to local functionals gamma with delta(gamma) = 1";
  return out;
}

}  // namespace causalfield
