#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "causalfield/geometry.hpp"
#include "causalfield/harness.hpp"

namespace causalfield::detail {

struct Context {
  const Scenario& scenario;
  std::uint64_t seed;
  std::string cache_dir;
  ScenarioResult& result;
  std::vector<std::string> failures;
  std::string vacuous;
  bool out_of_scope = false;

  template <class T>
  T in(const char* key, T fallback) const {
    return scenario.inputs.contains(key) ? scenario.inputs.at(key).get<T>() : fallback;
  }
  double tol(const std::string& key, double fallback) const;

  /// Records value <= bound (bound overridable through tolerances[name]).
  void at_most(const std::string& name, double value, double bound);
  void at_least(const std::string& name, double value, double bound);
  void require(const std::string& name, bool ok, const std::string& what);
  void record(const std::string& name, Json value) { result.measured[name] = std::move(value); }
  void mark_vacuous(const std::string& why) { vacuous = why; }
};

using Operation = std::function<void(Context&)>;
const std::map<std::string, Operation>& registry();

LatticeSpec spec_from_json(const Json& j, LatticeSpec fallback = {});
KineticPerturbation perturbation_from_json(const Json& j, const LatticeSpec& spec);

}  // namespace causalfield::detail
