#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "causalfield/error.hpp"
#include "causalfield/io.hpp"
#include "causalfield/lattice.hpp"
#include "helpers.hpp"

using namespace causalfield;
using namespace cftest;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const char* name) { return fs::temp_directory_path() / (std::string("causalfield-unit-") + name); }

}  // namespace

TEST_CASE("perturbation files round trip") {
  const LatticeSpec s = spec2(16, 12, 0.1, 0.05);
  const auto p = bump(s, 8, 6, 4, 4, coeffs(0.2, 0.1, -0.1, 0.5));
  const auto path = scratch("p.bin");
  save_perturbation(p, path.string());
  CHECK(load_perturbation(path.string()) == p);
  fs::remove(path);
}

TEST_CASE("region files round trip") {
  const LatticeSpec s = spec2(9, 11, 0.1, 0.05);
  Region r(s);
  for (std::size_t i = 0; i < s.size(); i += 7) r.insert(i);
  const auto path = scratch("r.bin");
  save_region(r, path.string());
  CHECK(load_region(path.string()) == r);
  fs::remove(path);
}

TEST_CASE("field files round trip") {
  const LatticeSpec s = spec2(16, 12, 0.1, 0.05);
  const LatticeField f = source(s, 8, 6, 3);
  const auto path = scratch("f.bin");
  save_field(f, path.string());
  CHECK(relative_difference(load_field(path.string()), f) == 0.0);
  fs::remove(path);
}

TEST_CASE("malformed files raise FormatError") {
  const auto path = scratch("bad.bin");
  std::ofstream(path) << "not a header\n";
  CHECK_THROWS_AS(load_field(path.string()), Error);
  const LatticeSpec s = spec2(16, 12, 0.1, 0.05);
  save_field(source(s, 8, 6, 3), path.string());
  CHECK_THROWS_AS(load_region(path.string()), Error);
  fs::resize_file(path, fs::file_size(path) - 8);
  CHECK_THROWS_AS(load_field(path.string()), Error);
  fs::remove(path);
  CHECK_THROWS_AS(load_field(path.string()), Error);
}

TEST_CASE("solver config round trip") {
  SolverConfig c;
  c.dx = 0.05;
  c.window = {32, 48, 1};
  const auto path = scratch("solver.json");
  save_solver_config(c, path.string());
  const SolverConfig d = load_solver_config(path.string());
  CHECK(d.dx == c.dx);
  CHECK(d.window == c.window);
  fs::remove(path);
}
