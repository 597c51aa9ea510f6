#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "steinflow/config.hpp"
#include "steinflow/error.hpp"

using namespace steinflow;

TEST_CASE("parsing") {
  const auto c = Config::parse_string(
      "# leading comment\n"
      "kernel.variance = 2.5   # trailing comment\n"
      "\n"
      "  potential.family=monomial\n"
      "run.times = 0.5, 1 2\n"
      "run.particles = 64,256\n"
      "diagnostics.ksd = off\n"
      "seed = 18446744073709551615\n"
      "kernel.variance = 3\n");
  CHECK(c.get_double("kernel.variance", 0.0) == 3.0);
  CHECK(c.get_string("potential.family", "") == "monomial");
  CHECK(c.get_doubles("run.times", {}) == std::vector<double>{0.5, 1.0, 2.0});
  CHECK(c.get_sizes("run.particles", {}) == std::vector<std::size_t>{64, 256});
  CHECK_FALSE(c.get_bool("diagnostics.ksd", true));
  CHECK(c.get_seed("seed", 0) == 18446744073709551615ull);
  CHECK(c.get_int("missing", -4) == -4);
  CHECK(c.entries().size() == 6);
}

TEST_CASE("malformed input names the line") {
  try {
    (void)Config::parse_string("a = 1\nthis line has no equals\n");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find(":2:") != std::string::npos);
  }
  CHECK_THROWS_AS(Config::parse_string("bad key = 1\n"), ConfigError);
  CHECK_THROWS_AS(Config::parse_string(".x = 1\n"), ConfigError);
  const auto c = Config::parse_string("n = 12x\nm = -3\nb = maybe\n");
  CHECK_THROWS_AS(c.get_double("n", 0.0), ConfigError);
  CHECK_THROWS_AS(c.get_int("n", 0), ConfigError);
  CHECK_THROWS_AS(c.get_size("m", 0), ConfigError);
  CHECK_THROWS_AS(c.get_seed("m", 0), ConfigError);
  CHECK_THROWS_AS(c.get_bool("b", false), ConfigError);
  CHECK(c.get_int("m", 0) == -3);
}

TEST_CASE("overrides and known keys") {
  Config c;
  c.apply_override("run.t_final=4");
  c.apply_override(" integrator.dt = 0.5 ");
  CHECK(c.get_double("run.t_final", 0.0) == 4.0);
  CHECK(c.get_double("integrator.dt", 0.0) == 0.5);
  CHECK_THROWS_AS(c.apply_override("no-equals"), ConfigError);
  CHECK_NOTHROW(c.require_known({"run.t_final", "integrator.dt"}));
  try {
    c.require_known({"run.t_final"});
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()) == "unknown config key 'integrator.dt'");
  }
  c.erase("integrator.dt");
  CHECK_FALSE(c.has("integrator.dt"));
}

TEST_CASE("text round trip through a file") {
  const auto c = Config::parse_string("b = 2\na = x y\nc.d = 1e-3\n");
  CHECK(c.to_text() == "a = x y\nb = 2\nc.d = 1e-3\n");
  const auto path = std::filesystem::temp_directory_path() / "steinflow_test_config.cfg";
  {
    std::ofstream out(path);
    out << c.to_text();
  }
  CHECK(Config::load(path).entries() == c.entries());
  std::filesystem::remove(path);
  CHECK_THROWS_AS(Config::load(path), ConfigError);
}
