// Command-line front end: exit codes, artifact layout, the output-directory
// environment variable, and stage ordering errors.

#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

namespace fs = std::filesystem;

namespace {

const std::string kCli = POISONGUARD_CLI_PATH;

int run(const std::string& args) {
  const int rc = std::system((kCli + " " + args + " >/dev/null 2>&1").c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

fs::path fresh_dir(const std::string& name) {
  const auto p = fs::temp_directory_path() / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

// Tiny config: big enough to poison and train, far too small to detect.
fs::path small_config(const fs::path& dir) {
  const auto p = dir / "config.json";
  std::ofstream os(p);
  os << R"({"dataset": {"train_per_class": 40, "test_per_class": 10},
            "train": {"epochs": 2}})";
  return p;
}

}  // namespace

TEST_CASE("usage errors exit with code 1") {
  CHECK(run("") == 1);                     // missing subcommand
  CHECK(run("no-such-command") == 1);      // unknown subcommand
  CHECK(run("verify no-such-suite --out /tmp") == 1);
}

TEST_CASE("missing artifacts exit with code 2") {
  const auto dir = fresh_dir("pg_cli_missing");
  CHECK(run("train --out " + dir.string()) == 2);
  CHECK(run("filter --out " + dir.string()) == 2);
  CHECK(run("detect --out " + dir.string()) == 2);
  CHECK(run("poison --config /nonexistent.json --out " + dir.string()) == 2);
  fs::remove_all(dir);
}

TEST_CASE("poison and train stages write the expected artifacts") {
  const auto dir = fresh_dir("pg_cli_stages");
  const auto cfg = small_config(dir);
  const std::string common =
      " --config " + cfg.string() + " --out " + dir.string() + " --seed 5";
  REQUIRE(run("poison" + common) == 0);
  CHECK(fs::exists(dir / "dataset.pgds"));
  CHECK(fs::exists(dir / "dataset.pgds.json"));
  CHECK(fs::exists(dir / "test_clean.pgds"));
  CHECK(fs::exists(dir / "test_poisoned.pgds"));
  CHECK(fs::exists(dir / "report.json"));
  REQUIRE(run("train" + common) == 0);
  CHECK(fs::exists(dir / "model.pgnn"));
  REQUIRE(run("extract --class 0" + common) == 0);
  CHECK(fs::exists(dir / "signal_0.ppm"));
  fs::remove_all(dir);
}

TEST_CASE("output directory falls back to the environment variable") {
  const auto dir = fresh_dir("pg_cli_env");
  const auto cfg = small_config(dir);
  setenv("POISONGUARD_OUT", dir.c_str(), 1);
  const int rc = run("poison --config " + cfg.string() + " --seed 5");
  unsetenv("POISONGUARD_OUT");
  REQUIRE(rc == 0);
  CHECK(fs::exists(dir / "dataset.pgds"));
  fs::remove_all(dir);
}
