// Integration checks for the msq command-line front end: the exit-code
// contract (0 success, 1 assertion failure, 2 configuration/feasibility
// error) and the shape of stdout.  The binary path arrives in MSQ_CLI.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace {

namespace fs = std::filesystem;

struct RunResult {
  int exit_code = -1;
  std::string out;
};

const char* cli_path() {
  const char* p = std::getenv("MSQ_CLI");
  REQUIRE_MESSAGE(p != nullptr, "MSQ_CLI must point at the msq binary (ctest sets it)");
  return p;
}

RunResult run_cli(const std::string& args) {
  const fs::path out_file = fs::temp_directory_path() / "msq-cli-test-out.txt";
  const std::string cmd = std::string("\"") + cli_path() + "\" " + args + " > " +
                          out_file.string() + " 2>&1";
  const int raw = std::system(cmd.c_str());
  RunResult res;
  res.exit_code = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  std::ifstream f(out_file);
  std::stringstream ss;
  ss << f.rdbuf();
  res.out = ss.str();
  return res;
}

std::string temp_out_dir(const std::string& tag) {
  const fs::path dir = fs::temp_directory_path() / ("msq-cli-test-" + tag);
  fs::remove_all(dir);
  return dir.string();
}

}  // namespace

TEST_CASE("classical-value prints the exact rational") {
  const auto res = run_cli("classical-value");
  CHECK(res.exit_code == 0);
  CHECK(res.out == "8/9\n");
  const auto machine = run_cli("classical-value --machine");
  CHECK(machine.exit_code == 0);
  CHECK(machine.out.find("\"num\":8") != std::string::npos);
  CHECK(machine.out.find("\"den\":9") != std::string::npos);
}

TEST_CASE("feasibility errors use exit code 2, distinct from check failures") {
  CHECK(run_cli("ideal-check --n 4 --out " + temp_out_dir("feas")).exit_code == 2);
  CHECK(run_cli("spectrum --n 9 --out " + temp_out_dir("feas")).exit_code == 2);
  CHECK(run_cli("sweep --eps 0.5 --out " + temp_out_dir("feas")).exit_code == 2);
  CHECK(run_cli("lemma-tests --lemma nope --seeds 1").exit_code == 2);
  CHECK(run_cli("appendix-b --kind nope --out " + temp_out_dir("feas")).exit_code == 2);
  CHECK(run_cli("not-a-command").exit_code == 2);
}

TEST_CASE("passing commands exit zero and write their artifacts") {
  const std::string dir = temp_out_dir("ok");
  const auto ideal = run_cli("ideal-check --n 1 --out " + dir);
  CHECK(ideal.exit_code == 0);
  CHECK(ideal.out.find("PASS") != std::string::npos);
  CHECK(fs::exists(fs::path(dir) / "ideal-check-n1.json"));

  const auto spec = run_cli("spectrum --n 2 --out " + dir);
  CHECK(spec.exit_code == 0);
  CHECK(fs::exists(fs::path(dir) / "spectrum-n2.json"));

  const auto apx = run_cli("appendix-b --eps 1e-3 --seed 5 --out " + dir);
  CHECK(apx.exit_code == 0);
  CHECK(apx.out.find("PASS") != std::string::npos);
}

TEST_CASE("lemma replay reproduces the slack of a named instance") {
  const auto a = run_cli("lemma-tests --lemma save_eps --seed 42");
  const auto b = run_cli("lemma-tests --lemma save_eps --seed 42");
  CHECK(a.exit_code == 0);
  CHECK(a.out == b.out);
  CHECK(a.out.find("min_slack=") != std::string::npos);
}
