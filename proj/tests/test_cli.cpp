// End-to-end checks of the installed binary: exit codes, file layout, and the
// text contracts other tooling scrapes (CSV headers, JSON reports).
#include <hotuner/harness.hpp>

#include <doctest.h>

#include <nlohmann/json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <sys/wait.h>
#include <unistd.h>

namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() /
           ("hotuner_cli_" + tag + "_" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
};

/// Runs the binary through the shell; returns its exit code. stdout (and
/// optionally stderr) land in capture, when given.
int run_cli(const std::string& args, const fs::path& capture = {},
            bool merge_stderr = false) {
  std::string cmd = std::string(HOTUNER_CLI_PATH) + " " + args;
  if (!capture.empty()) {
    cmd += " > " + capture.string();
    cmd += merge_stderr ? " 2>&1" : " 2> /dev/null";
  } else {
    cmd += " > /dev/null 2>&1";
  }
  const int rc = std::system(cmd.c_str());
  REQUIRE(rc != -1);
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -2;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path config_path(const std::string& name) {
  return fs::path(HOTUNER_CONFIG_DIR) / name;
}

/// Tiny three-tuner experiment on a constant regressor; runs in microseconds.
fs::path write_small_config(const fs::path& dir) {
  nlohmann::json j;
  j["name"] = "cli_small";
  j["algorithms"] = nlohmann::json::array({
      {{"algorithm", "ngd"}, {"alpha", 0.0469}},
      {{"algorithm", "hb"}, {"beta", 0.5}, {"gamma", 0.09}},
      {{"algorithm", "na"}, {"beta", 0.5}, {"gamma", 0.09}},
  });
  j["source"] = {{"kind", "constant"}, {"phi", {1.0, -2.0, 1.0}}};
  j["theta_star"] = {20.0, -3.0, 1.0};
  j["horizon"] = 50;
  const fs::path p = dir / "cli_small.json";
  std::ofstream out(p);
  out << j.dump(2) << "\n";
  return p;
}

}  // namespace

TEST_CASE("cli: help and argument errors") {
  TempDir tmp("help");
  CHECK(run_cli("--help", tmp.path / "help.txt") == 0);
  const std::string help = slurp(tmp.path / "help.txt");
  CHECK(help.find("run") != std::string::npos);
  CHECK(help.find("analyze") != std::string::npos);
  CHECK(help.find("compare") != std::string::npos);
  CHECK(help.find("plot") != std::string::npos);

  CHECK(run_cli("") == 1);                  // a subcommand is required
  CHECK(run_cli("frobnicate") == 1);        // unknown subcommand
  CHECK(run_cli("run") == 1);               // missing --config
  CHECK(run_cli("run --config /nonexistent.json") == 1);
}

TEST_CASE("cli: run writes traces and a report") {
  TempDir tmp("run");
  const fs::path out = tmp.path / "out";
  const int rc = run_cli("run --config " + config_path("fig2.json").string() +
                             " --out " + out.string(),
                         tmp.path / "run.txt", true);
  CHECK(rc == 0);
  CHECK(fs::exists(out / "report.json"));
  CHECK(fs::exists(out / "ngd.csv"));
  CHECK(fs::exists(out / "hb.csv"));
  CHECK(fs::exists(out / "na.csv"));

  const std::string text = slurp(tmp.path / "run.txt");
  CHECK(text.find("fig2") != std::string::npos);
  CHECK(text.find("wrote") != std::string::npos);

  std::ifstream rep_in(out / "report.json");
  const nlohmann::json rep = nlohmann::json::parse(rep_in);
  CHECK(rep["name"] == "fig2");
  CHECK(rep["horizon"] == 500);
  REQUIRE(rep["algorithms"].size() == 3);
  CHECK(rep["algorithms"][0]["trace_file"] == "ngd.csv");

  // Rerunning into a second directory produces byte-identical artifacts.
  const fs::path out2 = tmp.path / "out2";
  CHECK(run_cli("run --config " + config_path("fig2.json").string() +
                " --out " + out2.string()) == 0);
  CHECK(slurp(out / "report.json") == slurp(out2 / "report.json"));
  CHECK(slurp(out / "hb.csv") == slurp(out2 / "hb.csv"));
}

TEST_CASE("cli: HOTUNER_OUT supplies the default output root") {
  TempDir tmp("envout");
  const fs::path cfg = write_small_config(tmp.path);
  const std::string cmd = "HOTUNER_OUT=" + (tmp.path / "root").string() + " " +
                          std::string(HOTUNER_CLI_PATH) + " run --config " +
                          cfg.string() + " > /dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  REQUIRE(rc != -1);
  CHECK(WEXITSTATUS(rc) == 0);
  CHECK(fs::exists(tmp.path / "root" / "cli_small" / "report.json"));
}

TEST_CASE("cli: analyze recomputes excitation for chosen windows") {
  TempDir tmp("analyze");
  const fs::path cfg = write_small_config(tmp.path);
  const fs::path out = tmp.path / "out";
  REQUIRE(run_cli("run --config " + cfg.string() + " --out " + out.string()) == 0);

  const int rc = run_cli("analyze --trace " + (out / "hb.csv").string() +
                             " --delta-t 5 --delta-t 10",
                         tmp.path / "analyze.json");
  CHECK(rc == 0);
  std::ifstream in(tmp.path / "analyze.json");
  const nlohmann::json j = nlohmann::json::parse(in);
  CHECK(j["trace"] == "hb.csv");
  CHECK(j["algorithm"] == "hb");
  REQUIRE(j["analyses"].is_array());
  REQUIRE(j["analyses"].size() == 2);
  CHECK(j["analyses"][0]["delta_t"] == 5);
  CHECK(j["analyses"][1]["delta_t"] == 10);
  // Constant regressor in three dimensions: no excitation, no certificate.
  CHECK(j["analyses"][0]["pe"]["epsilon"].get<double>() <= 1e-12);
  CHECK(j["analyses"][0]["rate"].is_null());

  // A trace file without its report is unusable.
  fs::copy_file(out / "hb.csv", tmp.path / "orphan.csv");
  CHECK(run_cli("analyze --trace " + (tmp.path / "orphan.csv").string() +
                " --delta-t 5") == 1);
}

TEST_CASE("cli: compare tabulates runs side by side") {
  TempDir tmp("compare");
  const fs::path cfg = write_small_config(tmp.path);
  const fs::path a = tmp.path / "a";
  const fs::path b = tmp.path / "b";
  REQUIRE(run_cli("run --config " + cfg.string() + " --out " + a.string()) == 0);
  REQUIRE(run_cli("run --config " + cfg.string() + " --out " + b.string()) == 0);

  const int rc = run_cli("compare " + a.string() + " " + b.string() +
                             " --eps-e 1e-6 --eps-theta 1e-6",
                         tmp.path / "cmp.csv");
  CHECK(rc == 0);
  const std::string csv = slurp(tmp.path / "cmp.csv");
  CHECK(csv.rfind("run,algorithm,", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 7);  // header + 6 rows

  const fs::path cmp_out = tmp.path / "cmp";
  CHECK(run_cli("compare " + a.string() + " " + b.string() + " --out " +
                cmp_out.string()) == 0);
  CHECK(fs::exists(cmp_out / "compare.csv"));
  CHECK(fs::exists(cmp_out / "compare.json"));

  CHECK(run_cli("compare " + a.string() + " " + (tmp.path / "nope").string()) ==
        1);
}

TEST_CASE("cli: plot emits two-column series") {
  TempDir tmp("plot");
  const fs::path cfg = write_small_config(tmp.path);
  const fs::path out = tmp.path / "out";
  REQUIRE(run_cli("run --config " + cfg.string() + " --out " + out.string()) == 0);

  CHECK(run_cli("plot --trace " + (out / "hb.csv").string() +
                    " --quantity v --scale log10-abs",
                tmp.path / "plot.csv") == 0);
  const std::string plot = slurp(tmp.path / "plot.csv");
  CHECK(plot.rfind("k,log10_abs_v\n", 0) == 0);

  const fs::path file_out = tmp.path / "series.csv";
  CHECK(run_cli("plot --trace " + (out / "ngd.csv").string() +
                " --quantity e_y --scale linear --out " + file_out.string()) ==
        0);
  CHECK(slurp(file_out).rfind("k,e_y\n", 0) == 0);

  // NGD carries no Lyapunov column.
  CHECK(run_cli("plot --trace " + (out / "ngd.csv").string() +
                " --quantity v --scale linear") == 1);
  CHECK(run_cli("plot --trace " + (out / "hb.csv").string() +
                " --quantity e_y --scale cubic") == 1);
}

TEST_CASE("cli: divergence is reported distinctly") {
  TempDir tmp("diverge");
  nlohmann::json j;
  j["name"] = "blowup";
  j["algorithms"] = nlohmann::json::array(
      {{{"algorithm", "hb-classical"}, {"beta", 5.0}, {"gamma", 1.0}}});
  j["source"] = {{"kind", "constant"}, {"phi", {1.0, -2.0, 1.0}}};
  j["theta_star"] = {20.0, -3.0, 1.0};
  j["horizon"] = 2000;
  const fs::path cfg = tmp.path / "blowup.json";
  std::ofstream out(cfg);
  out << j.dump(2) << "\n";
  out.close();

  const int rc = run_cli("run --config " + cfg.string() + " --out " +
                             (tmp.path / "out").string(),
                         tmp.path / "err.txt", true);
  CHECK(rc == 2);
  const std::string text = slurp(tmp.path / "err.txt");
  CHECK(text.find("divergence") != std::string::npos);
  CHECK(text.find("hb-classical") != std::string::npos);
}
