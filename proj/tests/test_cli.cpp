#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <sys/wait.h>
#include <unistd.h>

#include <json.hpp>

#include "abmkit/config.hpp"

using namespace abmkit;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Run {
  int exit_code = -1;
  std::string out;
  std::string err;
};

fs::path work_dir() {
  static fs::path dir = [] {
    fs::path p = fs::temp_directory_path() / ("abmkit_cli_" + std::to_string(::getpid()));
    fs::create_directories(p);
    return p;
  }();
  return dir;
}

Run run_cli(const std::string& args) {
  const fs::path out = work_dir() / "stdout.txt";
  const fs::path err = work_dir() / "stderr.txt";
  const std::string cmd = std::string(ABMKIT_BIN) + " " + args + " > " + out.string() + " 2> " +
                          err.string();
  const int status = std::system(cmd.c_str());
  Run r;
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  auto slurp = [](const fs::path& p) {
    std::ifstream in(p);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
  };
  r.out = slurp(out);
  r.err = slurp(err);
  return r;
}

json tiny_config(const std::string& out_name) {
  return json{
      {"variant", {{"kind", "C"}, {"m", 3}}},
      {"placement", "top"},
      {"layers", 1},
      {"width", 12},
      {"rank", 12},
      {"sampler", {{"segments", 8}, {"snippet", 3}, {"shifts", 3}}},
      {"task",
       {{"task", "order-discrimination"}, {"classes", 4}, {"frames", 24}, {"channels", 6},
        {"noise", 0.1}, {"seed", 9}, {"train", 96}, {"val", 40}}},
      {"train",
       {{"lr", 0.002}, {"momentum", 0.9}, {"batch", 16}, {"epochs", 2}, {"decay_epochs", {2}}}},
      {"seed", 4},
      {"out", (work_dir() / out_name).string()}};
}

std::string write_config(const json& cfg, const std::string& name) {
  const fs::path path = work_dir() / name;
  std::ofstream out(path, std::ios::trunc);
  out << cfg.dump(2);
  return path.string();
}

}  // namespace

TEST_CASE("help lists every subcommand") {
  Run r = run_cli("--help");
  CHECK(r.exit_code == 0);
  for (const char* name : {"gradcheck", "surgery-verify", "train", "eval", "bench", "keyframes"}) {
    CHECK(r.out.find(name) != std::string::npos);
  }
}

TEST_CASE("config JSON round-trips losslessly") {
  const json cfg = tiny_config("roundtrip");
  RunConfig parsed = RunConfig::from_json(cfg);
  const json once = parsed.to_json();
  RunConfig reparsed = RunConfig::from_json(once);
  CHECK(once.dump() == reparsed.to_json().dump());
  CHECK(parsed.hash() == reparsed.hash());
}

TEST_CASE("unknown config keys are rejected") {
  json cfg = tiny_config("unknown");
  cfg["typo_key"] = 1;
  CHECK_THROWS_AS(RunConfig::from_json(cfg), ConfigError);

  json nested = tiny_config("unknown2");
  nested["train"]["warmup"] = 1;
  CHECK_THROWS_AS(RunConfig::from_json(nested), ConfigError);

  const std::string path = write_config(cfg, "bad.json");
  Run r = run_cli("train --config " + path);
  CHECK(r.exit_code == 2);
  CHECK(r.err.find("typo_key") != std::string::npos);
}

TEST_CASE("gradcheck subcommand") {
  Run ok = run_cli("gradcheck --seeds 2 --checks matmul,softmax_ce");
  CHECK(ok.exit_code == 0);
  CHECK(ok.out.find("\"passed\": true") != std::string::npos);

  Run negative = run_cli("gradcheck --seeds 1 --checks matmul --negative-control");
  CHECK(negative.exit_code == 1);

  Run empty = run_cli("gradcheck --checks \"\"");
  CHECK(empty.exit_code == 2);
  CHECK(empty.err.find("nothing to check") != std::string::npos);
}

TEST_CASE("train writes artifacts and eval reproduces the logged accuracy") {
  const json cfg = tiny_config("train_run");
  const std::string path = write_config(cfg, "train.json");

  Run trained = run_cli("train --config " + path);
  REQUIRE(trained.exit_code == 0);

  const fs::path out_dir = cfg["out"].get<std::string>();
  for (const char* artifact :
       {"config.json", "metrics.csv", "report.json", "manifest.json"}) {
    CHECK(fs::exists(out_dir / artifact));
  }
  CHECK(fs::exists(out_dir / "checkpoint_best" / "manifest.json"));

  json manifest;
  std::ifstream(out_dir / "manifest.json") >> manifest;
  CHECK(manifest.contains("config_hash"));
  CHECK(manifest["artifacts"].size() >= 4);

  json report;
  std::ifstream(out_dir / "report.json") >> report;
  const double best = report["best_val_top1"].get<double>();

  Run evaluated = run_cli("eval --config " + path);
  REQUIRE(evaluated.exit_code == 0);
  const json eval_report = json::parse(evaluated.out);
  CHECK(eval_report["top1"].get<double>() == best);
}

TEST_CASE("eval with one shift equals eval without shifting") {
  json cfg = tiny_config("shift_run");
  cfg["sampler"]["shifts"] = 1;
  const std::string path = write_config(cfg, "shift.json");
  REQUIRE(run_cli("train --config " + path).exit_code == 0);

  Run with_shift = run_cli("eval --config " + path);
  Run without = run_cli("eval --config " + path + " --no-shift");
  REQUIRE(with_shift.exit_code == 0);
  REQUIRE(without.exit_code == 0);
  const json a = json::parse(with_shift.out);
  const json b = json::parse(without.out);
  CHECK(a["top1"] == b["top1"]);
  CHECK(a["loss"] == b["loss"]);
}

TEST_CASE("identical configs reproduce identical metric logs") {
  json cfg = tiny_config("repro_a");
  const std::string path_a = write_config(cfg, "repro_a.json");
  cfg["out"] = (work_dir() / "repro_b").string();
  const std::string path_b = write_config(cfg, "repro_b.json");

  REQUIRE(run_cli("train --config " + path_a).exit_code == 0);
  REQUIRE(run_cli("train --config " + path_b).exit_code == 0);

  auto slurp = [](const fs::path& p) {
    std::ifstream in(p);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
  };
  CHECK(slurp(work_dir() / "repro_a" / "metrics.csv") ==
        slurp(work_dir() / "repro_b" / "metrics.csv"));
}

TEST_CASE("config overrides through --set") {
  const json cfg = tiny_config("override_run");
  const std::string path = write_config(cfg, "override.json");
  Run r = run_cli("train --config " + path + " --set train.epochs=1 --set train.decay_epochs=[1]" +
                  " --out " + (work_dir() / "override_out").string());
  REQUIRE(r.exit_code == 0);
  json written;
  std::ifstream(work_dir() / "override_out" / "config.json") >> written;
  CHECK(written["train"]["epochs"].get<int>() == 1);
}

TEST_CASE("surgery-verify with a missing manifest is a file error") {
  Run r = run_cli("surgery-verify --checkpoint /nonexistent/manifest.json --variant C");
  CHECK(r.exit_code == 2);
  CHECK(r.err.find("error") != std::string::npos);
}

TEST_CASE("bench rejects nothing and emits exact counts") {
  json cfg = tiny_config("bench_run");
  cfg["variant"] = {{"kind", "A"}, {"m", 3}, {"beta", 0.5}};
  const std::string path = write_config(cfg, "bench.json");
  Run r = run_cli("bench --config " + path);
  REQUIRE(r.exit_code == 0);
  const json report = json::parse(r.out.substr(0, r.out.rfind('}') + 1));
  CHECK(report["monotone_in_beta"].get<bool>());
  const double ratio = report["flops_ratio_beta1_to_half"].get<double>();
  CHECK(ratio > 1.0);
}

TEST_CASE("keyframes requires the K = 1 protocol") {
  const json cfg = tiny_config("kf_bad");
  const std::string path = write_config(cfg, "kf_bad.json");
  Run r = run_cli("keyframes --config " + path);
  CHECK(r.exit_code == 2);
  CHECK(r.err.find("K = 1") != std::string::npos);
}
