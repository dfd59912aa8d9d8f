#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "lptsim/cli.hpp"

using namespace lptsim;
namespace fs = std::filesystem;

namespace {

struct CliResult {
  int code = 0;
  std::string out;
  std::string err;
};

CliResult cli(std::vector<std::string> args) {
  args.insert(args.begin(), "lptsim");
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("lptsim_cli_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

// Small configuration so the CLI tests stay fast.
fs::path small_config(const fs::path& dir) {
  const fs::path p = dir / "small.json";
  std::ofstream(p) << R"({"total_gpus": 8, "bank": {"universe": 400, "size": 300, "capacity": 400, "clusters": 10}})";
  return p;
}

}  // namespace

TEST_CASE("usage errors exit with 2") {
  CHECK(cli({}).code == kExitUsage);
  CHECK(cli({"fly"}).code == kExitUsage);
  CHECK(cli({"simulate"}).code == kExitUsage);
  CHECK(cli({"simulate", "--trace", "x", "--bogus"}).code == kExitUsage);
  CHECK(cli({"simulate", "--trace", "x", "--policy", "fifo"}).code == kExitUsage);
  CHECK(cli({"gen-trace", "--load", "extreme"}).code == kExitUsage);
  CHECK(cli({"--help"}).code == kExitOk);
}

TEST_CASE("input errors exit with 3 and name the problem") {
  const fs::path dir = scratch("input");
  const CliResult missing = cli({"simulate", "--trace", (dir / "nope.csv").string(), "--out", dir.string()});
  CHECK(missing.code == kExitInput);
  CHECK(missing.err.find("missing-file") != std::string::npos);

  std::ofstream(dir / "bad.csv") << "# lptsim-trace seed=1 S=1 label=x horizon_s=60\n0,gpt2-base,10,1,1\n1,gpt2-base\n";
  const CliResult bad = cli({"simulate", "--trace", (dir / "bad.csv").string(), "--out", dir.string()});
  CHECK(bad.code == kExitInput);
  CHECK(bad.err.find(":3:") != std::string::npos);

  std::ofstream(dir / "cfg.json") << R"({"tick_interval": -1})";
  CHECK(cli({"gen-trace", "--config", (dir / "cfg.json").string(), "--out", dir.string()}).code == kExitInput);

  std::ofstream(dir / "ok.csv") << "# lptsim-trace seed=1 S=1 label=x horizon_s=60\n0,gpt2-base,10,1,1\n";
  const CliResult knob =
      cli({"ablate", "--trace", (dir / "ok.csv").string(), "--knob", "turbo", "--out", dir.string()});
  CHECK(knob.code == kExitInput);
  CHECK(knob.err.find("unknown-knob") != std::string::npos);
}

TEST_CASE("every command reruns byte for byte") {
  const fs::path a = scratch("det_a"), b = scratch("det_b");
  for (const fs::path& dir : {a, b}) {
    const std::string cfg = small_config(dir).string();
    const std::string out = dir.string();
    REQUIRE(cli({"gen-trace", "--config", cfg, "--load", "low", "--seed", "4", "--out", out}).code == kExitOk);
    const std::string trace = (dir / "trace.csv").string();
    REQUIRE(cli({"bank-build", "--config", cfg, "--model", "gpt2-large", "--out", out}).code == kExitOk);
    REQUIRE(cli({"bank-query", "--config", cfg, "--bank", (dir / "bank.jsonl").string(), "--model", "gpt2-large",
                 "--task", "5", "--out", out})
                .code == kExitOk);
    REQUIRE(cli({"simulate", "--config", cfg, "--trace", trace, "--policy", "infless_like", "--out",
                 (dir / "sim").string()})
                .code == kExitOk);
    REQUIRE(cli({"compare", "--config", cfg, "--trace", trace, "--out", (dir / "cmp").string()}).code == kExitOk);
    REQUIRE(cli({"ablate", "--config", cfg, "--trace", trace, "--knob", "no-delay", "--out",
                 (dir / "abl").string()})
                .code == kExitOk);
  }
  std::size_t files = 0;
  for (const auto& entry : fs::recursive_directory_iterator(a)) {
    if (!entry.is_regular_file()) continue;
    const fs::path rel = fs::relative(entry.path(), a);
    CHECK_MESSAGE(slurp(entry.path()) == slurp(b / rel), rel.string());
    ++files;
  }
  CHECK(files >= 20);

  const std::string trace = slurp(a / "trace.csv");
  CHECK(trace.rfind("# lptsim-trace seed=4 ", 0) == 0);
  CHECK(trace.find("config_hash=") != std::string::npos);
  CHECK(slurp(a / "cmp" / "compare.csv").find("prompttuner,") != std::string::npos);
  CHECK(slurp(a / "sim" / "report.json").find("\"config\"") != std::string::npos);
  CHECK(slurp(a / "bank.jsonl").find("\"config_hash\"") != std::string::npos);
}

TEST_CASE("compare on an empty trace gives zero violation and baseline costs") {
  const fs::path dir = scratch("empty");
  std::ofstream(dir / "empty.csv") << "# lptsim-trace seed=3 S=1 label=empty horizon_s=60\n";
  REQUIRE(cli({"compare", "--trace", (dir / "empty.csv").string(), "--seed", "9", "--out", dir.string()}).code ==
          kExitOk);
  const std::string csv = slurp(dir / "compare.csv");
  CHECK(csv.rfind("# seed=9 config_hash=", 0) == 0);
  CHECK(csv.find("prompttuner,0,0\n") != std::string::npos);
  CHECK(csv.find("infless_like,0,0\n") != std::string::npos);
  CHECK(csv.find("elasticflow_like,0,") != std::string::npos);
}

TEST_CASE("bank-query with one cluster matches the full scan") {
  const fs::path dir = scratch("k1");
  const std::string cfg = small_config(dir).string();
  REQUIRE(cli({"bank-build", "--config", cfg, "--knob", "clusters=1", "--out", dir.string()}).code == kExitOk);
  REQUIRE(cli({"bank-query", "--config", cfg, "--knob", "clusters=1", "--bank", (dir / "bank.jsonl").string(),
               "--task", "2", "--out", dir.string()})
              .code == kExitOk);
  const std::string q = slurp(dir / "query.json");
  auto field = [&](const std::string& key) {
    const auto at = q.find("\"" + key + "\": ");
    return q.substr(at + key.size() + 4, q.find_first_of(",\n", at) - at - key.size() - 4);
  };
  CHECK(field("best_id") == field("full_scan_id"));
  CHECK(field("evals_performed") == "301");
}

TEST_CASE("out directory defaults to the environment variable") {
  const fs::path dir = scratch("env");
  setenv("LPTSIM_OUT_DIR", dir.string().c_str(), 1);
  const CliResult r = cli({"gen-trace", "--config", small_config(dir).string(), "--load", "low"});
  unsetenv("LPTSIM_OUT_DIR");
  CHECK(r.code == kExitOk);
  CHECK(fs::exists(dir / "trace.csv"));
}
