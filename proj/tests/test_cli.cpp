#include <catch2/catch_amalgamated.hpp>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "sensorprint/dataset.hpp"

using Catch::Matchers::ContainsSubstring;

namespace {

struct CliResult {
  int code = -1;
  std::string out;
  std::string err;
};

std::filesystem::path scratch(const char* name) {
  return std::filesystem::temp_directory_path() / name;
}

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void spit(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

// Runs the installed binary through the shell; env assignments can be
// prefixed (e.g. "SENSORPRINT_SEED=9").
CliResult run_cli(const std::string& args, const std::string& env = "") {
  const auto out_path = scratch("cli_stdout.txt");
  const auto err_path = scratch("cli_stderr.txt");
  std::string cmd = env.empty() ? "" : env + " ";
  cmd += std::string(SENSORPRINT_CLI_PATH) + " " + args;
  cmd += " > " + out_path.string() + " 2> " + err_path.string();
  const int status = std::system(cmd.c_str());
  CliResult r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(out_path);
  r.err = slurp(err_path);
  return r;
}

}  // namespace

TEST_CASE("help and argument errors") {
  CHECK(run_cli("--help").code == 0);
  CHECK_THAT(run_cli("--help").out, ContainsSubstring("simulate"));
  CHECK(run_cli("").code == 1);           // a subcommand is required
  CHECK(run_cli("simulate").code == 1);   // --config is required
  CHECK(run_cli("bogus-subcommand --config x").code == 1);
}

TEST_CASE("config file problems map to distinct exit codes") {
  SECTION("unreadable config path") {
    const auto r = run_cli("simulate --config /nonexistent/cfg.json");
    CHECK(r.code == 2);
    CHECK_THAT(r.err, ContainsSubstring("cannot open"));
  }
  SECTION("malformed config JSON") {
    const auto cfg = scratch("cli_bad.json");
    spit(cfg, "not json at all");
    const auto r = run_cli("simulate --config " + cfg.string());
    CHECK(r.code == 1);
    CHECK_THAT(r.err, ContainsSubstring("config is not valid JSON"));
  }
  SECTION("unknown config key") {
    const auto cfg = scratch("cli_unknown_key.json");
    spit(cfg, R"({"kind":"simulate","devcies":4})");
    const auto r = run_cli("simulate --config " + cfg.string());
    CHECK(r.code == 1);
    CHECK_THAT(r.err, ContainsSubstring("unknown key 'devcies'"));
  }
  SECTION("kind and subcommand must agree") {
    const auto cfg = scratch("cli_kind_mismatch.json");
    spit(cfg, R"({"kind":"simulate","devices":4})");
    const auto r = run_cli("sweep --config " + cfg.string());
    CHECK(r.code == 1);
    CHECK_THAT(r.err, ContainsSubstring("expects config kind"));
  }
  SECTION("format must be text or csv") {
    const auto cfg = scratch("cli_fmt.json");
    spit(cfg, R"({"kind":"simulate","devices":2})");
    CHECK(run_cli("simulate --config " + cfg.string() + " --format yaml").code ==
          1);
  }
}

TEST_CASE("simulate emits a loadable, reproducible dataset") {
  const auto cfg = scratch("cli_sim.json");
  spit(cfg, R"({"kind":"simulate","devices":4,"seed":9})");
  const auto out1 = scratch("cli_sim1.jsonl");
  const auto out2 = scratch("cli_sim2.jsonl");

  CHECK(run_cli("simulate --config " + cfg.string() + " --out " + out1.string())
            .code == 0);
  CHECK(run_cli("simulate --config " + cfg.string() + " --out " + out2.string())
            .code == 0);
  CHECK(slurp(out1) == slurp(out2));

  const sensorprint::Dataset ds = sensorprint::load_dataset(out1.string());
  CHECK(ds.devices.size() == 4);
  CHECK(ds.submissions.size() == 8);  // two rest captures per device
  CHECK_NOTHROW(ds.validate());
}

TEST_CASE("seed precedence: flag, then config, then environment") {
  const auto cfg = scratch("cli_seedless.json");
  spit(cfg, R"({"kind":"simulate","devices":3})");
  const std::string base = "simulate --config " + cfg.string() + " --out ";

  const auto by_flag = scratch("cli_by_flag.jsonl");
  const auto by_env = scratch("cli_by_env.jsonl");
  const auto flag_beats_env = scratch("cli_flag_beats_env.jsonl");
  const auto default_seed = scratch("cli_default.jsonl");

  REQUIRE(run_cli(base + by_flag.string() + " --seed 5").code == 0);
  REQUIRE(run_cli(base + by_env.string(), "SENSORPRINT_SEED=5").code == 0);
  REQUIRE(run_cli(base + flag_beats_env.string() + " --seed 5",
                  "SENSORPRINT_SEED=7")
              .code == 0);
  REQUIRE(run_cli(base + default_seed.string()).code == 0);

  CHECK(slurp(by_flag) == slurp(by_env));
  CHECK(slurp(by_flag) == slurp(flag_beats_env));
  CHECK(slurp(by_flag) != slurp(default_seed));  // default seed is 0

  SECTION("config seed beats the environment") {
    const auto seeded_cfg = scratch("cli_seeded.json");
    spit(seeded_cfg, R"({"kind":"simulate","devices":3,"seed":5})");
    const auto by_cfg = scratch("cli_by_cfg.jsonl");
    REQUIRE(run_cli("simulate --config " + seeded_cfg.string() + " --out " +
                        by_cfg.string(),
                    "SENSORPRINT_SEED=7")
                .code == 0);
    CHECK(slurp(by_cfg) == slurp(by_flag));
  }
  SECTION("garbage environment seed is rejected when consulted") {
    const auto r = run_cli(base + scratch("cli_never.jsonl").string(),
                           "SENSORPRINT_SEED=abc");
    CHECK(r.code == 1);
    CHECK_THAT(r.err, ContainsSubstring("SENSORPRINT_SEED"));
  }
}

TEST_CASE("experiment subcommands emit reports in both formats") {
  const auto cfg = scratch("cli_sweep.json");
  spit(cfg, R"({"kind":"accel-sweep","devices":5,"seed":2,"m_sz_sweep":[1,300]})");

  const auto r_text = run_cli("sweep --config " + cfg.string());
  CHECK(r_text.code == 0);
  CHECK_THAT(r_text.out, ContainsSubstring("experiment: accel-sweep"));
  CHECK_THAT(r_text.out, ContainsSubstring("seed: 2"));

  const auto r_csv = run_cli("sweep --config " + cfg.string() + " --format csv");
  CHECK(r_csv.code == 0);
  CHECK_THAT(r_csv.out,
             ContainsSubstring("m_sz,evaluated,correct,recognition_rate\n"));

  // The report subcommand accepts any experiment kind.
  const auto r_any = run_cli("report --config " + cfg.string());
  CHECK(r_any.code == 0);
  CHECK_THAT(r_any.out, ContainsSubstring("experiment: accel-sweep"));
}

TEST_CASE("simulate output feeds the entropy subcommand") {
  const auto sim_cfg = scratch("cli_pipe_sim.json");
  spit(sim_cfg, R"({"kind":"simulate","devices":40,"seed":12,
                    "population":{"noise":{"accel_sigma":0.1}},
                    "rest":{"magnitude_tol":2.0,"variance_tol":0.1}})");
  const auto data = scratch("cli_pipe_data.jsonl");
  REQUIRE(run_cli("simulate --config " + sim_cfg.string() + " --out " +
                  data.string())
              .code == 0);

  const auto ent_cfg = scratch("cli_pipe_entropy.json");
  spit(ent_cfg,
       std::string(R"({"kind":"entropy","dataset":")") + data.string() + "\"}");
  const auto r = run_cli("entropy --config " + ent_cfg.string());
  CHECK(r.code == 0);
  CHECK_THAT(r.out, ContainsSubstring("entropy_bits"));
  CHECK_THAT(r.out, ContainsSubstring("points: 80"));
}
