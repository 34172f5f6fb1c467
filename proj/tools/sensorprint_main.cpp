#include <charconv>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "sensorprint/sensorprint.hpp"

namespace {

struct Flags {
  std::string config;
  std::string out;
  std::string format = "text";
  std::uint64_t seed = 0;
};

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw sensorprint::IoError("cannot open " + path + " for reading");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  if (in.bad()) throw sensorprint::IoError("read failed: " + path);
  return buffer.str();
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw sensorprint::IoError("cannot open " + path + " for writing");
  out << text;
  if (!out) throw sensorprint::IoError("write failed: " + path);
}

std::uint64_t parse_env_seed(const char* text) {
  std::uint64_t value = 0;
  const char* end = text;
  while (*end) ++end;
  const auto [ptr, ec] = std::from_chars(text, end, value);
  if (ec != std::errc() || ptr != end)
    throw std::invalid_argument(
        "SENSORPRINT_SEED must be a non-negative integer");
  return value;
}

int run_cli(int argc, char** argv) {
  CLI::App app{"Sensor fingerprint toolkit: simulated device populations, "
               "audio and accelerometer fingerprints, classification, and "
               "identification metrics."};
  app.require_subcommand(1);

  // Which config kinds each subcommand accepts; empty set means any.
  const std::map<std::string, std::pair<const char*, std::set<std::string>>>
      subcommands = {
          {"simulate",
           {"Generate a device population and submissions, emitted as JSONL",
            {"simulate"}}},
          {"audio-fp",
           {"Run an audio fingerprint experiment (sweep, MLE, or stealth)",
            {"audio-l2", "audio-mle", "audio-stealth"}}},
          {"accel-fp",
           {"Run the accelerometer recognition experiment",
            {"accel-recognition"}}},
          {"classify",
           {"Cross-validated classification of stored audio fingerprints",
            {"classify"}}},
          {"entropy",
           {"Grid entropy of stored accelerometer fingerprints", {"entropy"}}},
          {"sweep",
           {"Recognition rate across sensitivity weights", {"accel-sweep"}}},
          {"report", {"Run any configured experiment and emit its report", {}}},
      };

  Flags flags;
  std::map<const CLI::App*, CLI::Option*> seed_opts;
  for (const auto& [name, spec] : subcommands) {
    CLI::App* sub = app.add_subcommand(name, spec.first);
    sub->add_option("--config", flags.config, "JSON experiment config")
        ->required();
    seed_opts[sub] = sub->add_option(
        "--seed", flags.seed, "Seed override (beats config and environment)");
    sub->add_option("--out", flags.out, "Output path (default: stdout)");
    sub->add_option("--format", flags.format, "Report format")
        ->check(CLI::IsMember({"text", "csv"}));
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    const CLI::App* sub = app.get_subcommands().front();
    const auto& allowed_kinds = subcommands.at(sub->get_name()).second;

    const sensorprint::ExperimentConfig cfg =
        sensorprint::parse_experiment_config(read_text_file(flags.config));
    if (!allowed_kinds.empty() &&
        allowed_kinds.find(cfg.kind) == allowed_kinds.end()) {
      std::string expected;
      for (const auto& k : allowed_kinds)
        expected += (expected.empty() ? "" : ", ") + k;
      throw std::invalid_argument("subcommand '" + sub->get_name() +
                                  "' expects config kind " + expected +
                                  "; got '" + cfg.kind + "'");
    }

    std::uint64_t seed = 0;
    if (seed_opts.at(sub)->count() > 0)
      seed = flags.seed;
    else if (cfg.seed)
      seed = *cfg.seed;
    else if (const char* env = std::getenv("SENSORPRINT_SEED"))
      seed = parse_env_seed(env);

    const sensorprint::ExperimentResult result =
        sensorprint::run_experiment(cfg, seed);

    // simulate emits the dataset itself; every other subcommand a report.
    const std::string document =
        sub->get_name() == "simulate"
            ? sensorprint::serialize_dataset(result.dataset)
            : sensorprint::emit_report(result, flags.format);
    if (flags.out.empty())
      std::cout << document;
    else
      write_text_file(flags.out, document);
    return 0;
  } catch (const sensorprint::IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace

int main(int argc, char** argv) { return run_cli(argc, argv); }
