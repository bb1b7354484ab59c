#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "pmnet/experiment.hpp"

using namespace pmnet;
namespace fs = std::filesystem;

namespace {

const char* kSmallMatch = R"({
  "experiment": "match",
  "seed": 3,
  "output_dir": "OUT",
  "replications": 4,
  "spec": {"kind": "table", "parameters": {"probabilities": [0.2, 0.4, 0.1, 0.3]}}
})";

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("pmnet_experiment_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string replace(std::string s, const std::string& from, const std::string& to) {
  s.replace(s.find(from), from.size(), to);
  return s;
}

fs::path write_config(const fs::path& dir, const std::string& text) {
  const auto path = dir / "config.json";
  std::ofstream(path) << replace(text, "OUT", (dir / "out").string());
  return path;
}

int tool(const std::string& args, const fs::path& stderr_file = "/dev/null") {
  const std::string cmd = std::string(PMNET_TOOL) + " " + args + " >/dev/null 2>" + stderr_file.string();
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

std::string field_of(const std::string& text) {
  try {
    parse_experiment(text);
  } catch (const ParseError& e) {
    return e.field();
  }
  return "<no error>";
}

}  // namespace

TEST(Fnv1a, ReferenceValues) {
  EXPECT_EQ(fnv1a64(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(fnv1a64("a"), 0xaf63dc4c8601ec8cULL);
  EXPECT_EQ(fnv1a64("foobar"), 0x85944171f73967e8ULL);
}

TEST(Config, ParsesDefaults) {
  const auto cfg = parse_experiment(kSmallMatch);
  EXPECT_EQ(cfg.experiment, ExperimentKind::match);
  EXPECT_EQ(cfg.seed, 3u);
  EXPECT_EQ(cfg.replications, 4u);
  EXPECT_EQ(cfg.instances_per_hypothesis, 15u);
  EXPECT_TRUE(cfg.train.cessation_enabled);
  EXPECT_DOUBLE_EQ(cfg.train.epsilon_c, 0.01);
  EXPECT_EQ(cfg.train.patience, 10u);
  EXPECT_DOUBLE_EQ(cfg.checks.rare_at_or_below, 0.1);
}

TEST(Config, OverweightDefaultsDisableCessation) {
  const auto cfg = parse_experiment(replace(kSmallMatch, "\"match\"", "\"overweight\""));
  EXPECT_FALSE(cfg.train.cessation_enabled);
  EXPECT_EQ(cfg.train.hard_epoch_cap, 2000u);
  EXPECT_DOUBLE_EQ(cfg.checks.tolerance, 0.03);
}

TEST(Config, TrainOverrides) {
  const auto cfg = parse_experiment(
      replace(kSmallMatch, "\"replications\": 4,",
              "\"replications\": 4, \"train\": {\"epsilon_c\": 0.02, \"patience\": 4, \"optimizer\": \"momentum\"},"));
  EXPECT_DOUBLE_EQ(cfg.train.epsilon_c, 0.02);
  EXPECT_EQ(cfg.train.patience, 4u);
  EXPECT_EQ(cfg.train.optimizer, OptimizerKind::momentum);
}

TEST(Config, FieldLevelErrors) {
  EXPECT_EQ(field_of(replace(kSmallMatch, "\"seed\": 3,", "")), "seed");
  EXPECT_EQ(field_of(replace(kSmallMatch, "\"match\"", "\"juggle\"")), "experiment");
  EXPECT_EQ(field_of(replace(kSmallMatch, "\"replications\": 4", "\"replications\": 0")), "replications");
  EXPECT_EQ(field_of(replace(kSmallMatch, "\"replications\": 4", "\"colour\": 4")), "colour");
  EXPECT_EQ(field_of(replace(kSmallMatch, "\"replications\": 4", "\"train\": {\"patiance\": 3}")),
            "train.patiance");
  EXPECT_EQ(field_of(replace(kSmallMatch, "\"replications\": 4",
                             "\"train\": {\"cessation_enabled\": false}")),
            "train");
  EXPECT_EQ(field_of(replace(kSmallMatch, "0.3]", "0.4]")), "spec");
  EXPECT_EQ(field_of("[1, 2]"), "document");
  EXPECT_EQ(field_of(replace(kSmallMatch, "\"seed\": 3", "\"seed\": -3")), "seed");
}

TEST(Config, SpecFileResolvedRelativeToConfig) {
  const auto dir = scratch("specfile");
  std::ofstream(dir / "spec.json") << R"({"kind": "table", "parameters": {"probabilities": [0.5, 0.5]}})";
  std::ofstream(dir / "c.json") << R"({"experiment": "match", "seed": 1, "output_dir": "o", "spec_file": "spec.json"})";
  const auto cfg = load_experiment(dir / "c.json");
  ASSERT_TRUE(cfg.spec);
  EXPECT_EQ(pmf(*cfg.spec), (std::vector<double>{0.5, 0.5}));
  std::ofstream(dir / "d.json") << R"({"experiment": "match", "seed": 1, "output_dir": "o", "spec_file": "none.json"})";
  EXPECT_THROW(load_experiment(dir / "d.json"), ParseError);
}

TEST(Config, ShippedConfigsParse) {
  std::size_t n = 0;
  for (const auto& entry : fs::directory_iterator(PMNET_CONFIG_DIR)) {
    EXPECT_NO_THROW(load_experiment(entry.path())) << entry.path();
    ++n;
  }
  EXPECT_GE(n, 6u);
}

TEST(Run, ArtifactsAndManifest) {
  const auto dir = scratch("artifacts");
  auto cfg = parse_experiment(replace(kSmallMatch, "OUT", (dir / "out").string()));
  const auto out = run_experiment(cfg);
  for (const char* f : {"report.csv", "summary.csv", "history.csv", "fig1.svg", "manifest.json"}) {
    EXPECT_TRUE(fs::exists(dir / "out" / f)) << f;
  }
  const auto report = read_csv(dir / "out" / "report.csv");
  EXPECT_EQ(report.header, (std::vector<std::string>{"hypothesis", "true_p", "mean_output", "sd_output"}));
  EXPECT_EQ(report.rows.size(), 4u);
  const auto manifest = nlohmann::json::parse(read_text(dir / "out" / "manifest.json"));
  EXPECT_EQ(manifest["seed"], 3u);
  EXPECT_EQ(manifest["config_hash"], "fnv1a64:" + hex64(fnv1a64(cfg.source_text)));
  EXPECT_EQ(manifest["library_version"], kVersion);
  EXPECT_EQ(manifest["files"].size(), 4u);
}

TEST(Run, CsvFormatting) {
  const auto dir = scratch("format");
  run_experiment(parse_experiment(replace(kSmallMatch, "OUT", (dir / "out").string())));
  const auto text = read_text(dir / "out" / "report.csv");
  EXPECT_EQ(text.find('\r'), std::string::npos);
  EXPECT_EQ(text.find(';'), std::string::npos);
  EXPECT_EQ(text.back(), '\n');
  EXPECT_EQ(text.substr(0, text.find('\n')), "hypothesis,true_p,mean_output,sd_output");
}

TEST(Run, PlotsRegenerateFromCsv) {
  const auto dir = scratch("plots");
  run_experiment(parse_experiment(replace(kSmallMatch, "OUT", (dir / "out").string())));
  EXPECT_EQ(read_text(dir / "out" / "fig1.svg"),
            detail::report_plot(dir / "out" / "report.csv", "Probability matching", true));
}

TEST(Run, ByteIdenticalReruns) {
  const auto a = scratch("rerun_a"), b = scratch("rerun_b");
  run_experiment(parse_experiment(replace(kSmallMatch, "OUT", (a / "out").string())));
  run_experiment(parse_experiment(replace(kSmallMatch, "OUT", (b / "out").string())));
  for (const auto& entry : fs::directory_iterator(a / "out")) {
    if (entry.path().filename() == "manifest.json") continue;  // hashes the config text
    EXPECT_EQ(read_text(entry.path()), read_text(b / "out" / entry.path().filename())) << entry.path();
  }
}

TEST(Verify, FreshRunPasses) {
  const auto dir = scratch("verify");
  const auto cfg = load_experiment(write_config(dir, replace(kSmallMatch, "\"replications\": 4", "\"replications\": 50")));
  run_experiment(cfg);
  for (const auto& c : verify_experiment(cfg)) EXPECT_TRUE(c.pass) << c.name << " " << c.detail;
}

TEST(Cli, UnknownExperimentExitsTwo) {
  const auto dir = scratch("cli_unknown");
  const auto path = write_config(dir, replace(kSmallMatch, "\"match\"", "\"juggle\""));
  const auto err = dir / "stderr.txt";
  EXPECT_EQ(tool("run " + path.string(), err), 2);
  const auto line = nlohmann::json::parse(read_text(err));
  EXPECT_EQ(line["exit_code"], 2);
  EXPECT_EQ(line["field"], "experiment");
  EXPECT_EQ(line["error"], "invalid_config");
}

TEST(Cli, MissingConfigExitsTwo) {
  EXPECT_EQ(tool("run /nonexistent/config.json"), 2);
}

TEST(Cli, RuntimeCapExitsThree) {
  const auto dir = scratch("cli_cap");
  const auto path = write_config(
      dir, replace(replace(kSmallMatch, "\"replications\": 4", "\"replications\": 50, \"runtime_cap_seconds\": 0.001"),
                   "\"match\"", "\"overweight\""));
  EXPECT_EQ(tool("run " + path.string()), 3);
}

TEST(Cli, VerifyWithoutRunExitsFour) {
  const auto dir = scratch("cli_partial");
  const auto path = write_config(dir, kSmallMatch);
  EXPECT_EQ(tool("verify " + path.string()), 4);
  ASSERT_EQ(tool("run " + path.string()), 0);
  fs::remove(dir / "out" / "report.csv");
  EXPECT_EQ(tool("verify " + path.string()), 4);
}

TEST(Cli, RunVerifyAndTamper) {
  const auto dir = scratch("cli_tamper");
  const auto path = write_config(dir, replace(kSmallMatch, "\"replications\": 4", "\"replications\": 50"));
  ASSERT_EQ(tool("run " + path.string()), 0);
  EXPECT_EQ(tool("verify " + path.string()), 0);
  std::ofstream(dir / "out" / "report.csv") << "hypothesis,true_p,mean_output,sd_output\n"
                                               "0,0.2,0.9,0\n1,0.4,0.4,0\n2,0.1,0.1,0\n3,0.3,0.3,0\n";
  EXPECT_EQ(tool("verify " + path.string()), 1);
}

TEST(Cli, OutputDirFromEnvironment) {
  const auto dir = scratch("cli_env");
  const auto path = write_config(dir, kSmallMatch);
  const auto target = dir / "elsewhere";
  ASSERT_EQ(tool(std::string("run ") + path.string() + " && true"), 0);
  const std::string cmd = std::string(kOutputDirEnv) + "=" + target.string() + " " + PMNET_TOOL + " run " +
                          path.string() + " >/dev/null";
  ASSERT_EQ(WEXITSTATUS(std::system(cmd.c_str())), 0);
  EXPECT_TRUE(fs::exists(target / "report.csv"));
  EXPECT_EQ(read_text(target / "report.csv"), read_text(dir / "out" / "report.csv"));
}

TEST(Cli, ShowSnapshot) {
  const auto dir = scratch("cli_show");
  save_snapshot(Network::minimal(1, 1, 4), (dir / "net.json").string());
  EXPECT_EQ(tool("show " + (dir / "net.json").string()), 0);
  EXPECT_EQ(tool("show " + (dir / "missing.json").string()), 1);
  EXPECT_NE(tool(""), 0);
}

TEST(Describe, Summary) {
  const auto text = describe(Network::minimal(2, 1, 4));
  EXPECT_NE(text.find("hidden 0"), std::string::npos);
  EXPECT_NE(text.find("connections: 3"), std::string::npos);
}
