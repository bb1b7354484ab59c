// pmnet: run, verify and inspect probability-matching experiments.

#include <cstdio>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "pmnet/experiment.hpp"
#include "pmnet/snapshot.hpp"

namespace {

enum Exit { ok = 0, failed = 1, invalid_config = 2, runtime_cap = 3, missing_artifacts = 4 };

int report_error(int code, const std::string& kind, const std::string& message,
                 const std::string& field = {}) {
  nlohmann::json j = {{"error", kind}, {"message", message}, {"exit_code", code}};
  if (!field.empty()) j["field"] = field;
  std::cerr << j.dump() << "\n";
  return code;
}

template <class F>
int guarded(F&& body) {
  try {
    return body();
  } catch (const pmnet::ParseError& e) {
    return report_error(invalid_config, "invalid_config", e.what(), e.field());
  } catch (const pmnet::RuntimeCapExceeded& e) {
    return report_error(runtime_cap, "runtime_cap", e.what());
  } catch (const pmnet::MissingArtifact& e) {
    return report_error(missing_artifacts, "missing_artifact", e.what(), e.path().string());
  } catch (const pmnet::InvalidArgument& e) {
    return report_error(invalid_config, "invalid_config", e.what());
  } catch (const std::exception& e) {
    return report_error(failed, "error", e.what());
  }
}

int cmd_run(const std::string& path) {
  return guarded([&] {
    const auto cfg = pmnet::load_experiment(path);
    const auto out = pmnet::run_experiment(cfg);
    std::cout << "wrote " << out.files.size() + 1 << " files to " << out.dir.string() << "\n";
    return ok;
  });
}

int cmd_verify(const std::string& path) {
  return guarded([&] {
    const auto cfg = pmnet::load_experiment(path);
    const auto checks = pmnet::verify_experiment(cfg);
    std::size_t width = 5;
    for (const auto& c : checks) width = std::max(width, c.name.size());
    bool all = true;
    std::printf("%-*s  %-6s  %s\n", static_cast<int>(width), "check", "result", "detail");
    for (const auto& c : checks) {
      std::printf("%-*s  %-6s  %s\n", static_cast<int>(width), c.name.c_str(),
                  c.informational ? "INFO" : c.pass ? "PASS" : "FAIL", c.detail.c_str());
      all = all && (c.pass || c.informational);
    }
    return all ? ok : failed;
  });
}

int cmd_show(const std::string& path) {
  return guarded([&] {
    std::cout << pmnet::describe(pmnet::load_snapshot(path));
    return ok;
  });
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cascade-correlation probability matching experiments"};
  app.set_version_flag("--version", pmnet::kVersion);
  app.require_subcommand(1);

  std::string config, snapshot;
  auto* run = app.add_subcommand("run", "Run an experiment and write its artifacts");
  run->add_option("config", config, "Experiment config (JSON)")->required();
  auto* verify = app.add_subcommand("verify", "Check a finished run against its thresholds");
  verify->add_option("config", config, "Experiment config (JSON)")->required();
  auto* show = app.add_subcommand("show", "Print a network snapshot summary");
  show->add_option("snapshot", snapshot, "Snapshot file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }
  if (*run) return cmd_run(config);
  if (*verify) return cmd_verify(config);
  return cmd_show(snapshot);
}
