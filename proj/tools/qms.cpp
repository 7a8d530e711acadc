// qms: command-line driver for relaxation, sweep and scan runs.

#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "qms/run.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Qubit-field lattice simulations"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(QMS_VERSION));

  std::string config;
  std::string out_dir;
  std::string format;
  std::uint64_t seed = 0;
  bool quiet = false;

  struct Command {
    CLI::App* app;
    std::optional<qms::ProtocolKind> kind;
  };
  std::vector<Command> commands;
  auto add_run = [&](const char* name, const char* help, qms::ProtocolKind kind) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("--config", config, "Config file")->required();
    sub->add_option("--out", out_dir, "Output directory (overrides [output] dir)");
    sub->add_option("--format", format, "Output format")->check(CLI::IsMember({"csv", "json"}));
    sub->add_option("--seed", seed, "RNG seed (overrides [model] seed)");
    sub->add_flag("--quiet", quiet, "Suppress informational messages");
    commands.push_back({sub, kind});
  };
  add_run("relax", "Relax at a fixed field", qms::ProtocolKind::relax);
  add_run("sweep", "Virgin ramp plus field cycles", qms::ProtocolKind::sweep);
  add_run("scan", "Critical-coupling bisection over fields", qms::ProtocolKind::scan);
  auto* check = app.add_subcommand("validate-config", "Parse and validate a config file");
  check->add_option("--config", config, "Config file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return qms::kExitConfig;
  }

  if (check->parsed()) return qms::validate_file(config, std::cout, std::cerr);

  qms::RunOverrides ov;
  ov.quiet = quiet;
  for (const auto& c : commands) {
    if (!c.app->parsed()) continue;
    if (c.app->count("--seed")) ov.seed = seed;
    if (c.app->count("--out")) ov.out_dir = out_dir;
    if (!format.empty()) ov.format = format == "csv" ? qms::Format::csv : qms::Format::json;
    return qms::run_file(config, c.kind, ov, std::cout, std::cerr);
  }
  return qms::kExitConfig;
}
