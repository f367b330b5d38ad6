#include "blowup/io.hpp"
#include "blowup/pipeline.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <iostream>
#include <map>
#include <optional>

using namespace blowup;

int main(int argc, char** argv) {
  CLI::App app{"blow-up construction toolkit"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  bool dump_config = false;
  app.add_option("--config", config_path, "JSON config file (flags override it)");
  app.add_flag("--dump-config", dump_config, "print the effective config and exit");

  // one flag per config field, --field-name; typed through the JSON reader
  const io::RunConfig defaults;
  const nlohmann::json typed = nlohmann::json::parse(io::config_json(defaults));
  std::map<std::string, std::optional<std::string>> overrides;
  for (const std::string& key : io::config_keys()) {
    std::string flag = key;
    std::replace(flag.begin(), flag.end(), '_', '-');
    overrides[key];
    app.add_option("--" + flag, overrides[key], "config field " + key);
  }

  const std::vector<std::pair<std::string, std::function<pipeline::CommandResult(const io::RunConfig&)>>> cmds = {
      {"verify", pipeline::cmd_verify},
      {"moments", pipeline::cmd_moments},
      {"solve-vq", pipeline::cmd_solve_vq},
      {"phi", pipeline::cmd_phi},
      {"reduce", pipeline::cmd_reduce},
      {"family", pipeline::cmd_family},
      {"residual-slope", pipeline::cmd_residual_slope},
      {"pipeline", pipeline::cmd_pipeline},
  };
  std::map<std::string, CLI::App*> subs;
  for (const auto& [name, fn] : cmds) subs[name] = app.add_subcommand(name);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : pipeline::kValidationFailure;
  }

  io::RunConfig cfg;
  pipeline::CommandResult result = pipeline::guarded([&] {
    if (!config_path.empty()) cfg = io::read_config_file(config_path, cfg);
    nlohmann::json patch = nlohmann::json::object();
    for (const auto& [key, value] : overrides) {
      if (!value) continue;
      if (typed[key].is_string()) {
        patch[key] = *value;
      } else {
        try {
          patch[key] = nlohmann::json::parse(*value);
        } catch (const nlohmann::json::parse_error&) {
          throw ValidationError("flag --" + key + ": cannot parse '" + *value + "'");
        }
      }
    }
    cfg = io::parse_config_json(patch.dump(), cfg, "<flags>");
    if (dump_config) {
      std::cout << io::config_json(cfg);
      return pipeline::CommandResult{};
    }
    for (const auto& [name, fn] : cmds)
      if (subs[name]->parsed()) return fn(cfg);
    return pipeline::CommandResult{};
  });
  for (const auto& m : result.messages) std::cout << m << "\n";
  for (const auto& f : result.files) std::cout << "wrote " << f << "\n";
  return result.exit_code;
}
