// Command-line front end: every RunConfig key is a --dashed-flag.

#include <algorithm>
#include <cstdio>
#include <map>
#include <string>

#include "CLI11.hpp"
#include "regimes/regimes.h"

namespace {

std::string dashed(std::string name) {
  std::replace(name.begin(), name.end(), '_', '-');
  return name;
}

void print_line(const char* line, void*) { std::printf("%s\n", line); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Regime detection in twice-weekly gold-silver quotations"};
  app.set_version_flag("--version", regimes_version());
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_file;
  app.add_option("--config", config_file, "key = value file; flags override its entries");

  std::map<std::string, std::string> flags;
  for (size_t i = 0; i < regimes_config_key_count(); ++i) {
    const std::string key = regimes_config_key_name(i);
    app.add_option("--" + dashed(key), flags[key], regimes_config_key_help(i));
  }

  using Command = regimes_status (*)(const regimes_config*, regimes_log_fn, void*);
  Command command = nullptr;
  const std::pair<const char*, const char*> subcommands[] = {
      {"ingest", "parse, impute and write features and spread"},
      {"analyze", "ingest, then SOM, switching model and change-points"},
      {"report", "class table, class means and aligned series from an analysis"},
      {"simulate", "write a synthetic quotation table and its ground truth"},
  };
  const Command functions[] = {regimes_cmd_ingest, regimes_cmd_analyze, regimes_cmd_report,
                               regimes_cmd_simulate};
  for (size_t i = 0; i < 4; ++i) {
    app.add_subcommand(subcommands[i].first, subcommands[i].second)->callback([&command, &functions, i] {
      command = functions[i];
    });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return REGIMES_ERR_USAGE;
  }

  regimes_config* cfg = regimes_config_create();
  if (cfg == nullptr) return REGIMES_ERR_NUMERICAL;
  regimes_status status = REGIMES_OK;
  if (!config_file.empty()) status = regimes_config_load(cfg, config_file.c_str());
  for (size_t i = 0; i < regimes_config_key_count() && status == REGIMES_OK; ++i) {
    const std::string key = regimes_config_key_name(i);
    const auto opt = app.get_option("--" + dashed(key));
    if (opt->count() > 0) status = regimes_config_set(cfg, key.c_str(), flags[key].c_str());
  }
  if (status == REGIMES_OK) status = command(cfg, print_line, nullptr);
  if (status != REGIMES_OK) std::fprintf(stderr, "error: %s\n", regimes_last_error());
  regimes_config_destroy(cfg);
  return status;
}
