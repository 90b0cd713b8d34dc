#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "regimes/changepoint.hpp"
#include "regimes/data.hpp"
#include "regimes/markov_switching.hpp"
#include "regimes/som.hpp"

namespace regimes {

/// Every pipeline parameter. Defaults give a 5x5 SOM cut into 6 classes, a
/// two-regime switching model (network regime + linear regime on one lag)
/// and change-point detection in mean and in mean+variance.
struct RunConfig {
  std::string input;
  std::string out_dir;

  bool run_som = true;
  bool run_ms = true;
  bool run_cpd = true;

  ImputationPolicy imputation;
  FeatureOptions features;
  SpreadAggregation aggregation = SpreadAggregation::weekly_mean;

  std::size_t som_rows = 5;
  std::size_t som_cols = 5;
  SomSchedule som_schedule;
  std::uint64_t som_seed = 1;
  std::size_t som_classes = 6;

  MsSpec ms_spec = MsSpec::mlp_linear(1, 3);
  EmOptions em;
  double regime_threshold = 0.5;

  std::vector<ChangeMode> cpd_modes{ChangeMode::mean_only, ChangeMode::mean_and_variance};
  std::size_t cpd_k_max = 12;
  std::size_t cpd_min_seg_mean = 1;
  std::size_t cpd_min_seg_mv = 2;
  SelectionOptions cpd_selection;

  std::size_t sim_weeks = 500;
  std::uint64_t sim_seed = 1;
  int sim_start_year = 1821;
  double sim_missing = 0.0;
  std::string sim_output;

  /// Sets one parameter from its textual value. Throws a usage error on an
  /// unknown key or malformed value.
  void set(std::string_view key, std::string_view value);
  std::string get(std::string_view key) const;

  /// "key = value" lines; '#' starts a comment.
  void load_file(const std::string& path);

  /// All keys in registry order, one "key=value" per line.
  std::string canonical() const;
};

struct ConfigKey {
  std::string_view name;
  std::string_view help;
};

const std::vector<ConfigKey>& config_keys();

/// Environment variable consulted for the output directory.
inline constexpr const char* kOutputDirEnv = "REGIMES_OUTPUT_DIR";

}  // namespace regimes
