#pragma once

// Stage driver behind the command-line tool and the C API. Every stage
// reads and writes plain files in the output directory.

#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "regimes/config.hpp"

namespace regimes {

using LogFn = std::function<void(std::string_view)>;

// Bundle artifacts, in manifest order.
inline constexpr const char* kFeaturesFile = "features.json";
inline constexpr const char* kSpreadFile = "spread.json";
inline constexpr const char* kSomGridFile = "som_grid.json";
inline constexpr const char* kClassesFile = "macro_classes.json";
inline constexpr const char* kMsParamsFile = "ms_params.json";
inline constexpr const char* kProbabilitiesFile = "regime_probabilities.json";
inline constexpr const char* kSegmentationsFile = "segmentations.json";
inline constexpr const char* kManifestFile = "manifest.json";

inline constexpr const char* kClassTableFile = "class_table.csv";
inline constexpr const char* kClassMeansFile = "class_means.csv";
inline constexpr const char* kSeriesFile = "fig3_series.csv";

struct ArtifactRecord {
  std::string name;
  std::string file;
  std::string sha256;
};

struct AnalysisBundle {
  std::string out_dir;
  std::vector<ArtifactRecord> artifacts;
  std::string config_hash;
};

/// Output directory: the configured one, else $REGIMES_OUTPUT_DIR. Usage
/// error when neither is set.
std::string resolve_out_dir(const RunConfig& config);

/// Hex SHA-256 of a byte string.
std::string sha256_hex(std::string_view bytes);

/// Digest of every analysis parameter plus the input bytes. Paths and
/// simulation settings do not enter it.
std::string config_hash(const RunConfig& config, std::string_view input_bytes);

/// Features, spread and imputation report. Returns the number of weeks.
std::size_t cmd_ingest(const RunConfig& config, const LogFn& log = {});

/// Ingestion followed by the enabled stages; always writes the manifest.
/// A failing stage leaves earlier artifacts in place, marks the manifest
/// "failed" and rethrows with the stage name prefixed.
AnalysisBundle cmd_analyze(const RunConfig& config, const LogFn& log = {});

/// Class table, per-class means and the aligned series file from a full
/// bundle.
void cmd_report(const RunConfig& config, const LogFn& log = {});

/// Synthetic quotation table plus a ground-truth sidecar
/// (<table stem>.truth.json). The spread follows a two-regime switching
/// process around a level that shifts at T/3 and 2T/3.
void cmd_simulate(const RunConfig& config, const LogFn& log = {});

}  // namespace regimes
