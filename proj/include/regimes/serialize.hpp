#pragma once

// Structured-text (JSON) forms of every persisted artifact.

#include <string>

#include "json.hpp"
#include "regimes/changepoint.hpp"
#include "regimes/data.hpp"
#include "regimes/markov_switching.hpp"
#include "regimes/som.hpp"

namespace regimes {

using Json = nlohmann::ordered_json;

Json to_json(const ImputationReport& report);
Json to_json(const FeatureSet& features);
Json to_json(const SpreadSeries& spread);
Json to_json(const SomGrid& grid);
Json to_json(const MacroClassification& classes);
Json to_json(const MsSpec& spec);
Json to_json(const MsParams& params);
Json to_json(const RegimeProbabilities& probs);
Json to_json(const Segmentation& seg, const std::vector<std::string>& labels = {});
Json to_json(const SelectionDiagnostics& diag);

SpreadSeries spread_from_json(const Json& j);
SomGrid som_grid_from_json(const Json& j);
MacroClassification classes_from_json(const Json& j);
MsSpec ms_spec_from_json(const Json& j);
MsParams ms_params_from_json(const Json& j);
RegimeProbabilities probabilities_from_json(const Json& j);
Segmentation segmentation_from_json(const Json& j);

Json read_json_file(const std::string& path);
/// Pretty-printed, newline-terminated.
void write_json_file(const std::string& path, const Json& j);

}  // namespace regimes
