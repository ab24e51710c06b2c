#pragma once

#include <string>

#include <json.hpp>

#include "tessera/assembly.hpp"
#include "tessera/metrics.hpp"
#include "tessera/preprocess.hpp"
#include "tessera/quantizer.hpp"
#include "tessera/segmentation.hpp"
#include "tessera/toy_model.hpp"

// JSON manifests. All writers use ordered_json and fixed key order so that
// identical runs produce byte-identical files.
namespace tessera {

using Json = nlohmann::ordered_json;

Json frame_to_json(const PatchFrame& frame);
PatchFrame frame_from_json(const Json& j);

Json segmentation_to_json(const Segmentation& seg);
Segmentation segmentation_from_json(const Json& j);

Json metrics_to_json(const MetricsReport& report);

Json assembly_report_to_json(const AssemblyState& state, const Mesh& final_mesh);

Json filter_report_to_json(const FilterReport& report);

Json model_config_to_json(const ModelConfig& config);
ModelConfig model_config_from_json(const Json& j);

void write_json_file(const std::string& path, const Json& j);
Json read_json_file(const std::string& path);

}  // namespace tessera
