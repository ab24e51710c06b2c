#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tessera/assembly.hpp"
#include "tessera/metrics.hpp"
#include "tessera/segmentation.hpp"
#include "tessera/toy_model.hpp"

namespace tessera {

// How to split the input into patches.
struct SegmentationSpec {
    SegmentationSource mode = SegmentationSource::random_fps;
    double lambda_rand = 1.0;
    std::uint64_t seed = 1;
    Axis up_axis = Axis::y;
    std::vector<int> labels;       // external_labels mode, one per face
    int patch_count_override = 0;  // > 0 replaces the face-count formula (random_fps only)
};

Segmentation make_segmentation(const Mesh& mesh, const SegmentationSpec& spec);

struct PipelineOptions {
    SegmentationSpec segmentation;
    AssembleOptions assemble;
    EvalOptions eval;
    bool ground_truth_tokens = true;  // model-free round-trip mode
    std::string checkpoint;           // required when ground_truth_tokens is false
    int point_count = 1024;           // samples per condition cloud
    double temperature = 0.5;
    std::uint64_t generate_seed = 1;
};

struct PipelineResult {
    Segmentation segmentation;
    AssemblyResult assembly;
    MetricsReport metrics;
    bool evaluated = false;  // false when assembly produced an empty mesh
};

// Provider that samples token sequences from a trained model. Each patch gets
// a global cloud of the source mesh (sampled once up front), a local cloud of
// the patch's own faces, and the boundary tokens the assembler selected.
// Generation runs until TERM or the window budget. The model and source must
// outlive the returned provider.
TokenProvider model_provider(const ToyModelF& model, const Mesh& source, int point_count,
                             double temperature, std::uint64_t seed);

// segment -> assemble (ground-truth or model tokens) -> evaluate vs input.
PipelineResult run_pipeline(const Mesh& input, const PipelineOptions& opts);

}  // namespace tessera
