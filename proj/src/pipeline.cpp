#include "tessera/pipeline.hpp"

#include <algorithm>
#include <memory>
#include <optional>
#include <utility>

#include "tessera/error.hpp"
#include "tessera/rng.hpp"
#include "tessera/sampling.hpp"

namespace tessera {

Segmentation make_segmentation(const Mesh& mesh, const SegmentationSpec& spec) {
    switch (spec.mode) {
        case SegmentationSource::random_fps: {
            if (spec.patch_count_override > 0) {
                if (mesh.faces.empty()) throw PreconditionError("make_segmentation: empty mesh");
                const int k = std::min(spec.patch_count_override, mesh.vertex_count());
                const std::vector<int> picks = farthest_point_sample(mesh.vertices, k, spec.seed);
                std::vector<Vec3> centers;
                centers.reserve(picks.size());
                for (int i : picks) centers.push_back(mesh.vertices[static_cast<std::size_t>(i)]);
                return order_patches_bfs(voronoi_partition(mesh, centers), spec.up_axis);
            }
            return random_fps_segmentation(mesh, spec.lambda_rand, spec.seed, spec.up_axis);
        }
        case SegmentationSource::connected_components:
            return components_as_segmentation(mesh, spec.up_axis);
        case SegmentationSource::external_labels:
            return labels_as_segmentation(mesh, spec.labels, spec.up_axis);
    }
    throw PreconditionError("make_segmentation: unknown mode");
}

TokenProvider model_provider(const ToyModelF& model, const Mesh& source, int point_count,
                             double temperature, std::uint64_t seed) {
    if (point_count < 1) throw PreconditionError("model_provider: point_count must be positive");
    auto global = std::make_shared<SurfaceSamples>(sample_surface(source, point_count, hash_combine(seed, 0)));
    return [&model, &source, global, point_count, temperature, seed](
               int order_position, const Patch& patch, const PatchFrame&, const BoundaryCondition& boundary) {
        const SurfaceSamples local = sample_surface(submesh(source, patch.face_indices), point_count,
                                                    hash_combine(seed, 1 + static_cast<std::uint64_t>(order_position)));
        const ConditionBundle<float> bundle = model.make_bundle(*global, local, boundary.tokens);
        const int prefix = 3 + (model.config().ablation.use_boundary_self_attention
                                    ? static_cast<int>(boundary.tokens.tokens.size())
                                    : 0);
        const int budget = model.config().window - prefix;
        if (budget < 2) throw PreconditionError("model_provider: window too small for the boundary prefix");
        const GenerationResult res =
            model.generate(bundle, budget, temperature,
                           hash_combine(seed, 0x9e00 + static_cast<std::uint64_t>(order_position)));
        return res.tokens;
    };
}

PipelineResult run_pipeline(const Mesh& input, const PipelineOptions& opts) {
    if (input.faces.empty()) throw PreconditionError("run_pipeline: input mesh has no faces");

    PipelineResult result;
    result.segmentation = make_segmentation(input, opts.segmentation);

    std::optional<ToyModelF> model;
    TokenProvider provider;
    if (opts.ground_truth_tokens) {
        provider = ground_truth_provider(input);
    } else {
        if (opts.checkpoint.empty())
            throw PreconditionError("run_pipeline: model mode needs a checkpoint path");
        model.emplace(ToyModelF::load_checkpoint(opts.checkpoint));
        provider = model_provider(*model, input, opts.point_count, opts.temperature, opts.generate_seed);
    }

    result.assembly = assemble(input, result.segmentation, provider, opts.assemble);
    if (!result.assembly.final_mesh.faces.empty()) {
        result.metrics = evaluate(result.assembly.final_mesh, input, opts.eval);
        result.evaluated = true;
    }
    return result;
}

}  // namespace tessera
