#pragma once

#include <cstdint>
#include <utility>

#include "tessera/mesh.hpp"
#include "tessera/sampling.hpp"

namespace tessera {

struct EdgeParams {
    double radius = 0.01;
    double normal_dot_threshold = 0.7;
};

struct MetricsReport {
    double hd = 0.0;
    double cd_l1 = 0.0;
    double cd_l2_x1000 = 0.0;  // raw CD-L2 scaled by 1e3
    double nc = 0.0;
    double f1 = 0.0;
    double ecd = 0.0;
    double ef1 = 0.0;
    int sample_count = 0;
    double tau = 0.01;
    EdgeParams edge_params;
    bool edge_degenerate = false;  // an edge subset was empty; ecd falls back to full-set HD
};

// Symmetric Chamfer distances (L1, raw L2):
//   cd_l1 = 0.5 * (mean_a min_b |a-b| + mean_b min_a |a-b|)
//   cd_l2 uses squared distances.
// Nearest neighbors are exact; accumulation is serial in index order so the
// result is bitwise reproducible and matches the brute-force reference.
std::pair<double, double> chamfer(const SurfaceSamples& a, const SurfaceSamples& b);

// max(max_a min_b |a-b|, max_b min_a |a-b|)
double hausdorff(const SurfaceSamples& a, const SurfaceSamples& b);

// 0.5 * (mean_a |n_a . n_nn(a)| + mean_b |n_b . n_nn(b)|), nearest neighbor
// by position with the lowest-index tie rule. A point matched to itself
// contributes exactly 1; other terms are clamped to [0, 1].
double normal_consistency(const SurfaceSamples& a, const SurfaceSamples& b);

// precision = fraction of a within tau of b, recall symmetric;
// f1 = 2PR/(P+R), 0 when P+R = 0.
double f_score(const SurfaceSamples& a, const SurfaceSamples& b, double tau = 0.01);

// Keeps sample i iff some j != i lies within radius and |n_i . n_j| is below
// the threshold. May return an empty sample set.
SurfaceSamples extract_edge_samples(const SurfaceSamples& s, double radius = 0.01,
                                    double normal_dot_threshold = 0.7);

struct EvalOptions {
    int sample_count = 16384;
    std::uint64_t seed_generated = 1;
    std::uint64_t seed_reference = 1;
    double tau = 0.01;
    EdgeParams edge_params;
};

// Samples both meshes and computes the full seven-metric report. ECD/EF1 run
// on edge subsets; if either subset is empty the report flags the edge
// metrics degenerate, sets ecd to the full-set Hausdorff distance, and ef1
// to 0.
MetricsReport evaluate(const Mesh& generated, const Mesh& reference, const EvalOptions& opts = {});

}  // namespace tessera
