#pragma once

#include <utility>
#include <vector>

#include "tessera/mesh.hpp"
#include "tessera/sampling.hpp"
#include "tessera/segmentation.hpp"

// Serial brute-force counterparts of the accelerated kernels. These are the
// ground truth for the dual-route tests and the baseline for the benchmark
// tool: plain O(n^2) scans, no spatial index, no OpenMP. Reductions run in
// index order with the same expressions as the fast path, so agreement is
// expected to be bitwise.
namespace tessera::reference {

struct NnHit {
    int index = -1;
    double squared_dist = 0.0;
};

// Linear scan; ties resolve to the lowest index.
NnHit nearest_point(const std::vector<Vec3>& points, const Vec3& q);

std::pair<double, double> chamfer(const SurfaceSamples& a, const SurfaceSamples& b);
double hausdorff(const SurfaceSamples& a, const SurfaceSamples& b);
double normal_consistency(const SurfaceSamples& a, const SurfaceSamples& b);
double f_score(const SurfaceSamples& a, const SurfaceSamples& b, double tau = 0.01);
SurfaceSamples extract_edge_samples(const SurfaceSamples& s, double radius = 0.01,
                                    double normal_dot_threshold = 0.7);

// Per-face nearest-center assignment (ties to the lowest center index).
std::vector<int> assign_nearest_center(const Mesh& mesh, const std::vector<Vec3>& centers);

// Full distance ranking of assembled faces against the target centroids;
// returns the k best face indices (ties to the lower index).
std::vector<int> rank_boundary_faces(const Mesh& assembled, const std::vector<Vec3>& target_centroids,
                                     int k);

// Farthest point sampling recomputing every distance from scratch each round.
std::vector<int> farthest_point_sample_from(const std::vector<Vec3>& points, int k, int start_index);

// Breadth-first patch order re-derived with repeated linear scans.
std::vector<int> bfs_order(const Segmentation& seg, Axis up_axis);

}  // namespace tessera::reference
