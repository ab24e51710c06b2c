#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "tessera/mesh.hpp"

namespace tessera {

enum class SegmentationSource { random_fps, connected_components, external_labels };
const char* to_string(SegmentationSource s);

enum class Axis : int { x = 0, y = 1, z = 2 };

struct Patch {
    int id = 0;
    std::vector<int> face_indices;  // sorted ascending
    Vec3 centroid;                  // mean of member-face centroids
    Box3 bbox;                      // over all member-face vertices
};

// Ordered partition of a mesh's faces into patches.
struct Segmentation {
    std::vector<Patch> patches;
    std::vector<int> order;                      // BFS permutation of patch ids
    std::vector<std::pair<int, int>> adjacency;  // unordered id pairs, a < b, sorted
    SegmentationSource source = SegmentationSource::random_fps;
    Axis up_axis = Axis::y;
};

// max(1, round-half-away-from-zero(n_faces/2000 * lambda)). Throws when
// lambda is outside [0.5, 2.5] or n_faces is not positive.
int patch_count(int n_faces, double lambda_rand);

// Farthest point sampling: the start index is drawn uniformly from the seed;
// each following pick maximizes the minimum distance to the selected set,
// ties resolved toward the lowest index.
std::vector<int> farthest_point_sample(const std::vector<Vec3>& points, int k, std::uint64_t seed);
// Deterministic variant with an explicit start index.
std::vector<int> farthest_point_sample_from(const std::vector<Vec3>& points, int k, int start_index);

// Assigns each face to the nearest center by face-centroid distance (ties to
// the lowest center index), drops centers with no faces, and derives
// shared-edge adjacency. The result is unordered until order_patches_bfs.
Segmentation voronoi_partition(const Mesh& mesh, const std::vector<Vec3>& centers);

// Breadth-first ordering over patch adjacency: start at the patch with the
// minimal centroid coordinate along up_axis, enqueue neighbors in ascending
// centroid-distance order, restart at the lowest unvisited patch when the
// adjacency graph is disconnected.
Segmentation order_patches_bfs(Segmentation seg, Axis up_axis = Axis::y);

// One patch per vertex-connected component, BFS ordered.
Segmentation components_as_segmentation(const Mesh& mesh, Axis up_axis = Axis::y);

// Patches from an external per-face label file (one label per face); patch
// ids follow ascending label value. Throws on length mismatch.
Segmentation labels_as_segmentation(const Mesh& mesh, const std::vector<int>& labels, Axis up_axis = Axis::y);

// FPS over mesh vertices with the patch-count formula, then Voronoi
// partition and BFS ordering. The training-time segmentation path.
Segmentation random_fps_segmentation(const Mesh& mesh, double lambda_rand, std::uint64_t seed,
                                     Axis up_axis = Axis::y);

// Throws PreconditionError if the segmentation is not a disjoint exhaustive
// partition with a valid order permutation and in-range adjacency.
void validate_segmentation(const Segmentation& seg, const Mesh& mesh);

}  // namespace tessera
