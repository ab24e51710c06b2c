#include "tessera/segmentation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <unordered_map>

#include "tessera/error.hpp"
#include "tessera/grid_index.hpp"
#include "tessera/rng.hpp"

namespace tessera {

namespace {

std::uint64_t edge_key(int a, int b) {
    if (a > b) std::swap(a, b);
    return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) |
           static_cast<std::uint64_t>(static_cast<std::uint32_t>(b));
}

// Builds patches, centroids, bboxes, and shared-edge adjacency from a dense
// per-face patch assignment.
Segmentation from_assignment(const Mesh& mesh, const std::vector<int>& face_patch, int n_patches,
                             SegmentationSource source) {
    Segmentation seg;
    seg.source = source;
    seg.patches.resize(static_cast<std::size_t>(n_patches));
    for (int p = 0; p < n_patches; ++p) seg.patches[static_cast<std::size_t>(p)].id = p;

    for (int f = 0; f < mesh.face_count(); ++f)
        seg.patches[static_cast<std::size_t>(face_patch[static_cast<std::size_t>(f)])].face_indices.push_back(f);

    for (Patch& patch : seg.patches) {
        if (patch.face_indices.empty())
            throw PreconditionError("segmentation: patch " + std::to_string(patch.id) + " has no faces");
        Vec3 sum{0, 0, 0};
        for (int f : patch.face_indices) {
            sum += mesh.face_centroid(f);
            const Face& t = mesh.faces[static_cast<std::size_t>(f)];
            for (int k = 0; k < 3; ++k) patch.bbox.expand(mesh.vertices[static_cast<std::size_t>(t[static_cast<std::size_t>(k)])]);
        }
        patch.centroid = sum / static_cast<double>(patch.face_indices.size());
    }

    // Shared-edge adjacency. Raw meshes may carry >2 faces per edge; all
    // distinct patch pairs on an edge become adjacent.
    std::unordered_map<std::uint64_t, std::vector<int>> edge_patches;
    edge_patches.reserve(mesh.faces.size() * 3);
    for (int f = 0; f < mesh.face_count(); ++f) {
        const Face& t = mesh.faces[static_cast<std::size_t>(f)];
        const int p = face_patch[static_cast<std::size_t>(f)];
        for (int k = 0; k < 3; ++k) {
            auto& list = edge_patches[edge_key(t[static_cast<std::size_t>(k)], t[static_cast<std::size_t>((k + 1) % 3)])];
            if (std::find(list.begin(), list.end(), p) == list.end()) list.push_back(p);
        }
    }
    std::set<std::pair<int, int>> pairs;
    for (const auto& [key, list] : edge_patches)
        for (std::size_t i = 0; i < list.size(); ++i)
            for (std::size_t j = i + 1; j < list.size(); ++j)
                pairs.emplace(std::min(list[i], list[j]), std::max(list[i], list[j]));
    seg.adjacency.assign(pairs.begin(), pairs.end());

    seg.order.resize(static_cast<std::size_t>(n_patches));
    for (int p = 0; p < n_patches; ++p) seg.order[static_cast<std::size_t>(p)] = p;
    return seg;
}

}  // namespace

const char* to_string(SegmentationSource s) {
    switch (s) {
        case SegmentationSource::random_fps: return "random_fps";
        case SegmentationSource::connected_components: return "connected_components";
        case SegmentationSource::external_labels: return "external_labels";
    }
    return "unknown";
}

int patch_count(int n_faces, double lambda_rand) {
    if (n_faces <= 0) throw PreconditionError("patch_count: n_faces must be positive");
    if (!(lambda_rand >= 0.5 && lambda_rand <= 2.5))
        throw PreconditionError("patch_count: lambda must lie in [0.5, 2.5]");
    const double raw = static_cast<double>(n_faces) / 2000.0 * lambda_rand;
    return std::max(1, static_cast<int>(std::llround(raw)));
}

std::vector<int> farthest_point_sample_from(const std::vector<Vec3>& points, int k, int start_index) {
    const int n = static_cast<int>(points.size());
    if (k < 1 || k > n) throw PreconditionError("farthest_point_sample: k must lie in [1, |points|]");
    if (start_index < 0 || start_index >= n) throw PreconditionError("farthest_point_sample: bad start index");

    std::vector<int> selected;
    selected.reserve(static_cast<std::size_t>(k));
    std::vector<double> min_dist2(static_cast<std::size_t>(n), std::numeric_limits<double>::infinity());
    std::vector<char> chosen(static_cast<std::size_t>(n), 0);

    int current = start_index;
    selected.push_back(current);
    chosen[static_cast<std::size_t>(current)] = 1;
    while (static_cast<int>(selected.size()) < k) {
        const Vec3 p = points[static_cast<std::size_t>(current)];
#pragma omp parallel for schedule(static)
        for (int i = 0; i < n; ++i) {
            const double d2 = squared_distance(points[static_cast<std::size_t>(i)], p);
            if (d2 < min_dist2[static_cast<std::size_t>(i)]) min_dist2[static_cast<std::size_t>(i)] = d2;
        }
        int best = -1;
        double best_d2 = -1.0;
        for (int i = 0; i < n; ++i) {
            if (chosen[static_cast<std::size_t>(i)]) continue;
            if (min_dist2[static_cast<std::size_t>(i)] > best_d2) {
                best_d2 = min_dist2[static_cast<std::size_t>(i)];
                best = i;
            }
        }
        current = best;
        selected.push_back(current);
        chosen[static_cast<std::size_t>(current)] = 1;
    }
    return selected;
}

std::vector<int> farthest_point_sample(const std::vector<Vec3>& points, int k, std::uint64_t seed) {
    if (points.empty()) throw PreconditionError("farthest_point_sample: empty point set");
    const int start = static_cast<int>(uniform_index(seed, 0, points.size()));
    return farthest_point_sample_from(points, k, start);
}

Segmentation voronoi_partition(const Mesh& mesh, const std::vector<Vec3>& centers) {
    if (centers.empty()) throw PreconditionError("voronoi_partition: at least one center required");
    if (mesh.faces.empty()) throw PreconditionError("voronoi_partition: empty mesh");

    const int nf = mesh.face_count();
    std::vector<Vec3> centroids(static_cast<std::size_t>(nf));
    for (int f = 0; f < nf; ++f) centroids[static_cast<std::size_t>(f)] = mesh.face_centroid(f);

    // Nearest-center assignment; PointGridIndex ties resolve to the lowest
    // center index, matching the serial reference.
    PointGridIndex index(centers);
    const std::vector<PointGridIndex::Hit> hits = index.nearest_batch(centroids);

    std::vector<int> face_center(static_cast<std::size_t>(nf));
    std::vector<int> center_used(centers.size(), 0);
    for (int f = 0; f < nf; ++f) {
        face_center[static_cast<std::size_t>(f)] = hits[static_cast<std::size_t>(f)].index;
        center_used[static_cast<std::size_t>(hits[static_cast<std::size_t>(f)].index)] = 1;
    }

    // Drop empty centers, compacting patch ids in center order.
    std::vector<int> center_patch(centers.size(), -1);
    int n_patches = 0;
    for (std::size_t c = 0; c < centers.size(); ++c)
        if (center_used[c]) center_patch[c] = n_patches++;
    std::vector<int> face_patch(static_cast<std::size_t>(nf));
    for (int f = 0; f < nf; ++f)
        face_patch[static_cast<std::size_t>(f)] = center_patch[static_cast<std::size_t>(face_center[static_cast<std::size_t>(f)])];

    return from_assignment(mesh, face_patch, n_patches, SegmentationSource::random_fps);
}

Segmentation order_patches_bfs(Segmentation seg, Axis up_axis) {
    const int n = static_cast<int>(seg.patches.size());
    if (n == 0) throw PreconditionError("order_patches_bfs: empty segmentation");
    seg.up_axis = up_axis;
    const int axis = static_cast<int>(up_axis);

    std::vector<std::vector<int>> neighbors(static_cast<std::size_t>(n));
    for (const auto& [a, b] : seg.adjacency) {
        neighbors[static_cast<std::size_t>(a)].push_back(b);
        neighbors[static_cast<std::size_t>(b)].push_back(a);
    }

    const auto lowest_unvisited = [&](const std::vector<char>& visited) {
        int best = -1;
        for (int p = 0; p < n; ++p) {
            if (visited[static_cast<std::size_t>(p)]) continue;
            if (best < 0 ||
                seg.patches[static_cast<std::size_t>(p)].centroid[axis] < seg.patches[static_cast<std::size_t>(best)].centroid[axis])
                best = p;  // strict comparison: ties keep the lower id
        }
        return best;
    };

    std::vector<int> order;
    order.reserve(static_cast<std::size_t>(n));
    std::vector<char> visited(static_cast<std::size_t>(n), 0);
    std::vector<int> queue;
    std::size_t head = 0;

    int start = lowest_unvisited(visited);
    while (start >= 0) {
        visited[static_cast<std::size_t>(start)] = 1;
        queue.push_back(start);
        while (head < queue.size()) {
            const int u = queue[head++];
            order.push_back(u);
            std::vector<int> next;
            for (int v : neighbors[static_cast<std::size_t>(u)])
                if (!visited[static_cast<std::size_t>(v)]) next.push_back(v);
            const Vec3 cu = seg.patches[static_cast<std::size_t>(u)].centroid;
            std::sort(next.begin(), next.end(), [&](int a, int b) {
                const double da = squared_distance(seg.patches[static_cast<std::size_t>(a)].centroid, cu);
                const double db = squared_distance(seg.patches[static_cast<std::size_t>(b)].centroid, cu);
                if (da != db) return da < db;
                return a < b;
            });
            for (int v : next) {
                visited[static_cast<std::size_t>(v)] = 1;
                queue.push_back(v);
            }
        }
        start = lowest_unvisited(visited);
    }
    seg.order = std::move(order);
    return seg;
}

Segmentation components_as_segmentation(const Mesh& mesh, Axis up_axis) {
    if (mesh.faces.empty()) throw PreconditionError("components_as_segmentation: empty mesh");
    const std::vector<std::vector<int>> comps = connected_components(mesh);
    std::vector<int> face_patch(static_cast<std::size_t>(mesh.face_count()), -1);
    for (std::size_t p = 0; p < comps.size(); ++p)
        for (int f : comps[p]) face_patch[static_cast<std::size_t>(f)] = static_cast<int>(p);
    Segmentation seg =
        from_assignment(mesh, face_patch, static_cast<int>(comps.size()), SegmentationSource::connected_components);
    return order_patches_bfs(std::move(seg), up_axis);
}

Segmentation labels_as_segmentation(const Mesh& mesh, const std::vector<int>& labels, Axis up_axis) {
    if (static_cast<int>(labels.size()) != mesh.face_count())
        throw PreconditionError("labels_as_segmentation: expected " + std::to_string(mesh.face_count()) +
                                " labels, got " + std::to_string(labels.size()));
    if (mesh.faces.empty()) throw PreconditionError("labels_as_segmentation: empty mesh");

    std::map<int, int> label_to_patch;  // ascending label value -> dense id
    for (int l : labels) label_to_patch.emplace(l, 0);
    int next = 0;
    for (auto& [label, id] : label_to_patch) id = next++;

    std::vector<int> face_patch(labels.size());
    for (std::size_t f = 0; f < labels.size(); ++f) face_patch[f] = label_to_patch.at(labels[f]);
    Segmentation seg = from_assignment(mesh, face_patch, next, SegmentationSource::external_labels);
    return order_patches_bfs(std::move(seg), up_axis);
}

Segmentation random_fps_segmentation(const Mesh& mesh, double lambda_rand, std::uint64_t seed, Axis up_axis) {
    if (mesh.faces.empty()) throw PreconditionError("random_fps_segmentation: empty mesh");
    const int n_seg = std::min(patch_count(mesh.face_count(), lambda_rand), mesh.vertex_count());
    const std::vector<int> picks = farthest_point_sample(mesh.vertices, n_seg, seed);
    std::vector<Vec3> centers;
    centers.reserve(picks.size());
    for (int i : picks) centers.push_back(mesh.vertices[static_cast<std::size_t>(i)]);
    Segmentation seg = voronoi_partition(mesh, centers);
    return order_patches_bfs(std::move(seg), up_axis);
}

void validate_segmentation(const Segmentation& seg, const Mesh& mesh) {
    const int n = static_cast<int>(seg.patches.size());
    std::vector<int> owner(static_cast<std::size_t>(mesh.face_count()), -1);
    for (int p = 0; p < n; ++p) {
        const Patch& patch = seg.patches[static_cast<std::size_t>(p)];
        if (patch.id != p) throw PreconditionError("segmentation: patch ids must be dense and ordered");
        if (patch.face_indices.empty()) throw PreconditionError("segmentation: empty patch");
        for (int f : patch.face_indices) {
            if (f < 0 || f >= mesh.face_count()) throw PreconditionError("segmentation: face index out of range");
            if (owner[static_cast<std::size_t>(f)] >= 0) throw PreconditionError("segmentation: face in two patches");
            owner[static_cast<std::size_t>(f)] = p;
        }
    }
    for (int f = 0; f < mesh.face_count(); ++f)
        if (owner[static_cast<std::size_t>(f)] < 0) throw PreconditionError("segmentation: face not covered");

    std::vector<char> seen(static_cast<std::size_t>(n), 0);
    if (static_cast<int>(seg.order.size()) != n) throw PreconditionError("segmentation: order length mismatch");
    for (int p : seg.order) {
        if (p < 0 || p >= n || seen[static_cast<std::size_t>(p)])
            throw PreconditionError("segmentation: order is not a permutation");
        seen[static_cast<std::size_t>(p)] = 1;
    }
    for (const auto& [a, b] : seg.adjacency)
        if (a < 0 || b < 0 || a >= n || b >= n || a >= b)
            throw PreconditionError("segmentation: bad adjacency pair");
}

}  // namespace tessera
