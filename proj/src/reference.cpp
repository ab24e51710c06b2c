#include "tessera/reference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "tessera/error.hpp"

namespace tessera::reference {

namespace {

std::vector<NnHit> all_nearest(const std::vector<Vec3>& from, const std::vector<Vec3>& to) {
    std::vector<NnHit> hits(from.size());
    for (std::size_t i = 0; i < from.size(); ++i) hits[i] = nearest_point(to, from[i]);
    return hits;
}

}  // namespace

NnHit nearest_point(const std::vector<Vec3>& points, const Vec3& q) {
    if (points.empty()) throw PreconditionError("reference::nearest_point on empty point set");
    NnHit best;
    best.squared_dist = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < points.size(); ++i) {
        const double d2 = squared_distance(points[i], q);
        if (d2 < best.squared_dist) {
            best.squared_dist = d2;
            best.index = static_cast<int>(i);
        }
    }
    return best;
}

std::pair<double, double> chamfer(const SurfaceSamples& a, const SurfaceSamples& b) {
    if (a.points.empty() || b.points.empty()) throw PreconditionError("reference::chamfer: empty sample set");
    const std::vector<NnHit> ab = all_nearest(a.points, b.points);
    const std::vector<NnHit> ba = all_nearest(b.points, a.points);
    double sum_l1_ab = 0.0, sum_l2_ab = 0.0;
    for (const NnHit& h : ab) {
        sum_l1_ab += std::sqrt(h.squared_dist);
        sum_l2_ab += h.squared_dist;
    }
    double sum_l1_ba = 0.0, sum_l2_ba = 0.0;
    for (const NnHit& h : ba) {
        sum_l1_ba += std::sqrt(h.squared_dist);
        sum_l2_ba += h.squared_dist;
    }
    const double na = static_cast<double>(a.points.size());
    const double nb = static_cast<double>(b.points.size());
    return {0.5 * (sum_l1_ab / na + sum_l1_ba / nb), 0.5 * (sum_l2_ab / na + sum_l2_ba / nb)};
}

double hausdorff(const SurfaceSamples& a, const SurfaceSamples& b) {
    if (a.points.empty() || b.points.empty()) throw PreconditionError("reference::hausdorff: empty sample set");
    double worst = 0.0;
    for (const NnHit& h : all_nearest(a.points, b.points)) worst = std::max(worst, std::sqrt(h.squared_dist));
    for (const NnHit& h : all_nearest(b.points, a.points)) worst = std::max(worst, std::sqrt(h.squared_dist));
    return worst;
}

double normal_consistency(const SurfaceSamples& a, const SurfaceSamples& b) {
    if (a.points.empty() || b.points.empty())
        throw PreconditionError("reference::normal_consistency: empty sample set");
    if (a.normals.size() != a.points.size() || b.normals.size() != b.points.size())
        throw PreconditionError("reference::normal_consistency: samples carry no normals");
    const auto accumulate = [](const std::vector<NnHit>& hits, const std::vector<Vec3>& from,
                               const std::vector<Vec3>& to) {
        double sum = 0.0;
        for (std::size_t i = 0; i < hits.size(); ++i) {
            const Vec3& na = from[i];
            const Vec3& nb = to[static_cast<std::size_t>(hits[i].index)];
            if (hits[i].squared_dist == 0.0 && na.x == nb.x && na.y == nb.y && na.z == nb.z) {
                sum += 1.0;
                continue;
            }
            sum += std::min(std::abs(dot(na, nb)), 1.0);
        }
        return sum / static_cast<double>(hits.size());
    };
    const std::vector<NnHit> ab = all_nearest(a.points, b.points);
    const std::vector<NnHit> ba = all_nearest(b.points, a.points);
    return 0.5 * (accumulate(ab, a.normals, b.normals) + accumulate(ba, b.normals, a.normals));
}

double f_score(const SurfaceSamples& a, const SurfaceSamples& b, double tau) {
    if (a.points.empty() || b.points.empty()) throw PreconditionError("reference::f_score: empty sample set");
    if (!(tau > 0.0)) throw PreconditionError("reference::f_score: tau must be positive");
    const double tau2 = tau * tau;
    long long hits_a = 0, hits_b = 0;
    for (const NnHit& h : all_nearest(a.points, b.points)) hits_a += h.squared_dist <= tau2 ? 1 : 0;
    for (const NnHit& h : all_nearest(b.points, a.points)) hits_b += h.squared_dist <= tau2 ? 1 : 0;
    const double precision = static_cast<double>(hits_a) / static_cast<double>(a.points.size());
    const double recall = static_cast<double>(hits_b) / static_cast<double>(b.points.size());
    if (precision + recall == 0.0) return 0.0;
    return 2.0 * precision * recall / (precision + recall);
}

SurfaceSamples extract_edge_samples(const SurfaceSamples& s, double radius, double normal_dot_threshold) {
    if (s.points.empty()) throw PreconditionError("reference::extract_edge_samples: empty sample set");
    if (s.normals.size() != s.points.size())
        throw PreconditionError("reference::extract_edge_samples: samples carry no normals");
    const double r2 = radius * radius;
    SurfaceSamples out;
    out.seed = s.seed;
    for (std::size_t i = 0; i < s.points.size(); ++i) {
        bool found = false;
        for (std::size_t j = 0; j < s.points.size() && !found; ++j) {
            if (j == i || radius <= 0.0) continue;
            if (squared_distance(s.points[i], s.points[j]) > r2) continue;
            if (std::abs(dot(s.normals[i], s.normals[j])) < normal_dot_threshold) found = true;
        }
        if (found) {
            out.points.push_back(s.points[i]);
            out.normals.push_back(s.normals[i]);
        }
    }
    out.count = static_cast<int>(out.points.size());
    return out;
}

std::vector<int> assign_nearest_center(const Mesh& mesh, const std::vector<Vec3>& centers) {
    if (centers.empty()) throw PreconditionError("reference::assign_nearest_center: no centers");
    std::vector<int> out(static_cast<std::size_t>(mesh.face_count()));
    for (int f = 0; f < mesh.face_count(); ++f)
        out[static_cast<std::size_t>(f)] = nearest_point(centers, mesh.face_centroid(f)).index;
    return out;
}

std::vector<int> rank_boundary_faces(const Mesh& assembled, const std::vector<Vec3>& target_centroids,
                                     int k) {
    if (k < 1) throw PreconditionError("reference::rank_boundary_faces: k must be positive");
    if (assembled.faces.empty()) return {};
    std::vector<std::pair<double, int>> ranked;
    ranked.reserve(static_cast<std::size_t>(assembled.face_count()));
    for (int f = 0; f < assembled.face_count(); ++f)
        ranked.emplace_back(nearest_point(target_centroids, assembled.face_centroid(f)).squared_dist, f);
    std::sort(ranked.begin(), ranked.end());
    const std::size_t keep = std::min<std::size_t>(static_cast<std::size_t>(k), ranked.size());
    std::vector<int> out(keep);
    for (std::size_t i = 0; i < keep; ++i) out[i] = ranked[i].second;
    return out;
}

std::vector<int> farthest_point_sample_from(const std::vector<Vec3>& points, int k, int start_index) {
    const int n = static_cast<int>(points.size());
    if (k < 1 || k > n) throw PreconditionError("reference::farthest_point_sample_from: bad k");
    std::vector<int> selected{start_index};
    std::vector<char> chosen(static_cast<std::size_t>(n), 0);
    chosen[static_cast<std::size_t>(start_index)] = 1;
    while (static_cast<int>(selected.size()) < k) {
        int best = -1;
        double best_d2 = -1.0;
        for (int i = 0; i < n; ++i) {
            if (chosen[static_cast<std::size_t>(i)]) continue;
            // Recompute the full min-distance each round.
            double d2 = std::numeric_limits<double>::infinity();
            for (int s : selected)
                d2 = std::min(d2, squared_distance(points[static_cast<std::size_t>(i)],
                                                   points[static_cast<std::size_t>(s)]));
            if (d2 > best_d2) {
                best_d2 = d2;
                best = i;
            }
        }
        selected.push_back(best);
        chosen[static_cast<std::size_t>(best)] = 1;
    }
    return selected;
}

std::vector<int> bfs_order(const Segmentation& seg, Axis up_axis) {
    const int n = static_cast<int>(seg.patches.size());
    const int axis = static_cast<int>(up_axis);
    std::vector<char> visited(static_cast<std::size_t>(n), 0);
    std::vector<char> adjacent(static_cast<std::size_t>(n * n), 0);
    for (const auto& [a, b] : seg.adjacency) {
        adjacent[static_cast<std::size_t>(a * n + b)] = 1;
        adjacent[static_cast<std::size_t>(b * n + a)] = 1;
    }

    std::vector<int> order;
    std::vector<int> queue;
    std::size_t head = 0;
    while (static_cast<int>(order.size()) < n) {
        if (head == queue.size()) {
            int start = -1;
            for (int p = 0; p < n; ++p) {
                if (visited[static_cast<std::size_t>(p)]) continue;
                if (start < 0 || seg.patches[static_cast<std::size_t>(p)].centroid[axis] <
                                     seg.patches[static_cast<std::size_t>(start)].centroid[axis])
                    start = p;
            }
            visited[static_cast<std::size_t>(start)] = 1;
            queue.push_back(start);
        }
        const int u = queue[head++];
        order.push_back(u);
        std::vector<std::pair<std::pair<double, int>, int>> next;  // ((distance2, id), id)
        for (int v = 0; v < n; ++v) {
            if (visited[static_cast<std::size_t>(v)] || !adjacent[static_cast<std::size_t>(u * n + v)]) continue;
            const double d2 = squared_distance(seg.patches[static_cast<std::size_t>(v)].centroid,
                                               seg.patches[static_cast<std::size_t>(u)].centroid);
            next.push_back({{d2, v}, v});
        }
        std::sort(next.begin(), next.end());
        for (const auto& item : next) {
            visited[static_cast<std::size_t>(item.second)] = 1;
            queue.push_back(item.second);
        }
    }
    return order;
}

}  // namespace tessera::reference
