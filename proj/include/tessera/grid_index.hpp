#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include "tessera/mesh.hpp"
#include "tessera/vec3.hpp"

namespace tessera {

// Uniform-grid nearest-neighbor index over a fixed point set.
//
// Queries are exact: `nearest` returns the same (index, squared distance)
// pair as a full linear scan with the lowest-index tie rule, because cells
// are pruned only with conservative distance bounds and candidate distances
// use the same arithmetic as the serial reference. Batch queries parallelize
// with OpenMP; per-query results are independent, so output does not depend
// on thread count.
class PointGridIndex {
public:
    struct Hit {
        int index = -1;
        double squared_dist = 0.0;
    };

    explicit PointGridIndex(const std::vector<Vec3>& points);

    int size() const { return static_cast<int>(points_.size()); }
    const std::vector<Vec3>& points() const { return points_; }

    // Nearest point to q; ties broken toward the lowest index. Requires a
    // non-empty point set.
    Hit nearest(const Vec3& q) const;

    // nearest() for every query, OpenMP-parallel over queries.
    std::vector<Hit> nearest_batch(const std::vector<Vec3>& queries) const;

    // Invokes fn(index, squared_dist) for every point within `radius` of q
    // (inclusive), in ascending index order.
    template <typename Fn>
    void for_each_within(const Vec3& q, double radius, Fn&& fn) const;

private:
    std::array<int, 3> cell_of(const Vec3& p) const;
    void scan_cell(int cx, int cy, int cz, const Vec3& q, Hit& best) const;

    std::vector<Vec3> points_;
    Vec3 origin_{0, 0, 0};
    double cell_size_ = 1.0;
    std::array<int, 3> dims_{1, 1, 1};
    std::vector<int> cell_start_;  // CSR offsets, dims.x*dims.y*dims.z + 1
    std::vector<int> cell_items_;  // point indices grouped by cell, ascending within a cell
};

template <typename Fn>
void PointGridIndex::for_each_within(const Vec3& q, double radius, Fn&& fn) const {
    if (points_.empty() || radius < 0.0) return;
    const double r2 = radius * radius;
    const auto clampi = [](int v, int lo, int hi) { return v < lo ? lo : (v > hi ? hi : v); };
    const Vec3 lo = q - Vec3{radius, radius, radius};
    const Vec3 hi = q + Vec3{radius, radius, radius};
    const std::array<int, 3> c0 = cell_of(lo);
    const std::array<int, 3> c1 = cell_of(hi);
    std::vector<int> found;
    for (int cz = clampi(c0[2], 0, dims_[2] - 1); cz <= clampi(c1[2], 0, dims_[2] - 1); ++cz)
        for (int cy = clampi(c0[1], 0, dims_[1] - 1); cy <= clampi(c1[1], 0, dims_[1] - 1); ++cy)
            for (int cx = clampi(c0[0], 0, dims_[0] - 1); cx <= clampi(c1[0], 0, dims_[0] - 1); ++cx) {
                const int cell = (cz * dims_[1] + cy) * dims_[0] + cx;
                for (int k = cell_start_[static_cast<std::size_t>(cell)];
                     k < cell_start_[static_cast<std::size_t>(cell) + 1]; ++k) {
                    const int idx = cell_items_[static_cast<std::size_t>(k)];
                    const double d2 = squared_distance(points_[static_cast<std::size_t>(idx)], q);
                    if (d2 <= r2) found.push_back(idx);
                }
            }
    std::sort(found.begin(), found.end());
    for (int idx : found) fn(idx, squared_distance(points_[static_cast<std::size_t>(idx)], q));
}

// Grid over triangles for exact point-to-surface distance queries. Used by
// the assembly round-trip checks where point-to-point sampling noise would
// mask the quantization bound.
class TriangleGridIndex {
public:
    TriangleGridIndex(const Mesh& mesh);

    // Distance from q to the closest point on any triangle.
    double distance(const Vec3& q) const;
    std::vector<double> distance_batch(const std::vector<Vec3>& queries) const;

private:
    const Mesh& mesh_;
    Vec3 origin_{0, 0, 0};
    double cell_size_ = 1.0;
    std::array<int, 3> dims_{1, 1, 1};
    std::vector<int> cell_start_;
    std::vector<int> cell_items_;
};

// Closest-point distance from p to triangle (a, b, c).
double point_triangle_distance(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c);

}  // namespace tessera
