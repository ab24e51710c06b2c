#include "tessera/grid_index.hpp"

#include <algorithm>
#include <cmath>

#include "tessera/error.hpp"

namespace tessera {

namespace {

// Grid resolution targeting a few points per cell.
std::array<int, 3> choose_dims(const Box3& bbox, std::size_t n, double& cell_size, Vec3& origin) {
    origin = bbox.valid() ? bbox.lo : Vec3{0, 0, 0};
    const double extent = bbox.valid() ? bbox.max_extent() : 0.0;
    const double target_cells = std::cbrt(static_cast<double>(std::max<std::size_t>(n, 1)));
    cell_size = extent > 0.0 ? extent / target_cells : 1.0;
    if (cell_size <= 0.0) cell_size = 1.0;
    std::array<int, 3> dims;
    const Vec3 e = bbox.valid() ? bbox.extent() : Vec3{0, 0, 0};
    for (int axis = 0; axis < 3; ++axis) {
        dims[static_cast<std::size_t>(axis)] =
            std::max(1, static_cast<int>(std::floor(e[axis] / cell_size)) + 1);
    }
    return dims;
}

}  // namespace

PointGridIndex::PointGridIndex(const std::vector<Vec3>& points) : points_(points) {
    Box3 bbox;
    for (const Vec3& p : points_) bbox.expand(p);
    dims_ = choose_dims(bbox, points_.size(), cell_size_, origin_);

    const std::size_t n_cells =
        static_cast<std::size_t>(dims_[0]) * static_cast<std::size_t>(dims_[1]) * static_cast<std::size_t>(dims_[2]);
    std::vector<int> counts(n_cells, 0);
    std::vector<int> cell_id(points_.size());
    for (std::size_t i = 0; i < points_.size(); ++i) {
        const std::array<int, 3> c = cell_of(points_[i]);
        const int id = (c[2] * dims_[1] + c[1]) * dims_[0] + c[0];
        cell_id[i] = id;
        ++counts[static_cast<std::size_t>(id)];
    }
    cell_start_.assign(n_cells + 1, 0);
    for (std::size_t c = 0; c < n_cells; ++c) cell_start_[c + 1] = cell_start_[c] + counts[c];
    cell_items_.resize(points_.size());
    std::vector<int> cursor(cell_start_.begin(), cell_start_.end() - 1);
    // Insertion in index order keeps each cell's item list ascending.
    for (std::size_t i = 0; i < points_.size(); ++i)
        cell_items_[static_cast<std::size_t>(cursor[static_cast<std::size_t>(cell_id[i])]++)] = static_cast<int>(i);
}

std::array<int, 3> PointGridIndex::cell_of(const Vec3& p) const {
    std::array<int, 3> c;
    for (int axis = 0; axis < 3; ++axis) {
        const double t = (p[axis] - origin_[axis]) / cell_size_;
        int idx = static_cast<int>(std::floor(t));
        if (idx < 0) idx = 0;
        if (idx >= dims_[static_cast<std::size_t>(axis)]) idx = dims_[static_cast<std::size_t>(axis)] - 1;
        c[static_cast<std::size_t>(axis)] = idx;
    }
    return c;
}

void PointGridIndex::scan_cell(int cx, int cy, int cz, const Vec3& q, Hit& best) const {
    const int cell = (cz * dims_[1] + cy) * dims_[0] + cx;
    for (int k = cell_start_[static_cast<std::size_t>(cell)]; k < cell_start_[static_cast<std::size_t>(cell) + 1];
         ++k) {
        const int idx = cell_items_[static_cast<std::size_t>(k)];
        const double d2 = squared_distance(points_[static_cast<std::size_t>(idx)], q);
        if (d2 < best.squared_dist || (d2 == best.squared_dist && idx < best.index)) {
            best.squared_dist = d2;
            best.index = idx;
        }
    }
}

PointGridIndex::Hit PointGridIndex::nearest(const Vec3& q) const {
    if (points_.empty()) throw PreconditionError("PointGridIndex::nearest on empty point set");

    // Virtual (unclamped) cell coordinates keep the ring lower bound valid
    // for queries outside the grid bbox.
    std::array<int, 3> c;
    for (int axis = 0; axis < 3; ++axis)
        c[static_cast<std::size_t>(axis)] = static_cast<int>(std::floor((q[axis] - origin_[axis]) / cell_size_));

    int max_ring = 0;
    for (int axis = 0; axis < 3; ++axis) {
        max_ring = std::max(max_ring, std::abs(c[static_cast<std::size_t>(axis)]) + 1);
        max_ring =
            std::max(max_ring, std::abs(dims_[static_cast<std::size_t>(axis)] - 1 - c[static_cast<std::size_t>(axis)]) + 1);
    }

    Hit best;
    best.squared_dist = std::numeric_limits<double>::infinity();
    for (int ring = 0; ring <= max_ring; ++ring) {
        // A cell at Chebyshev distance >= ring holds points strictly farther
        // than (ring-1)*cell_size (the query sits somewhere inside its own
        // cell), so the current best cannot be displaced once it is within
        // that bound; equality is safe to break on because farther points
        // are strictly farther, which also preserves the lowest-index rule.
        if (best.index >= 0 && ring >= 1) {
            const double bound = (static_cast<double>(ring) - 1.0) * cell_size_;
            if (best.squared_dist <= bound * bound) break;
        }
        const int x0 = c[0] - ring, x1 = c[0] + ring;
        const int y0 = c[1] - ring, y1 = c[1] + ring;
        const int z0 = c[2] - ring, z1 = c[2] + ring;
        for (int cz = std::max(z0, 0); cz <= std::min(z1, dims_[2] - 1); ++cz) {
            for (int cy = std::max(y0, 0); cy <= std::min(y1, dims_[1] - 1); ++cy) {
                const bool boundary_zy = (cz == z0 || cz == z1 || cy == y0 || cy == y1);
                if (boundary_zy) {
                    for (int cx = std::max(x0, 0); cx <= std::min(x1, dims_[0] - 1); ++cx)
                        scan_cell(cx, cy, cz, q, best);
                } else {
                    if (x0 >= 0 && x0 < dims_[0]) scan_cell(x0, cy, cz, q, best);
                    if (x1 != x0 && x1 >= 0 && x1 < dims_[0]) scan_cell(x1, cy, cz, q, best);
                }
            }
        }
    }
    return best;
}

std::vector<PointGridIndex::Hit> PointGridIndex::nearest_batch(const std::vector<Vec3>& queries) const {
    std::vector<Hit> hits(queries.size());
    const int n = static_cast<int>(queries.size());
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i) hits[static_cast<std::size_t>(i)] = nearest(queries[static_cast<std::size_t>(i)]);
    return hits;
}

double point_triangle_distance(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
    // Ericson, Real-Time Collision Detection, closest point on triangle.
    const Vec3 ab = b - a;
    const Vec3 ac = c - a;
    const Vec3 ap = p - a;
    const double d1 = dot(ab, ap);
    const double d2 = dot(ac, ap);
    if (d1 <= 0.0 && d2 <= 0.0) return distance(p, a);

    const Vec3 bp = p - b;
    const double d3 = dot(ab, bp);
    const double d4 = dot(ac, bp);
    if (d3 >= 0.0 && d4 <= d3) return distance(p, b);

    const double vc = d1 * d4 - d3 * d2;
    if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) {
        const double v = d1 / (d1 - d3);
        return distance(p, a + ab * v);
    }

    const Vec3 cp = p - c;
    const double d5 = dot(ab, cp);
    const double d6 = dot(ac, cp);
    if (d6 >= 0.0 && d5 <= d6) return distance(p, c);

    const double vb = d5 * d2 - d1 * d6;
    if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) {
        const double w = d2 / (d2 - d6);
        return distance(p, a + ac * w);
    }

    const double va = d3 * d6 - d5 * d4;
    if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0) {
        const double w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return distance(p, b + (c - b) * w);
    }

    const double denom = 1.0 / (va + vb + vc);
    const double v = vb * denom;
    const double w = vc * denom;
    return distance(p, a + ab * v + ac * w);
}

TriangleGridIndex::TriangleGridIndex(const Mesh& mesh) : mesh_(mesh) {
    if (mesh.faces.empty()) throw PreconditionError("TriangleGridIndex: mesh has no faces");
    Box3 bbox = mesh.bounding_box();
    dims_ = choose_dims(bbox, mesh.faces.size(), cell_size_, origin_);

    const auto cell_range = [&](double lo, double hi, int axis, int& c0, int& c1) {
        c0 = std::clamp(static_cast<int>(std::floor((lo - origin_[axis]) / cell_size_)), 0,
                        dims_[static_cast<std::size_t>(axis)] - 1);
        c1 = std::clamp(static_cast<int>(std::floor((hi - origin_[axis]) / cell_size_)), 0,
                        dims_[static_cast<std::size_t>(axis)] - 1);
    };

    const std::size_t n_cells =
        static_cast<std::size_t>(dims_[0]) * static_cast<std::size_t>(dims_[1]) * static_cast<std::size_t>(dims_[2]);
    std::vector<std::vector<int>> buckets(n_cells);
    for (int f = 0; f < mesh.face_count(); ++f) {
        Box3 fb;
        for (int k = 0; k < 3; ++k)
            fb.expand(mesh.vertices[static_cast<std::size_t>(mesh.faces[static_cast<std::size_t>(f)][static_cast<std::size_t>(k)])]);
        int x0, x1, y0, y1, z0, z1;
        cell_range(fb.lo.x, fb.hi.x, 0, x0, x1);
        cell_range(fb.lo.y, fb.hi.y, 1, y0, y1);
        cell_range(fb.lo.z, fb.hi.z, 2, z0, z1);
        for (int cz = z0; cz <= z1; ++cz)
            for (int cy = y0; cy <= y1; ++cy)
                for (int cx = x0; cx <= x1; ++cx)
                    buckets[static_cast<std::size_t>((cz * dims_[1] + cy) * dims_[0] + cx)].push_back(f);
    }
    cell_start_.assign(n_cells + 1, 0);
    for (std::size_t c = 0; c < n_cells; ++c)
        cell_start_[c + 1] = cell_start_[c] + static_cast<int>(buckets[c].size());
    cell_items_.resize(static_cast<std::size_t>(cell_start_[n_cells]));
    for (std::size_t c = 0; c < n_cells; ++c)
        std::copy(buckets[c].begin(), buckets[c].end(), cell_items_.begin() + cell_start_[c]);
}

double TriangleGridIndex::distance(const Vec3& q) const {
    std::array<int, 3> c;
    for (int axis = 0; axis < 3; ++axis)
        c[static_cast<std::size_t>(axis)] = static_cast<int>(std::floor((q[axis] - origin_[axis]) / cell_size_));

    int max_ring = 0;
    for (int axis = 0; axis < 3; ++axis) {
        max_ring = std::max(max_ring, std::abs(c[static_cast<std::size_t>(axis)]) + 1);
        max_ring =
            std::max(max_ring, std::abs(dims_[static_cast<std::size_t>(axis)] - 1 - c[static_cast<std::size_t>(axis)]) + 1);
    }

    double best = std::numeric_limits<double>::infinity();
    std::vector<int> tested;  // triangles span cells; avoid re-testing
    const auto scan = [&](int cx, int cy, int cz) {
        const int cell = (cz * dims_[1] + cy) * dims_[0] + cx;
        for (int k = cell_start_[static_cast<std::size_t>(cell)];
             k < cell_start_[static_cast<std::size_t>(cell) + 1]; ++k) {
            const int f = cell_items_[static_cast<std::size_t>(k)];
            if (std::find(tested.begin(), tested.end(), f) != tested.end()) continue;
            tested.push_back(f);
            const Face& t = mesh_.faces[static_cast<std::size_t>(f)];
            best = std::min(best, point_triangle_distance(q, mesh_.vertices[static_cast<std::size_t>(t[0])],
                                                          mesh_.vertices[static_cast<std::size_t>(t[1])],
                                                          mesh_.vertices[static_cast<std::size_t>(t[2])]));
        }
    };

    for (int ring = 0; ring <= max_ring; ++ring) {
        // Same shell bound as PointGridIndex::nearest: triangles are bucketed
        // into every cell their bbox touches, so one not yet seen lies
        // entirely beyond (ring-1)*cell_size.
        if (ring >= 1 && best < std::numeric_limits<double>::infinity() &&
            best <= (static_cast<double>(ring) - 1.0) * cell_size_)
            break;
        const int x0 = c[0] - ring, x1 = c[0] + ring;
        const int y0 = c[1] - ring, y1 = c[1] + ring;
        const int z0 = c[2] - ring, z1 = c[2] + ring;
        for (int cz = std::max(z0, 0); cz <= std::min(z1, dims_[2] - 1); ++cz) {
            for (int cy = std::max(y0, 0); cy <= std::min(y1, dims_[1] - 1); ++cy) {
                const bool boundary_zy = (cz == z0 || cz == z1 || cy == y0 || cy == y1);
                if (boundary_zy) {
                    for (int cx = std::max(x0, 0); cx <= std::min(x1, dims_[0] - 1); ++cx) scan(cx, cy, cz);
                } else {
                    if (x0 >= 0 && x0 < dims_[0]) scan(x0, cy, cz);
                    if (x1 != x0 && x1 >= 0 && x1 < dims_[0]) scan(x1, cy, cz);
                }
            }
        }
    }
    return best;
}

std::vector<double> TriangleGridIndex::distance_batch(const std::vector<Vec3>& queries) const {
    std::vector<double> out(queries.size());
    const int n = static_cast<int>(queries.size());
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = distance(queries[static_cast<std::size_t>(i)]);
    return out;
}

}  // namespace tessera
