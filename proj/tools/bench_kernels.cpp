// Timing table for the accelerated kernels against their serial brute-force
// references, with equality verification on the same inputs. Exits nonzero
// if any pair disagrees, so it doubles as a smoke test.

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <cmath>
#include <string>
#include <vector>

#include "tessera/boundary.hpp"
#include "tessera/grid_index.hpp"
#include "tessera/mesh.hpp"
#include "tessera/metrics.hpp"
#include "tessera/reference.hpp"
#include "tessera/rng.hpp"
#include "tessera/sampling.hpp"
#include "tessera/segmentation.hpp"

using namespace tessera;

namespace {

double now_ms() {
    using clock = std::chrono::steady_clock;
    return std::chrono::duration<double, std::milli>(clock::now().time_since_epoch()).count();
}

std::vector<Vec3> random_cloud(int n, std::uint64_t seed) {
    std::vector<Vec3> pts(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        const std::uint64_t k = static_cast<std::uint64_t>(i) * 3;
        pts[static_cast<std::size_t>(i)] = Vec3{uniform01(seed, k), uniform01(seed, k + 1), uniform01(seed, k + 2)};
    }
    return pts;
}

// Wavy height-field sheet: (nx-1)*(ny-1)*2 triangles.
Mesh grid_sheet(int nx, int ny) {
    Mesh m;
    for (int y = 0; y < ny; ++y)
        for (int x = 0; x < nx; ++x) {
            const double fx = static_cast<double>(x) / (nx - 1);
            const double fy = static_cast<double>(y) / (ny - 1);
            m.vertices.push_back(Vec3{fx, 0.15 * std::sin(8.0 * fx) * std::cos(6.0 * fy), fy});
        }
    for (int y = 0; y + 1 < ny; ++y)
        for (int x = 0; x + 1 < nx; ++x) {
            const int a = y * nx + x, b = y * nx + x + 1, c = (y + 1) * nx + x, d = (y + 1) * nx + x + 1;
            m.faces.push_back(Face{a, b, d});
            m.faces.push_back(Face{a, d, c});
        }
    return m;
}

int failures = 0;

void row(const std::string& name, int n, double serial_ms, double fast_ms, bool equal) {
    std::printf("%-22s %8d %12.2f %12.2f %9.2fx   %s\n", name.c_str(), n, serial_ms, fast_ms,
                fast_ms > 0.0 ? serial_ms / fast_ms : 0.0, equal ? "equal" : "MISMATCH");
    if (!equal) ++failures;
}

void bench_nearest() {
    const std::vector<Vec3> points = random_cloud(20000, 11);
    const std::vector<Vec3> queries = random_cloud(20000, 12);

    double t0 = now_ms();
    std::vector<reference::NnHit> slow(queries.size());
    for (std::size_t i = 0; i < queries.size(); ++i) slow[i] = reference::nearest_point(points, queries[i]);
    const double serial_ms = now_ms() - t0;

    t0 = now_ms();
    const PointGridIndex index(points);
    const std::vector<PointGridIndex::Hit> fast = index.nearest_batch(queries);
    const double fast_ms = now_ms() - t0;

    bool equal = fast.size() == slow.size();
    for (std::size_t i = 0; equal && i < fast.size(); ++i)
        equal = fast[i].index == slow[i].index && fast[i].squared_dist == slow[i].squared_dist;
    row("nearest_batch", static_cast<int>(queries.size()), serial_ms, fast_ms, equal);
}

void bench_chamfer() {
    const Mesh sheet = grid_sheet(80, 80);
    const SurfaceSamples a = sample_surface(sheet, 8192, 21);
    const SurfaceSamples b = sample_surface(sheet, 8192, 22);

    double t0 = now_ms();
    const auto slow = reference::chamfer(a, b);
    const double serial_ms = now_ms() - t0;

    t0 = now_ms();
    const auto fast = chamfer(a, b);
    const double fast_ms = now_ms() - t0;

    row("chamfer", a.count, serial_ms, fast_ms, fast.first == slow.first && fast.second == slow.second);
}

void bench_boundary_rank() {
    const Mesh assembled = grid_sheet(70, 70);
    const std::vector<Vec3> targets = random_cloud(256, 31);

    double t0 = now_ms();
    const std::vector<int> slow = reference::rank_boundary_faces(assembled, targets, 512);
    const double serial_ms = now_ms() - t0;

    t0 = now_ms();
    const std::vector<int> fast = select_boundary_faces(assembled, targets, 512);
    const double fast_ms = now_ms() - t0;

    row("boundary_rank", assembled.face_count(), serial_ms, fast_ms, fast == slow);
}

void bench_voronoi_assign() {
    const Mesh mesh = grid_sheet(80, 80);
    const std::vector<Vec3> centers = random_cloud(24, 41);

    double t0 = now_ms();
    const std::vector<int> slow = reference::assign_nearest_center(mesh, centers);
    const double serial_ms = now_ms() - t0;

    t0 = now_ms();
    std::vector<Vec3> centroids(static_cast<std::size_t>(mesh.face_count()));
    for (int f = 0; f < mesh.face_count(); ++f) centroids[static_cast<std::size_t>(f)] = mesh.face_centroid(f);
    const PointGridIndex index(centers);
    const std::vector<PointGridIndex::Hit> hits = index.nearest_batch(centroids);
    const double fast_ms = now_ms() - t0;

    bool equal = true;
    for (std::size_t i = 0; equal && i < hits.size(); ++i) equal = hits[i].index == slow[i];
    row("voronoi_assign", mesh.face_count(), serial_ms, fast_ms, equal);
}

void bench_fps() {
    const std::vector<Vec3> points = random_cloud(4000, 51);

    double t0 = now_ms();
    const std::vector<int> slow = reference::farthest_point_sample_from(points, 48, 0);
    const double serial_ms = now_ms() - t0;

    t0 = now_ms();
    const std::vector<int> fast = farthest_point_sample_from(points, 48, 0);
    const double fast_ms = now_ms() - t0;

    row("farthest_point", static_cast<int>(points.size()), serial_ms, fast_ms, fast == slow);
}

}  // namespace

int main() {
    std::printf("%-22s %8s %12s %12s %10s   %s\n", "kernel", "n", "serial ms", "fast ms", "speedup",
                "check");
    bench_nearest();
    bench_chamfer();
    bench_boundary_rank();
    bench_voronoi_assign();
    bench_fps();
    return failures == 0 ? 0 : 1;
}
