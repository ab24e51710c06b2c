#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "support/procedural.hpp"
#include "tessera/error.hpp"
#include "tessera/metrics.hpp"
#include "tessera/reference.hpp"
#include "tessera/rng.hpp"

using namespace tessera;
namespace ts = tessera::testsupport;

namespace {

SurfaceSamples cloud_samples(int n, std::uint64_t seed, bool tight = false) {
    SurfaceSamples s;
    s.points = ts::random_cloud(n, seed, tight ? 0.45 : 0.0, tight ? 0.55 : 1.0);
    for (int i = 0; i < n; ++i) {
        Vec3 v{uniform01(seed, std::uint64_t(5000 + 3 * i)) - 0.5, uniform01(seed, std::uint64_t(5001 + 3 * i)) - 0.5,
               uniform01(seed, std::uint64_t(5002 + 3 * i)) - 0.5};
        if (norm(v) < 1e-6) v = {1, 0, 0};
        s.normals.push_back(normalized(v));
    }
    s.count = n;
    s.seed = seed;
    return s;
}

}  // namespace

TEST_CASE("accelerated metrics agree with the serial reference exactly") {
    for (int c = 0; c < 30; ++c) {
        const std::uint64_t seed = 1000 + std::uint64_t(c);
        const int na = 50 + int(uniform01(seed, 0) * 1950.0);
        const int nb = 50 + int(uniform01(seed, 1) * 1950.0);
        const SurfaceSamples a = cloud_samples(na, seed + 1, c % 3 == 0);
        const SurfaceSamples b = cloud_samples(nb, seed + 2, c % 5 == 0);

        const auto [l1, l2] = chamfer(a, b);
        const auto [rl1, rl2] = reference::chamfer(a, b);
        CHECK(l1 == rl1);
        CHECK(l2 == rl2);
        CHECK(hausdorff(a, b) == reference::hausdorff(a, b));
        CHECK(normal_consistency(a, b) == reference::normal_consistency(a, b));
        const double tau = 0.02 + 0.01 * (c % 4);
        CHECK(f_score(a, b, tau) == reference::f_score(a, b, tau));

        const double radius = 0.05 + 0.01 * (c % 3);
        const double thresh = 0.5 + 0.1 * (c % 4);
        const SurfaceSamples ea = extract_edge_samples(a, radius, thresh);
        const SurfaceSamples ra = reference::extract_edge_samples(a, radius, thresh);
        CHECK(ea.points == ra.points);
        CHECK(ea.normals == ra.normals);
    }
}

TEST_CASE("identical sharp meshes score perfectly across all seven metrics") {
    const Mesh cube = ts::unit_cube();
    EvalOptions opts;
    opts.sample_count = 4096;
    opts.seed_generated = 3;
    opts.seed_reference = 3;  // same seed: identical sample sets
    const MetricsReport r = evaluate(cube, cube, opts);
    CHECK(r.hd == 0.0);
    CHECK(r.cd_l1 == 0.0);
    CHECK(r.cd_l2_x1000 == 0.0);
    CHECK(r.nc == 1.0);
    CHECK(r.f1 == 1.0);
    CHECK_FALSE(r.edge_degenerate);  // cube edges are sharp, subsets nonempty
    CHECK(r.ecd == 0.0);
    CHECK(r.ef1 == 1.0);
    CHECK(r.sample_count == 4096);
}

TEST_CASE("smooth geometry degrades the edge metrics, not the others") {
    const Mesh flat = ts::sheet(12, 12, 0.0);
    EvalOptions opts;
    opts.sample_count = 2048;
    opts.seed_generated = 5;
    opts.seed_reference = 5;
    const MetricsReport r = evaluate(flat, flat, opts);
    CHECK(r.hd == 0.0);
    CHECK(r.nc == 1.0);
    CHECK(r.edge_degenerate);  // a flat sheet has no normal discontinuities
    CHECK(r.ecd == 0.0);       // falls back to the full-set Hausdorff
    CHECK(r.ef1 == 0.0);
}

TEST_CASE("normal consistency is zero for orthogonal normal fields") {
    SurfaceSamples a, b;
    for (int i = 0; i < 64; ++i) {
        const double t = double(i) / 64.0;
        a.points.push_back({t, 0.0, 0.0});
        a.normals.push_back({0.0, 1.0, 0.0});
        b.points.push_back({t, 0.0, 0.0});
        b.normals.push_back({1.0, 0.0, 0.0});
    }
    a.count = b.count = 64;
    CHECK(normal_consistency(a, b) == 0.0);
    CHECK(normal_consistency(a, a) == 1.0);
}

TEST_CASE("f-score counts precision and recall by hand") {
    SurfaceSamples a, b;
    // a: 4 points, 3 of them within tau of some b point -> precision 0.75
    // b: 2 points, 1 within tau of some a point -> recall 0.5
    a.points = {{0, 0, 0}, {0.005, 0, 0}, {1, 0, 0}, {5, 5, 5}};
    b.points = {{0.002, 0, 0}, {1.001, 0, 0}};
    for (size_t i = 0; i < a.points.size(); ++i) a.normals.push_back({0, 1, 0});
    for (size_t i = 0; i < b.points.size(); ++i) b.normals.push_back({0, 1, 0});
    a.count = int(a.points.size());
    b.count = int(b.points.size());
    const double tau = 0.01;
    const double precision = 3.0 / 4.0;
    const double recall = 2.0 / 2.0;  // both b points have an a point within tau
    const double want = 2.0 * precision * recall / (precision + recall);
    CHECK(f_score(a, b, tau) == doctest::Approx(want).epsilon(1e-12));
    // disjoint far-apart sets: f1 is 0, not NaN
    SurfaceSamples far_b = b;
    for (Vec3& p : far_b.points) p += Vec3{100, 0, 0};
    CHECK(f_score(a, far_b, tau) == 0.0);
}

TEST_CASE("hausdorff is the worst one-sided nearest distance") {
    SurfaceSamples a, b;
    a.points = {{0, 0, 0}, {1, 0, 0}};
    b.points = {{0, 0, 0}, {1, 0, 0}, {1, 2, 0}};
    for (size_t i = 0; i < a.points.size(); ++i) a.normals.push_back({0, 1, 0});
    for (size_t i = 0; i < b.points.size(); ++i) b.normals.push_back({0, 1, 0});
    a.count = 2;
    b.count = 3;
    CHECK(hausdorff(a, b) == doctest::Approx(2.0));  // (1,2,0) is 2 away from a
    CHECK(hausdorff(a, a) == 0.0);
}

TEST_CASE("edge extraction keeps exactly the near-crease samples") {
    // two rows: parallel normals (dropped) and alternating orthogonal ones (kept)
    SurfaceSamples s;
    for (int i = 0; i < 10; ++i) {
        s.points.push_back({0.01 * i, 0.0, 0.0});
        s.normals.push_back({0.0, 1.0, 0.0});
    }
    for (int i = 0; i < 10; ++i) {
        s.points.push_back({0.01 * i, 1.0, 0.0});
        s.normals.push_back(i % 2 == 0 ? Vec3{0.0, 1.0, 0.0} : Vec3{1.0, 0.0, 0.0});
    }
    s.count = 20;
    const SurfaceSamples kept = extract_edge_samples(s, 0.015, 0.7);
    CHECK(kept.points.size() == 10);  // the whole second row, nothing from the first
    for (const Vec3& p : kept.points) CHECK(p.y == 1.0);
}

TEST_CASE("evaluate is invariant under rigid motion of both meshes") {
    const Mesh m = ts::torus(12, 12);
    const Mesh n = ts::sheet(10, 10, 0.2);
    EvalOptions opts;
    opts.sample_count = 2048;
    const MetricsReport base = evaluate(m, n, opts);

    // same rotation and translation applied to both meshes
    const double c = std::cos(0.7), s = std::sin(0.7);
    auto rot = [&](const Vec3& p) {
        const Vec3 q{c * p.x - s * p.y, s * p.x + c * p.y, p.z};
        return q + Vec3{3.0, -2.0, 0.5};
    };
    Mesh m2 = m, n2 = n;
    for (Vec3& v : m2.vertices) v = rot(v);
    for (Vec3& v : n2.vertices) v = rot(v);
    const MetricsReport moved = evaluate(m2, n2, opts);

    CHECK(moved.hd == doctest::Approx(base.hd).epsilon(1e-9));
    CHECK(moved.cd_l1 == doctest::Approx(base.cd_l1).epsilon(1e-9));
    CHECK(moved.cd_l2_x1000 == doctest::Approx(base.cd_l2_x1000).epsilon(1e-9));
    CHECK(moved.nc == doctest::Approx(base.nc).epsilon(1e-9));
    CHECK(moved.f1 == doctest::Approx(base.f1).epsilon(1e-9));
    CHECK(moved.ecd == doctest::Approx(base.ecd).epsilon(1e-6));
    CHECK(moved.ef1 == doctest::Approx(base.ef1).epsilon(1e-6));
}

TEST_CASE("evaluate validates inputs") {
    const Mesh m = ts::tetra();
    CHECK_THROWS_AS(evaluate(Mesh{}, m), PreconditionError);
    CHECK_THROWS_AS(evaluate(m, Mesh{}), PreconditionError);
    EvalOptions opts;
    opts.sample_count = 0;
    CHECK_THROWS_AS(evaluate(m, m, opts), PreconditionError);
}
