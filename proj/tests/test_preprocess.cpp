#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>

#include "support/procedural.hpp"
#include "tessera/error.hpp"
#include "tessera/preprocess.hpp"

using namespace tessera;
namespace ts = tessera::testsupport;

TEST_CASE("face count band is inclusive on both ends") {
    struct Case {
        int faces;
        bool accepted;
        RejectionReason reason;
    };
    const Case cases[] = {
        {499, false, RejectionReason::too_few_faces},
        {500, true, RejectionReason::none},
        {32000, true, RejectionReason::none},
        {32001, false, RejectionReason::too_many_faces},
    };
    for (const Case& c : cases) {
        // ratio 0.5, always admissible
        const Mesh m = ts::counted_mesh(c.faces / 2, c.faces);
        CHECK(check_face_count(m) == c.accepted);
        const FilterReport r = filter_mesh(m);
        CHECK(r.face_count == c.faces);
        CHECK(r.accepted == c.accepted);
        CHECK(r.rejection_reason == c.reason);
    }
}

TEST_CASE("vertex/face ratio keeps equality and rejects strictly above") {
    struct Case {
        int vertices;
        int faces;
        double ratio;
        bool accepted;
    };
    const Case cases[] = {
        {6667, 10000, 0.6667, true},
        {8000, 10000, 0.8, true},  // boundary kept
        {3000, 1000, 3.0, false},
    };
    for (const Case& c : cases) {
        const Mesh m = ts::counted_mesh(c.vertices, c.faces);
        CHECK(point_face_ratio(m) == doctest::Approx(c.ratio).epsilon(1e-12));
        const FilterReport r = filter_mesh(m);
        CHECK(r.point_face_ratio == doctest::Approx(c.ratio).epsilon(1e-12));
        CHECK(r.accepted == c.accepted);
        CHECK(r.rejection_reason == (c.accepted ? RejectionReason::none : RejectionReason::open_boundary_ratio));
    }
    CHECK_THROWS_AS(point_face_ratio(Mesh{}), PreconditionError);
}

TEST_CASE("face count rejection wins over the ratio check") {
    const Mesh m = ts::counted_mesh(300, 100);  // both too few faces and ratio 3.0
    const FilterReport r = filter_mesh(m);
    CHECK_FALSE(r.accepted);
    CHECK(r.rejection_reason == RejectionReason::too_few_faces);
}

TEST_CASE("augment parameters stay in range across 1000 seeds") {
    const double two_pi = 2.0 * std::numbers::pi;
    for (std::uint64_t seed = 0; seed < 1000; ++seed) {
        const AugmentParams p = augment_params(seed);
        CHECK(p.angle_x >= 0.0);
        CHECK(p.angle_x < two_pi);
        CHECK(p.angle_y >= 0.0);
        CHECK(p.angle_y < two_pi);
        CHECK(p.angle_z >= 0.0);
        CHECK(p.angle_z < two_pi);
        CHECK(p.scale >= 0.9);
        CHECK(p.scale <= 1.0);
    }
    // parameters actually vary
    CHECK(augment_params(1).scale != augment_params(2).scale);
}

TEST_CASE("augment preserves counts, connectivity, and the filter ratio") {
    const Mesh m = ts::sheet(12, 12, 0.2);
    const double ratio_before = point_face_ratio(m);
    for (std::uint64_t seed : {1ull, 7ull, 42ull}) {
        const Mesh a = augment_mesh(m, seed);
        REQUIRE(a.vertex_count() == m.vertex_count());
        REQUIRE(a.faces == m.faces);
        CHECK(point_face_ratio(a) == ratio_before);
        // rigid + uniform scale: pairwise distances scale by p.scale
        const AugmentParams p = augment_params(seed);
        const double d0 = distance(m.vertices[0], m.vertices[50]);
        const double d1 = distance(a.vertices[0], a.vertices[50]);
        CHECK(d1 == doctest::Approx(d0 * p.scale).epsilon(1e-9));
    }
}

TEST_CASE("augment is deterministic per seed and varies across seeds") {
    const Mesh m = ts::sheet(5, 5, 0.1);
    const Mesh a = augment_mesh(m, 9);
    const Mesh b = augment_mesh(m, 9);
    CHECK(a.vertices == b.vertices);
    const Mesh c = augment_mesh(m, 10);
    CHECK(a.vertices != c.vertices);
}

TEST_CASE("augment rotates and scales about the bbox center") {
    const Mesh m = ts::sheet(4, 4, 0.0);
    const Vec3 center_before = m.bounding_box().center();
    const Mesh a = augment_mesh(m, 3);
    // the bbox center is a fixed point of the transform up to rotation of the
    // box itself, so the centroid of the vertex set must be preserved exactly
    // under rotation about it plus scaling toward it
    Vec3 centroid_m{0, 0, 0}, centroid_a{0, 0, 0};
    for (const auto& v : m.vertices) centroid_m += v;
    for (const auto& v : a.vertices) centroid_a += v;
    centroid_m = centroid_m / double(m.vertex_count());
    centroid_a = centroid_a / double(a.vertex_count());
    // flat symmetric sheet: vertex centroid coincides with the bbox center
    CHECK(distance(centroid_m, center_before) < 1e-12);
    CHECK(distance(centroid_a, center_before) < 1e-9);
}
