#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <map>
#include <set>

#include "support/procedural.hpp"
#include "tessera/assembly.hpp"
#include "tessera/error.hpp"
#include "tessera/grid_index.hpp"
#include "tessera/sampling.hpp"
#include "tessera/segmentation.hpp"

using namespace tessera;
namespace ts = tessera::testsupport;

namespace {

// Exact surface-to-surface chamfer via sampled points against triangle grids.
// Point-to-point sampling noise would sit above the quantization bound.
double surface_chamfer(const Mesh& a, const Mesh& b, int samples = 4096) {
    const SurfaceSamples sa = sample_surface(a, samples, 11);
    const SurfaceSamples sb = sample_surface(b, samples, 12);
    const TriangleGridIndex ia(a);
    const TriangleGridIndex ib(b);
    double da = 0.0, db = 0.0;
    for (const Vec3& p : sa.points) da += ib.distance(p);
    for (const Vec3& p : sb.points) db += ia.distance(p);
    return 0.5 * (da / samples + db / samples);
}

}  // namespace

TEST_CASE("glue translation is the mean requantization displacement") {
    const Mesh m = ts::sheet(8, 8, 0.2);
    std::vector<std::array<Vec3, 3>> positions;
    for (int f = 0; f < 12; ++f) {
        const Face& t = m.faces[size_t(f)];
        positions.push_back({m.vertices[size_t(t[0])], m.vertices[size_t(t[1])], m.vertices[size_t(t[2])]});
    }
    // a frame offset from the boundary bbox so requantization visibly shifts points
    PatchFrame frame = compute_frame(m, {0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11});
    frame.resolution = 33;  // coarse grid makes displacements large
    const BoundaryCondition bc = encode_boundary_tokens(positions, frame);
    const Vec3 got = compute_glue_translation(bc, frame);

    // oracle: unique exact positions, each quantized and dequantized once
    std::set<std::array<double, 3>> seen;
    Vec3 sum{0, 0, 0};
    int count = 0;
    for (const auto& tri : positions)
        for (const Vec3& p : tri) {
            if (!seen.insert({p.x, p.y, p.z}).second) continue;
            const Vec3 back = dequantize_index(quantize_position(p, frame), frame);
            sum += p - back;
            ++count;
        }
    const Vec3 want = sum / double(count);
    CHECK(distance(got, want) < 1e-12);
    CHECK(norm(got) > 0.0);  // coarse grid: some displacement is expected
}

TEST_CASE("placeholder boundary glues with zero translation") {
    const PatchFrame frame{{0, 0, 0}, 1.0, kQuantResolution};
    const BoundaryCondition bc = encode_boundary_tokens({}, frame);
    CHECK(compute_glue_translation(bc, frame) == Vec3{0, 0, 0});
}

TEST_CASE("weld_seam snaps to existing vertices and drops echo faces") {
    // assembled state: one triangle
    AssemblyState state;
    state.mesh.vertices = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}};
    state.mesh.faces = {{0, 1, 2}};
    state.face_patch = {0};

    BoundaryCondition bc;
    bc.assembled_faces = {{0, 1, 2}};
    bc.positions = {{Vec3{0, 0, 0}, Vec3{1, 0, 0}, Vec3{0, 1, 0}}};

    // new patch: the echo of the boundary face plus one genuinely new face,
    // all shifted by 1e-7 (within tolerance)
    Mesh patch;
    const Vec3 eps{1e-7, 0, 0};
    patch.vertices = {Vec3{0, 0, 0} + eps, Vec3{1, 0, 0} + eps, Vec3{0, 1, 0} + eps, Vec3{1, 1, 0}};
    patch.faces = {{0, 1, 2}, {1, 3, 2}};

    const PatchRecord rec = weld_seam(state, 1, patch, bc, {0, 0, 0}, 1e-3);
    CHECK(rec.echo_faces == 1);
    CHECK(rec.faces_added == 1);
    CHECK(rec.seam.welded_vertices == 3);
    CHECK(rec.post_weld_matched_gap == 0.0);
    CHECK(rec.seam.max_gap == doctest::Approx(1e-7));
    REQUIRE(state.mesh.face_count() == 2);
    CHECK(state.mesh.vertex_count() == 4);  // only the new corner appended
    CHECK(state.mesh.faces[1] == Face{1, 3, 2});
    CHECK(state.face_patch == std::vector<int>{0, 1});
}

TEST_CASE("weld_seam appends vertices beyond tolerance") {
    AssemblyState state;
    state.mesh.vertices = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}};
    state.mesh.faces = {{0, 1, 2}};
    state.face_patch = {0};
    BoundaryCondition bc;
    bc.assembled_faces = {{0, 1, 2}};
    bc.positions = {{Vec3{0, 0, 0}, Vec3{1, 0, 0}, Vec3{0, 1, 0}}};

    Mesh patch;
    patch.vertices = {{0.01, 0, 0}, {1.01, 0, 0}, {0.01, 1, 0}};
    patch.faces = {{0, 1, 2}};
    const PatchRecord rec = weld_seam(state, 1, patch, bc, {0, 0, 0}, 1e-4);
    CHECK(rec.seam.welded_vertices == 0);
    CHECK(rec.faces_added == 1);
    CHECK(rec.echo_faces == 0);
    CHECK(state.mesh.vertex_count() == 6);
}

TEST_CASE("weld_seam applies the glue translation before snapping") {
    AssemblyState state;
    state.mesh.vertices = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}};
    state.mesh.faces = {{0, 1, 2}};
    state.face_patch = {0};
    BoundaryCondition bc;
    bc.assembled_faces = {{0, 1, 2}};
    bc.positions = {{Vec3{0, 0, 0}, Vec3{1, 0, 0}, Vec3{0, 1, 0}}};

    Mesh patch;  // offset by a constant the translation must undo
    const Vec3 shift{0.05, -0.02, 0.01};
    patch.vertices = {Vec3{0, 0, 0} + shift, Vec3{1, 0, 0} + shift, Vec3{0, 1, 0} + shift, Vec3{1, 1, 0} + shift};
    patch.faces = {{0, 1, 2}, {1, 3, 2}};
    const PatchRecord rec = weld_seam(state, 1, patch, bc, -shift, 1e-9);
    CHECK(rec.seam.welded_vertices == 3);
    CHECK(rec.echo_faces == 1);
    CHECK(state.mesh.vertex_count() == 4);
    CHECK(distance(state.mesh.vertices[3], {1, 1, 0}) < 1e-12);
}

TEST_CASE("ground-truth assembly reproduces the source within the grid bound") {
    for (std::uint64_t seed : {1ull, 2ull}) {
        const Mesh source = ts::sheet(26, 26, 0.18, 2.0, 2.5);  // 1352 faces
        const Segmentation seg = random_fps_segmentation(source, 2.5, seed);
        REQUIRE(seg.patches.size() >= 2);
        const AssemblyResult res = assemble(source, seg, ground_truth_provider(source));
        REQUIRE_FALSE(res.final_mesh.empty());

        // per-point displacement is bounded by half a cell plus the weld snap
        double bound = 0.0;
        for (const PatchFrame& f : res.frames)
            bound = std::max(bound, (0.5 * std::sqrt(3.0) + 1.5) * f.extent / double(f.resolution - 1));
        CHECK(surface_chamfer(source, res.final_mesh) < bound);

        for (const PatchRecord& rec : res.state.records) {
            CHECK_FALSE(rec.skipped);
            CHECK(rec.post_weld_matched_gap == 0.0);
            CHECK(rec.diagnostics.discarded_tokens == 0);
        }
        // first patch has no boundary, later ones usually do
        CHECK(res.state.records.front().boundary_faces == 0);
        CHECK(res.state.records.size() == seg.patches.size());
        // provenance covers every pre-clean face
        CHECK(res.state.face_patch.size() == size_t(res.state.mesh.face_count()));
    }
}

TEST_CASE("seam gap shrinks as quantization resolution grows") {
    const Mesh source = ts::sheet(26, 26, 0.2);
    const Segmentation seg = random_fps_segmentation(source, 2.5, 7);
    REQUIRE(seg.patches.size() >= 2);
    const Patch& first = seg.patches[size_t(seg.order[0])];
    const Patch& second = seg.patches[size_t(seg.order[1])];

    // assembled prefix: the first patch verbatim
    const Mesh prefix = submesh(source, first.face_indices);

    double prev = std::numeric_limits<double>::infinity();
    for (int q : {64, 128, 512}) {
        AssemblyState state;
        state.mesh = prefix;
        state.face_patch.assign(size_t(prefix.face_count()), first.id);

        const auto selected = select_boundary_faces(state.mesh, source, second, 512);
        REQUIRE_FALSE(selected.empty());
        std::vector<std::array<Vec3, 3>> bpos;
        for (int f : selected) {
            const Face& t = state.mesh.faces[size_t(f)];
            bpos.push_back({state.mesh.vertices[size_t(t[0])], state.mesh.vertices[size_t(t[1])],
                            state.mesh.vertices[size_t(t[2])]});
        }
        PatchFrame frame = compute_frame(source, second.face_indices, bpos);
        frame.resolution = q;
        const BoundaryCondition bc = make_boundary_condition(state.mesh, state.face_patch, selected, frame);
        const Mesh decoded = patch_to_mesh(quantize_patch(source, second.face_indices, frame));
        const Vec3 glue = compute_glue_translation(bc, frame);

        // vertices shared by both patches in the source: their decode error is
        // pure quantization displacement, bounded by a cell diagonal plus glue
        std::set<int> in_first, in_second;
        for (int f : first.face_indices)
            for (int v : source.faces[size_t(f)]) in_first.insert(v);
        for (int f : second.face_indices)
            for (int v : source.faces[size_t(f)]) in_second.insert(v);
        std::vector<Vec3> moved = decoded.vertices;
        for (Vec3& p : moved) p += glue;
        const PointGridIndex moved_index(moved);
        double mean_seam = 0.0, max_seam = 0.0;
        int n_seam = 0;
        for (int v : in_first)
            if (in_second.count(v)) {
                const double gap = std::sqrt(moved_index.nearest(source.vertices[size_t(v)]).squared_dist);
                mean_seam += gap;
                max_seam = std::max(max_seam, gap);
                ++n_seam;
            }
        REQUIRE(n_seam > 3);
        mean_seam /= n_seam;
        CHECK(max_seam <= std::sqrt(3.0) * frame.extent / (q - 1) + 1e-12);
        CHECK(mean_seam < prev);
        prev = mean_seam;

        const PatchRecord rec = weld_seam(state, second.id, decoded, bc, glue, 1.5 * frame.extent / (q - 1));
        CHECK(rec.post_weld_matched_gap == 0.0);
    }
}

TEST_CASE("assembly skips patches that decode to nothing") {
    const Mesh source = ts::sheet(26, 26, 0.1);
    const Segmentation seg = random_fps_segmentation(source, 2.5, 5);
    REQUIRE(seg.patches.size() >= 2);
    int turn = 0;
    const TokenProvider provider = [&](int, const Patch& patch, const PatchFrame& frame,
                                       const BoundaryCondition&) -> TokenSequence {
        if (turn++ == 1) return TokenSequence{{kTokenBos, kTokenTerm}};  // empty patch
        return tokenize_patch(quantize_patch(source, patch.face_indices, frame));
    };
    const AssemblyResult res = assemble(source, seg, provider);
    int skipped = 0;
    for (const PatchRecord& rec : res.state.records) skipped += rec.skipped ? 1 : 0;
    CHECK(skipped == 1);
    CHECK_FALSE(res.final_mesh.empty());
    CHECK(res.state.records[1].faces_added == 0);
}

TEST_CASE("assemble validates inputs") {
    const Mesh source = ts::sheet(6, 6);
    const Segmentation seg = random_fps_segmentation(source, 1.0, 1);
    AssembleOptions opts;
    opts.boundary_k = 0;
    CHECK_THROWS_AS(assemble(source, seg, ground_truth_provider(source), opts), PreconditionError);
    const Segmentation empty;
    CHECK_THROWS_AS(assemble(source, empty, ground_truth_provider(source)), PreconditionError);
}

TEST_CASE("default weld tolerance follows the frame resolution") {
    // two abutting quads in separate patches; quantization shifts the shared
    // edge by at most half a cell per axis, which the default tol must absorb
    Mesh source;
    source.vertices = {{0, 0, 0}, {1, 0, 0}, {2, 0, 0}, {0, 0, 1}, {1, 0, 1}, {2, 0, 1}};
    source.faces = {{0, 1, 4}, {0, 4, 3}, {1, 2, 5}, {1, 5, 4}};
    Segmentation seg = labels_as_segmentation(source, {0, 0, 1, 1});
    const AssemblyResult res = assemble(source, seg, ground_truth_provider(source));
    REQUIRE(res.state.records.size() == 2);
    CHECK(res.state.records[1].seam.welded_vertices > 0);
    CHECK(res.state.records[1].post_weld_matched_gap == 0.0);
    // welding reuses the assembled vertices: shared edge vertices appear once
    std::map<std::array<long long, 3>, int> rounded;
    for (const Vec3& v : res.final_mesh.vertices)
        rounded[{llround(v.x * 1e7), llround(v.y * 1e7), llround(v.z * 1e7)}]++;
    for (const auto& [key, n] : rounded) CHECK(n == 1);
}
