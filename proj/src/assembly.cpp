#include "tessera/assembly.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "tessera/error.hpp"
#include "tessera/grid_index.hpp"

namespace tessera {

namespace {

// Unique boundary vertices with their assembled positions. Falls back to
// exact-position identity when the condition carries no vertex indices.
std::vector<std::pair<int, Vec3>> unique_boundary_vertices(const BoundaryCondition& boundary) {
    std::vector<std::pair<int, Vec3>> out;
    if (!boundary.assembled_faces.empty()) {
        std::map<int, Vec3> by_index;
        for (std::size_t i = 0; i < boundary.assembled_faces.size(); ++i)
            for (int k = 0; k < 3; ++k)
                by_index.emplace(boundary.assembled_faces[i][static_cast<std::size_t>(k)],
                                 boundary.positions[i][static_cast<std::size_t>(k)]);
        out.assign(by_index.begin(), by_index.end());
    } else {
        std::map<std::array<double, 3>, int> seen;
        for (const auto& tri : boundary.positions)
            for (const Vec3& p : tri)
                if (seen.emplace(std::array<double, 3>{p.x, p.y, p.z}, 0).second) out.emplace_back(-1, p);
    }
    return out;
}

std::array<int, 3> sorted_triple(const Face& f) {
    std::array<int, 3> t{f[0], f[1], f[2]};
    std::sort(t.begin(), t.end());
    return t;
}

}  // namespace

Vec3 compute_glue_translation(const BoundaryCondition& boundary, const PatchFrame& frame) {
    if (boundary.is_placeholder || boundary.positions.empty()) return Vec3{0.0, 0.0, 0.0};
    const std::vector<std::pair<int, Vec3>> verts = unique_boundary_vertices(boundary);
    Vec3 sum{0.0, 0.0, 0.0};
    for (const auto& [index, p] : verts) {
        const Vec3 requantized = dequantize_index(quantize_position(p, frame), frame);
        sum += p - requantized;
    }
    return sum / static_cast<double>(verts.size());
}

PatchRecord weld_seam(AssemblyState& state, int patch_id, const Mesh& new_patch,
                      const BoundaryCondition& boundary, const Vec3& translation, double tol) {
    if (tol < 0.0) throw PreconditionError("weld_seam: tolerance must be nonnegative");
    PatchRecord rec;
    rec.patch_id = patch_id;
    rec.translation = translation;
    rec.boundary_faces = static_cast<int>(boundary.source_faces.size());

    std::vector<Vec3> moved(new_patch.vertices.size());
    for (std::size_t i = 0; i < moved.size(); ++i) moved[i] = new_patch.vertices[i] + translation;

    // Pre-weld seam gaps: each unique boundary vertex against the nearest
    // translated new vertex.
    if (!boundary.is_placeholder && !boundary.positions.empty() && !moved.empty()) {
        const std::vector<std::pair<int, Vec3>> bverts = unique_boundary_vertices(boundary);
        PointGridIndex moved_index(moved);
        double sum = 0.0;
        double worst = 0.0;
        for (const auto& [index, p] : bverts) {
            const double gap = std::sqrt(moved_index.nearest(p).squared_dist);
            sum += gap;
            worst = std::max(worst, gap);
        }
        rec.seam.mean_gap = sum / static_cast<double>(bverts.size());
        rec.seam.max_gap = worst;
    }

    // Snap each new vertex to the nearest pre-existing assembled vertex
    // within tol; snapping never targets vertices added by this patch, so the
    // result is independent of vertex order.
    std::vector<int> remap(moved.size(), -1);
    std::vector<int> weld_targets;
    if (!state.mesh.vertices.empty()) {
        PointGridIndex existing(state.mesh.vertices);
        const double tol2 = tol * tol;
        std::vector<PointGridIndex::Hit> hits = existing.nearest_batch(moved);
        for (std::size_t i = 0; i < moved.size(); ++i) {
            if (hits[i].squared_dist <= tol2) {
                remap[i] = hits[i].index;
                weld_targets.push_back(hits[i].index);
            }
        }
    }
    rec.seam.welded_vertices = static_cast<int>(weld_targets.size());
    for (std::size_t i = 0; i < moved.size(); ++i) {
        if (remap[i] >= 0) continue;
        remap[i] = static_cast<int>(state.mesh.vertices.size());
        state.mesh.vertices.push_back(moved[i]);
    }

    // Residual of welds that landed on boundary vertices, measured against
    // the boundary snapshot. Nonzero would mean welding moved an existing
    // vertex.
    std::map<int, Vec3> boundary_pos;
    for (std::size_t i = 0; i < boundary.assembled_faces.size(); ++i)
        for (int k = 0; k < 3; ++k)
            boundary_pos.emplace(boundary.assembled_faces[i][static_cast<std::size_t>(k)],
                                 boundary.positions[i][static_cast<std::size_t>(k)]);
    double matched_gap = 0.0;
    for (int target : weld_targets) {
        const auto it = boundary_pos.find(target);
        if (it == boundary_pos.end()) continue;
        matched_gap = std::max(
            matched_gap, norm(state.mesh.vertices[static_cast<std::size_t>(target)] - it->second));
    }
    rec.post_weld_matched_gap = matched_gap;

    std::set<std::array<int, 3>> echo_triples;
    for (const Face& f : boundary.assembled_faces) echo_triples.insert(sorted_triple(f));

    for (const Face& f : new_patch.faces) {
        const Face mapped{remap[static_cast<std::size_t>(f[0])], remap[static_cast<std::size_t>(f[1])],
                          remap[static_cast<std::size_t>(f[2])]};
        if (mapped[0] == mapped[1] || mapped[1] == mapped[2] || mapped[0] == mapped[2]) {
            ++rec.collapsed_faces;
            continue;
        }
        if (echo_triples.count(sorted_triple(mapped))) {
            ++rec.echo_faces;
            continue;
        }
        state.mesh.faces.push_back(mapped);
        state.face_patch.push_back(patch_id);
        ++rec.faces_added;
    }
    return rec;
}

AssemblyResult assemble(const Mesh& source, const Segmentation& seg, const TokenProvider& provider,
                        const AssembleOptions& opts) {
    validate_segmentation(seg, source);
    AssemblyResult result;
    AssemblyState& state = result.state;

    for (std::size_t pos = 0; pos < seg.order.size(); ++pos) {
        const Patch& patch = seg.patches[static_cast<std::size_t>(seg.order[pos])];

        const std::vector<int> selected =
            select_boundary_faces(state.mesh, source, patch, opts.boundary_k);
        std::vector<std::array<Vec3, 3>> boundary_positions;
        boundary_positions.reserve(selected.size());
        for (int f : selected) {
            const Face& t = state.mesh.faces[static_cast<std::size_t>(f)];
            boundary_positions.push_back({state.mesh.vertices[static_cast<std::size_t>(t[0])],
                                          state.mesh.vertices[static_cast<std::size_t>(t[1])],
                                          state.mesh.vertices[static_cast<std::size_t>(t[2])]});
        }
        const PatchFrame frame = compute_frame(source, patch.face_indices, boundary_positions);
        const BoundaryCondition boundary =
            make_boundary_condition(state.mesh, state.face_patch, selected, frame, opts.placeholder_length);

        const TokenSequence tokens = provider(static_cast<int>(pos), patch, frame, boundary);
        DetokenizeDiagnostics diag;
        const QuantizedPatch qp = detokenize_patch(tokens, frame, &diag);
        const Mesh patch_mesh = patch_to_mesh(qp);

        result.frames.push_back(frame);
        result.sequences.push_back(tokens);

        if (patch_mesh.faces.empty()) {
            PatchRecord rec;
            rec.patch_id = patch.id;
            rec.boundary_faces = static_cast<int>(boundary.source_faces.size());
            rec.skipped = true;
            rec.diagnostics = diag;
            state.records.push_back(rec);
            continue;
        }

        const Vec3 translation = compute_glue_translation(boundary, frame);
        const double tol = opts.weld_tol >= 0.0
                               ? opts.weld_tol
                               : 1.5 * frame.extent / static_cast<double>(frame.resolution - 1);
        PatchRecord rec = weld_seam(state, patch.id, patch_mesh, boundary, translation, tol);
        rec.diagnostics = diag;
        state.records.push_back(rec);
    }

    result.final_mesh = clean_mesh(state.mesh);
    return result;
}

TokenProvider ground_truth_provider(const Mesh& source) {
    return [&source](int, const Patch& patch, const PatchFrame& frame, const BoundaryCondition&) {
        return tokenize_patch(quantize_patch(source, patch.face_indices, frame));
    };
}

}  // namespace tessera
