#include "tessera/boundary.hpp"

#include <algorithm>

#include "tessera/error.hpp"
#include "tessera/grid_index.hpp"

namespace tessera {

std::vector<int> select_boundary_faces(const Mesh& assembled, const std::vector<Vec3>& target_centroids,
                                       int k) {
    if (k < 1) throw PreconditionError("select_boundary_faces: k must be positive");
    if (assembled.faces.empty()) return {};
    if (target_centroids.empty()) throw PreconditionError("select_boundary_faces: no target centroids");

    const int nf = assembled.face_count();
    std::vector<Vec3> centroids(static_cast<std::size_t>(nf));
#pragma omp parallel for schedule(static)
    for (int f = 0; f < nf; ++f) centroids[static_cast<std::size_t>(f)] = assembled.face_centroid(f);

    PointGridIndex index(target_centroids);
    const std::vector<PointGridIndex::Hit> hits = index.nearest_batch(centroids);

    std::vector<std::pair<double, int>> ranked(static_cast<std::size_t>(nf));
    for (int f = 0; f < nf; ++f) ranked[static_cast<std::size_t>(f)] = {hits[static_cast<std::size_t>(f)].squared_dist, f};
    const std::size_t keep = std::min<std::size_t>(static_cast<std::size_t>(k), ranked.size());
    std::partial_sort(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(keep), ranked.end());

    std::vector<int> out(keep);
    for (std::size_t i = 0; i < keep; ++i) out[i] = ranked[i].second;
    return out;
}

std::vector<int> select_boundary_faces(const Mesh& assembled, const Mesh& source, const Patch& current_patch,
                                       int k) {
    std::vector<Vec3> targets;
    targets.reserve(current_patch.face_indices.size());
    for (int f : current_patch.face_indices) targets.push_back(source.face_centroid(f));
    return select_boundary_faces(assembled, targets, k);
}

BoundaryCondition encode_boundary_tokens(const std::vector<std::array<Vec3, 3>>& positions,
                                         const PatchFrame& frame, int placeholder_length) {
    if (placeholder_length < 1) throw PreconditionError("encode_boundary_tokens: placeholder length must be positive");
    BoundaryCondition bc;
    bc.positions = positions;
    if (positions.empty()) {
        bc.is_placeholder = true;
        bc.tokens.tokens.assign(static_cast<std::size_t>(placeholder_length), kTokenTerm);
        return bc;
    }
    std::vector<QFace> faces;
    faces.reserve(positions.size());
    for (const auto& tri : positions) {
        QFace qf;
        for (int v = 0; v < 3; ++v) qf[static_cast<std::size_t>(v)] = quantize_position(tri[static_cast<std::size_t>(v)], frame);
        faces.push_back(qf);
    }
    faces = canonicalize_faces(std::move(faces));
    bc.tokens.tokens.reserve(9 * faces.size() + 1);
    for (const QFace& f : faces)
        for (int v = 0; v < 3; ++v)
            for (int a = 0; a < 3; ++a)
                bc.tokens.tokens.push_back(f[static_cast<std::size_t>(v)][static_cast<std::size_t>(a)]);
    bc.tokens.tokens.push_back(kTokenTerm);
    return bc;
}

BoundaryCondition make_boundary_condition(const Mesh& assembled, const std::vector<int>& face_patch,
                                          const std::vector<int>& selected_faces, const PatchFrame& frame,
                                          int placeholder_length) {
    std::vector<std::array<Vec3, 3>> positions;
    positions.reserve(selected_faces.size());
    for (int f : selected_faces) {
        const Face& t = assembled.faces[static_cast<std::size_t>(f)];
        positions.push_back({assembled.vertices[static_cast<std::size_t>(t[0])],
                             assembled.vertices[static_cast<std::size_t>(t[1])],
                             assembled.vertices[static_cast<std::size_t>(t[2])]});
    }
    BoundaryCondition bc = encode_boundary_tokens(positions, frame, placeholder_length);
    bc.source_faces.reserve(selected_faces.size());
    bc.assembled_faces.reserve(selected_faces.size());
    for (int f : selected_faces) {
        bc.source_faces.emplace_back(face_patch[static_cast<std::size_t>(f)], f);
        bc.assembled_faces.push_back(assembled.faces[static_cast<std::size_t>(f)]);
    }
    return bc;
}

}  // namespace tessera
