#pragma once

#include <array>
#include <utility>
#include <vector>

#include "tessera/mesh.hpp"
#include "tessera/quantizer.hpp"
#include "tessera/segmentation.hpp"

namespace tessera {

inline constexpr int kBoundaryFaceLimit = 512;
inline constexpr int kPlaceholderLength = 9;

struct BoundaryCondition {
    std::vector<std::pair<int, int>> source_faces;       // (patch id, assembled face index)
    std::vector<Face> assembled_faces;                   // vertex triples into the assembled mesh
    std::vector<std::array<Vec3, 3>> positions;          // assembled-space vertex positions per face
    TokenSequence tokens;                                // quantized in the current patch's frame
    bool is_placeholder = false;
};

// Ranks every assembled face by the distance from its centroid to the nearest
// target centroid and returns the k best (ties keep the lower face index).
// Empty assembled mesh yields an empty list.
std::vector<int> select_boundary_faces(const Mesh& assembled, const std::vector<Vec3>& target_centroids,
                                       int k = kBoundaryFaceLimit);

// Convenience form: target centroids are the current patch's face centroids
// in the source mesh.
std::vector<int> select_boundary_faces(const Mesh& assembled, const Mesh& source, const Patch& current_patch,
                                       int k = kBoundaryFaceLimit);

// Quantizes the selected faces in the current frame, canonicalizes, and emits
// the prefix form: 9 coordinate tokens per face plus one trailing TERM, no
// BOS. An empty selection yields placeholder_length TERM tokens with
// is_placeholder set. source_faces/assembled_faces are left for the caller.
BoundaryCondition encode_boundary_tokens(const std::vector<std::array<Vec3, 3>>& positions,
                                         const PatchFrame& frame, int placeholder_length = kPlaceholderLength);

// Full construction from an assembled mesh with per-face patch provenance.
BoundaryCondition make_boundary_condition(const Mesh& assembled, const std::vector<int>& face_patch,
                                          const std::vector<int>& selected_faces, const PatchFrame& frame,
                                          int placeholder_length = kPlaceholderLength);

}  // namespace tessera
