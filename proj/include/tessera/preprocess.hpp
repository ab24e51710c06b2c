#pragma once

#include <cstdint>
#include <string>

#include "tessera/mesh.hpp"

namespace tessera {

enum class RejectionReason { none, too_few_faces, too_many_faces, open_boundary_ratio };

const char* to_string(RejectionReason r);

// Outcome of the dataset admission filters for one mesh.
struct FilterReport {
    int face_count = 0;
    double point_face_ratio = 0.0;
    bool accepted = false;
    RejectionReason rejection_reason = RejectionReason::none;
};

// Face-count band, inclusive on both ends.
bool check_face_count(const Mesh& mesh, int lo = 500, int hi = 32000);

// Vertex count over face count. Callers reject when the ratio exceeds the
// threshold strictly; equality is kept. Throws on zero faces.
double point_face_ratio(const Mesh& mesh);

inline constexpr double kPointFaceRatioMax = 0.8;

// Runs both filters in order: face count band first, then the ratio.
FilterReport filter_mesh(const Mesh& mesh, int lo = 500, int hi = 32000,
                         double ratio_max = kPointFaceRatioMax);

// Random rotation about all three axes (Euler angles uniform in [0, 2pi))
// followed by a uniform scale in [0.9, 1.0], both about the bbox center.
// Connectivity is untouched; deterministic per seed.
Mesh augment_mesh(const Mesh& mesh, std::uint64_t seed);

// Exposed for tests: the exact rotation/scale parameters drawn for a seed.
struct AugmentParams {
    double angle_x = 0.0, angle_y = 0.0, angle_z = 0.0;
    double scale = 1.0;
};
AugmentParams augment_params(std::uint64_t seed);
Mesh apply_augment(const Mesh& mesh, const AugmentParams& params);

}  // namespace tessera
