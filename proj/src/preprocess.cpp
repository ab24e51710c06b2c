#include "tessera/preprocess.hpp"

#include <cmath>

#include "tessera/error.hpp"
#include "tessera/rng.hpp"

namespace tessera {

const char* to_string(RejectionReason r) {
    switch (r) {
        case RejectionReason::none: return "none";
        case RejectionReason::too_few_faces: return "too_few_faces";
        case RejectionReason::too_many_faces: return "too_many_faces";
        case RejectionReason::open_boundary_ratio: return "open_boundary_ratio";
    }
    return "unknown";
}

bool check_face_count(const Mesh& mesh, int lo, int hi) {
    return mesh.face_count() >= lo && mesh.face_count() <= hi;
}

double point_face_ratio(const Mesh& mesh) {
    if (mesh.face_count() == 0) throw PreconditionError("point_face_ratio: mesh has no faces");
    return static_cast<double>(mesh.vertex_count()) / static_cast<double>(mesh.face_count());
}

FilterReport filter_mesh(const Mesh& mesh, int lo, int hi, double ratio_max) {
    FilterReport report;
    report.face_count = mesh.face_count();
    if (mesh.face_count() < lo) {
        report.rejection_reason = RejectionReason::too_few_faces;
        return report;
    }
    if (mesh.face_count() > hi) {
        report.rejection_reason = RejectionReason::too_many_faces;
        return report;
    }
    report.point_face_ratio = point_face_ratio(mesh);
    if (report.point_face_ratio > ratio_max) {  // strict: equality is kept
        report.rejection_reason = RejectionReason::open_boundary_ratio;
        return report;
    }
    report.accepted = true;
    return report;
}

AugmentParams augment_params(std::uint64_t seed) {
    constexpr double two_pi = 6.283185307179586476925286766559;
    AugmentParams p;
    p.angle_x = uniform01(seed, 0) * two_pi;
    p.angle_y = uniform01(seed, 1) * two_pi;
    p.angle_z = uniform01(seed, 2) * two_pi;
    p.scale = 0.9 + uniform01(seed, 3) * 0.1;
    return p;
}

Mesh apply_augment(const Mesh& mesh, const AugmentParams& p) {
    if (mesh.vertices.empty()) throw PreconditionError("augment_mesh: empty mesh");

    const double cx = std::cos(p.angle_x), sx = std::sin(p.angle_x);
    const double cy = std::cos(p.angle_y), sy = std::sin(p.angle_y);
    const double cz = std::cos(p.angle_z), sz = std::sin(p.angle_z);

    // R = Rz * Ry * Rx, rows of the combined matrix.
    const Vec3 r0{cz * cy, cz * sy * sx - sz * cx, cz * sy * cx + sz * sx};
    const Vec3 r1{sz * cy, sz * sy * sx + cz * cx, sz * sy * cx - cz * sx};
    const Vec3 r2{-sy, cy * sx, cy * cx};

    const Vec3 center = mesh.bounding_box().center();
    Mesh out = mesh;
    for (Vec3& v : out.vertices) {
        const Vec3 d = v - center;
        v = center + Vec3{dot(r0, d), dot(r1, d), dot(r2, d)} * p.scale;
    }
    return out;
}

Mesh augment_mesh(const Mesh& mesh, std::uint64_t seed) { return apply_augment(mesh, augment_params(seed)); }

}  // namespace tessera
