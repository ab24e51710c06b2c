#pragma once

#include <functional>
#include <vector>

#include "tessera/boundary.hpp"
#include "tessera/mesh.hpp"
#include "tessera/quantizer.hpp"
#include "tessera/segmentation.hpp"

namespace tessera {

struct SeamStats {
    double mean_gap = 0.0;  // pre-weld, per unique boundary vertex
    double max_gap = 0.0;
    int welded_vertices = 0;
};

struct PatchRecord {
    int patch_id = -1;
    Vec3 translation{0.0, 0.0, 0.0};
    SeamStats seam;
    double post_weld_matched_gap = 0.0;  // max residual over boundary vertices that received a weld
    int boundary_faces = 0;
    int faces_added = 0;
    int echo_faces = 0;
    int collapsed_faces = 0;
    bool skipped = false;
    DetokenizeDiagnostics diagnostics;
};

struct AssemblyState {
    Mesh mesh;                    // raw assembled mesh, pre-clean
    std::vector<int> face_patch;  // provenance, one patch id per face
    std::vector<PatchRecord> records;
};

struct AssembleOptions {
    int boundary_k = kBoundaryFaceLimit;
    int placeholder_length = kPlaceholderLength;
    double weld_tol = -1.0;  // negative: 1.5 * frame extent / (Q-1), per patch
};

// Produces one token sequence per patch, called in BFS order with the frame
// and boundary condition the sequence must be decoded against.
using TokenProvider =
    std::function<TokenSequence(int order_position, const Patch& patch, const PatchFrame& frame,
                                const BoundaryCondition& boundary)>;

struct AssemblyResult {
    Mesh final_mesh;  // cleaned
    AssemblyState state;
    std::vector<PatchFrame> frames;        // per order position
    std::vector<TokenSequence> sequences;  // per order position
};

// Mean of (original position - requantized position) over the boundary's
// unique vertices; zero for a placeholder boundary.
Vec3 compute_glue_translation(const BoundaryCondition& boundary, const PatchFrame& frame);

// Translates the new patch, snaps its vertices onto pre-existing assembled
// vertices within tol, appends the rest, and drops echo faces (faces whose
// welded triple equals a boundary source face). Returns the patch record;
// seam statistics are measured before welding.
PatchRecord weld_seam(AssemblyState& state, int patch_id, const Mesh& new_patch,
                      const BoundaryCondition& boundary, const Vec3& translation, double tol);

// Runs the per-patch loop in segmentation order: select boundary faces from
// the assembled prefix, compute the frame, obtain tokens from the provider,
// detokenize, glue, weld. Patches that decode to zero faces are skipped with
// a diagnostic record. The final mesh is cleaned.
AssemblyResult assemble(const Mesh& source, const Segmentation& seg, const TokenProvider& provider,
                        const AssembleOptions& opts = {});

// Provider that re-emits the source mesh's own quantized faces (model-free
// round-trip mode).
TokenProvider ground_truth_provider(const Mesh& source);

}  // namespace tessera
