#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "tessera/mesh.hpp"

namespace tessera {

inline constexpr int kQuantResolution = 512;
inline constexpr int kTokenTerm = 512;
inline constexpr int kTokenBos = 513;
inline constexpr int kTokenPad = 514;
inline constexpr int kVocabSize = 515;

// Integer vertex (x, y, z), each in [0, Q-1].
using QVec = std::array<int, 3>;
// One face as three integer vertices; winding carries orientation.
using QFace = std::array<QVec, 3>;

// Uniform local frame: world = origin + (q / (Q-1)) * extent per axis.
struct PatchFrame {
    Vec3 origin{0.0, 0.0, 0.0};
    double extent = 1.0;
    int resolution = kQuantResolution;
};

struct QuantizedPatch {
    PatchFrame frame;
    std::vector<QFace> faces;  // canonical order (see canonicalize_faces)
};

struct TokenSequence {
    std::vector<int> tokens;
};

struct DetokenizeDiagnostics {
    int discarded_tokens = 0;  // malformed ids plus any incomplete trailing group
    int faces_parsed = 0;      // complete 9-token groups, before dedup
};

// Frame over the union bbox of patch_faces and extra_faces; extent is the
// longest axis, floored at 1e-9. extra_faces keeps boundary geometry in range.
PatchFrame compute_frame(const Mesh& mesh, const std::vector<int>& patch_faces,
                         const std::vector<int>& extra_faces = {});

// Same, with boundary geometry given as explicit positions. Used during
// assembly, where boundary faces live in the assembled mesh rather than the
// source mesh.
PatchFrame compute_frame(const Mesh& mesh, const std::vector<int>& patch_faces,
                         const std::vector<std::array<Vec3, 3>>& extra_positions);

// Rounds half away from zero, clamps to [0, Q-1]. Positions more than 1e-9
// outside the frame cube raise an error.
QVec quantize_position(const Vec3& p, const PatchFrame& frame);
std::vector<QVec> quantize_positions(const std::vector<Vec3>& positions, const PatchFrame& frame);

Vec3 dequantize_index(const QVec& q, const PatchFrame& frame);
std::vector<Vec3> dequantize_indices(const std::vector<QVec>& indices, const PatchFrame& frame);

// Rotates each face so its lexicographically smallest (z, y, x) vertex leads,
// sorts faces by their 9-integer (z, y, x) key, and removes duplicates.
// Winding is preserved; idempotent.
std::vector<QFace> canonicalize_faces(std::vector<QFace> faces);

// Quantizes the given faces of the mesh into the frame and canonicalizes.
QuantizedPatch quantize_patch(const Mesh& mesh, const std::vector<int>& patch_faces,
                              const PatchFrame& frame);

// [BOS] ++ 9 coordinate tokens per face (x,y,z of v0,v1,v2) ++ [TERM].
TokenSequence tokenize_patch(const QuantizedPatch& qp);

// Greedy parse: optional leading BOS, coordinate tokens in groups of nine
// until TERM or end of stream. Never throws; malformed input is counted.
QuantizedPatch detokenize_patch(const TokenSequence& ts, const PatchFrame& frame,
                                DetokenizeDiagnostics* diag = nullptr);

// Dequantizes into world space, welding identical integer vertices into
// shared indices (first-use order). Faces collapsed by quantization are
// dropped so the Mesh invariants hold.
Mesh patch_to_mesh(const QuantizedPatch& qp);

// Binary token file: magic "MMTK", version u16, vocab_size u16,
// token_count u64, body of u16 ids; all little-endian.
void save_tokens(const TokenSequence& ts, const std::string& path);
TokenSequence load_tokens(const std::string& path);

}  // namespace tessera
