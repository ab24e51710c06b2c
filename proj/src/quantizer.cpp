#include "tessera/quantizer.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>

#include "tessera/error.hpp"

namespace tessera {

namespace {

constexpr double kFrameTolerance = 1e-9;

// Sort/rotation key: (z, y, x) of v0, v1, v2.
std::array<int, 9> face_key(const QFace& f) {
    return {f[0][2], f[0][1], f[0][0], f[1][2], f[1][1], f[1][0], f[2][2], f[2][1], f[2][0]};
}

QFace rotate_face(const QFace& f, int start) {
    return {f[static_cast<std::size_t>(start)], f[static_cast<std::size_t>((start + 1) % 3)],
            f[static_cast<std::size_t>((start + 2) % 3)]};
}

QFace canonical_rotation(const QFace& f) {
    QFace best = f;
    std::array<int, 9> best_key = face_key(f);
    for (int r = 1; r < 3; ++r) {
        const QFace cand = rotate_face(f, r);
        const std::array<int, 9> key = face_key(cand);
        if (key < best_key) {
            best_key = key;
            best = cand;
        }
    }
    return best;
}

void append_u16(std::string& out, std::uint16_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
}

void append_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint16_t read_u16(const unsigned char* p) {
    return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

std::uint64_t read_u64(const unsigned char* p) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
    return v;
}

}  // namespace

PatchFrame compute_frame(const Mesh& mesh, const std::vector<int>& patch_faces,
                         const std::vector<int>& extra_faces) {
    if (patch_faces.empty()) throw PreconditionError("compute_frame: empty patch");
    Box3 box;
    const auto expand_faces = [&](const std::vector<int>& faces) {
        for (int f : faces) {
            if (f < 0 || f >= mesh.face_count()) throw PreconditionError("compute_frame: face index out of range");
            const Face& t = mesh.faces[static_cast<std::size_t>(f)];
            for (int k = 0; k < 3; ++k) box.expand(mesh.vertices[static_cast<std::size_t>(t[static_cast<std::size_t>(k)])]);
        }
    };
    expand_faces(patch_faces);
    expand_faces(extra_faces);
    PatchFrame frame;
    frame.origin = box.lo;
    frame.extent = std::max(box.max_extent(), 1e-9);
    frame.resolution = kQuantResolution;
    return frame;
}

PatchFrame compute_frame(const Mesh& mesh, const std::vector<int>& patch_faces,
                         const std::vector<std::array<Vec3, 3>>& extra_positions) {
    if (patch_faces.empty()) throw PreconditionError("compute_frame: empty patch");
    Box3 box;
    for (int f : patch_faces) {
        if (f < 0 || f >= mesh.face_count()) throw PreconditionError("compute_frame: face index out of range");
        const Face& t = mesh.faces[static_cast<std::size_t>(f)];
        for (int k = 0; k < 3; ++k) box.expand(mesh.vertices[static_cast<std::size_t>(t[static_cast<std::size_t>(k)])]);
    }
    for (const auto& tri : extra_positions)
        for (const Vec3& p : tri) box.expand(p);
    PatchFrame frame;
    frame.origin = box.lo;
    frame.extent = std::max(box.max_extent(), 1e-9);
    frame.resolution = kQuantResolution;
    return frame;
}

QVec quantize_position(const Vec3& p, const PatchFrame& frame) {
    const int qmax = frame.resolution - 1;
    QVec out{};
    for (int a = 0; a < 3; ++a) {
        const double x = p[a];
        if (x < frame.origin[a] - kFrameTolerance || x > frame.origin[a] + frame.extent + kFrameTolerance)
            throw PreconditionError("quantize_position: position outside frame");
        const double u = (x - frame.origin[a]) / frame.extent;
        const long long idx = std::llround(u * static_cast<double>(qmax));
        out[static_cast<std::size_t>(a)] = static_cast<int>(std::clamp(idx, 0ll, static_cast<long long>(qmax)));
    }
    return out;
}

std::vector<QVec> quantize_positions(const std::vector<Vec3>& positions, const PatchFrame& frame) {
    std::vector<QVec> out(positions.size());
    for (std::size_t i = 0; i < positions.size(); ++i) out[i] = quantize_position(positions[i], frame);
    return out;
}

Vec3 dequantize_index(const QVec& q, const PatchFrame& frame) {
    const int qmax = frame.resolution - 1;
    Vec3 out;
    for (int a = 0; a < 3; ++a) {
        const int idx = q[static_cast<std::size_t>(a)];
        if (idx < 0 || idx > qmax) throw PreconditionError("dequantize_index: index out of range");
        out[a] = frame.origin[a] + (static_cast<double>(idx) / static_cast<double>(qmax)) * frame.extent;
    }
    return out;
}

std::vector<Vec3> dequantize_indices(const std::vector<QVec>& indices, const PatchFrame& frame) {
    std::vector<Vec3> out(indices.size());
    for (std::size_t i = 0; i < indices.size(); ++i) out[i] = dequantize_index(indices[i], frame);
    return out;
}

std::vector<QFace> canonicalize_faces(std::vector<QFace> faces) {
    for (QFace& f : faces) f = canonical_rotation(f);
    std::sort(faces.begin(), faces.end(),
              [](const QFace& a, const QFace& b) { return face_key(a) < face_key(b); });
    faces.erase(std::unique(faces.begin(), faces.end()), faces.end());
    return faces;
}

QuantizedPatch quantize_patch(const Mesh& mesh, const std::vector<int>& patch_faces,
                              const PatchFrame& frame) {
    std::vector<QFace> faces;
    faces.reserve(patch_faces.size());
    for (int f : patch_faces) {
        if (f < 0 || f >= mesh.face_count()) throw PreconditionError("quantize_patch: face index out of range");
        const Face& t = mesh.faces[static_cast<std::size_t>(f)];
        QFace qf;
        for (int k = 0; k < 3; ++k)
            qf[static_cast<std::size_t>(k)] =
                quantize_position(mesh.vertices[static_cast<std::size_t>(t[static_cast<std::size_t>(k)])], frame);
        faces.push_back(qf);
    }
    QuantizedPatch qp;
    qp.frame = frame;
    qp.faces = canonicalize_faces(std::move(faces));
    return qp;
}

TokenSequence tokenize_patch(const QuantizedPatch& qp) {
    TokenSequence ts;
    ts.tokens.reserve(2 + 9 * qp.faces.size());
    ts.tokens.push_back(kTokenBos);
    for (const QFace& f : qp.faces)
        for (int v = 0; v < 3; ++v)
            for (int a = 0; a < 3; ++a)
                ts.tokens.push_back(f[static_cast<std::size_t>(v)][static_cast<std::size_t>(a)]);
    ts.tokens.push_back(kTokenTerm);
    return ts;
}

QuantizedPatch detokenize_patch(const TokenSequence& ts, const PatchFrame& frame,
                                DetokenizeDiagnostics* diag) {
    std::vector<QFace> faces;
    std::array<int, 9> group{};
    int filled = 0;
    int discarded = 0;

    std::size_t i = 0;
    if (!ts.tokens.empty() && ts.tokens[0] == kTokenBos) i = 1;
    for (; i < ts.tokens.size(); ++i) {
        const int t = ts.tokens[i];
        if (t == kTokenTerm) break;
        if (t < 0 || t >= kQuantResolution) {
            ++discarded;  // BOS/PAD or out-of-vocabulary id mid-stream
            continue;
        }
        group[static_cast<std::size_t>(filled++)] = t;
        if (filled == 9) {
            faces.push_back(QFace{QVec{group[0], group[1], group[2]}, QVec{group[3], group[4], group[5]},
                                  QVec{group[6], group[7], group[8]}});
            filled = 0;
        }
    }
    discarded += filled;  // incomplete trailing group

    if (diag != nullptr) {
        diag->discarded_tokens = discarded;
        diag->faces_parsed = static_cast<int>(faces.size());
    }
    QuantizedPatch qp;
    qp.frame = frame;
    qp.faces = canonicalize_faces(std::move(faces));
    return qp;
}

Mesh patch_to_mesh(const QuantizedPatch& qp) {
    Mesh mesh;
    std::map<QVec, int> vertex_of;
    const auto intern = [&](const QVec& q) {
        const auto [it, inserted] = vertex_of.emplace(q, static_cast<int>(mesh.vertices.size()));
        if (inserted) mesh.vertices.push_back(dequantize_index(q, qp.frame));
        return it->second;
    };
    for (const QFace& f : qp.faces) {
        if (f[0] == f[1] || f[1] == f[2] || f[0] == f[2]) continue;  // collapsed by quantization
        mesh.faces.push_back(Face{intern(f[0]), intern(f[1]), intern(f[2])});
    }
    return mesh;
}

void save_tokens(const TokenSequence& ts, const std::string& path) {
    std::string out;
    out.reserve(16 + 2 * ts.tokens.size());
    out.append("MMTK");
    append_u16(out, 1);
    append_u16(out, static_cast<std::uint16_t>(kVocabSize));
    append_u64(out, static_cast<std::uint64_t>(ts.tokens.size()));
    for (int t : ts.tokens) {
        if (t < 0 || t >= kVocabSize) throw PreconditionError("save_tokens: token id out of vocabulary");
        append_u16(out, static_cast<std::uint16_t>(t));
    }
    std::ofstream file(path, std::ios::binary);
    if (!file) throw IoError("save_tokens: cannot open '" + path + "' for writing");
    file.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!file) throw IoError("save_tokens: write failed for '" + path + "'");
}

TokenSequence load_tokens(const std::string& path) {
    std::ifstream file(path, std::ios::binary);
    if (!file) throw IoError("load_tokens: cannot open '" + path + "'");
    std::string data((std::istreambuf_iterator<char>(file)), std::istreambuf_iterator<char>());
    if (data.size() < 16) throw ParseError("load_tokens: '" + path + "' truncated header");
    const auto* p = reinterpret_cast<const unsigned char*>(data.data());
    if (std::memcmp(p, "MMTK", 4) != 0) throw ParseError("load_tokens: '" + path + "' bad magic");
    const std::uint16_t version = read_u16(p + 4);
    if (version != 1) throw ParseError("load_tokens: '" + path + "' unsupported version " + std::to_string(version));
    const std::uint16_t vocab = read_u16(p + 6);
    if (vocab != kVocabSize)
        throw ParseError("load_tokens: '" + path + "' vocab_size " + std::to_string(vocab) + ", expected " +
                         std::to_string(kVocabSize));
    const std::uint64_t count = read_u64(p + 8);
    if (data.size() != 16 + 2 * count) throw ParseError("load_tokens: '" + path + "' body size mismatch");

    TokenSequence ts;
    ts.tokens.reserve(count);
    for (std::uint64_t i = 0; i < count; ++i) {
        const std::uint16_t t = read_u16(p + 16 + 2 * i);
        if (t >= kVocabSize) throw ParseError("load_tokens: '" + path + "' token id out of vocabulary");
        ts.tokens.push_back(static_cast<int>(t));
    }
    return ts;
}

}  // namespace tessera
