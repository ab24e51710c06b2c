#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "tessera/vec3.hpp"

namespace tessera {

using Face = std::array<int, 3>;

// Indexed triangle mesh. Faces store counter-clockwise vertex triples; the
// winding as stored in the source file is preserved by all operations.
struct Mesh {
    std::vector<Vec3> vertices;
    std::vector<Face> faces;

    int vertex_count() const { return static_cast<int>(vertices.size()); }
    int face_count() const { return static_cast<int>(faces.size()); }
    bool empty() const { return vertices.empty() && faces.empty(); }

    Vec3 face_centroid(int f) const {
        const Face& t = faces[static_cast<std::size_t>(f)];
        return (vertices[static_cast<std::size_t>(t[0])] + vertices[static_cast<std::size_t>(t[1])] +
                vertices[static_cast<std::size_t>(t[2])]) /
               3.0;
    }
    Vec3 face_normal(int f) const {
        const Face& t = faces[static_cast<std::size_t>(f)];
        return normalized(cross(vertices[static_cast<std::size_t>(t[1])] - vertices[static_cast<std::size_t>(t[0])],
                                vertices[static_cast<std::size_t>(t[2])] - vertices[static_cast<std::size_t>(t[0])]));
    }
    double face_area(int f) const {
        const Face& t = faces[static_cast<std::size_t>(f)];
        return 0.5 * norm(cross(vertices[static_cast<std::size_t>(t[1])] - vertices[static_cast<std::size_t>(t[0])],
                                vertices[static_cast<std::size_t>(t[2])] - vertices[static_cast<std::size_t>(t[0])]));
    }

    Box3 bounding_box() const {
        Box3 b;
        for (const Vec3& v : vertices) b.expand(v);
        return b;
    }
};

// Uniform scale followed by translation: x' = scale * x + offset.
struct SimilarityTransform {
    double scale = 1.0;
    Vec3 offset{0.0, 0.0, 0.0};

    Vec3 apply(const Vec3& p) const { return p * scale + offset; }
    Vec3 invert(const Vec3& p) const { return (p - offset) / scale; }
};

// Throws PreconditionError when a face index is out of range or a face has
// repeated vertex indices.
void validate_mesh(const Mesh& mesh);

// Merges vertices within merge_epsilon (transitively, via union-find), drops
// faces degenerate after merging, drops zero-area faces, deduplicates faces
// with the same unordered vertex triple, removes faces beyond the first two
// retained on any edge, and compacts unreferenced vertices. Idempotent.
// merge_epsilon < 0 selects the default of 1e-6 times the bbox max extent.
Mesh clean_mesh(const Mesh& mesh, double merge_epsilon = -1.0);

// Fits the mesh into [0,1]^3: the longest bbox axis spans exactly [0,1], the
// other axes are centered at 0.5. Returns the normalized mesh and the
// transform that maps original to normalized coordinates.
std::pair<Mesh, SimilarityTransform> normalize_mesh(const Mesh& mesh);

// Face-index sets of vertex-connected components, each sorted ascending;
// components ordered by their lowest face index.
std::vector<std::vector<int>> connected_components(const Mesh& mesh);

// Mesh restricted to the given faces, vertices compacted in first-use order.
Mesh submesh(const Mesh& mesh, const std::vector<int>& face_indices);

}  // namespace tessera
