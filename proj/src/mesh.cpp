#include "tessera/mesh.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <unordered_map>
#include <utility>

#include "tessera/error.hpp"
#include "tessera/grid_index.hpp"

namespace tessera {

namespace {

// Union-find with path halving.
struct DisjointSet {
    std::vector<int> parent;

    explicit DisjointSet(int n) : parent(static_cast<std::size_t>(n)) {
        std::iota(parent.begin(), parent.end(), 0);
    }
    int find(int x) {
        while (parent[static_cast<std::size_t>(x)] != x) {
            parent[static_cast<std::size_t>(x)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(x)])];
            x = parent[static_cast<std::size_t>(x)];
        }
        return x;
    }
    void unite(int a, int b) {
        a = find(a);
        b = find(b);
        if (a == b) return;
        // Lower index wins so representatives are deterministic.
        if (a < b)
            parent[static_cast<std::size_t>(b)] = a;
        else
            parent[static_cast<std::size_t>(a)] = b;
    }
};

std::uint64_t edge_key(int a, int b) {
    if (a > b) std::swap(a, b);
    return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) |
           static_cast<std::uint64_t>(static_cast<std::uint32_t>(b));
}

}  // namespace

void validate_mesh(const Mesh& mesh) {
    const int nv = mesh.vertex_count();
    for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
        const Face& t = mesh.faces[f];
        for (int k = 0; k < 3; ++k) {
            if (t[static_cast<std::size_t>(k)] < 0 || t[static_cast<std::size_t>(k)] >= nv)
                throw PreconditionError("face " + std::to_string(f) + " references vertex " +
                                        std::to_string(t[static_cast<std::size_t>(k)]) + " outside [0, " +
                                        std::to_string(nv) + ")");
        }
        if (t[0] == t[1] || t[1] == t[2] || t[0] == t[2])
            throw PreconditionError("face " + std::to_string(f) + " has repeated vertex indices");
    }
}

Mesh clean_mesh(const Mesh& mesh, double merge_epsilon) {
    if (mesh.vertices.empty()) return Mesh{};

    const Box3 bbox = mesh.bounding_box();
    const double scale = std::max(bbox.max_extent(), 0.0);
    if (merge_epsilon < 0.0) merge_epsilon = 1e-6 * std::max(scale, 1e-300);

    // 1. Merge vertices transitively: any two vertices within merge_epsilon
    //    end up in one cluster, represented by the lowest original index.
    const int nv = mesh.vertex_count();
    DisjointSet clusters(nv);
    {
        PointGridIndex index(mesh.vertices);
        const double eps2 = merge_epsilon * merge_epsilon;
        for (int i = 0; i < nv; ++i) {
            index.for_each_within(mesh.vertices[static_cast<std::size_t>(i)], merge_epsilon,
                                  [&](int j, double d2) {
                                      if (j > i && d2 <= eps2) clusters.unite(i, j);
                                  });
        }
    }
    std::vector<int> remap(static_cast<std::size_t>(nv));
    for (int i = 0; i < nv; ++i) remap[static_cast<std::size_t>(i)] = clusters.find(i);

    // 2. Remap faces; drop faces collapsed to fewer than three distinct
    //    vertices and exact zero-area faces.
    const double area_eps = 1e-12 * scale * scale;
    std::vector<Face> kept;
    kept.reserve(mesh.faces.size());
    for (const Face& f : mesh.faces) {
        Face g{remap[static_cast<std::size_t>(f[0])], remap[static_cast<std::size_t>(f[1])],
               remap[static_cast<std::size_t>(f[2])]};
        if (g[0] == g[1] || g[1] == g[2] || g[0] == g[2]) continue;
        const Vec3& a = mesh.vertices[static_cast<std::size_t>(g[0])];
        const Vec3& b = mesh.vertices[static_cast<std::size_t>(g[1])];
        const Vec3& c = mesh.vertices[static_cast<std::size_t>(g[2])];
        if (0.5 * norm(cross(b - a, c - a)) <= area_eps) continue;
        kept.push_back(g);
    }

    // 3. Deduplicate faces sharing the same unordered vertex triple, keeping
    //    the first occurrence.
    {
        std::vector<Face> unique_faces;
        unique_faces.reserve(kept.size());
        std::map<std::array<int, 3>, bool> seen;
        for (const Face& f : kept) {
            std::array<int, 3> key{f[0], f[1], f[2]};
            std::sort(key.begin(), key.end());
            if (seen.emplace(key, true).second) unique_faces.push_back(f);
        }
        kept = std::move(unique_faces);
    }

    // 4. Per edge, keep at most the first two incident faces (input order).
    {
        std::unordered_map<std::uint64_t, int> edge_load;
        edge_load.reserve(kept.size() * 3);
        std::vector<Face> manifold;
        manifold.reserve(kept.size());
        for (const Face& f : kept) {
            const std::uint64_t e0 = edge_key(f[0], f[1]);
            const std::uint64_t e1 = edge_key(f[1], f[2]);
            const std::uint64_t e2 = edge_key(f[2], f[0]);
            if (edge_load[e0] >= 2 || edge_load[e1] >= 2 || edge_load[e2] >= 2) continue;
            ++edge_load[e0];
            ++edge_load[e1];
            ++edge_load[e2];
            manifold.push_back(f);
        }
        kept = std::move(manifold);
    }

    // 5. Compact to referenced vertices.
    Mesh out;
    std::vector<int> vertex_slot(static_cast<std::size_t>(nv), -1);
    for (const Face& f : kept) {
        Face g;
        for (int k = 0; k < 3; ++k) {
            const int v = f[static_cast<std::size_t>(k)];
            if (vertex_slot[static_cast<std::size_t>(v)] < 0) {
                vertex_slot[static_cast<std::size_t>(v)] = out.vertex_count();
                out.vertices.push_back(mesh.vertices[static_cast<std::size_t>(v)]);
            }
            g[static_cast<std::size_t>(k)] = vertex_slot[static_cast<std::size_t>(v)];
        }
        out.faces.push_back(g);
    }
    return out;
}

std::pair<Mesh, SimilarityTransform> normalize_mesh(const Mesh& mesh) {
    if (mesh.vertices.empty()) throw PreconditionError("normalize_mesh: empty mesh");

    const Box3 bbox = mesh.bounding_box();
    const Vec3 center = bbox.center();
    const double extent = std::max(bbox.max_extent(), 1e-12);
    const double s = 1.0 / extent;

    SimilarityTransform t;
    t.scale = s;
    t.offset = Vec3{0.5, 0.5, 0.5} - center * s;

    Mesh out = mesh;
    for (Vec3& v : out.vertices) v = t.apply(v);
    return {std::move(out), t};
}

std::vector<std::vector<int>> connected_components(const Mesh& mesh) {
    const int nv = mesh.vertex_count();
    DisjointSet verts(nv);
    for (const Face& f : mesh.faces) {
        verts.unite(f[0], f[1]);
        verts.unite(f[1], f[2]);
    }
    std::map<int, std::vector<int>> by_root;  // keyed by representative; ordered
    for (int fi = 0; fi < mesh.face_count(); ++fi)
        by_root[verts.find(mesh.faces[static_cast<std::size_t>(fi)][0])].push_back(fi);

    std::vector<std::vector<int>> components;
    components.reserve(by_root.size());
    for (auto& [root, faces] : by_root) components.push_back(std::move(faces));
    // Order components by their lowest face index.
    std::sort(components.begin(), components.end(),
              [](const std::vector<int>& a, const std::vector<int>& b) { return a.front() < b.front(); });
    return components;
}

Mesh submesh(const Mesh& mesh, const std::vector<int>& face_indices) {
    Mesh out;
    std::vector<int> remap(mesh.vertices.size(), -1);
    for (int f : face_indices) {
        if (f < 0 || f >= mesh.face_count()) throw PreconditionError("submesh: face index out of range");
        const Face& t = mesh.faces[static_cast<std::size_t>(f)];
        Face mapped;
        for (int k = 0; k < 3; ++k) {
            const int v = t[static_cast<std::size_t>(k)];
            if (remap[static_cast<std::size_t>(v)] < 0) {
                remap[static_cast<std::size_t>(v)] = static_cast<int>(out.vertices.size());
                out.vertices.push_back(mesh.vertices[static_cast<std::size_t>(v)]);
            }
            mapped[static_cast<std::size_t>(k)] = remap[static_cast<std::size_t>(v)];
        }
        out.faces.push_back(mapped);
    }
    return out;
}

}  // namespace tessera
