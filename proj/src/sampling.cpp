#include "tessera/sampling.hpp"

#include <algorithm>
#include <cmath>

#include "tessera/error.hpp"
#include "tessera/rng.hpp"

namespace tessera {

SurfaceSamples sample_surface(const Mesh& mesh, int count, std::uint64_t seed) {
    if (count < 0) throw PreconditionError("sample_surface: negative count");

    // Area CDF over faces with nonzero area.
    std::vector<double> cdf;
    std::vector<int> face_of;
    cdf.reserve(mesh.faces.size());
    face_of.reserve(mesh.faces.size());
    double total = 0.0;
    for (int f = 0; f < mesh.face_count(); ++f) {
        const double a = mesh.face_area(f);
        if (a > 0.0) {
            total += a;
            cdf.push_back(total);
            face_of.push_back(f);
        }
    }
    if (total <= 0.0) throw PreconditionError("sample_surface: mesh has zero total area");

    SurfaceSamples out;
    out.seed = seed;
    out.count = count;
    out.points.resize(static_cast<std::size_t>(count));
    out.normals.resize(static_cast<std::size_t>(count));

#pragma omp parallel for schedule(static)
    for (int i = 0; i < count; ++i) {
        const std::uint64_t base = static_cast<std::uint64_t>(i) * 3ULL;
        const double pick = uniform01(seed, base) * total;
        const auto it = std::lower_bound(cdf.begin(), cdf.end(), pick);
        const std::size_t slot = std::min(static_cast<std::size_t>(it - cdf.begin()), cdf.size() - 1);
        const int f = face_of[slot];
        const Face& t = mesh.faces[static_cast<std::size_t>(f)];
        double u = uniform01(seed, base + 1);
        double v = uniform01(seed, base + 2);
        if (u + v > 1.0) {
            u = 1.0 - u;
            v = 1.0 - v;
        }
        const Vec3& a = mesh.vertices[static_cast<std::size_t>(t[0])];
        const Vec3& b = mesh.vertices[static_cast<std::size_t>(t[1])];
        const Vec3& c = mesh.vertices[static_cast<std::size_t>(t[2])];
        out.points[static_cast<std::size_t>(i)] = a + (b - a) * u + (c - a) * v;
        out.normals[static_cast<std::size_t>(i)] = normalized(cross(b - a, c - a));
    }
    return out;
}

}  // namespace tessera
