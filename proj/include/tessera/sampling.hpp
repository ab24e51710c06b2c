#pragma once

#include <cstdint>
#include <vector>

#include "tessera/mesh.hpp"

namespace tessera {

struct SurfaceSamples {
    std::vector<Vec3> points;
    std::vector<Vec3> normals;  // unit face normals, one per point
    std::uint64_t seed = 0;
    int count = 0;
};

// Area-weighted surface sampling with uniform barycentric coordinates. All
// randomness is counter-based on (seed, sample index), so a fixed seed gives
// bit-identical output for any thread count. Throws on zero total area.
SurfaceSamples sample_surface(const Mesh& mesh, int count, std::uint64_t seed);

}  // namespace tessera
