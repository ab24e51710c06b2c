#pragma once

#include <iosfwd>
#include <string>

#include "tessera/mesh.hpp"

namespace tessera {

// ASCII OBJ reader. Supports `v` and `f` records; `vn`/`vt`/`o`/`g`/`s`/
// `usemtl`/`mtllib` lines are ignored. Polygon faces are fan-triangulated as
// (v0,v1,v2), (v0,v2,v3), ... preserving winding. Negative (relative) indices
// and `v/vt/vn` slash forms are accepted.
Mesh load_obj(const std::string& path);
Mesh load_obj_stream(std::istream& in, const std::string& name);

// Writes `v` records with 9 significant digits and 1-based `f` records.
void save_obj(const Mesh& mesh, const std::string& path);
void save_obj_stream(const Mesh& mesh, std::ostream& out);

}  // namespace tessera
