#include "tessera/obj_io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "tessera/error.hpp"

namespace tessera {

namespace {

// Parses the vertex index out of an OBJ face token ("7", "7/2", "7//3",
// "7/2/3", or negative relative forms).
int parse_face_index(const std::string& token, int vertex_count, const std::string& name, int line_no) {
    std::size_t end = token.find('/');
    const std::string head = token.substr(0, end);
    int idx = 0;
    try {
        std::size_t consumed = 0;
        idx = std::stoi(head, &consumed);
        if (consumed != head.size()) throw std::invalid_argument(head);
    } catch (const std::exception&) {
        throw ParseError(name + ":" + std::to_string(line_no) + ": malformed face index '" + token + "'");
    }
    if (idx > 0) {
        if (idx > vertex_count)
            throw ParseError(name + ":" + std::to_string(line_no) + ": face references vertex " +
                             std::to_string(idx) + " but only " + std::to_string(vertex_count) + " defined");
        return idx - 1;
    }
    if (idx < 0) {
        const int resolved = vertex_count + idx;
        if (resolved < 0)
            throw ParseError(name + ":" + std::to_string(line_no) + ": relative face index " +
                             std::to_string(idx) + " precedes the first vertex");
        return resolved;
    }
    throw ParseError(name + ":" + std::to_string(line_no) + ": face index 0 is invalid (OBJ is 1-based)");
}

}  // namespace

Mesh load_obj_stream(std::istream& in, const std::string& name) {
    Mesh mesh;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::istringstream ls(line);
        std::string tag;
        if (!(ls >> tag)) continue;  // blank line
        if (tag == "#" || tag[0] == '#') continue;

        if (tag == "v") {
            Vec3 v;
            if (!(ls >> v.x >> v.y >> v.z))
                throw ParseError(name + ":" + std::to_string(line_no) + ": malformed vertex line '" + line + "'");
            mesh.vertices.push_back(v);
        } else if (tag == "f") {
            std::vector<int> corners;
            std::string token;
            while (ls >> token)
                corners.push_back(parse_face_index(token, mesh.vertex_count(), name, line_no));
            if (corners.size() < 3)
                throw ParseError(name + ":" + std::to_string(line_no) + ": face with fewer than 3 vertices");
            // Fan triangulation preserves polygon winding.
            for (std::size_t k = 1; k + 1 < corners.size(); ++k)
                mesh.faces.push_back(Face{corners[0], corners[k], corners[k + 1]});
        }
        // vn, vt, and grouping/material records are ignored.
    }
    return mesh;
}

Mesh load_obj(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "' for reading");
    return load_obj_stream(in, path);
}

void save_obj_stream(const Mesh& mesh, std::ostream& out) {
    char buf[128];
    for (const Vec3& v : mesh.vertices) {
        std::snprintf(buf, sizeof(buf), "v %.9g %.9g %.9g\n", v.x, v.y, v.z);
        out << buf;
    }
    for (const Face& f : mesh.faces) out << "f " << f[0] + 1 << ' ' << f[1] + 1 << ' ' << f[2] + 1 << '\n';
}

void save_obj(const Mesh& mesh, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    save_obj_stream(mesh, out);
    out.flush();
    if (!out) throw IoError("write to '" + path + "' failed");
}

}  // namespace tessera
