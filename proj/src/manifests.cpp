#include "tessera/manifests.hpp"

#include <fstream>

#include "tessera/error.hpp"

namespace tessera {

namespace {

Json vec3_to_json(const Vec3& v) { return Json::array({v.x, v.y, v.z}); }

Vec3 vec3_from_json(const Json& j) {
    if (!j.is_array() || j.size() != 3) throw ParseError("manifest: expected a 3-element array");
    return Vec3{j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

Axis axis_from_string(const std::string& s) {
    if (s == "x") return Axis::x;
    if (s == "y") return Axis::y;
    if (s == "z") return Axis::z;
    throw ParseError("manifest: unknown axis '" + s + "'");
}

const char* axis_to_string(Axis a) {
    switch (a) {
        case Axis::x: return "x";
        case Axis::y: return "y";
        case Axis::z: return "z";
    }
    return "y";
}

SegmentationSource source_from_string(const std::string& s) {
    if (s == "random_fps") return SegmentationSource::random_fps;
    if (s == "connected_components") return SegmentationSource::connected_components;
    if (s == "external_labels") return SegmentationSource::external_labels;
    throw ParseError("manifest: unknown segmentation source '" + s + "'");
}

}  // namespace

Json frame_to_json(const PatchFrame& frame) {
    Json j;
    j["origin"] = vec3_to_json(frame.origin);
    j["extent"] = frame.extent;
    j["resolution"] = frame.resolution;
    return j;
}

PatchFrame frame_from_json(const Json& j) {
    PatchFrame frame;
    frame.origin = vec3_from_json(j.at("origin"));
    frame.extent = j.at("extent").get<double>();
    frame.resolution = j.at("resolution").get<int>();
    if (frame.extent <= 0.0 || frame.resolution < 2) throw ParseError("manifest: invalid frame");
    return frame;
}

Json segmentation_to_json(const Segmentation& seg) {
    Json j;
    j["source"] = to_string(seg.source);
    j["up_axis"] = axis_to_string(seg.up_axis);
    Json patches = Json::array();
    for (const Patch& p : seg.patches) {
        Json pj;
        pj["id"] = p.id;
        pj["faces"] = p.face_indices;
        pj["centroid"] = vec3_to_json(p.centroid);
        patches.push_back(std::move(pj));
    }
    j["patches"] = std::move(patches);
    j["order"] = seg.order;
    Json adj = Json::array();
    for (const auto& [a, b] : seg.adjacency) adj.push_back(Json::array({a, b}));
    j["adjacency"] = std::move(adj);
    return j;
}

Segmentation segmentation_from_json(const Json& j) {
    Segmentation seg;
    seg.source = source_from_string(j.at("source").get<std::string>());
    seg.up_axis = axis_from_string(j.at("up_axis").get<std::string>());
    for (const Json& pj : j.at("patches")) {
        Patch p;
        p.id = pj.at("id").get<int>();
        p.face_indices = pj.at("faces").get<std::vector<int>>();
        p.centroid = vec3_from_json(pj.at("centroid"));
        seg.patches.push_back(std::move(p));
    }
    seg.order = j.at("order").get<std::vector<int>>();
    for (const Json& e : j.at("adjacency")) {
        if (!e.is_array() || e.size() != 2) throw ParseError("manifest: bad adjacency entry");
        seg.adjacency.emplace_back(e[0].get<int>(), e[1].get<int>());
    }
    return seg;
}

Json metrics_to_json(const MetricsReport& r) {
    Json j;
    j["hd"] = r.hd;
    j["cd_l1"] = r.cd_l1;
    j["cd_l2_x1000"] = r.cd_l2_x1000;
    j["nc"] = r.nc;
    j["f1"] = r.f1;
    j["ecd"] = r.ecd;
    j["ef1"] = r.ef1;
    j["sample_count"] = r.sample_count;
    j["tau"] = r.tau;
    j["edge_params"] = Json{{"radius", r.edge_params.radius},
                            {"normal_dot_threshold", r.edge_params.normal_dot_threshold}};
    j["edge_degenerate"] = r.edge_degenerate;
    return j;
}

Json assembly_report_to_json(const AssemblyState& state, const Mesh& final_mesh) {
    Json j;
    Json patches = Json::array();
    for (const PatchRecord& r : state.records) {
        Json pj;
        pj["patch_id"] = r.patch_id;
        pj["skipped"] = r.skipped;
        pj["translation"] = vec3_to_json(r.translation);
        pj["mean_gap"] = r.seam.mean_gap;
        pj["max_gap"] = r.seam.max_gap;
        pj["welded_vertices"] = r.seam.welded_vertices;
        pj["post_weld_matched_gap"] = r.post_weld_matched_gap;
        pj["boundary_faces"] = r.boundary_faces;
        pj["faces_added"] = r.faces_added;
        pj["echo_faces"] = r.echo_faces;
        pj["collapsed_faces"] = r.collapsed_faces;
        pj["discarded_tokens"] = r.diagnostics.discarded_tokens;
        pj["faces_parsed"] = r.diagnostics.faces_parsed;
        patches.push_back(std::move(pj));
    }
    j["patches"] = std::move(patches);
    j["raw_vertices"] = state.mesh.vertex_count();
    j["raw_faces"] = state.mesh.face_count();
    j["final_vertices"] = final_mesh.vertex_count();
    j["final_faces"] = final_mesh.face_count();
    return j;
}

Json filter_report_to_json(const FilterReport& r) {
    Json j;
    j["face_count"] = r.face_count;
    j["point_face_ratio"] = r.point_face_ratio;
    j["accepted"] = r.accepted;
    j["reason"] = to_string(r.rejection_reason);
    return j;
}

Json model_config_to_json(const ModelConfig& c) {
    Json j;
    j["layers"] = c.layers;
    j["hidden_dim"] = c.hidden_dim;
    j["heads"] = c.heads;
    j["gru_hidden"] = c.gru_hidden;
    j["vocab_size"] = c.vocab_size;
    j["window"] = c.window;
    j["window_overlap"] = c.window_overlap;
    j["temperature"] = c.temperature;
    j["ablation"] = Json{{"use_global_pc", c.ablation.use_global_pc},
                         {"use_boundary_gru", c.ablation.use_boundary_gru},
                         {"use_boundary_self_attention", c.ablation.use_boundary_self_attention}};
    j["seed"] = c.seed;
    j["point_feature_dim"] = c.point_feature_dim;
    j["point_hidden_dim"] = c.point_hidden_dim;
    j["mlp_ratio"] = c.mlp_ratio;
    return j;
}

ModelConfig model_config_from_json(const Json& j) {
    ModelConfig c;
    c.layers = j.value("layers", c.layers);
    c.hidden_dim = j.value("hidden_dim", c.hidden_dim);
    c.heads = j.value("heads", c.heads);
    c.gru_hidden = j.value("gru_hidden", c.gru_hidden);
    c.vocab_size = j.value("vocab_size", c.vocab_size);
    c.window = j.value("window", c.window);
    c.window_overlap = j.value("window_overlap", c.window_overlap);
    c.temperature = j.value("temperature", c.temperature);
    if (j.contains("ablation")) {
        const Json& a = j.at("ablation");
        c.ablation.use_global_pc = a.value("use_global_pc", true);
        c.ablation.use_boundary_gru = a.value("use_boundary_gru", true);
        c.ablation.use_boundary_self_attention = a.value("use_boundary_self_attention", true);
    }
    c.seed = j.value("seed", c.seed);
    c.point_feature_dim = j.value("point_feature_dim", c.point_feature_dim);
    c.point_hidden_dim = j.value("point_hidden_dim", c.point_hidden_dim);
    c.mlp_ratio = j.value("mlp_ratio", c.mlp_ratio);
    if (c.hidden_dim % c.heads != 0) throw ParseError("model config: hidden_dim must divide by heads");
    if (!(c.window_overlap >= 0.0 && c.window_overlap < 1.0))
        throw ParseError("model config: window_overlap must lie in [0, 1)");
    if (!(c.temperature >= 0.0)) throw ParseError("model config: temperature must be nonnegative");
    return c;
}

void write_json_file(const std::string& path, const Json& j) {
    std::ofstream file(path);
    if (!file) throw IoError("write_json_file: cannot open '" + path + "'");
    file << j.dump(2) << '\n';
    if (!file) throw IoError("write_json_file: write failed for '" + path + "'");
}

Json read_json_file(const std::string& path) {
    std::ifstream file(path);
    if (!file) throw IoError("read_json_file: cannot open '" + path + "'");
    try {
        return Json::parse(file);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError("read_json_file: '" + path + "': " + e.what());
    }
}

}  // namespace tessera
