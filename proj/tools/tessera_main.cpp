// tessera command line: preprocess, segment, tokenize, detokenize, train-toy,
// generate, assemble, eval, pipeline. Every run copies its resolved config
// next to its outputs; identical config and seeds give byte-identical files.

#include <CLI11.hpp>

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "tessera/error.hpp"
#include "tessera/manifests.hpp"
#include "tessera/mesh.hpp"
#include "tessera/metrics.hpp"
#include "tessera/obj_io.hpp"
#include "tessera/pipeline.hpp"
#include "tessera/preprocess.hpp"
#include "tessera/rng.hpp"
#include "tessera/toy_model.hpp"

namespace fs = std::filesystem;
using tessera::Json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;   // usage, parse, or I/O failure
constexpr int kExitEmpty = 2;   // command produced an empty result set
constexpr int kExitInternal = 3;

Json default_config() {
    Json j;
    j["normalize_input"] = false;
    j["segmentation"] = Json{{"mode", "random_fps"}, {"lambda", 1.0},   {"seed", 1},
                             {"up_axis", "y"},       {"patch_count", 0}, {"labels_path", ""}};
    j["quantization"] = Json{{"resolution", tessera::kQuantResolution}};
    j["boundary"] = Json{{"k", tessera::kBoundaryFaceLimit}, {"placeholder_len", tessera::kPlaceholderLength}};
    j["model"] = tessera::model_config_to_json(tessera::ModelConfig{});
    j["metrics"] = Json{{"tau", 0.01}, {"sample_count", 16384}, {"seed_generated", 1}, {"seed_reference", 1}};
    j["assemble"] = Json{{"weld_tol", -1.0}};
    j["train"] = Json{{"epochs", 100},        {"lr_start", 1e-4}, {"lr_end", 1e-5},
                      {"optimizer", "sgd_momentum"}, {"momentum", 0.9},  {"grad_clip", 1.0},
                      {"point_count", 1024},  {"seed", 1},        {"single_mesh", false}};
    j["generate"] = Json{{"temperature", 0.5}, {"seed", 1}, {"point_count", 1024}};
    j["preprocess"] = Json{{"face_lo", 500},   {"face_hi", 32000}, {"ratio_max", tessera::kPointFaceRatioMax},
                           {"augment", false}, {"augment_seed", 1}};
    return j;
}

void merge_json(Json& base, const Json& over) {
    for (const auto& [key, value] : over.items()) {
        if (value.is_object() && base.contains(key) && base[key].is_object()) {
            merge_json(base[key], value);
        } else {
            base[key] = value;
        }
    }
}

tessera::SegmentationSource mode_from_string(const std::string& s) {
    if (s == "random_fps") return tessera::SegmentationSource::random_fps;
    if (s == "components") return tessera::SegmentationSource::connected_components;
    if (s == "connected_components") return tessera::SegmentationSource::connected_components;
    if (s == "labels") return tessera::SegmentationSource::external_labels;
    if (s == "external_labels") return tessera::SegmentationSource::external_labels;
    throw tessera::ParseError("unknown segmentation mode '" + s + "'");
}

tessera::Axis axis_from_string(const std::string& s) {
    if (s == "x") return tessera::Axis::x;
    if (s == "y") return tessera::Axis::y;
    if (s == "z") return tessera::Axis::z;
    throw tessera::ParseError("unknown axis '" + s + "'");
}

std::vector<int> load_labels(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw tessera::IoError("cannot open label file: " + path);
    std::vector<int> labels;
    int v = 0;
    while (in >> v) labels.push_back(v);
    if (!in.eof()) throw tessera::ParseError("label file has non-integer content: " + path);
    return labels;
}

tessera::SegmentationSpec seg_spec_from(const Json& cfg) {
    const Json& j = cfg.at("segmentation");
    tessera::SegmentationSpec spec;
    spec.mode = mode_from_string(j.at("mode").get<std::string>());
    spec.lambda_rand = j.at("lambda").get<double>();
    spec.seed = j.at("seed").get<std::uint64_t>();
    spec.up_axis = axis_from_string(j.at("up_axis").get<std::string>());
    spec.patch_count_override = j.at("patch_count").get<int>();
    if (spec.mode == tessera::SegmentationSource::external_labels) {
        const std::string path = j.at("labels_path").get<std::string>();
        if (path.empty()) throw tessera::ParseError("labels mode needs segmentation.labels_path");
        spec.labels = load_labels(path);
    }
    return spec;
}

tessera::AssembleOptions assemble_options(const Json& cfg) {
    tessera::AssembleOptions opts;
    opts.boundary_k = cfg.at("boundary").at("k").get<int>();
    opts.placeholder_length = cfg.at("boundary").at("placeholder_len").get<int>();
    opts.weld_tol = cfg.at("assemble").at("weld_tol").get<double>();
    return opts;
}

tessera::EvalOptions eval_options(const Json& cfg) {
    const Json& j = cfg.at("metrics");
    tessera::EvalOptions opts;
    opts.sample_count = j.at("sample_count").get<int>();
    opts.tau = j.at("tau").get<double>();
    opts.seed_generated = j.at("seed_generated").get<std::uint64_t>();
    opts.seed_reference = j.at("seed_reference").get<std::uint64_t>();
    return opts;
}

void validate_cfg(const Json& cfg) {
    const int resolution = cfg.at("quantization").at("resolution").get<int>();
    if (resolution != tessera::kQuantResolution)
        throw tessera::ParseError("quantization.resolution is fixed at " +
                                  std::to_string(tessera::kQuantResolution));
    if (cfg.at("boundary").at("k").get<int>() < 1) throw tessera::ParseError("boundary.k must be >= 1");
}

tessera::Mesh load_input_mesh(const Json& cfg, const std::string& path) {
    tessera::Mesh mesh = tessera::load_obj(path);
    if (cfg.at("normalize_input").get<bool>()) mesh = tessera::normalize_mesh(mesh).first;
    return mesh;
}

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw tessera::IoError("cannot create output directory: " + dir);
}

void write_config_copy(const Json& cfg, const std::string& dir) {
    tessera::write_json_file((fs::path(dir) / "resolved_config.json").string(), cfg);
}

std::string padded(int value, int width) {
    std::string s = std::to_string(value);
    while (static_cast<int>(s.size()) < width) s.insert(s.begin(), '0');
    return s;
}

int cmd_preprocess(const Json& cfg, const std::string& input_dir, const std::string& output_dir) {
    if (!fs::is_directory(input_dir)) throw tessera::IoError("input is not a directory: " + input_dir);
    ensure_dir(output_dir);

    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(input_dir))
        if (entry.is_regular_file() && entry.path().extension() == ".obj") files.push_back(entry.path());
    std::sort(files.begin(), files.end());

    const Json& pj = cfg.at("preprocess");
    const int lo = pj.at("face_lo").get<int>();
    const int hi = pj.at("face_hi").get<int>();
    const double ratio_max = pj.at("ratio_max").get<double>();
    const bool augment = pj.at("augment").get<bool>();
    const std::uint64_t augment_seed = pj.at("augment_seed").get<std::uint64_t>();

    Json entries = Json::array();
    int accepted = 0;
    for (std::size_t i = 0; i < files.size(); ++i) {
        tessera::Mesh mesh = tessera::clean_mesh(tessera::load_obj(files[i].string()));
        const tessera::FilterReport report = tessera::filter_mesh(mesh, lo, hi, ratio_max);
        Json entry = tessera::filter_report_to_json(report);
        entry["file"] = files[i].filename().string();
        entry["augmented"] = false;
        if (report.accepted) {
            if (augment) {
                mesh = tessera::augment_mesh(mesh, tessera::hash_combine(augment_seed, i));
                entry["augmented"] = true;
            }
            tessera::save_obj(mesh, (fs::path(output_dir) / files[i].filename()).string());
            ++accepted;
        }
        entries.push_back(std::move(entry));
    }

    Json manifest;
    manifest["meshes"] = std::move(entries);
    manifest["accepted_count"] = accepted;
    tessera::write_json_file((fs::path(output_dir) / "preprocess_manifest.json").string(), manifest);
    write_config_copy(cfg, output_dir);
    return accepted == 0 ? kExitEmpty : kExitOk;
}

int cmd_segment(const Json& cfg, const std::string& input, const std::string& output_dir) {
    const tessera::Mesh mesh = load_input_mesh(cfg, input);
    const tessera::Segmentation seg = tessera::make_segmentation(mesh, seg_spec_from(cfg));
    tessera::validate_segmentation(seg, mesh);
    ensure_dir(output_dir);
    tessera::write_json_file((fs::path(output_dir) / "segmentation.json").string(),
                             tessera::segmentation_to_json(seg));
    write_config_copy(cfg, output_dir);
    return kExitOk;
}

// Teacher-forced tokenization: one MMTK file per order position, with frames
// computed against the ground-truth prefix exactly as training does.
int cmd_tokenize(const Json& cfg, const std::string& input, const std::string& output_dir) {
    const tessera::Mesh mesh = load_input_mesh(cfg, input);
    const tessera::Segmentation seg = tessera::make_segmentation(mesh, seg_spec_from(cfg));
    tessera::validate_segmentation(seg, mesh);
    const int boundary_k = cfg.at("boundary").at("k").get<int>();
    ensure_dir(output_dir);

    Json frames = Json::array();
    std::vector<int> prior;
    for (std::size_t pos = 0; pos < seg.order.size(); ++pos) {
        const tessera::Patch& patch = seg.patches[static_cast<std::size_t>(seg.order[pos])];
        const tessera::Mesh prior_mesh = tessera::submesh(mesh, prior);
        const std::vector<int> sel = tessera::select_boundary_faces(prior_mesh, mesh, patch, boundary_k);
        std::vector<std::array<tessera::Vec3, 3>> positions;
        positions.reserve(sel.size());
        for (int f : sel) {
            const tessera::Face& t = prior_mesh.faces[static_cast<std::size_t>(f)];
            positions.push_back({prior_mesh.vertices[static_cast<std::size_t>(t[0])],
                                 prior_mesh.vertices[static_cast<std::size_t>(t[1])],
                                 prior_mesh.vertices[static_cast<std::size_t>(t[2])]});
        }
        const tessera::PatchFrame frame = tessera::compute_frame(mesh, patch.face_indices, positions);
        const tessera::TokenSequence tokens =
            tessera::tokenize_patch(tessera::quantize_patch(mesh, patch.face_indices, frame));
        const std::string name = "tokens_" + padded(static_cast<int>(pos), 3) + ".mmtk";
        tessera::save_tokens(tokens, (fs::path(output_dir) / name).string());

        Json fj;
        fj["order_position"] = static_cast<int>(pos);
        fj["patch_id"] = patch.id;
        fj["tokens_file"] = name;
        fj["token_count"] = static_cast<int>(tokens.tokens.size());
        fj["frame"] = tessera::frame_to_json(frame);
        frames.push_back(std::move(fj));
        prior.insert(prior.end(), patch.face_indices.begin(), patch.face_indices.end());
    }

    tessera::write_json_file((fs::path(output_dir) / "segmentation.json").string(),
                             tessera::segmentation_to_json(seg));
    tessera::write_json_file((fs::path(output_dir) / "frames.json").string(), frames);
    write_config_copy(cfg, output_dir);
    return kExitOk;
}

int cmd_detokenize(const std::string& tokens_path, const std::string& frames_path, int index,
                   const std::string& output) {
    const tessera::TokenSequence tokens = tessera::load_tokens(tokens_path);
    const Json fj = tessera::read_json_file(frames_path);
    tessera::PatchFrame frame;
    if (fj.is_array()) {
        if (index < 0 || index >= static_cast<int>(fj.size()))
            throw tessera::ParseError("frame index out of range for " + frames_path);
        frame = tessera::frame_from_json(fj.at(static_cast<std::size_t>(index)).at("frame"));
    } else if (fj.contains("frame")) {
        frame = tessera::frame_from_json(fj.at("frame"));
    } else {
        frame = tessera::frame_from_json(fj);
    }

    tessera::DetokenizeDiagnostics diag;
    const tessera::QuantizedPatch qp = tessera::detokenize_patch(tokens, frame, &diag);
    const tessera::Mesh mesh = tessera::patch_to_mesh(qp);
    tessera::save_obj(mesh, output);

    Json report;
    report["faces_parsed"] = diag.faces_parsed;
    report["discarded_tokens"] = diag.discarded_tokens;
    report["vertices"] = mesh.vertex_count();
    report["faces"] = mesh.face_count();
    tessera::write_json_file(fs::path(output).replace_extension(".report.json").string(), report);
    return mesh.faces.empty() ? kExitEmpty : kExitOk;
}

int cmd_train_toy(const Json& cfg, const std::string& input, const std::string& output_dir) {
    const tessera::Mesh mesh = load_input_mesh(cfg, input);
    const Json& tj = cfg.at("train");
    const int epochs = tj.at("epochs").get<int>();
    if (epochs < 1) throw tessera::ParseError("train.epochs must be >= 1");
    const double lr_start = tj.at("lr_start").get<double>();
    const double lr_end = tj.at("lr_end").get<double>();
    const int point_count = tj.at("point_count").get<int>();
    const std::uint64_t train_seed = tj.at("seed").get<std::uint64_t>();
    const bool single_mesh = tj.at("single_mesh").get<bool>();
    const int boundary_k = cfg.at("boundary").at("k").get<int>();
    const int placeholder_len = cfg.at("boundary").at("placeholder_len").get<int>();

    tessera::OptimSettings opt;
    const std::string optimizer = tj.at("optimizer").get<std::string>();
    if (optimizer == "sgd_momentum") {
        opt.kind = tessera::OptimSettings::Kind::sgd_momentum;
    } else if (optimizer == "adam") {
        opt.kind = tessera::OptimSettings::Kind::adam;
    } else {
        throw tessera::ParseError("unknown optimizer '" + optimizer + "'");
    }
    opt.momentum = tj.at("momentum").get<double>();
    opt.grad_clip = tj.at("grad_clip").get<double>();

    tessera::ToyModelF model(tessera::model_config_from_json(cfg.at("model")));

    ensure_dir(output_dir);
    std::ofstream log((fs::path(output_dir) / "train_log.jsonl").string());
    if (!log) throw tessera::IoError("cannot open training log in " + output_dir);

    tessera::SegmentationSpec base_spec = seg_spec_from(cfg);
    tessera::Segmentation fixed_seg;
    if (!single_mesh) fixed_seg = tessera::make_segmentation(mesh, base_spec);

    const int report_every = std::max(1, epochs / 10);
    for (int epoch = 0; epoch < epochs; ++epoch) {
        tessera::Segmentation seg;
        if (single_mesh) {
            // Appendix-style single-mesh regime: fresh random segmentation
            // every epoch, same patch-count settings.
            tessera::SegmentationSpec spec = base_spec;
            spec.seed = tessera::hash_combine(train_seed, static_cast<std::uint64_t>(epoch));
            seg = tessera::make_segmentation(mesh, spec);
        } else {
            seg = fixed_seg;
        }
        const std::vector<tessera::TrainingExample> batch = tessera::build_training_examples(
            mesh, seg, point_count, boundary_k, placeholder_len,
            tessera::hash_combine(train_seed, 0x5eed0000ull + static_cast<std::uint64_t>(epoch)));
        long long tokens = 0;
        for (const auto& ex : batch) tokens += static_cast<long long>(ex.target_tokens.tokens.size()) - 1;
        const double lr = tessera::cosine_lr(epoch, epochs, lr_start, lr_end);
        const double loss = model.train_step(batch, lr, opt);

        Json line;
        line["step"] = epoch;
        line["loss"] = loss;
        line["lr"] = lr;
        line["tokens"] = tokens;
        log << line.dump() << '\n';
        if (epoch % report_every == 0 || epoch + 1 == epochs)
            std::cerr << "epoch " << epoch << " loss " << loss << "\n";
    }
    log.close();
    if (!log) throw tessera::IoError("training log write failed in " + output_dir);

    model.save_checkpoint((fs::path(output_dir) / "model.tsck").string());
    write_config_copy(cfg, output_dir);
    return kExitOk;
}

int run_assembly_command(const Json& cfg, const std::string& input, const std::string& checkpoint,
                         const std::string& output_dir, const std::string& mesh_name) {
    const tessera::Mesh mesh = load_input_mesh(cfg, input);
    const tessera::Segmentation seg = tessera::make_segmentation(mesh, seg_spec_from(cfg));
    tessera::validate_segmentation(seg, mesh);

    std::optional<tessera::ToyModelF> model;
    tessera::TokenProvider provider;
    if (checkpoint.empty()) {
        provider = tessera::ground_truth_provider(mesh);
    } else {
        model.emplace(tessera::ToyModelF::load_checkpoint(checkpoint));
        const Json& gj = cfg.at("generate");
        provider = tessera::model_provider(*model, mesh, gj.at("point_count").get<int>(),
                                           gj.at("temperature").get<double>(),
                                           gj.at("seed").get<std::uint64_t>());
    }
    const tessera::AssemblyResult result = tessera::assemble(mesh, seg, provider, assemble_options(cfg));

    ensure_dir(output_dir);
    tessera::save_obj(result.final_mesh, (fs::path(output_dir) / mesh_name).string());
    tessera::write_json_file((fs::path(output_dir) / "segmentation.json").string(),
                             tessera::segmentation_to_json(seg));
    tessera::write_json_file((fs::path(output_dir) / "assembly_report.json").string(),
                             tessera::assembly_report_to_json(result.state, result.final_mesh));
    write_config_copy(cfg, output_dir);
    return result.final_mesh.faces.empty() ? kExitEmpty : kExitOk;
}

int cmd_eval(const Json& cfg, const std::string& generated, const std::string& reference,
             const std::string& output_dir) {
    const tessera::Mesh gen = tessera::load_obj(generated);
    const tessera::Mesh ref = tessera::load_obj(reference);
    const tessera::MetricsReport report = tessera::evaluate(gen, ref, eval_options(cfg));
    ensure_dir(output_dir);
    tessera::write_json_file((fs::path(output_dir) / "metrics.json").string(),
                             tessera::metrics_to_json(report));
    write_config_copy(cfg, output_dir);
    return kExitOk;
}

int cmd_pipeline(const Json& cfg, const std::string& input, const std::string& checkpoint,
                 bool ground_truth_tokens, const std::string& output_dir) {
    const tessera::Mesh mesh = load_input_mesh(cfg, input);

    tessera::PipelineOptions opts;
    opts.segmentation = seg_spec_from(cfg);
    opts.assemble = assemble_options(cfg);
    opts.eval = eval_options(cfg);
    opts.ground_truth_tokens = ground_truth_tokens;
    opts.checkpoint = checkpoint;
    const Json& gj = cfg.at("generate");
    opts.point_count = gj.at("point_count").get<int>();
    opts.temperature = gj.at("temperature").get<double>();
    opts.generate_seed = gj.at("seed").get<std::uint64_t>();

    const tessera::PipelineResult result = tessera::run_pipeline(mesh, opts);

    ensure_dir(output_dir);
    tessera::save_obj(result.assembly.final_mesh, (fs::path(output_dir) / "final.obj").string());
    tessera::write_json_file((fs::path(output_dir) / "segmentation.json").string(),
                             tessera::segmentation_to_json(result.segmentation));
    tessera::write_json_file((fs::path(output_dir) / "assembly_report.json").string(),
                             tessera::assembly_report_to_json(result.assembly.state,
                                                              result.assembly.final_mesh));
    if (result.evaluated)
        tessera::write_json_file((fs::path(output_dir) / "metrics.json").string(),
                                 tessera::metrics_to_json(result.metrics));
    write_config_copy(cfg, output_dir);
    return result.evaluated ? kExitOk : kExitEmpty;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"tessera: patch-based mesh tokenization, generation, and evaluation"};
    app.require_subcommand(1);

    std::string config_path;
    app.add_option("--config", config_path, "JSON config file overriding defaults");
    std::uint64_t global_seed = 0;
    CLI::Option* seed_opt = app.add_option("--seed", global_seed, "override every seed in the config");

    std::string input, output, checkpoint, generated, reference, tokens_path, frames_path;
    std::string mode, up_axis, labels_path, optimizer;
    double lambda = 0.0, temperature = 0.0, tau = 0.0, weld_tol = 0.0, lr_start = 0.0, lr_end = 0.0;
    int patch_count = 0, boundary_k = 0, epochs = 0, point_count = 0, sample_count = 0, frame_index = 0;
    bool augment = false, single_mesh = false, normalize = false, ground_truth_tokens = false;

    const auto add_seg_flags = [&](CLI::App* sub) {
        sub->add_option("--mode", mode, "random_fps | components | labels");
        sub->add_option("--lambda", lambda, "patch density multiplier in [0.5, 2.5]");
        sub->add_option("--up-axis", up_axis, "BFS start axis: x | y | z");
        sub->add_option("--labels", labels_path, "per-face label file (labels mode)");
        sub->add_option("--patch-count", patch_count, "override the face-count formula");
        sub->add_flag("--normalize", normalize, "fit the input into the unit cube first");
    };

    CLI::App* p_pre = app.add_subcommand("preprocess", "clean, filter, and optionally augment a mesh directory");
    p_pre->add_option("--input", input, "input directory of OBJ files")->required();
    p_pre->add_option("--output", output, "output directory")->required();
    p_pre->add_flag("--augment", augment, "apply random rotation and scale to accepted meshes");

    CLI::App* p_seg = app.add_subcommand("segment", "segment a mesh into ordered patches");
    p_seg->add_option("--input", input, "input OBJ")->required();
    p_seg->add_option("--output", output, "output directory")->required();
    add_seg_flags(p_seg);

    CLI::App* p_tok = app.add_subcommand("tokenize", "quantize each patch into a token file");
    p_tok->add_option("--input", input, "input OBJ")->required();
    p_tok->add_option("--output", output, "output directory")->required();
    p_tok->add_option("--boundary-k", boundary_k, "boundary faces per patch");
    add_seg_flags(p_tok);

    CLI::App* p_det = app.add_subcommand("detokenize", "decode a token file back into an OBJ");
    p_det->add_option("--tokens", tokens_path, "MMTK token file")->required();
    p_det->add_option("--frames", frames_path, "frames.json or a single frame JSON")->required();
    p_det->add_option("--index", frame_index, "entry in frames.json (default 0)");
    p_det->add_option("--output", output, "output OBJ")->required();

    CLI::App* p_train = app.add_subcommand("train-toy", "overfit the toy model on one mesh");
    p_train->add_option("--input", input, "training mesh OBJ")->required();
    p_train->add_option("--output", output, "output directory")->required();
    p_train->add_option("--epochs", epochs, "training epochs");
    p_train->add_option("--lr-start", lr_start, "cosine schedule start");
    p_train->add_option("--lr-end", lr_end, "cosine schedule end");
    p_train->add_option("--optimizer", optimizer, "sgd_momentum | adam");
    p_train->add_option("--point-count", point_count, "condition cloud samples");
    p_train->add_flag("--single-mesh", single_mesh, "re-segment randomly every epoch");
    add_seg_flags(p_train);

    CLI::App* p_gen = app.add_subcommand("generate", "sample patches from a checkpoint and assemble them");
    p_gen->add_option("--input", input, "conditioning mesh OBJ")->required();
    p_gen->add_option("--checkpoint", checkpoint, "trained model checkpoint")->required();
    p_gen->add_option("--output", output, "output directory")->required();
    p_gen->add_option("--temperature", temperature, "sampling temperature");
    add_seg_flags(p_gen);

    CLI::App* p_asm = app.add_subcommand("assemble", "ground-truth token round trip through the assembler");
    p_asm->add_option("--input", input, "input OBJ")->required();
    p_asm->add_option("--output", output, "output directory")->required();
    p_asm->add_option("--weld-tol", weld_tol, "seam weld tolerance (negative: per-frame default)");
    add_seg_flags(p_asm);

    CLI::App* p_eval = app.add_subcommand("eval", "seven-metric comparison of two meshes");
    p_eval->add_option("--generated", generated, "generated OBJ")->required();
    p_eval->add_option("--reference", reference, "reference OBJ")->required();
    p_eval->add_option("--output", output, "output directory")->required();
    p_eval->add_option("--tau", tau, "f-score distance threshold");
    p_eval->add_option("--sample-count", sample_count, "surface samples per mesh");

    CLI::App* p_pipe = app.add_subcommand("pipeline", "segment, generate or round-trip, assemble, evaluate");
    p_pipe->add_option("--input", input, "input OBJ")->required();
    p_pipe->add_option("--output", output, "output directory")->required();
    p_pipe->add_option("--checkpoint", checkpoint, "trained model checkpoint");
    p_pipe->add_flag("--ground-truth-tokens", ground_truth_tokens, "model-free round-trip mode");
    p_pipe->add_option("--temperature", temperature, "sampling temperature");
    add_seg_flags(p_pipe);

    for (CLI::App* sub : {p_pre, p_seg, p_tok, p_det, p_train, p_gen, p_asm, p_eval, p_pipe})
        sub->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        Json cfg = default_config();
        if (!config_path.empty()) merge_json(cfg, tessera::read_json_file(config_path));

        const auto apply = [&](CLI::App* sub) {
            if (sub->count("--mode")) cfg["segmentation"]["mode"] = mode;
            if (sub->count("--lambda")) cfg["segmentation"]["lambda"] = lambda;
            if (sub->count("--up-axis")) cfg["segmentation"]["up_axis"] = up_axis;
            if (sub->count("--labels")) cfg["segmentation"]["labels_path"] = labels_path;
            if (sub->count("--patch-count")) cfg["segmentation"]["patch_count"] = patch_count;
            if (sub->count("--normalize")) cfg["normalize_input"] = true;
            if (sub->count("--labels") && !sub->count("--mode")) cfg["segmentation"]["mode"] = "labels";
        };

        if (seed_opt->count()) {
            cfg["segmentation"]["seed"] = global_seed;
            cfg["model"]["seed"] = global_seed;
            cfg["train"]["seed"] = global_seed;
            cfg["generate"]["seed"] = global_seed;
            cfg["preprocess"]["augment_seed"] = global_seed;
            cfg["metrics"]["seed_generated"] = global_seed;
            cfg["metrics"]["seed_reference"] = global_seed;
        }

        if (p_pre->parsed()) {
            if (p_pre->count("--augment")) cfg["preprocess"]["augment"] = true;
            validate_cfg(cfg);
            return cmd_preprocess(cfg, input, output);
        }
        if (p_seg->parsed()) {
            apply(p_seg);
            validate_cfg(cfg);
            return cmd_segment(cfg, input, output);
        }
        if (p_tok->parsed()) {
            apply(p_tok);
            if (p_tok->count("--boundary-k")) cfg["boundary"]["k"] = boundary_k;
            validate_cfg(cfg);
            return cmd_tokenize(cfg, input, output);
        }
        if (p_det->parsed()) {
            return cmd_detokenize(tokens_path, frames_path, frame_index, output);
        }
        if (p_train->parsed()) {
            apply(p_train);
            if (p_train->count("--epochs")) cfg["train"]["epochs"] = epochs;
            if (p_train->count("--lr-start")) cfg["train"]["lr_start"] = lr_start;
            if (p_train->count("--lr-end")) cfg["train"]["lr_end"] = lr_end;
            if (p_train->count("--optimizer")) cfg["train"]["optimizer"] = optimizer;
            if (p_train->count("--point-count")) cfg["train"]["point_count"] = point_count;
            if (p_train->count("--single-mesh")) cfg["train"]["single_mesh"] = true;
            validate_cfg(cfg);
            return cmd_train_toy(cfg, input, output);
        }
        if (p_gen->parsed()) {
            apply(p_gen);
            if (p_gen->count("--temperature")) cfg["generate"]["temperature"] = temperature;
            validate_cfg(cfg);
            return run_assembly_command(cfg, input, checkpoint, output, "generated.obj");
        }
        if (p_asm->parsed()) {
            apply(p_asm);
            if (p_asm->count("--weld-tol")) cfg["assemble"]["weld_tol"] = weld_tol;
            validate_cfg(cfg);
            return run_assembly_command(cfg, input, "", output, "assembled.obj");
        }
        if (p_eval->parsed()) {
            if (p_eval->count("--tau")) cfg["metrics"]["tau"] = tau;
            if (p_eval->count("--sample-count")) cfg["metrics"]["sample_count"] = sample_count;
            validate_cfg(cfg);
            return cmd_eval(cfg, generated, reference, output);
        }
        if (p_pipe->parsed()) {
            apply(p_pipe);
            if (p_pipe->count("--temperature")) cfg["generate"]["temperature"] = temperature;
            if (!ground_truth_tokens && checkpoint.empty()) {
                std::cerr << "error: pipeline needs --checkpoint or --ground-truth-tokens\n";
                return kExitUsage;
            }
            validate_cfg(cfg);
            return cmd_pipeline(cfg, input, checkpoint, ground_truth_tokens, output);
        }
        std::cerr << "error: no subcommand\n";
        return kExitUsage;
    } catch (const tessera::ParseError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const tessera::IoError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitInternal;
    }
}
