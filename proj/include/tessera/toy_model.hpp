#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "tessera/quantizer.hpp"
#include "tessera/sampling.hpp"
#include "tessera/segmentation.hpp"

namespace tessera {

struct AblationFlags {
    bool use_global_pc = true;
    bool use_boundary_gru = true;
    bool use_boundary_self_attention = true;
};

struct ModelConfig {
    int layers = 4;
    int hidden_dim = 256;
    int heads = 8;
    int gru_hidden = 256;
    int vocab_size = kVocabSize;
    int window = 9216;           // attention span in tokens
    double window_overlap = 0.5; // chunk overlap fraction for long sequences
    double temperature = 0.5;
    AblationFlags ablation;
    std::uint64_t seed = 1;
    int point_feature_dim = 64;  // frozen point encoder output width
    int point_hidden_dim = 64;
    int mlp_ratio = 4;
};

// One supervised patch: shape context, boundary prefix, and the target
// token sequence with the frame it was quantized in.
struct TrainingExample {
    SurfaceSamples global_points;
    SurfaceSamples local_points;
    TokenSequence boundary_tokens;
    TokenSequence target_tokens;  // [BOS, coords..., TERM]
    PatchFrame frame;
};

struct OptimSettings {
    enum class Kind { sgd_momentum, adam };
    Kind kind = Kind::sgd_momentum;
    double momentum = 0.9;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    double grad_clip = 1.0;  // global norm; <= 0 disables
};

struct GenerationResult {
    TokenSequence tokens;  // [BOS, sampled..., TERM when reached]
    bool truncated = false;
    int steps = 0;
};

// Chunk start offsets for sequences longer than the window:
// 0, stride, 2*stride, ... with stride = max(1, round(window*(1-overlap))),
// until a chunk covers the end.
std::vector<int> chunk_starts(int total_len, int window, double overlap);

// Cosine decay from lr_start to lr_end over total steps.
double cosine_lr(int step, int total_steps, double lr_start, double lr_end);

template <typename Scalar>
struct Tensor {
    std::string name;
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> value;
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> grad;
    bool frozen = false;  // excluded from updates and gradient checks
};

template <typename Scalar>
struct ConditionBundle {
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> global_feature;
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> local_feature;
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> boundary_embedding;
    TokenSequence boundary_tokens;
};

// Boundary-conditioned decoder-only generator. The input sequence is
//   [3 condition prefix rows] ++ [boundary tokens, if enabled] ++ [targets]
// with causal attention throughout. Condition adapters start at zero, so at
// initialization logits do not depend on the condition features. Scalar is
// float for speed and double for gradient checking and the decode-equivalence
// oracle.
template <typename Scalar>
class ToyModel {
public:
    using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
    using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

    explicit ToyModel(const ModelConfig& config);

    const ModelConfig& config() const { return config_; }

    // Permutation-invariant frozen encoder: shared per-point MLP, then
    // coordinatewise max pooling.
    Vector encode_point_cloud(const SurfaceSamples& samples) const;

    // Final hidden state of the GRU over the token sequence.
    Vector encode_boundary_gru(const TokenSequence& tokens) const;

    ConditionBundle<Scalar> make_bundle(const SurfaceSamples& global_points,
                                        const SurfaceSamples& local_points,
                                        const TokenSequence& boundary_tokens) const;

    // Logits for every sequence position (rows), inference only. token_prefix
    // are target-side tokens, BOS first.
    Matrix forward(const ConditionBundle<Scalar>& bundle, const std::vector<int>& token_prefix) const;

    // One optimizer step over the batch; returns mean loss per predicted
    // token. Long sequences are chunked with window overlap; chunks after the
    // first attend to the previous chunk's cached keys and values, which act
    // as constant context (no gradient flows into them).
    double train_step(const std::vector<TrainingExample>& batch, double lr, const OptimSettings& opt);

    // Mean loss per predicted token without touching gradients or weights.
    double evaluate_loss(const std::vector<TrainingExample>& batch);

    // Incrementally decoded sampling with per-layer KV caches.
    // temperature 0 means argmax.
    GenerationResult generate(const ConditionBundle<Scalar>& bundle, int max_tokens, double temperature,
                              std::uint64_t seed) const;
    // Same sampling loop, but every step recomputes the full sequence from
    // scratch. Oracle for cache correctness; quadratically slower.
    GenerationResult generate_uncached(const ConditionBundle<Scalar>& bundle, int max_tokens,
                                       double temperature, std::uint64_t seed) const;

    // Next-token logits after token_prefix (BOS first), computed through the
    // incremental decode path. Dual route to forward()'s last row.
    Vector next_logits_cached(const ConditionBundle<Scalar>& bundle, const std::vector<int>& token_prefix) const;

    // Central finite differences (step 1e-5) against analytic gradients over
    // every trainable tensor; returns the max relative error. Meaningful in
    // double precision at tiny dims. corrupt_tensor, when named, has its
    // analytic gradient scaled by corrupt_scale first; the harness uses this
    // to prove the check catches wrong gradients.
    double gradient_check(const TrainingExample& example, const std::string& corrupt_tensor = {},
                          double corrupt_scale = 1.0);

    void save_checkpoint(const std::string& path) const;
    static ToyModel load_checkpoint(const std::string& path);

    std::vector<Tensor<Scalar>>& tensors() { return tensors_; }
    const std::vector<Tensor<Scalar>>& tensors() const { return tensors_; }
    Tensor<Scalar>& tensor(const std::string& name);
    const Tensor<Scalar>& tensor(const std::string& name) const;

private:
    struct Activations;  // per-forward buffers for the backward pass
    struct DecodeCache;  // per-layer K/V state for incremental decoding
    struct LayerCache;   // per-layer K/V handed from one training chunk to the next
    struct RowPlan;      // content rows plus per-row provenance for one example
    struct GruTape;      // per-step GRU state recorded for backpropagation
    struct BatchStats {
        double loss_sum = 0.0;
        long long count = 0;
    };

    int add_tensor(const std::string& name, int rows, int cols, double init_std, bool frozen);
    void zero_grads();
    double apply_grads(double lr, const OptimSettings& opt);

    // Content rows (token embedding or adapted condition feature, no
    // positions) for [prefix, boundary if enabled, targets].
    RowPlan build_rows(const ConditionBundle<Scalar>& bundle, const std::vector<int>& target_tokens) const;

    // Sequence forward over embedded rows, optionally attending to cached
    // context K/V on the left; fills activations when given. Returns hidden
    // states after the final layer norm.
    Matrix backbone_forward(const Matrix& embedded, const std::vector<LayerCache>& ctx, Activations* acts) const;
    // Gradient of everything reachable from d_final; returns d_embedded.
    Matrix backbone_backward(const Matrix& d_final, const Activations& acts);

    // Forward pass plus loss/gradient accumulation over one batch.
    BatchStats run_batch(const std::vector<TrainingExample>& batch, bool with_grads);

    Vector gru_forward(const std::vector<int>& ids, GruTape* tape) const;
    void gru_backward(const GruTape& tape, Vector d_final);

    Vector decode_step(const Vector& embedded_row, int position, DecodeCache& cache) const;

    ModelConfig config_;
    std::vector<Tensor<Scalar>> tensors_;
    std::unordered_map<std::string, int> index_;  // tensor name -> tensors_ slot
    std::vector<Matrix> momentum_;                // sgd momentum buffers
    std::vector<Matrix> adam_m_, adam_v_;
    long long adam_t_ = 0;
};

// Teacher-forced examples for one mesh and segmentation: boundary faces come
// from the ground-truth faces of previously ordered patches.
std::vector<TrainingExample> build_training_examples(const Mesh& mesh, const Segmentation& seg,
                                                     int point_count, int boundary_k,
                                                     int placeholder_length, std::uint64_t seed);

using ToyModelF = ToyModel<float>;
using ToyModelD = ToyModel<double>;

}  // namespace tessera
