#include "tessera/toy_model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "tessera/boundary.hpp"
#include "tessera/error.hpp"
#include "tessera/manifests.hpp"
#include "tessera/rng.hpp"

namespace tessera {

namespace {

template <typename S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
template <typename S>
using Vec = Eigen::Matrix<S, Eigen::Dynamic, 1>;
template <typename S>
using Row = Eigen::Matrix<S, 1, Eigen::Dynamic>;

constexpr double kLnEps = 1e-5;

double normal_draw(std::uint64_t seed, std::uint64_t k) {
    const double u1 = uniform01(seed, 2 * k);
    const double u2 = uniform01(seed, 2 * k + 1);
    // 1 - u1 lies in (0, 1], so the log is finite.
    const double r = std::sqrt(-2.0 * std::log(1.0 - u1));
    return r * std::cos(2.0 * std::numbers::pi * u2);
}

// Pre-norm transformer pieces. Sequences are row-major: one position per row.

template <typename S>
Mat<S> layer_norm_forward(const Mat<S>& x, const Mat<S>& g, const Mat<S>& b, Mat<S>& xhat, Vec<S>& rstd) {
    const Eigen::Index n = x.rows(), h = x.cols();
    xhat.resize(n, h);
    rstd.resize(n);
    Mat<S> y(n, h);
    for (Eigen::Index i = 0; i < n; ++i) {
        const S mu = x.row(i).mean();
        const S var = (x.row(i).array() - mu).square().sum() / S(h);
        const S rs = S(1) / std::sqrt(var + S(kLnEps));
        rstd(i) = rs;
        xhat.row(i) = ((x.row(i).array() - mu) * rs).matrix();
        y.row(i) = xhat.row(i).cwiseProduct(g.col(0).transpose()) + b.col(0).transpose();
    }
    return y;
}

template <typename S>
Mat<S> layer_norm_backward(const Mat<S>& dy, const Mat<S>& xhat, const Vec<S>& rstd, const Mat<S>& g,
                           Mat<S>& dg, Mat<S>& db) {
    const Eigen::Index n = dy.rows(), h = dy.cols();
    Mat<S> dx(n, h);
    for (Eigen::Index i = 0; i < n; ++i) {
        const Row<S> dxhat = dy.row(i).cwiseProduct(g.col(0).transpose());
        const S m1 = dxhat.mean();
        const S m2 = dxhat.cwiseProduct(xhat.row(i)).sum() / S(h);
        dx.row(i) = ((dxhat.array() - m1 - xhat.row(i).array() * m2) * rstd(i)).matrix();
        dg.col(0) += dy.row(i).cwiseProduct(xhat.row(i)).transpose();
        db.col(0) += dy.row(i).transpose();
    }
    return dx;
}

// Same normalization on a single row, for incremental decoding.
template <typename S>
Row<S> ln_row(const Row<S>& r, const Mat<S>& g, const Mat<S>& b) {
    const S mu = r.mean();
    const S var = (r.array() - mu).square().sum() / S(r.cols());
    const S rs = S(1) / std::sqrt(var + S(kLnEps));
    const Row<S> xhat = ((r.array() - mu) * rs).matrix();
    return xhat.cwiseProduct(g.col(0).transpose()) + b.col(0).transpose();
}

// Causal attention probabilities for one head. Query row i may attend the c
// context rows plus new rows 0..i. kc holds [context keys; new keys].
template <typename S>
Mat<S> head_probs(const Mat<S>& qh, const Mat<S>& kc, Eigen::Index c, S scale) {
    const Eigen::Index n = qh.rows(), m = kc.rows();
    Mat<S> s = qh * kc.transpose() * scale;
    const S neg_inf = -std::numeric_limits<S>::infinity();
    for (Eigen::Index i = 0; i < n; ++i) {
        const Eigen::Index first_masked = c + i + 1;
        if (first_masked < m) s.row(i).tail(m - first_masked).setConstant(neg_inf);
        const S mx = s.row(i).maxCoeff();
        const Eigen::Array<S, 1, Eigen::Dynamic> e = (s.row(i).array() - mx).exp();
        s.row(i) = (e / e.sum()).matrix();
    }
    return s;
}

template <typename S>
Mat<S> attention_forward(const Mat<S>& q, const Mat<S>& k, const Mat<S>& v, const Mat<S>* ctx_k,
                         const Mat<S>* ctx_v, int heads) {
    const Eigen::Index n = q.rows(), h = q.cols();
    const Eigen::Index c = ctx_k ? ctx_k->rows() : 0;
    const Eigen::Index dh = h / heads;
    const S scale = S(1) / std::sqrt(S(dh));
    Mat<S> out(n, h);
    Mat<S> kc(c + n, dh), vc(c + n, dh);
    for (int j = 0; j < heads; ++j) {
        const Eigen::Index off = j * dh;
        if (c > 0) {
            kc.topRows(c) = ctx_k->middleCols(off, dh);
            vc.topRows(c) = ctx_v->middleCols(off, dh);
        }
        kc.bottomRows(n) = k.middleCols(off, dh);
        vc.bottomRows(n) = v.middleCols(off, dh);
        const Mat<S> p = head_probs<S>(q.middleCols(off, dh), kc, c, scale);
        out.middleCols(off, dh).noalias() = p * vc;
    }
    return out;
}

// Context keys and values are constants: their gradient slices are dropped.
template <typename S>
void attention_backward(const Mat<S>& q, const Mat<S>& k, const Mat<S>& v, const Mat<S>* ctx_k,
                        const Mat<S>* ctx_v, int heads, const Mat<S>& d_out, Mat<S>& dq, Mat<S>& dk,
                        Mat<S>& dv) {
    const Eigen::Index n = q.rows(), h = q.cols();
    const Eigen::Index c = ctx_k ? ctx_k->rows() : 0;
    const Eigen::Index dh = h / heads;
    const S scale = S(1) / std::sqrt(S(dh));
    dq.resize(n, h);
    dk.resize(n, h);
    dv.resize(n, h);
    Mat<S> kc(c + n, dh), vc(c + n, dh);
    for (int j = 0; j < heads; ++j) {
        const Eigen::Index off = j * dh;
        if (c > 0) {
            kc.topRows(c) = ctx_k->middleCols(off, dh);
            vc.topRows(c) = ctx_v->middleCols(off, dh);
        }
        kc.bottomRows(n) = k.middleCols(off, dh);
        vc.bottomRows(n) = v.middleCols(off, dh);
        const Mat<S> p = head_probs<S>(q.middleCols(off, dh), kc, c, scale);
        const Mat<S> dp = d_out.middleCols(off, dh) * vc.transpose();
        const Vec<S> rowdot = dp.cwiseProduct(p).rowwise().sum();
        Mat<S> ds = dp;
        ds.colwise() -= rowdot;
        ds = ds.cwiseProduct(p);
        dq.middleCols(off, dh).noalias() = ds * kc * scale;
        const Mat<S> dkc = ds.transpose() * q.middleCols(off, dh) * scale;
        const Mat<S> dvc = p.transpose() * d_out.middleCols(off, dh);
        dk.middleCols(off, dh) = dkc.bottomRows(n);
        dv.middleCols(off, dh) = dvc.bottomRows(n);
    }
}

template <typename S>
int sample_token(const Vec<S>& logits, double temperature, SequentialRng& rng) {
    const Eigen::Index v = logits.size();
    Eigen::ArrayXd ld = logits.template cast<double>().array();
    if (temperature <= 0.0) {
        Eigen::Index best = 0;
        for (Eigen::Index i = 1; i < v; ++i)
            if (ld(i) > ld(best)) best = i;
        return static_cast<int>(best);
    }
    ld /= temperature;
    const double mx = ld.maxCoeff();
    Eigen::ArrayXd p = (ld - mx).exp();
    p /= p.sum();
    const double u = rng.next_uniform01();
    double acc = 0.0;
    for (Eigen::Index i = 0; i < v; ++i) {
        acc += p(i);
        if (acc > u) return static_cast<int>(i);
    }
    return static_cast<int>(v) - 1;
}

void write_u16(std::ostream& os, std::uint16_t v) {
    const char b[2] = {static_cast<char>(v & 0xff), static_cast<char>(v >> 8)};
    os.write(b, 2);
}

void write_u64(std::ostream& os, std::uint64_t v) {
    char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    os.write(b, 8);
}

void write_f32(std::ostream& os, float f) {
    const std::uint32_t v = std::bit_cast<std::uint32_t>(f);
    char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    os.write(b, 4);
}

std::uint16_t read_u16(std::istream& is) {
    unsigned char b[2];
    if (!is.read(reinterpret_cast<char*>(b), 2)) throw ParseError("checkpoint: truncated header");
    return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
}

std::uint64_t read_u64(std::istream& is) {
    unsigned char b[8];
    if (!is.read(reinterpret_cast<char*>(b), 8)) throw ParseError("checkpoint: truncated header");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
}

float read_f32(std::istream& is) {
    unsigned char b[4];
    if (!is.read(reinterpret_cast<char*>(b), 4)) throw ParseError("checkpoint: truncated payload");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return std::bit_cast<float>(v);
}

void validate_config(const ModelConfig& c) {
    if (c.layers < 1) throw PreconditionError("ModelConfig: layers must be positive");
    if (c.hidden_dim < 1 || c.heads < 1 || c.hidden_dim % c.heads != 0)
        throw PreconditionError("ModelConfig: hidden_dim must be a positive multiple of heads");
    if (c.gru_hidden < 1 || c.point_feature_dim < 1 || c.point_hidden_dim < 1 || c.mlp_ratio < 1)
        throw PreconditionError("ModelConfig: dimensions must be positive");
    if (c.vocab_size < kVocabSize)
        throw PreconditionError("ModelConfig: vocab_size must cover the token alphabet");
    if (c.window < 8) throw PreconditionError("ModelConfig: window too small");
    if (!(c.window_overlap >= 0.0 && c.window_overlap < 1.0))
        throw PreconditionError("ModelConfig: window_overlap must be in [0,1)");
    if (!(c.temperature >= 0.0)) throw PreconditionError("ModelConfig: temperature must be nonnegative");
}

}  // namespace

std::vector<int> chunk_starts(int total_len, int window, double overlap) {
    if (total_len < 1 || window < 1) throw PreconditionError("chunk_starts: lengths must be positive");
    if (!(overlap >= 0.0 && overlap < 1.0)) throw PreconditionError("chunk_starts: overlap must be in [0,1)");
    const int stride = std::max(1, static_cast<int>(std::llround(double(window) * (1.0 - overlap))));
    std::vector<int> starts{0};
    int s = 0;
    while (s + window < total_len) {
        s += stride;
        starts.push_back(s);
    }
    return starts;
}

double cosine_lr(int step, int total_steps, double lr_start, double lr_end) {
    if (total_steps < 1) throw PreconditionError("cosine_lr: total_steps must be positive");
    if (total_steps == 1) return lr_start;
    const double t = std::clamp(double(step) / double(total_steps - 1), 0.0, 1.0);
    return lr_end + 0.5 * (lr_start - lr_end) * (1.0 + std::cos(std::numbers::pi * t));
}

template <typename Scalar>
struct ToyModel<Scalar>::LayerCache {
    Matrix k, v;  // one row per cached position
};

template <typename Scalar>
struct ToyModel<Scalar>::DecodeCache {
    std::vector<LayerCache> kv;
    int len = 0;
};

template <typename Scalar>
struct ToyModel<Scalar>::GruTape {
    std::vector<int> ids;
    std::vector<Vector> h_prev, z, r, n;
};

template <typename Scalar>
struct ToyModel<Scalar>::RowPlan {
    Matrix content;                   // per-row embeddings before positions
    std::vector<int> token_of_row;    // token id, -1 for condition rows
    std::vector<int> adapter_of_row;  // 0 global, 1 local, 2 boundary, -1 otherwise
    int target_begin = 0;
};

template <typename Scalar>
struct ToyModel<Scalar>::Activations {
    struct Layer {
        Matrix xhat1, q, k, v, attn, xhat2, m;
        Vector rstd1, rstd2;
    };
    std::vector<LayerCache> ctx;  // context K/V the chunk attended to
    std::vector<Layer> layers;
    Matrix xhatf;
    Vector rstdf;
};

template <typename Scalar>
ToyModel<Scalar>::ToyModel(const ModelConfig& config) : config_(config) {
    validate_config(config_);
    const int h = config_.hidden_dim;
    const int v = config_.vocab_size;
    const int g = config_.gru_hidden;
    const int pf = config_.point_feature_dim;
    const int ph = config_.point_hidden_dim;
    const int mlp = config_.mlp_ratio * h;
    const double emb_std = 0.02;
    const double wh = 1.0 / std::sqrt(double(h));

    add_tensor("token_embed", h, v, emb_std, false);
    add_tensor("pos_embed", h, config_.window, emb_std, true);
    for (int l = 0; l < config_.layers; ++l) {
        const std::string p = "l" + std::to_string(l) + ".";
        add_tensor(p + "ln1.g", h, 1, -1.0, false);
        add_tensor(p + "ln1.b", h, 1, 0.0, false);
        add_tensor(p + "attn.wq", h, h, wh, false);
        add_tensor(p + "attn.wk", h, h, wh, false);
        add_tensor(p + "attn.wv", h, h, wh, false);
        add_tensor(p + "attn.wo", h, h, wh, false);
        add_tensor(p + "ln2.g", h, 1, -1.0, false);
        add_tensor(p + "ln2.b", h, 1, 0.0, false);
        add_tensor(p + "mlp.w1", h, mlp, wh, false);
        add_tensor(p + "mlp.b1", mlp, 1, 0.0, false);
        add_tensor(p + "mlp.w2", mlp, h, 1.0 / std::sqrt(double(mlp)), false);
        add_tensor(p + "mlp.b2", h, 1, 0.0, false);
    }
    add_tensor("ln_f.g", h, 1, -1.0, false);
    add_tensor("ln_f.b", h, 1, 0.0, false);
    add_tensor("head.w", h, v, emb_std, false);
    add_tensor("head.b", v, 1, 0.0, false);

    // Condition adapters start at zero so initial logits ignore the features.
    add_tensor("adapter.global", h, pf, 0.0, false);
    add_tensor("adapter.local", h, pf, 0.0, false);
    add_tensor("adapter.boundary", h, g, 0.0, false);

    const double gh = 1.0 / std::sqrt(double(g));
    add_tensor("gru.wz", g, h, wh, false);
    add_tensor("gru.uz", g, g, gh, false);
    add_tensor("gru.bz", g, 1, 0.0, false);
    add_tensor("gru.wr", g, h, wh, false);
    add_tensor("gru.ur", g, g, gh, false);
    add_tensor("gru.br", g, 1, 0.0, false);
    add_tensor("gru.wn", g, h, wh, false);
    add_tensor("gru.un", g, g, gh, false);
    add_tensor("gru.bn", g, 1, 0.0, false);

    // Frozen random-feature point encoder.
    add_tensor("penc.w1", ph, 3, 1.0, true);
    add_tensor("penc.b1", ph, 1, 0.5, true);
    add_tensor("penc.w2", pf, ph, 1.0 / std::sqrt(double(ph)), true);
    add_tensor("penc.b2", pf, 1, 0.0, true);
}

// init_std > 0: normal draws; 0: zeros; < 0: ones (layer-norm gains).
template <typename Scalar>
int ToyModel<Scalar>::add_tensor(const std::string& name, int rows, int cols, double init_std, bool frozen) {
    Tensor<Scalar> t;
    t.name = name;
    t.frozen = frozen;
    t.value.resize(rows, cols);
    t.grad = Matrix::Zero(rows, cols);
    if (init_std == 0.0) {
        t.value.setZero();
    } else if (init_std < 0.0) {
        t.value.setOnes();
    } else {
        const std::uint64_t tseed = hash_combine(config_.seed, static_cast<std::uint64_t>(tensors_.size()) + 101);
        std::uint64_t k = 0;
        for (Eigen::Index j = 0; j < t.value.cols(); ++j)
            for (Eigen::Index i = 0; i < t.value.rows(); ++i)
                t.value(i, j) = static_cast<Scalar>(init_std * normal_draw(tseed, k++));
    }
    const int idx = static_cast<int>(tensors_.size());
    index_[name] = idx;
    tensors_.push_back(std::move(t));
    return idx;
}

template <typename Scalar>
Tensor<Scalar>& ToyModel<Scalar>::tensor(const std::string& name) {
    const auto it = index_.find(name);
    if (it == index_.end()) throw PreconditionError("unknown tensor: " + name);
    return tensors_[static_cast<std::size_t>(it->second)];
}

template <typename Scalar>
const Tensor<Scalar>& ToyModel<Scalar>::tensor(const std::string& name) const {
    const auto it = index_.find(name);
    if (it == index_.end()) throw PreconditionError("unknown tensor: " + name);
    return tensors_[static_cast<std::size_t>(it->second)];
}

template <typename Scalar>
void ToyModel<Scalar>::zero_grads() {
    for (auto& t : tensors_) t.grad.setZero();
}

template <typename Scalar>
typename ToyModel<Scalar>::Vector ToyModel<Scalar>::encode_point_cloud(const SurfaceSamples& samples) const {
    if (samples.points.empty()) throw PreconditionError("encode_point_cloud: empty point cloud");
    const Matrix& w1 = tensor("penc.w1").value;
    const Matrix& w2 = tensor("penc.w2").value;
    const Vector b1 = tensor("penc.b1").value.col(0);
    const Vector b2 = tensor("penc.b2").value.col(0);
    const Eigen::Index n = static_cast<Eigen::Index>(samples.points.size());
    Matrix p(3, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const Vec3& q = samples.points[static_cast<std::size_t>(i)];
        p(0, i) = static_cast<Scalar>(q.x);
        p(1, i) = static_cast<Scalar>(q.y);
        p(2, i) = static_cast<Scalar>(q.z);
    }
    Matrix a1 = w1 * p;
    a1.colwise() += b1;
    a1 = a1.array().tanh().matrix();
    Matrix a2 = w2 * a1;
    a2.colwise() += b2;
    a2 = a2.array().tanh().matrix();
    return a2.rowwise().maxCoeff();
}

template <typename Scalar>
typename ToyModel<Scalar>::Vector ToyModel<Scalar>::gru_forward(const std::vector<int>& ids, GruTape* tape) const {
    if (ids.empty()) throw PreconditionError("encode_boundary_gru: empty token sequence");
    const Matrix& embed = tensor("token_embed").value;
    const Matrix& wz = tensor("gru.wz").value;
    const Matrix& uz = tensor("gru.uz").value;
    const Vector bz = tensor("gru.bz").value.col(0);
    const Matrix& wr = tensor("gru.wr").value;
    const Matrix& ur = tensor("gru.ur").value;
    const Vector br = tensor("gru.br").value.col(0);
    const Matrix& wn = tensor("gru.wn").value;
    const Matrix& un = tensor("gru.un").value;
    const Vector bn = tensor("gru.bn").value.col(0);
    const auto sigmoid = [](Vector a) -> Vector { return (Scalar(1) / (Scalar(1) + (-a.array()).exp())).matrix(); };

    Vector h = Vector::Zero(config_.gru_hidden);
    for (int id : ids) {
        if (id < 0 || id >= config_.vocab_size)
            throw PreconditionError("encode_boundary_gru: token id out of range");
        const Vector x = embed.col(id);
        const Vector z = sigmoid(wz * x + uz * h + bz);
        const Vector r = sigmoid(wr * x + ur * h + br);
        const Vector n = ((wn * x + un * r.cwiseProduct(h) + bn).array().tanh()).matrix();
        if (tape) {
            tape->ids.push_back(id);
            tape->h_prev.push_back(h);
            tape->z.push_back(z);
            tape->r.push_back(r);
            tape->n.push_back(n);
        }
        h = (Vector::Ones(config_.gru_hidden) - z).cwiseProduct(n) + z.cwiseProduct(h);
    }
    return h;
}

template <typename Scalar>
typename ToyModel<Scalar>::Vector ToyModel<Scalar>::encode_boundary_gru(const TokenSequence& tokens) const {
    return gru_forward(tokens.tokens, nullptr);
}

template <typename Scalar>
void ToyModel<Scalar>::gru_backward(const GruTape& tape, Vector d_final) {
    const Matrix& embed = tensor("token_embed").value;
    Matrix& d_embed = tensor("token_embed").grad;
    const Matrix& uz = tensor("gru.uz").value;
    const Matrix& ur = tensor("gru.ur").value;
    const Matrix& un = tensor("gru.un").value;
    const Matrix& wz = tensor("gru.wz").value;
    const Matrix& wr = tensor("gru.wr").value;
    const Matrix& wn = tensor("gru.wn").value;
    Matrix& dwz = tensor("gru.wz").grad;
    Matrix& duz = tensor("gru.uz").grad;
    Matrix& dbz = tensor("gru.bz").grad;
    Matrix& dwr = tensor("gru.wr").grad;
    Matrix& dur = tensor("gru.ur").grad;
    Matrix& dbr = tensor("gru.br").grad;
    Matrix& dwn = tensor("gru.wn").grad;
    Matrix& dun = tensor("gru.un").grad;
    Matrix& dbn = tensor("gru.bn").grad;

    Vector dh = std::move(d_final);
    for (int t = static_cast<int>(tape.ids.size()) - 1; t >= 0; --t) {
        const Vector x = embed.col(tape.ids[static_cast<std::size_t>(t)]);
        const Vector& hp = tape.h_prev[static_cast<std::size_t>(t)];
        const Vector& z = tape.z[static_cast<std::size_t>(t)];
        const Vector& r = tape.r[static_cast<std::size_t>(t)];
        const Vector& n = tape.n[static_cast<std::size_t>(t)];

        const Vector dz = dh.cwiseProduct(hp - n);
        const Vector dn = dh.cwiseProduct(Vector::Ones(dh.size()) - z);
        Vector dhp = dh.cwiseProduct(z);

        const Vector dan = dn.cwiseProduct((Scalar(1) - n.array().square()).matrix());
        dwn.noalias() += dan * x.transpose();
        dun.noalias() += dan * r.cwiseProduct(hp).transpose();
        dbn.col(0) += dan;
        const Vector drh = un.transpose() * dan;
        const Vector dr = drh.cwiseProduct(hp);
        dhp += drh.cwiseProduct(r);

        const Vector daz = dz.cwiseProduct(z.cwiseProduct(Vector::Ones(z.size()) - z));
        dwz.noalias() += daz * x.transpose();
        duz.noalias() += daz * hp.transpose();
        dbz.col(0) += daz;
        dhp.noalias() += uz.transpose() * daz;

        const Vector dar = dr.cwiseProduct(r.cwiseProduct(Vector::Ones(r.size()) - r));
        dwr.noalias() += dar * x.transpose();
        dur.noalias() += dar * hp.transpose();
        dbr.col(0) += dar;
        dhp.noalias() += ur.transpose() * dar;

        const Vector dx = wn.transpose() * dan + wz.transpose() * daz + wr.transpose() * dar;
        d_embed.col(tape.ids[static_cast<std::size_t>(t)]) += dx;
        dh = std::move(dhp);
    }
}

template <typename Scalar>
ConditionBundle<Scalar> ToyModel<Scalar>::make_bundle(const SurfaceSamples& global_points,
                                                      const SurfaceSamples& local_points,
                                                      const TokenSequence& boundary_tokens) const {
    ConditionBundle<Scalar> b;
    b.global_feature = encode_point_cloud(global_points);
    b.local_feature = encode_point_cloud(local_points);
    b.boundary_embedding = encode_boundary_gru(boundary_tokens);
    b.boundary_tokens = boundary_tokens;
    return b;
}

template <typename Scalar>
typename ToyModel<Scalar>::RowPlan ToyModel<Scalar>::build_rows(const ConditionBundle<Scalar>& bundle,
                                                                const std::vector<int>& target_tokens) const {
    const AblationFlags& fl = config_.ablation;
    const Matrix& embed = tensor("token_embed").value;
    const std::vector<int>& bids = bundle.boundary_tokens.tokens;
    const int nb = fl.use_boundary_self_attention ? static_cast<int>(bids.size()) : 0;
    const int nt = static_cast<int>(target_tokens.size());
    const int n = 3 + nb + nt;

    RowPlan plan;
    plan.content = Matrix::Zero(n, config_.hidden_dim);
    plan.token_of_row.assign(static_cast<std::size_t>(n), -1);
    plan.adapter_of_row.assign(static_cast<std::size_t>(n), -1);
    plan.target_begin = 3 + nb;
    plan.adapter_of_row[0] = 0;
    plan.adapter_of_row[1] = 1;
    plan.adapter_of_row[2] = 2;

    if (fl.use_global_pc) {
        const Matrix& w = tensor("adapter.global").value;
        if (bundle.global_feature.size() != w.cols())
            throw PreconditionError("bundle: global feature size mismatch");
        plan.content.row(0) = (w * bundle.global_feature).transpose();
    }
    {
        const Matrix& w = tensor("adapter.local").value;
        if (bundle.local_feature.size() != w.cols())
            throw PreconditionError("bundle: local feature size mismatch");
        plan.content.row(1) = (w * bundle.local_feature).transpose();
    }
    if (fl.use_boundary_gru) {
        const Matrix& w = tensor("adapter.boundary").value;
        if (bundle.boundary_embedding.size() != w.cols())
            throw PreconditionError("bundle: boundary embedding size mismatch");
        plan.content.row(2) = (w * bundle.boundary_embedding).transpose();
    }
    for (int i = 0; i < nb; ++i) {
        const int id = bids[static_cast<std::size_t>(i)];
        if (id < 0 || id >= config_.vocab_size) throw PreconditionError("boundary token id out of range");
        plan.content.row(3 + i) = embed.col(id).transpose();
        plan.token_of_row[static_cast<std::size_t>(3 + i)] = id;
    }
    for (int i = 0; i < nt; ++i) {
        const int id = target_tokens[static_cast<std::size_t>(i)];
        if (id < 0 || id >= config_.vocab_size) throw PreconditionError("target token id out of range");
        plan.content.row(plan.target_begin + i) = embed.col(id).transpose();
        plan.token_of_row[static_cast<std::size_t>(plan.target_begin + i)] = id;
    }
    return plan;
}

template <typename Scalar>
typename ToyModel<Scalar>::Matrix ToyModel<Scalar>::backbone_forward(const Matrix& embedded,
                                                                     const std::vector<LayerCache>& ctx,
                                                                     Activations* acts) const {
    const int layers = config_.layers;
    if (!ctx.empty() && static_cast<int>(ctx.size()) != layers)
        throw PreconditionError("backbone: context layer count mismatch");
    if (acts) {
        acts->ctx = ctx;
        acts->layers.resize(static_cast<std::size_t>(layers));
    }
    Matrix x = embedded;
    for (int l = 0; l < layers; ++l) {
        const std::string p = "l" + std::to_string(l) + ".";
        Matrix xhat1;
        Vector rstd1;
        const Matrix y1 =
            layer_norm_forward<Scalar>(x, tensor(p + "ln1.g").value, tensor(p + "ln1.b").value, xhat1, rstd1);
        Matrix q = y1 * tensor(p + "attn.wq").value;
        Matrix k = y1 * tensor(p + "attn.wk").value;
        Matrix v = y1 * tensor(p + "attn.wv").value;
        const Matrix* ck = nullptr;
        const Matrix* cv = nullptr;
        if (!ctx.empty() && ctx[static_cast<std::size_t>(l)].k.rows() > 0) {
            ck = &ctx[static_cast<std::size_t>(l)].k;
            cv = &ctx[static_cast<std::size_t>(l)].v;
        }
        Matrix attn = attention_forward<Scalar>(q, k, v, ck, cv, config_.heads);
        x.noalias() += attn * tensor(p + "attn.wo").value;
        Matrix xhat2;
        Vector rstd2;
        const Matrix y2 =
            layer_norm_forward<Scalar>(x, tensor(p + "ln2.g").value, tensor(p + "ln2.b").value, xhat2, rstd2);
        Matrix u = y2 * tensor(p + "mlp.w1").value;
        u.rowwise() += tensor(p + "mlp.b1").value.col(0).transpose();
        Matrix m = u.array().tanh().matrix();
        x.noalias() += m * tensor(p + "mlp.w2").value;
        x.rowwise() += tensor(p + "mlp.b2").value.col(0).transpose();
        if (acts) {
            auto& a = acts->layers[static_cast<std::size_t>(l)];
            a.xhat1 = std::move(xhat1);
            a.rstd1 = std::move(rstd1);
            a.q = std::move(q);
            a.k = std::move(k);
            a.v = std::move(v);
            a.attn = std::move(attn);
            a.xhat2 = std::move(xhat2);
            a.rstd2 = std::move(rstd2);
            a.m = std::move(m);
        }
    }
    Matrix xhatf;
    Vector rstdf;
    Matrix hf = layer_norm_forward<Scalar>(x, tensor("ln_f.g").value, tensor("ln_f.b").value, xhatf, rstdf);
    if (acts) {
        acts->xhatf = std::move(xhatf);
        acts->rstdf = std::move(rstdf);
    }
    return hf;
}

template <typename Scalar>
typename ToyModel<Scalar>::Matrix ToyModel<Scalar>::backbone_backward(const Matrix& d_final,
                                                                      const Activations& acts) {
    Matrix dx = layer_norm_backward<Scalar>(d_final, acts.xhatf, acts.rstdf, tensor("ln_f.g").value,
                                            tensor("ln_f.g").grad, tensor("ln_f.b").grad);
    for (int l = config_.layers - 1; l >= 0; --l) {
        const auto& a = acts.layers[static_cast<std::size_t>(l)];
        const std::string p = "l" + std::to_string(l) + ".";

        // MLP branch.
        const Matrix& w2 = tensor(p + "mlp.w2").value;
        const Matrix& w1 = tensor(p + "mlp.w1").value;
        tensor(p + "mlp.w2").grad.noalias() += a.m.transpose() * dx;
        tensor(p + "mlp.b2").grad.col(0) += dx.colwise().sum().transpose();
        const Matrix dm = dx * w2.transpose();
        const Matrix du = dm.cwiseProduct((Scalar(1) - a.m.array().square()).matrix());
        Matrix y2 = a.xhat2 * tensor(p + "ln2.g").value.col(0).asDiagonal();
        y2.rowwise() += tensor(p + "ln2.b").value.col(0).transpose();
        tensor(p + "mlp.w1").grad.noalias() += y2.transpose() * du;
        tensor(p + "mlp.b1").grad.col(0) += du.colwise().sum().transpose();
        const Matrix dy2 = du * w1.transpose();
        const Matrix dx1 = dx + layer_norm_backward<Scalar>(dy2, a.xhat2, a.rstd2, tensor(p + "ln2.g").value,
                                                            tensor(p + "ln2.g").grad, tensor(p + "ln2.b").grad);

        // Attention branch.
        const Matrix& wo = tensor(p + "attn.wo").value;
        tensor(p + "attn.wo").grad.noalias() += a.attn.transpose() * dx1;
        const Matrix dattn = dx1 * wo.transpose();
        const Matrix* ck = nullptr;
        const Matrix* cv = nullptr;
        if (!acts.ctx.empty() && acts.ctx[static_cast<std::size_t>(l)].k.rows() > 0) {
            ck = &acts.ctx[static_cast<std::size_t>(l)].k;
            cv = &acts.ctx[static_cast<std::size_t>(l)].v;
        }
        Matrix dq, dk, dv;
        attention_backward<Scalar>(a.q, a.k, a.v, ck, cv, config_.heads, dattn, dq, dk, dv);
        Matrix y1 = a.xhat1 * tensor(p + "ln1.g").value.col(0).asDiagonal();
        y1.rowwise() += tensor(p + "ln1.b").value.col(0).transpose();
        tensor(p + "attn.wq").grad.noalias() += y1.transpose() * dq;
        tensor(p + "attn.wk").grad.noalias() += y1.transpose() * dk;
        tensor(p + "attn.wv").grad.noalias() += y1.transpose() * dv;
        Matrix dy1 = dq * tensor(p + "attn.wq").value.transpose();
        dy1.noalias() += dk * tensor(p + "attn.wk").value.transpose();
        dy1.noalias() += dv * tensor(p + "attn.wv").value.transpose();
        dx = dx1 + layer_norm_backward<Scalar>(dy1, a.xhat1, a.rstd1, tensor(p + "ln1.g").value,
                                               tensor(p + "ln1.g").grad, tensor(p + "ln1.b").grad);
    }
    return dx;
}

template <typename Scalar>
typename ToyModel<Scalar>::Matrix ToyModel<Scalar>::forward(const ConditionBundle<Scalar>& bundle,
                                                            const std::vector<int>& token_prefix) const {
    const RowPlan plan = build_rows(bundle, token_prefix);
    const int n = static_cast<int>(plan.token_of_row.size());
    if (n > config_.window) throw PreconditionError("forward: sequence exceeds window");
    Matrix emb = plan.content;
    const Matrix& pos = tensor("pos_embed").value;
    for (int i = 0; i < n; ++i) emb.row(i) += pos.col(i).transpose();
    const Matrix hf = backbone_forward(emb, {}, nullptr);
    Matrix logits = hf * tensor("head.w").value;
    logits.rowwise() += tensor("head.b").value.col(0).transpose();
    return logits;
}

template <typename Scalar>
typename ToyModel<Scalar>::BatchStats ToyModel<Scalar>::run_batch(const std::vector<TrainingExample>& batch,
                                                                  bool with_grads) {
    if (batch.empty()) throw PreconditionError("run_batch: empty batch");
    BatchStats stats;
    const Matrix& pos = tensor("pos_embed").value;
    const Matrix& head_w = tensor("head.w").value;
    const Matrix& head_b = tensor("head.b").value;
    for (const TrainingExample& ex : batch) {
        const std::vector<int>& tt = ex.target_tokens.tokens;
        if (tt.size() < 2 || tt.front() != kTokenBos || tt.back() != kTokenTerm)
            throw PreconditionError("run_batch: target sequence must be [BOS ... TERM]");
        const Vector gf = encode_point_cloud(ex.global_points);
        const Vector lf = encode_point_cloud(ex.local_points);
        GruTape tape;
        const Vector be = gru_forward(ex.boundary_tokens.tokens, with_grads ? &tape : nullptr);
        ConditionBundle<Scalar> bundle;
        bundle.global_feature = gf;
        bundle.local_feature = lf;
        bundle.boundary_embedding = be;
        bundle.boundary_tokens = ex.boundary_tokens;
        const RowPlan plan = build_rows(bundle, tt);
        const int n = static_cast<int>(plan.token_of_row.size());

        std::vector<int> label(static_cast<std::size_t>(n), -1);
        for (std::size_t j = 0; j + 1 < tt.size(); ++j)
            label[static_cast<std::size_t>(plan.target_begin) + j] = tt[j + 1];

        const std::vector<int> starts = chunk_starts(n, config_.window, config_.window_overlap);
        std::vector<LayerCache> ctx;
        int prev_end = 0;
        for (std::size_t ci = 0; ci < starts.size(); ++ci) {
            const int start = starts[ci];
            const int end = std::min(start + config_.window, n);
            const int nn = end - prev_end;
            const int ctx_len = prev_end - start;
            Matrix emb = plan.content.middleRows(prev_end, nn);
            for (int j = 0; j < nn; ++j) emb.row(j) += pos.col(ctx_len + j).transpose();

            Activations acts;
            const bool need_acts = with_grads || ci + 1 < starts.size();
            const Matrix hf = backbone_forward(emb, ctx, need_acts ? &acts : nullptr);

            Matrix dmat;
            if (with_grads) dmat = Matrix::Zero(nn, config_.vocab_size);
            for (int j = 0; j < nn; ++j) {
                const int lab = label[static_cast<std::size_t>(prev_end + j)];
                if (lab < 0) continue;
                Row<Scalar> logits = hf.row(j) * head_w;
                logits += head_b.col(0).transpose();
                const Eigen::ArrayXd ld = logits.transpose().template cast<double>().array();
                const double mx = ld.maxCoeff();
                const Eigen::ArrayXd e = (ld - mx).exp();
                const double se = e.sum();
                stats.loss_sum += std::log(se) - (ld(lab) - mx);
                stats.count += 1;
                if (with_grads) {
                    Eigen::ArrayXd probs = e / se;
                    probs(lab) -= 1.0;
                    dmat.row(j) = probs.matrix().transpose().template cast<Scalar>();
                }
            }

            if (with_grads) {
                tensor("head.w").grad.noalias() += hf.transpose() * dmat;
                tensor("head.b").grad.col(0) += dmat.colwise().sum().transpose();
                const Matrix d_hf = dmat * head_w.transpose();
                const Matrix d_emb = backbone_backward(d_hf, acts);
                Matrix& emb_grad = tensor("token_embed").grad;
                for (int j = 0; j < nn; ++j) {
                    const int row = prev_end + j;
                    const int tok = plan.token_of_row[static_cast<std::size_t>(row)];
                    if (tok >= 0) {
                        emb_grad.col(tok) += d_emb.row(j).transpose();
                        continue;
                    }
                    const int ad = plan.adapter_of_row[static_cast<std::size_t>(row)];
                    if (ad == 0 && config_.ablation.use_global_pc) {
                        tensor("adapter.global").grad.noalias() += d_emb.row(j).transpose() * gf.transpose();
                    } else if (ad == 1) {
                        tensor("adapter.local").grad.noalias() += d_emb.row(j).transpose() * lf.transpose();
                    } else if (ad == 2 && config_.ablation.use_boundary_gru) {
                        tensor("adapter.boundary").grad.noalias() += d_emb.row(j).transpose() * be.transpose();
                        const Vector dbe = tensor("adapter.boundary").value.transpose() * d_emb.row(j).transpose();
                        gru_backward(tape, dbe);
                    }
                }
            }

            if (ci + 1 < starts.size()) {
                const int next_start = starts[ci + 1];
                const int keep = end - next_start;
                std::vector<LayerCache> next_ctx(static_cast<std::size_t>(config_.layers));
                for (int l = 0; l < config_.layers; ++l) {
                    const auto& a = acts.layers[static_cast<std::size_t>(l)];
                    Matrix kc(ctx_len + nn, config_.hidden_dim);
                    Matrix vc(ctx_len + nn, config_.hidden_dim);
                    if (ctx_len > 0) {
                        kc.topRows(ctx_len) = acts.ctx[static_cast<std::size_t>(l)].k;
                        vc.topRows(ctx_len) = acts.ctx[static_cast<std::size_t>(l)].v;
                    }
                    kc.bottomRows(nn) = a.k;
                    vc.bottomRows(nn) = a.v;
                    next_ctx[static_cast<std::size_t>(l)].k = kc.bottomRows(keep);
                    next_ctx[static_cast<std::size_t>(l)].v = vc.bottomRows(keep);
                }
                ctx = std::move(next_ctx);
            }
            prev_end = end;
        }
    }
    return stats;
}

template <typename Scalar>
double ToyModel<Scalar>::train_step(const std::vector<TrainingExample>& batch, double lr,
                                    const OptimSettings& opt) {
    zero_grads();
    const BatchStats stats = run_batch(batch, true);
    if (stats.count == 0) throw PreconditionError("train_step: batch predicts no tokens");
    const double loss = stats.loss_sum / static_cast<double>(stats.count);
    if (!std::isfinite(loss))
        throw Error("train_step: non-finite loss over " + std::to_string(stats.count) + " tokens");
    const Scalar inv = static_cast<Scalar>(1.0 / static_cast<double>(stats.count));
    for (auto& t : tensors_)
        if (!t.frozen) t.grad *= inv;
    apply_grads(lr, opt);
    return loss;
}

template <typename Scalar>
double ToyModel<Scalar>::evaluate_loss(const std::vector<TrainingExample>& batch) {
    const BatchStats stats = run_batch(batch, false);
    if (stats.count == 0) throw PreconditionError("evaluate_loss: batch predicts no tokens");
    return stats.loss_sum / static_cast<double>(stats.count);
}

template <typename Scalar>
double ToyModel<Scalar>::apply_grads(double lr, const OptimSettings& opt) {
    if (momentum_.empty()) {
        momentum_.resize(tensors_.size());
        adam_m_.resize(tensors_.size());
        adam_v_.resize(tensors_.size());
        for (std::size_t i = 0; i < tensors_.size(); ++i) {
            momentum_[i] = Matrix::Zero(tensors_[i].value.rows(), tensors_[i].value.cols());
            adam_m_[i] = momentum_[i];
            adam_v_[i] = momentum_[i];
        }
    }
    double sq = 0.0;
    for (const auto& t : tensors_)
        if (!t.frozen) sq += static_cast<double>(t.grad.squaredNorm());
    const double gnorm = std::sqrt(sq);
    double scale = 1.0;
    if (opt.grad_clip > 0.0 && gnorm > opt.grad_clip) scale = opt.grad_clip / gnorm;
    if (opt.kind == OptimSettings::Kind::adam) ++adam_t_;
    for (std::size_t i = 0; i < tensors_.size(); ++i) {
        auto& t = tensors_[i];
        if (t.frozen) continue;
        const Matrix g = t.grad * static_cast<Scalar>(scale);
        if (opt.kind == OptimSettings::Kind::sgd_momentum) {
            momentum_[i] = static_cast<Scalar>(opt.momentum) * momentum_[i] + g;
            t.value -= static_cast<Scalar>(lr) * momentum_[i];
        } else {
            adam_m_[i] = static_cast<Scalar>(opt.adam_beta1) * adam_m_[i] +
                         static_cast<Scalar>(1.0 - opt.adam_beta1) * g;
            adam_v_[i] = static_cast<Scalar>(opt.adam_beta2) * adam_v_[i] +
                         static_cast<Scalar>(1.0 - opt.adam_beta2) * g.cwiseProduct(g);
            const double mc = 1.0 - std::pow(opt.adam_beta1, static_cast<double>(adam_t_));
            const double vc = 1.0 - std::pow(opt.adam_beta2, static_cast<double>(adam_t_));
            const auto mhat = adam_m_[i].array() / static_cast<Scalar>(mc);
            const auto vhat = adam_v_[i].array() / static_cast<Scalar>(vc);
            t.value -= (static_cast<Scalar>(lr) * mhat / (vhat.sqrt() + static_cast<Scalar>(opt.adam_eps)))
                           .matrix();
        }
    }
    return gnorm;
}

template <typename Scalar>
double ToyModel<Scalar>::gradient_check(const TrainingExample& example, const std::string& corrupt_tensor,
                                        double corrupt_scale) {
    zero_grads();
    const std::vector<TrainingExample> one{example};
    const BatchStats base = run_batch(one, true);
    if (base.count == 0) throw PreconditionError("gradient_check: example predicts no tokens");
    const double inv = 1.0 / static_cast<double>(base.count);
    std::vector<Matrix> analytic(tensors_.size());
    for (std::size_t i = 0; i < tensors_.size(); ++i)
        analytic[i] = tensors_[i].grad * static_cast<Scalar>(inv);
    if (!corrupt_tensor.empty()) {
        const auto it = index_.find(corrupt_tensor);
        if (it == index_.end()) throw PreconditionError("gradient_check: unknown tensor " + corrupt_tensor);
        analytic[static_cast<std::size_t>(it->second)] *= static_cast<Scalar>(corrupt_scale);
    }
    const double h = 1e-5;
    double worst = 0.0;
    for (std::size_t ti = 0; ti < tensors_.size(); ++ti) {
        auto& t = tensors_[ti];
        if (t.frozen) continue;
        for (Eigen::Index j = 0; j < t.value.cols(); ++j) {
            for (Eigen::Index i = 0; i < t.value.rows(); ++i) {
                const Scalar orig = t.value(i, j);
                t.value(i, j) = orig + static_cast<Scalar>(h);
                const double lp = run_batch(one, false).loss_sum;
                t.value(i, j) = orig - static_cast<Scalar>(h);
                const double lm = run_batch(one, false).loss_sum;
                t.value(i, j) = orig;
                const double fd = (lp - lm) * inv / (2.0 * h);
                const double a = static_cast<double>(analytic[ti](i, j));
                const double rel = std::abs(a - fd) / std::max(std::abs(a) + std::abs(fd), 1e-3);
                worst = std::max(worst, rel);
            }
        }
    }
    return worst;
}

template <typename Scalar>
typename ToyModel<Scalar>::Vector ToyModel<Scalar>::decode_step(const Vector& embedded_row, int position,
                                                                DecodeCache& cache) const {
    if (position != cache.len) throw PreconditionError("decode_step: positions must be fed in order");
    if (cache.len >= config_.window) throw PreconditionError("decode_step: window exhausted");
    const int hdim = config_.hidden_dim;
    const int dh = hdim / config_.heads;
    const Scalar scale = Scalar(1) / std::sqrt(Scalar(dh));
    Row<Scalar> x = embedded_row.transpose();
    for (int l = 0; l < config_.layers; ++l) {
        const std::string p = "l" + std::to_string(l) + ".";
        const Row<Scalar> y1 = ln_row<Scalar>(x, tensor(p + "ln1.g").value, tensor(p + "ln1.b").value);
        const Row<Scalar> q = y1 * tensor(p + "attn.wq").value;
        LayerCache& c = cache.kv[static_cast<std::size_t>(l)];
        c.k.row(cache.len) = y1 * tensor(p + "attn.wk").value;
        c.v.row(cache.len) = y1 * tensor(p + "attn.wv").value;
        const int m = cache.len + 1;
        Row<Scalar> attn(hdim);
        for (int hj = 0; hj < config_.heads; ++hj) {
            const int off = hj * dh;
            const Row<Scalar> s = q.middleCols(off, dh) * c.k.topRows(m).middleCols(off, dh).transpose() * scale;
            const Scalar mx = s.maxCoeff();
            Eigen::Array<Scalar, 1, Eigen::Dynamic> e = (s.array() - mx).exp();
            e /= e.sum();
            attn.middleCols(off, dh) = e.matrix() * c.v.topRows(m).middleCols(off, dh);
        }
        x += attn * tensor(p + "attn.wo").value;
        const Row<Scalar> y2 = ln_row<Scalar>(x, tensor(p + "ln2.g").value, tensor(p + "ln2.b").value);
        Row<Scalar> u = y2 * tensor(p + "mlp.w1").value;
        u += tensor(p + "mlp.b1").value.col(0).transpose();
        const Row<Scalar> mr = u.array().tanh().matrix();
        x += mr * tensor(p + "mlp.w2").value;
        x += tensor(p + "mlp.b2").value.col(0).transpose();
    }
    cache.len += 1;
    const Row<Scalar> hf = ln_row<Scalar>(x, tensor("ln_f.g").value, tensor("ln_f.b").value);
    Vector logits = (hf * tensor("head.w").value).transpose();
    logits += tensor("head.b").value.col(0);
    return logits;
}

template <typename Scalar>
GenerationResult ToyModel<Scalar>::generate(const ConditionBundle<Scalar>& bundle, int max_tokens,
                                            double temperature, std::uint64_t seed) const {
    if (max_tokens < 2) throw PreconditionError("generate: max_tokens must be at least 2");
    const RowPlan plan = build_rows(bundle, {});
    const int prefix = static_cast<int>(plan.token_of_row.size());
    if (prefix + 1 > config_.window) throw PreconditionError("generate: condition prefix exceeds window");
    const Matrix& pos = tensor("pos_embed").value;
    const Matrix& embed = tensor("token_embed").value;

    DecodeCache cache;
    cache.kv.resize(static_cast<std::size_t>(config_.layers));
    for (auto& c : cache.kv) {
        c.k.resize(config_.window, config_.hidden_dim);
        c.v.resize(config_.window, config_.hidden_dim);
    }
    for (int i = 0; i < prefix; ++i) {
        const Vector row = plan.content.row(i).transpose() + pos.col(i);
        decode_step(row, i, cache);
    }

    GenerationResult res;
    res.tokens.tokens.push_back(kTokenBos);
    SequentialRng rng(seed);
    while (static_cast<int>(res.tokens.tokens.size()) < max_tokens) {
        const int pos_id = prefix + static_cast<int>(res.tokens.tokens.size()) - 1;
        if (pos_id >= config_.window) {
            res.truncated = true;
            return res;
        }
        const Vector row = embed.col(res.tokens.tokens.back()) + pos.col(pos_id);
        const Vector logits = decode_step(row, pos_id, cache);
        const int next = sample_token<Scalar>(logits, temperature, rng);
        res.tokens.tokens.push_back(next);
        res.steps += 1;
        if (next == kTokenTerm) return res;
    }
    res.truncated = true;
    return res;
}

template <typename Scalar>
GenerationResult ToyModel<Scalar>::generate_uncached(const ConditionBundle<Scalar>& bundle, int max_tokens,
                                                     double temperature, std::uint64_t seed) const {
    if (max_tokens < 2) throw PreconditionError("generate: max_tokens must be at least 2");
    const RowPlan plan = build_rows(bundle, {});
    const int prefix = static_cast<int>(plan.token_of_row.size());
    if (prefix + 1 > config_.window) throw PreconditionError("generate: condition prefix exceeds window");

    GenerationResult res;
    res.tokens.tokens.push_back(kTokenBos);
    SequentialRng rng(seed);
    while (static_cast<int>(res.tokens.tokens.size()) < max_tokens) {
        const int pos_id = prefix + static_cast<int>(res.tokens.tokens.size()) - 1;
        if (pos_id >= config_.window) {
            res.truncated = true;
            return res;
        }
        const Matrix logits_all = forward(bundle, res.tokens.tokens);
        const Vector logits = logits_all.row(logits_all.rows() - 1).transpose();
        const int next = sample_token<Scalar>(logits, temperature, rng);
        res.tokens.tokens.push_back(next);
        res.steps += 1;
        if (next == kTokenTerm) return res;
    }
    res.truncated = true;
    return res;
}

template <typename Scalar>
typename ToyModel<Scalar>::Vector ToyModel<Scalar>::next_logits_cached(const ConditionBundle<Scalar>& bundle,
                                                                       const std::vector<int>& token_prefix) const {
    if (token_prefix.empty()) throw PreconditionError("next_logits_cached: token prefix must start with BOS");
    const RowPlan plan = build_rows(bundle, {});
    const int prefix = static_cast<int>(plan.token_of_row.size());
    const int total = prefix + static_cast<int>(token_prefix.size());
    if (total > config_.window) throw PreconditionError("next_logits_cached: sequence exceeds window");
    const Matrix& pos = tensor("pos_embed").value;
    const Matrix& embed = tensor("token_embed").value;
    DecodeCache cache;
    cache.kv.resize(static_cast<std::size_t>(config_.layers));
    for (auto& c : cache.kv) {
        c.k.resize(config_.window, config_.hidden_dim);
        c.v.resize(config_.window, config_.hidden_dim);
    }
    Vector logits;
    for (int i = 0; i < prefix; ++i) {
        const Vector row = plan.content.row(i).transpose() + pos.col(i);
        logits = decode_step(row, i, cache);
    }
    for (std::size_t t = 0; t < token_prefix.size(); ++t) {
        const int id = token_prefix[t];
        if (id < 0 || id >= config_.vocab_size) throw PreconditionError("next_logits_cached: token out of range");
        const int pos_id = prefix + static_cast<int>(t);
        const Vector row = embed.col(id) + pos.col(pos_id);
        logits = decode_step(row, pos_id, cache);
    }
    return logits;
}

template <typename Scalar>
void ToyModel<Scalar>::save_checkpoint(const std::string& path) const {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open for writing: " + path);
    os.write("TSCK", 4);
    write_u16(os, 1);
    Json header;
    header["config"] = model_config_to_json(config_);
    Json list = Json::array();
    for (const auto& t : tensors_) {
        list.push_back(Json{{"name", t.name},
                            {"rows", static_cast<int>(t.value.rows())},
                            {"cols", static_cast<int>(t.value.cols())},
                            {"frozen", t.frozen}});
    }
    header["tensors"] = list;
    const std::string hs = header.dump();
    write_u64(os, hs.size());
    os.write(hs.data(), static_cast<std::streamsize>(hs.size()));
    for (const auto& t : tensors_) {
        for (Eigen::Index j = 0; j < t.value.cols(); ++j)
            for (Eigen::Index i = 0; i < t.value.rows(); ++i)
                write_f32(os, static_cast<float>(t.value(i, j)));
    }
    if (!os) throw IoError("write failed: " + path);
}

template <typename Scalar>
ToyModel<Scalar> ToyModel<Scalar>::load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open: " + path);
    char magic[4];
    if (!is.read(magic, 4) || std::string(magic, 4) != "TSCK")
        throw ParseError("checkpoint: bad magic in " + path);
    if (read_u16(is) != 1) throw ParseError("checkpoint: unsupported version in " + path);
    const std::uint64_t hlen = read_u64(is);
    if (hlen > (1ull << 24)) throw ParseError("checkpoint: implausible header length");
    std::string hs(hlen, '\0');
    if (!is.read(hs.data(), static_cast<std::streamsize>(hlen)))
        throw ParseError("checkpoint: truncated header");
    Json header;
    try {
        header = Json::parse(hs);
    } catch (const Json::exception& e) {
        throw ParseError(std::string("checkpoint: bad header json: ") + e.what());
    }
    try {
        const ModelConfig cfg = model_config_from_json(header.at("config"));
        ToyModel model(cfg);
        const Json& list = header.at("tensors");
        if (!list.is_array() || list.size() != model.tensors_.size())
            throw ParseError("checkpoint: tensor list mismatch");
        for (std::size_t i = 0; i < model.tensors_.size(); ++i) {
            const Json& e = list.at(i);
            auto& t = model.tensors_[i];
            if (e.at("name").get<std::string>() != t.name ||
                e.at("rows").get<int>() != static_cast<int>(t.value.rows()) ||
                e.at("cols").get<int>() != static_cast<int>(t.value.cols()) ||
                e.at("frozen").get<bool>() != t.frozen)
                throw ParseError("checkpoint: tensor layout mismatch at " + t.name);
            for (Eigen::Index j = 0; j < t.value.cols(); ++j)
                for (Eigen::Index r = 0; r < t.value.rows(); ++r)
                    t.value(r, j) = static_cast<Scalar>(read_f32(is));
        }
        if (is.peek() != std::char_traits<char>::eof()) throw ParseError("checkpoint: trailing data");
        return model;
    } catch (const Json::exception& e) {
        throw ParseError(std::string("checkpoint: bad header json: ") + e.what());
    }
}

std::vector<TrainingExample> build_training_examples(const Mesh& mesh, const Segmentation& seg,
                                                     int point_count, int boundary_k,
                                                     int placeholder_length, std::uint64_t seed) {
    validate_segmentation(seg, mesh);
    if (point_count < 1) throw PreconditionError("build_training_examples: point_count must be positive");
    if (boundary_k < 0) throw PreconditionError("build_training_examples: boundary_k must be non-negative");
    if (placeholder_length < 1)
        throw PreconditionError("build_training_examples: placeholder_length must be positive");

    const SurfaceSamples global = sample_surface(mesh, point_count, hash_combine(seed, 0));
    std::vector<TrainingExample> out;
    out.reserve(seg.order.size());
    std::vector<int> prior;
    for (std::size_t i = 0; i < seg.order.size(); ++i) {
        const Patch& patch = seg.patches[static_cast<std::size_t>(seg.order[i])];
        const Mesh prior_mesh = submesh(mesh, prior);
        const std::vector<int> sel = select_boundary_faces(prior_mesh, mesh, patch, boundary_k);
        std::vector<std::array<Vec3, 3>> positions;
        positions.reserve(sel.size());
        for (int f : sel) {
            const Face& t = prior_mesh.faces[static_cast<std::size_t>(f)];
            positions.push_back({prior_mesh.vertices[static_cast<std::size_t>(t[0])],
                                 prior_mesh.vertices[static_cast<std::size_t>(t[1])],
                                 prior_mesh.vertices[static_cast<std::size_t>(t[2])]});
        }
        const PatchFrame frame = compute_frame(mesh, patch.face_indices, positions);
        const BoundaryCondition bc = encode_boundary_tokens(positions, frame, placeholder_length);

        TrainingExample ex;
        ex.global_points = global;
        ex.local_points =
            sample_surface(submesh(mesh, patch.face_indices), point_count, hash_combine(seed, 1 + i));
        ex.boundary_tokens = bc.tokens;
        ex.target_tokens = tokenize_patch(quantize_patch(mesh, patch.face_indices, frame));
        ex.frame = frame;
        out.push_back(std::move(ex));
        prior.insert(prior.end(), patch.face_indices.begin(), patch.face_indices.end());
    }
    return out;
}

template class ToyModel<float>;
template class ToyModel<double>;

}  // namespace tessera
