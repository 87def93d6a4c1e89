#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <unordered_map>
#include <vector>

#include "semaug/error.hpp"
#include "semaug/params.hpp"
#include "semaug/tensor.hpp"

namespace semaug {

using IdMatrix = Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MaskMatrix = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Token inventory with PAD=0 and UNK=1 reserved.
class Vocab {
public:
    static constexpr int pad = 0;
    static constexpr int unk = 1;

    Vocab() : tokens_{"<pad>", "<unk>"} { rebuild_index(); }

    explicit Vocab(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
        if (tokens_.size() < 2 || tokens_[0] != "<pad>" || tokens_[1] != "<unk>") {
            throw ConfigError("vocab must start with <pad>, <unk>");
        }
        rebuild_index();
    }

    /// Adds a token if absent; returns its index.
    int add(const std::string& token) {
        auto [it, inserted] = index_.emplace(token, static_cast<int>(tokens_.size()));
        if (inserted) tokens_.push_back(token);
        return it->second;
    }

    int id(const std::string& token) const {
        auto it = index_.find(token);
        return it == index_.end() ? unk : it->second;
    }

    std::size_t size() const { return tokens_.size(); }
    const std::vector<std::string>& tokens() const { return tokens_; }

    friend bool operator==(const Vocab& a, const Vocab& b) { return a.tokens_ == b.tokens_; }

private:
    void rebuild_index() {
        index_.clear();
        for (std::size_t i = 0; i < tokens_.size(); ++i) {
            if (!index_.emplace(tokens_[i], static_cast<int>(i)).second) {
                throw ConfigError("duplicate vocab entry '" + tokens_[i] + "'");
            }
        }
    }

    std::vector<std::string> tokens_;
    std::unordered_map<std::string, int> index_;
};

struct EncoderConfig {
    std::size_t d_model = 32;
    std::size_t n_layers = 2;
    std::size_t n_heads = 2;
    std::size_t d_ff = 0;  // 0 selects 4 * d_model
    std::size_t max_len = 32;
    std::size_t vocab_size = 2;
    std::uint64_t seed = 0;

    std::size_t ff_width() const { return d_ff == 0 ? 4 * d_model : d_ff; }

    void validate() const {
        if (d_model == 0 || n_layers == 0 || n_heads == 0) {
            throw ConfigError("encoder: d_model, n_layers and n_heads must be positive");
        }
        if (d_model % n_heads != 0) {
            throw ConfigError("encoder: d_model " + std::to_string(d_model) + " is not divisible by n_heads " +
                              std::to_string(n_heads));
        }
        if (max_len == 0) throw ConfigError("encoder: max_len must be >= 1");
        if (vocab_size < 2) throw ConfigError("encoder: vocab must hold at least PAD and UNK");
    }
};

/// Token ids for the input (row 0) and K external texts (rows 1..K), padded
/// on the right. A missing text is an all-PAD row with an all-false mask.
struct ChannelBatch {
    IdMatrix token_ids;
    MaskMatrix mask;

    std::size_t channels() const { return static_cast<std::size_t>(token_ids.rows()); }
    std::size_t width() const { return static_cast<std::size_t>(token_ids.cols()); }

    /// Number of real tokens in channel c. Masks must be a true-prefix.
    std::size_t length(std::size_t c) const {
        const auto row = mask.row(static_cast<Eigen::Index>(c));
        std::size_t n = 0;
        while (n < width() && row(static_cast<Eigen::Index>(n))) ++n;
        for (std::size_t i = n; i < width(); ++i) {
            if (row(static_cast<Eigen::Index>(i))) throw ArgumentError("channel mask is not right-padded");
        }
        return n;
    }
};

/// Encoder output. Rows at masked positions are exactly zero.
struct HiddenStates {
    Matrix hx;                   // L x d
    std::vector<Matrix> external;  // K of L x d
    MaskMatrix mask;             // (K+1) x L

    std::size_t k() const { return external.size(); }
};

namespace nn {

struct LayerNormCache {
    Matrix xhat;
    Eigen::VectorXd inv_std;
};

inline constexpr double layer_norm_eps = 1e-5;

inline Matrix layer_norm(const Matrix& x, const Param& gain, const Param& bias, LayerNormCache* cache) {
    const auto d = static_cast<double>(x.cols());
    Matrix xhat(x.rows(), x.cols());
    Eigen::VectorXd inv_std(x.rows());
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        const double mean = x.row(i).sum() / d;
        const RowVector centered = x.row(i).array() - mean;
        const double var = centered.squaredNorm() / d;
        inv_std(i) = 1.0 / std::sqrt(var + layer_norm_eps);
        xhat.row(i) = centered * inv_std(i);
    }
    Matrix y = (xhat.array().rowwise() * gain.value.row(0).array()).rowwise() + bias.value.row(0).array();
    if (cache) *cache = {std::move(xhat), std::move(inv_std)};
    return y;
}

inline Matrix layer_norm_backward(const Matrix& dy, const LayerNormCache& c, Param& gain, Param& bias) {
    gain.grad.row(0) += (dy.array() * c.xhat.array()).colwise().sum().matrix();
    bias.grad.row(0) += dy.colwise().sum();
    const Matrix dxhat = dy.array().rowwise() * gain.value.row(0).array();
    const auto d = static_cast<double>(dy.cols());
    Matrix dx(dy.rows(), dy.cols());
    for (Eigen::Index i = 0; i < dy.rows(); ++i) {
        const double sum = dxhat.row(i).sum();
        const double dot = dxhat.row(i).dot(c.xhat.row(i));
        dx.row(i) = (c.inv_std(i) / d) * (d * dxhat.row(i).array() - sum - c.xhat.row(i).array() * dot);
    }
    return dx;
}

inline Matrix linear(const Matrix& x, const Param& w, const Param& b) {
    return (x * w.value).rowwise() + b.value.row(0);
}

inline Matrix linear_backward(const Matrix& dy, const Matrix& x, Param& w, Param& b) {
    w.grad.noalias() += x.transpose() * dy;
    b.grad.row(0) += dy.colwise().sum();
    return dy * w.value.transpose();
}

inline double gelu(double u) { return 0.5 * u * (1.0 + std::erf(u / std::numbers::sqrt2)); }

inline double gelu_grad(double u) {
    const double cdf = 0.5 * (1.0 + std::erf(u / std::numbers::sqrt2));
    const double pdf = std::exp(-0.5 * u * u) / std::sqrt(2.0 * std::numbers::pi);
    return cdf + u * pdf;
}

/// Row-wise softmax in place.
inline void softmax_rows(Matrix& s) {
    for (Eigen::Index i = 0; i < s.rows(); ++i) {
        const double mx = s.row(i).maxCoeff();
        s.row(i) = (s.row(i).array() - mx).exp();
        s.row(i) /= s.row(i).sum();
    }
}

/// Gradient of a row-wise softmax: dS = P * (dP - rowsum(dP * P)).
inline Matrix softmax_rows_backward(const Matrix& p, const Matrix& dp) {
    const Eigen::VectorXd dots = (dp.array() * p.array()).rowwise().sum();
    return p.array() * (dp.array().colwise() - dots.array());
}

}  // namespace nn

struct EncoderLayer {
    Param ln1_g, ln1_b, wq, bq, wk, bk, wv, bv, wo, bo, ln2_g, ln2_b, w1, b1, w2, b2;

    template <typename F>
    void visit(const std::string& prefix, F&& f) {
        f(prefix + "ln1.gain", ln1_g);
        f(prefix + "ln1.bias", ln1_b);
        f(prefix + "attn.wq", wq);
        f(prefix + "attn.bq", bq);
        f(prefix + "attn.wk", wk);
        f(prefix + "attn.bk", bk);
        f(prefix + "attn.wv", wv);
        f(prefix + "attn.bv", bv);
        f(prefix + "attn.wo", wo);
        f(prefix + "attn.bo", bo);
        f(prefix + "ln2.gain", ln2_g);
        f(prefix + "ln2.bias", ln2_b);
        f(prefix + "ff.w1", w1);
        f(prefix + "ff.b1", b1);
        f(prefix + "ff.w2", w2);
        f(prefix + "ff.b2", b2);
    }
};

/// Shared-weight pre-norm transformer encoder applied to each channel alone.
struct EncoderParams {
    EncoderConfig config;
    Param tok_emb;
    std::vector<EncoderLayer> layers;
    Param lnf_g, lnf_b;
    Matrix pos_enc;  // fixed sinusoidal table, max_len x d_model

    template <typename F>
    void visit(F&& f) {
        f("encoder.tok_emb", tok_emb);
        for (std::size_t i = 0; i < layers.size(); ++i) {
            layers[i].visit("encoder.layer" + std::to_string(i) + ".", f);
        }
        f("encoder.lnf.gain", lnf_g);
        f("encoder.lnf.bias", lnf_b);
    }
};

inline Matrix sinusoidal_positions(std::size_t max_len, std::size_t d) {
    Matrix pe(max_len, d);
    for (std::size_t pos = 0; pos < max_len; ++pos) {
        for (std::size_t i = 0; i < d; ++i) {
            const double rate = std::pow(10000.0, -static_cast<double>(i - i % 2) / static_cast<double>(d));
            const double angle = static_cast<double>(pos) * rate;
            pe(pos, i) = i % 2 == 0 ? std::sin(angle) : std::cos(angle);
        }
    }
    return pe;
}

/// Weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)), biases zero, layer-norm
/// gains one. Each tensor draws from its own stream keyed by its name, so a
/// tensor's initial value depends only on (seed, name, shape).
inline EncoderParams init_encoder(const EncoderConfig& cfg) {
    cfg.validate();
    const auto d = static_cast<Eigen::Index>(cfg.d_model);
    const auto f = static_cast<Eigen::Index>(cfg.ff_width());
    const auto v = static_cast<Eigen::Index>(cfg.vocab_size);
    constexpr auto G = ParamGroup::encoder;

    EncoderParams p;
    p.config = cfg;
    p.tok_emb = Param(v, d, G);
    p.layers.resize(cfg.n_layers);
    for (auto& l : p.layers) {
        l.ln1_g = Param(1, d, G, false);
        l.ln1_b = Param(1, d, G, false);
        l.wq = Param(d, d, G);
        l.bq = Param(1, d, G, false);
        l.wk = Param(d, d, G);
        l.bk = Param(1, d, G, false);
        l.wv = Param(d, d, G);
        l.bv = Param(1, d, G, false);
        l.wo = Param(d, d, G);
        l.bo = Param(1, d, G, false);
        l.ln2_g = Param(1, d, G, false);
        l.ln2_b = Param(1, d, G, false);
        l.w1 = Param(d, f, G);
        l.b1 = Param(1, f, G, false);
        l.w2 = Param(f, d, G);
        l.b2 = Param(1, d, G, false);
    }
    p.lnf_g = Param(1, d, G, false);
    p.lnf_b = Param(1, d, G, false);
    p.pos_enc = sinusoidal_positions(cfg.max_len, cfg.d_model);

    p.visit([&](const std::string& name, Param& prm) {
        if (name.ends_with(".gain")) {
            prm.value.setOnes();
        } else if (prm.decay) {
            Rng rng(cfg.seed, name);
            // An embedding lookup reads a single active input, so its fan-in is 1.
            const double fan_in = name == "encoder.tok_emb" ? 1.0 : static_cast<double>(prm.value.rows());
            fill_uniform(prm.value, rng, 1.0 / std::sqrt(fan_in));
        }
    });
    return p;
}

struct EncoderLayerTrace {
    Matrix x_in, a, q, k, v, o, x_mid, c, u, g;
    std::vector<Matrix> probs;  // per head, n x n
    nn::LayerNormCache ln1, ln2;
};

struct ChannelTrace {
    std::vector<int> ids;
    std::vector<EncoderLayerTrace> layers;
    nn::LayerNormCache lnf;
};

/// Encodes one text of n real tokens; returns n x d.
inline Matrix encode_sequence(const EncoderParams& p, const std::vector<int>& ids, ChannelTrace* trace) {
    const auto n = static_cast<Eigen::Index>(ids.size());
    const auto d = static_cast<Eigen::Index>(p.config.d_model);
    const auto heads = static_cast<Eigen::Index>(p.config.n_heads);
    const Eigen::Index dh = d / heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

    Matrix x(n, d);
    for (Eigen::Index t = 0; t < n; ++t) {
        x.row(t) = p.tok_emb.value.row(ids[static_cast<std::size_t>(t)]) + p.pos_enc.row(t);
    }
    if (trace) {
        trace->ids = ids;
        trace->layers.assign(p.layers.size(), {});
    }
    for (std::size_t li = 0; li < p.layers.size(); ++li) {
        const auto& L = p.layers[li];
        EncoderLayerTrace local;
        EncoderLayerTrace& tr = trace ? trace->layers[li] : local;
        tr.x_in = x;
        tr.a = nn::layer_norm(x, L.ln1_g, L.ln1_b, &tr.ln1);
        tr.q = nn::linear(tr.a, L.wq, L.bq);
        tr.k = nn::linear(tr.a, L.wk, L.bk);
        tr.v = nn::linear(tr.a, L.wv, L.bv);
        tr.o.resize(n, d);
        tr.probs.resize(static_cast<std::size_t>(heads));
        for (Eigen::Index h = 0; h < heads; ++h) {
            Matrix s = (tr.q.middleCols(h * dh, dh) * tr.k.middleCols(h * dh, dh).transpose()) * scale;
            nn::softmax_rows(s);
            tr.o.middleCols(h * dh, dh) = s * tr.v.middleCols(h * dh, dh);
            tr.probs[static_cast<std::size_t>(h)] = std::move(s);
        }
        tr.x_mid = x + nn::linear(tr.o, L.wo, L.bo);
        tr.c = nn::layer_norm(tr.x_mid, L.ln2_g, L.ln2_b, &tr.ln2);
        tr.u = nn::linear(tr.c, L.w1, L.b1);
        tr.g = tr.u.unaryExpr([](double u) { return nn::gelu(u); });
        x = tr.x_mid + nn::linear(tr.g, L.w2, L.b2);
    }
    nn::LayerNormCache lnf_local;
    return nn::layer_norm(x, p.lnf_g, p.lnf_b, trace ? &trace->lnf : &lnf_local);
}

/// Accumulates parameter gradients given d(output) for one channel.
inline void encode_sequence_backward(EncoderParams& p, const ChannelTrace& tr, const Matrix& d_out) {
    const auto d = static_cast<Eigen::Index>(p.config.d_model);
    const auto heads = static_cast<Eigen::Index>(p.config.n_heads);
    const Eigen::Index dh = d / heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

    Matrix dx = nn::layer_norm_backward(d_out, tr.lnf, p.lnf_g, p.lnf_b);
    for (std::size_t li = p.layers.size(); li-- > 0;) {
        auto& L = p.layers[li];
        const auto& t = tr.layers[li];
        // Feed-forward sub-block.
        const Matrix dg = nn::linear_backward(dx, t.g, L.w2, L.b2);
        const Matrix du = dg.array() * t.u.unaryExpr([](double u) { return nn::gelu_grad(u); }).array();
        const Matrix dc = nn::linear_backward(du, t.c, L.w1, L.b1);
        Matrix dx_mid = dx + nn::layer_norm_backward(dc, t.ln2, L.ln2_g, L.ln2_b);
        // Attention sub-block.
        const Matrix d_o = nn::linear_backward(dx_mid, t.o, L.wo, L.bo);
        Matrix dq(t.q.rows(), d), dk(t.k.rows(), d), dv(t.v.rows(), d);
        for (Eigen::Index h = 0; h < heads; ++h) {
            const Matrix& P = t.probs[static_cast<std::size_t>(h)];
            const auto dO_h = d_o.middleCols(h * dh, dh);
            dv.middleCols(h * dh, dh) = P.transpose() * dO_h;
            const Matrix dP = dO_h * t.v.middleCols(h * dh, dh).transpose();
            const Matrix dS = nn::softmax_rows_backward(P, dP) * scale;
            dq.middleCols(h * dh, dh) = dS * t.k.middleCols(h * dh, dh);
            dk.middleCols(h * dh, dh) = dS.transpose() * t.q.middleCols(h * dh, dh);
        }
        Matrix da = nn::linear_backward(dq, t.a, L.wq, L.bq);
        da += nn::linear_backward(dk, t.a, L.wk, L.bk);
        da += nn::linear_backward(dv, t.a, L.wv, L.bv);
        dx = dx_mid + nn::layer_norm_backward(da, t.ln1, L.ln1_g, L.ln1_b);
    }
    for (std::size_t t = 0; t < tr.ids.size(); ++t) {
        p.tok_emb.grad.row(tr.ids[t]) += dx.row(static_cast<Eigen::Index>(t));
    }
}

/// Encodes every channel independently with the shared weights. Rows past a
/// channel's real length are zero in the output.
inline HiddenStates encode_channels(const EncoderParams& p, const ChannelBatch& batch,
                                    std::vector<ChannelTrace>* traces = nullptr) {
    const std::size_t channels = batch.channels();
    const std::size_t width = batch.width();
    if (channels == 0) throw ArgumentError("channel batch has no input channel");
    if (batch.mask.rows() != batch.token_ids.rows() || batch.mask.cols() != batch.token_ids.cols()) {
        throw ArgumentError("token ids and mask differ in shape");
    }
    if (width > p.config.max_len) {
        throw ArgumentError("batch width " + std::to_string(width) + " exceeds max_len " +
                            std::to_string(p.config.max_len));
    }
    const auto vocab = static_cast<int>(p.config.vocab_size);
    for (Eigen::Index i = 0; i < batch.token_ids.size(); ++i) {
        const int id = batch.token_ids.data()[i];
        if (id < 0 || id >= vocab) {
            throw EncodingError("token id " + std::to_string(id) + " outside vocabulary of size " +
                                std::to_string(vocab));
        }
    }
    const auto d = static_cast<Eigen::Index>(p.config.d_model);
    HiddenStates hs;
    hs.mask = batch.mask;
    if (traces) traces->assign(channels, {});
    for (std::size_t c = 0; c < channels; ++c) {
        Matrix h = Matrix::Zero(static_cast<Eigen::Index>(width), d);
        const std::size_t n = batch.length(c);
        if (n > 0) {
            std::vector<int> ids(n);
            for (std::size_t t = 0; t < n; ++t) {
                ids[t] = batch.token_ids(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(t));
            }
            h.topRows(static_cast<Eigen::Index>(n)) = encode_sequence(p, ids, traces ? &(*traces)[c] : nullptr);
        }
        if (c == 0) {
            hs.hx = std::move(h);
        } else {
            hs.external.push_back(std::move(h));
        }
    }
    return hs;
}

}  // namespace semaug
