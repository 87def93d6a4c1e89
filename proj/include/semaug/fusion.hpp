#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "semaug/encoder.hpp"
#include "semaug/error.hpp"
#include "semaug/params.hpp"
#include "semaug/tensor.hpp"

namespace semaug {

enum class FusionMode { attention, linear };

inline std::string to_string(FusionMode m) { return m == FusionMode::attention ? "attention" : "linear"; }

inline FusionMode parse_fusion_mode(const std::string& s) {
    if (s == "attention") return FusionMode::attention;
    if (s == "linear") return FusionMode::linear;
    throw ConfigError("unknown fusion mode '" + s + "'");
}

struct FusionConfig {
    double p = 0.5;
    FusionMode mode = FusionMode::attention;
    std::size_t d_model = 32;

    void validate() const {
        if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("fusion factor p must lie in [0,1]");
    }
};

struct AttentionFusionParams {
    Param wq, wk, wv;  // d x d, no bias

    template <typename F>
    void visit(F&& f) {
        f("fusion.attn.wq", wq);
        f("fusion.attn.wk", wk);
        f("fusion.attn.wv", wv);
    }
};

/// Mixes the (K+1)L stacked rows into L rows; the same weights apply to every
/// hidden dimension.
struct LinearFusionParams {
    Param w;     // L x (K+1)L
    Param bias;  // 1 x L

    template <typename F>
    void visit(F&& f) {
        f("fusion.linear.w", w);
        f("fusion.linear.bias", bias);
    }
};

inline AttentionFusionParams init_attention_fusion(std::size_t d_model, std::uint64_t seed) {
    const auto d = static_cast<Eigen::Index>(d_model);
    AttentionFusionParams p{Param(d, d, ParamGroup::fusion), Param(d, d, ParamGroup::fusion),
                            Param(d, d, ParamGroup::fusion)};
    p.visit([&](const std::string& name, Param& prm) {
        Rng rng(seed, name);
        fill_uniform(prm.value, rng, 1.0 / std::sqrt(static_cast<double>(d)));
    });
    return p;
}

inline LinearFusionParams init_linear_fusion(std::size_t max_len, std::size_t k, std::uint64_t seed) {
    const auto L = static_cast<Eigen::Index>(max_len);
    const auto in = static_cast<Eigen::Index>((k + 1) * max_len);
    LinearFusionParams p{Param(L, in, ParamGroup::fusion), Param(1, L, ParamGroup::fusion, false)};
    Rng rng(seed, "fusion.linear.w");
    fill_uniform(p.w.value, rng, 1.0 / std::sqrt(static_cast<double>(in)));
    return p;
}

struct AttentionTrace {
    bool identity = false;  // p == 1, K == 0, or no unmasked external token
    double p = 1.0;
    std::vector<std::pair<std::size_t, Eigen::Index>> key_rows;  // (external channel, row)
    Matrix keys_in;  // gathered external rows, n_keys x d
    Matrix q, k, v;
    Matrix weights;  // L x n_keys, rows sum to 1
};

namespace detail {

inline void check_hidden(const HiddenStates& hs, Eigen::Index d) {
    const Eigen::Index L = hs.hx.rows();
    if (hs.hx.cols() != d) throw ArgumentError("fusion: H_x width does not match d_model");
    if (hs.mask.rows() != static_cast<Eigen::Index>(hs.k() + 1) || hs.mask.cols() != L) {
        throw ArgumentError("fusion: mask shape does not match (K+1) x L");
    }
    for (const auto& e : hs.external) {
        if (e.rows() != L || e.cols() != d) throw ArgumentError("fusion: external channel shape mismatch");
    }
}

}  // namespace detail

/// Single-head cross-attention from the input rows to every unmasked token of
/// every external channel, then H_fusion = p * H_x + (1 - p) * H_context.
/// With no attendable key the context is H_x itself, so fusion is identity.
inline Matrix attention_fuse(const HiddenStates& hs, const AttentionFusionParams& prm, double p,
                             AttentionTrace* trace = nullptr) {
    const Eigen::Index d = prm.wq.value.rows();
    check_shape(prm.wq.value, d, d, "fusion.attn.wq");
    check_shape(prm.wk.value, d, d, "fusion.attn.wk");
    check_shape(prm.wv.value, d, d, "fusion.attn.wv");
    detail::check_hidden(hs, d);
    if (!(p >= 0.0 && p <= 1.0)) throw ArgumentError("fusion factor p must lie in [0,1]");

    AttentionTrace local;
    AttentionTrace& tr = trace ? *trace : local;
    tr = AttentionTrace{};
    tr.p = p;
    for (std::size_t c = 0; c < hs.k(); ++c) {
        for (Eigen::Index t = 0; t < hs.hx.rows(); ++t) {
            if (hs.mask(static_cast<Eigen::Index>(c + 1), t)) tr.key_rows.emplace_back(c, t);
        }
    }
    if (p == 1.0 || tr.key_rows.empty()) {
        tr.identity = true;
        return hs.hx;
    }
    // Keys in lexicographic order of their hidden states, so the softmax sums
    // do not depend on the order of the external channels.
    std::stable_sort(tr.key_rows.begin(), tr.key_rows.end(), [&](const auto& a, const auto& b) {
        const auto ra = hs.external[a.first].row(a.second);
        const auto rb = hs.external[b.first].row(b.second);
        return std::lexicographical_compare(ra.begin(), ra.end(), rb.begin(), rb.end());
    });
    tr.keys_in.resize(static_cast<Eigen::Index>(tr.key_rows.size()), d);
    for (std::size_t i = 0; i < tr.key_rows.size(); ++i) {
        const auto [c, t] = tr.key_rows[i];
        tr.keys_in.row(static_cast<Eigen::Index>(i)) = hs.external[c].row(t);
    }
    tr.q = hs.hx * prm.wq.value;
    tr.k = tr.keys_in * prm.wk.value;
    tr.v = tr.keys_in * prm.wv.value;
    tr.weights = (tr.q * tr.k.transpose()) / std::sqrt(static_cast<double>(d));
    nn::softmax_rows(tr.weights);
    const Matrix context = tr.weights * tr.v;
    return p * hs.hx + (1.0 - p) * context;
}

struct FusionGrads {
    Matrix d_hx;
    std::vector<Matrix> d_external;
};

inline FusionGrads attention_fuse_backward(const Matrix& d_fused, const HiddenStates& hs,
                                           const AttentionTrace& tr, AttentionFusionParams& prm) {
    FusionGrads g;
    g.d_external.assign(hs.k(), Matrix::Zero(hs.hx.rows(), hs.hx.cols()));
    if (tr.identity) {
        g.d_hx = d_fused;
        return g;
    }
    const double d = static_cast<double>(hs.hx.cols());
    const Matrix d_ctx = (1.0 - tr.p) * d_fused;
    g.d_hx = tr.p * d_fused;
    const Matrix dv = tr.weights.transpose() * d_ctx;
    const Matrix dw = d_ctx * tr.v.transpose();
    const Matrix ds = nn::softmax_rows_backward(tr.weights, dw) / std::sqrt(d);
    const Matrix dq = ds * tr.k;
    const Matrix dk = ds.transpose() * tr.q;
    prm.wq.grad.noalias() += hs.hx.transpose() * dq;
    prm.wk.grad.noalias() += tr.keys_in.transpose() * dk;
    prm.wv.grad.noalias() += tr.keys_in.transpose() * dv;
    g.d_hx.noalias() += dq * prm.wq.value.transpose();
    const Matrix d_keys = dk * prm.wk.value.transpose() + dv * prm.wv.value.transpose();
    for (std::size_t i = 0; i < tr.key_rows.size(); ++i) {
        const auto [c, t] = tr.key_rows[i];
        g.d_external[c].row(t) += d_keys.row(static_cast<Eigen::Index>(i));
    }
    return g;
}

struct LinearTrace {
    Matrix stacked;  // (K+1)L x d
};

/// out[l, :] = sum_s W[l, s] * stacked[s, :] + bias[l]
inline Matrix linear_fuse(const HiddenStates& hs, const LinearFusionParams& prm, LinearTrace* trace = nullptr) {
    const Eigen::Index L = hs.hx.rows();
    const Eigen::Index d = hs.hx.cols();
    detail::check_hidden(hs, d);
    const auto rows = static_cast<Eigen::Index>(hs.k() + 1) * L;
    check_shape(prm.w.value, L, rows, "fusion.linear.w");
    check_shape(prm.bias.value, 1, L, "fusion.linear.bias");
    Matrix stacked(rows, d);
    stacked.topRows(L) = hs.hx;
    for (std::size_t c = 0; c < hs.k(); ++c) {
        stacked.middleRows(static_cast<Eigen::Index>(c + 1) * L, L) = hs.external[c];
    }
    Matrix out = prm.w.value * stacked;
    out.colwise() += prm.bias.value.row(0).transpose();
    if (trace) trace->stacked = std::move(stacked);
    return out;
}

inline FusionGrads linear_fuse_backward(const Matrix& d_fused, const HiddenStates& hs, const LinearTrace& tr,
                                        LinearFusionParams& prm) {
    const Eigen::Index L = hs.hx.rows();
    prm.w.grad.noalias() += d_fused * tr.stacked.transpose();
    prm.bias.grad.row(0) += d_fused.rowwise().sum().transpose();
    const Matrix d_stacked = prm.w.value.transpose() * d_fused;
    FusionGrads g;
    g.d_hx = d_stacked.topRows(L);
    for (std::size_t c = 0; c < hs.k(); ++c) {
        Matrix dc = d_stacked.middleRows(static_cast<Eigen::Index>(c + 1) * L, L);
        // Padding rows are constant zeros, not encoder outputs.
        for (Eigen::Index t = 0; t < L; ++t) {
            if (!hs.mask(static_cast<Eigen::Index>(c + 1), t)) dc.row(t).setZero();
        }
        g.d_external.push_back(std::move(dc));
    }
    return g;
}

}  // namespace semaug
