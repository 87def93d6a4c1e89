#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "semaug/bm25.hpp"
#include "semaug/crf.hpp"
#include "semaug/datamodel.hpp"
#include "semaug/encoder.hpp"
#include "semaug/error.hpp"
#include "semaug/fusion.hpp"
#include "semaug/retrieval.hpp"

namespace semaug {

struct ModelConfig {
    EncoderConfig encoder;  // vocab_size is taken from the vocab
    FusionMode mode = FusionMode::attention;
    double p = 0.5;
    std::size_t k = 3;
};

/// Multi-channel encoder + fusion + CRF, with all trainable tensors.
class Model {
public:
    struct Trace {
        std::vector<ChannelTrace> channels;
        HiddenStates hidden;
        AttentionTrace attention;
        LinearTrace linear;
        Matrix fused;
        Matrix emissions;
    };

    Model(ModelConfig cfg, Vocab vocab, std::vector<Label> labels)
        : config_(std::move(cfg)), vocab_(std::move(vocab)), labels_(std::move(labels)) {
        if (labels_.empty()) throw ConfigError("model needs at least one label");
        for (std::size_t i = 0; i < labels_.size(); ++i) {
            if (!label_index_.emplace(labels_[i], static_cast<int>(i)).second) {
                throw ConfigError("duplicate label '" + labels_[i] + "'");
            }
        }
        FusionConfig{config_.p, config_.mode, config_.encoder.d_model}.validate();
        config_.encoder.vocab_size = vocab_.size();
        enc_ = init_encoder(config_.encoder);
        attn_ = init_attention_fusion(config_.encoder.d_model, config_.encoder.seed);
        if (config_.mode == FusionMode::linear) {
            lin_ = init_linear_fusion(config_.encoder.max_len, config_.k, config_.encoder.seed);
        }
        crf_ = init_crf(config_.encoder.d_model, labels_.size(), config_.encoder.seed);
    }

    const ModelConfig& config() const { return config_; }
    const Vocab& vocab() const { return vocab_; }
    const std::vector<Label>& labels() const { return labels_; }
    const EncoderParams& encoder() const { return enc_; }
    const AttentionFusionParams& attention_fusion() const { return attn_; }
    const CrfParams& crf() const { return crf_; }

    /// Changes the fusion factor without touching parameters.
    void set_fusion_factor(double p) {
        FusionConfig{p, config_.mode, config_.encoder.d_model}.validate();
        config_.p = p;
    }

    template <typename F>
    void visit(F&& f) {
        enc_.visit(f);
        if (config_.mode == FusionMode::attention) {
            attn_.visit(f);
        } else {
            lin_.visit(f);
        }
        crf_.visit(f);
    }

    void zero_grad() {
        visit([](const std::string&, Param& p) { p.zero_grad(); });
    }

    std::vector<ParamRef> param_refs() {
        std::vector<ParamRef> refs;
        visit([&](const std::string& name, Param& p) { refs.push_back({name, &p.value, &p.grad}); });
        return refs;
    }

    int label_index(const Label& l) const {
        auto it = label_index_.find(l);
        if (it == label_index_.end()) throw ConfigError("label '" + l + "' is not in the model's label inventory");
        return it->second;
    }

    /// Channel 0 is the sentence, channels 1..K the cached contexts in order.
    /// Texts longer than max_len are truncated; absent contexts are all-PAD.
    ChannelBatch make_batch(const Sentence& s, const ExternalContexts* ctx) const {
        const std::size_t L = config_.encoder.max_len;
        const std::size_t k = config_.k;
        if (ctx && ctx->contexts.size() > k) {
            throw ConfigError("sentence " + s.id + " has " + std::to_string(ctx->contexts.size()) +
                              " contexts but the model expects K=" + std::to_string(k));
        }
        ChannelBatch b{IdMatrix::Constant(static_cast<Eigen::Index>(k + 1), static_cast<Eigen::Index>(L), Vocab::pad),
                       MaskMatrix::Constant(static_cast<Eigen::Index>(k + 1), static_cast<Eigen::Index>(L), false)};
        auto fill = [&](Eigen::Index row, const std::vector<Token>& tokens) {
            for (std::size_t t = 0; t < tokens.size() && t < L; ++t) {
                b.token_ids(row, static_cast<Eigen::Index>(t)) = vocab_.id(tokens[t]);
                b.mask(row, static_cast<Eigen::Index>(t)) = true;
            }
        };
        fill(0, s.tokens);
        if (ctx) {
            for (std::size_t c = 0; c < ctx->contexts.size(); ++c) {
                fill(static_cast<Eigen::Index>(c + 1), tokenize_text(ctx->contexts[c].text));
            }
        }
        return b;
    }

    /// Gold label indices for the positions the model sees.
    LabelPath gold_path(const Sentence& s) const {
        if (!s.labels) throw ArgumentError("sentence " + s.id + " has no labels");
        const std::size_t n = std::min(s.tokens.size(), config_.encoder.max_len);
        LabelPath path(n);
        for (std::size_t i = 0; i < n; ++i) path[i] = label_index((*s.labels)[i]);
        return path;
    }

    Matrix forward(const ChannelBatch& batch, Trace* trace = nullptr) const {
        Trace local;
        Trace& tr = trace ? *trace : local;
        tr.hidden = encode_channels(enc_, batch, trace ? &tr.channels : nullptr);
        if (tr.hidden.k() != config_.k) throw ArgumentError("batch channel count does not match K+1");
        if (config_.mode == FusionMode::attention) {
            tr.fused = attention_fuse(tr.hidden, attn_, config_.p, &tr.attention);
        } else {
            tr.fused = linear_fuse(tr.hidden, lin_, &tr.linear);
        }
        const std::size_t n = batch.length(0);
        if (n == 0) throw ArgumentError("empty input channel");
        tr.emissions = emissions(tr.fused, n, crf_);
        return tr.emissions;
    }

    double loss(const ChannelBatch& batch, const LabelPath& gold) const {
        return nll(forward(batch), gold, CrfScores(crf_));
    }

    /// Adds scale * d(nll)/d(theta) into every gradient; returns the nll.
    double accumulate_gradients(const ChannelBatch& batch, const LabelPath& gold, double scale = 1.0) {
        Trace tr;
        forward(batch, &tr);
        const CrfScores scores(crf_);
        const double value = nll(tr.emissions, gold, scores);
        CrfGrads g = nll_backward(tr.emissions, gold, scores);
        g.d_emissions *= scale;
        crf_.transitions.grad += scale * g.d_transitions;
        crf_.start.grad.row(0) += scale * g.d_start;
        crf_.end.grad.row(0) += scale * g.d_end;

        const Eigen::Index n = tr.emissions.rows();
        Matrix d_fused = Matrix::Zero(tr.fused.rows(), tr.fused.cols());
        crf_.w_e.grad.noalias() += tr.fused.topRows(n).transpose() * g.d_emissions;
        crf_.b_e.grad.row(0) += g.d_emissions.colwise().sum();
        d_fused.topRows(n) = g.d_emissions * crf_.w_e.value.transpose();

        const FusionGrads fg = config_.mode == FusionMode::attention
                                   ? attention_fuse_backward(d_fused, tr.hidden, tr.attention, attn_)
                                   : linear_fuse_backward(d_fused, tr.hidden, tr.linear, lin_);
        backprop_channel(tr, 0, fg.d_hx);
        for (std::size_t c = 0; c < fg.d_external.size(); ++c) backprop_channel(tr, c + 1, fg.d_external[c]);
        return value;
    }

    ViterbiResult decode(const ChannelBatch& batch) const { return viterbi(forward(batch), CrfScores(crf_)); }

    /// Decoded BIO labels for the whole sentence, repaired; tokens past
    /// max_len are labeled O.
    std::vector<Label> predict(const Sentence& s, const ExternalContexts* ctx) const {
        const auto path = decode(make_batch(s, ctx)).path;
        std::vector<Label> out(s.tokens.size(), "O");
        for (std::size_t i = 0; i < path.size(); ++i) out[i] = labels_[static_cast<std::size_t>(path[i])];
        return repair_bio(std::move(out));
    }

    nlohmann::ordered_json to_json() {
        nlohmann::ordered_json j;
        j["format"] = "semaug-checkpoint-v1";
        const auto& e = config_.encoder;
        j["model"] = {{"d_model", e.d_model}, {"n_layers", e.n_layers},           {"n_heads", e.n_heads},
                      {"d_ff", e.ff_width()}, {"max_len", e.max_len},             {"seed", e.seed},
                      {"fusion_mode", to_string(config_.mode)}, {"p", config_.p}, {"k", config_.k}};
        j["vocab"] = vocab_.tokens();
        j["labels"] = labels_;
        nlohmann::ordered_json tensors = nlohmann::ordered_json::object();
        visit([&](const std::string& name, Param& p) {
            std::vector<double> data(p.value.data(), p.value.data() + p.value.size());
            tensors[name] = {{"shape", {p.value.rows(), p.value.cols()}}, {"data", std::move(data)}};
        });
        j["tensors"] = std::move(tensors);
        return j;
    }

    template <typename Json>
    static Model from_json(const Json& j) {
        try {
            if (j.at("format").template get<std::string>() != "semaug-checkpoint-v1") {
                throw ConfigError("unsupported checkpoint format");
            }
            const auto& m = j.at("model");
            ModelConfig cfg;
            cfg.encoder.d_model = m.at("d_model").template get<std::size_t>();
            cfg.encoder.n_layers = m.at("n_layers").template get<std::size_t>();
            cfg.encoder.n_heads = m.at("n_heads").template get<std::size_t>();
            cfg.encoder.d_ff = m.at("d_ff").template get<std::size_t>();
            cfg.encoder.max_len = m.at("max_len").template get<std::size_t>();
            cfg.encoder.seed = m.at("seed").template get<std::uint64_t>();
            cfg.mode = parse_fusion_mode(m.at("fusion_mode").template get<std::string>());
            cfg.p = m.at("p").template get<double>();
            cfg.k = m.at("k").template get<std::size_t>();
            Model model(cfg, Vocab(j.at("vocab").template get<std::vector<std::string>>()),
                        j.at("labels").template get<std::vector<Label>>());
            const auto& tensors = j.at("tensors");
            std::size_t seen = 0;
            model.visit([&](const std::string& name, Param& p) {
                if (!tensors.contains(name)) throw ConfigError("checkpoint lacks tensor " + name);
                const auto& t = tensors.at(name);
                const auto shape = t.at("shape").template get<std::vector<Eigen::Index>>();
                const auto data = t.at("data").template get<std::vector<double>>();
                if (shape.size() != 2 || shape[0] != p.value.rows() || shape[1] != p.value.cols() ||
                    static_cast<Eigen::Index>(data.size()) != p.value.size()) {
                    throw ConfigError("checkpoint tensor " + name + " has the wrong shape");
                }
                std::copy(data.begin(), data.end(), p.value.data());
                ++seen;
            });
            if (seen != tensors.size()) throw ConfigError("checkpoint holds unexpected tensors");
            return model;
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError(std::string("malformed checkpoint: ") + e.what());
        }
    }

private:
    void backprop_channel(const Trace& tr, std::size_t c, const Matrix& d_hidden) {
        const auto& ct = tr.channels[c];
        const auto n = static_cast<Eigen::Index>(ct.ids.size());
        if (n == 0) return;
        const Matrix d = d_hidden.topRows(n);
        // Skipping all-zero gradients keeps p = 1 runs bit-identical to runs
        // whose external channels are empty.
        if ((d.array() == 0.0).all()) return;
        encode_sequence_backward(enc_, ct, d);
    }

    ModelConfig config_;
    Vocab vocab_;
    std::vector<Label> labels_;
    std::map<Label, int> label_index_;
    EncoderParams enc_;
    AttentionFusionParams attn_;
    LinearFusionParams lin_;
    CrfParams crf_;
};

}  // namespace semaug
