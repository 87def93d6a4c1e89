#pragma once

// Small hand-built models and datasets shared by several test binaries.

#include <string>
#include <vector>

#include "semaug/gradcheck.hpp"
#include "semaug/harness.hpp"
#include "semaug/model.hpp"

namespace fixture {

using namespace semaug;

inline Sentence labeled(std::string id, std::vector<Token> toks, std::vector<Label> labels) {
    return {std::move(id), std::move(toks), std::move(labels)};
}

inline ExternalContexts contexts(std::string id, std::vector<std::string> texts) {
    ExternalContexts c{std::move(id), {}};
    for (std::size_t i = 0; i < texts.size(); ++i) c.contexts.push_back({"doc" + std::to_string(i), 1.0, texts[i]});
    return c;
}

inline Vocab tiny_vocab() {
    Vocab v;
    for (const char* t : {"alice", "bob", "paris", "london", "visited", "met", "in", "the", "city", "mr"}) v.add(t);
    return v;
}

inline std::vector<Label> tiny_labels() { return {"O", "B-LOC", "B-PER", "I-LOC", "I-PER"}; }

struct TinyProblem {
    std::vector<Sentence> sentences;
    std::vector<ExternalContexts> contexts;
};

/// Three labeled sentences with up to two contexts each; one context slot is
/// a retrieval miss and one token is out of vocabulary.
inline TinyProblem tiny_problem() {
    return {{labeled("s0", {"alice", "visited", "paris"}, {"B-PER", "O", "B-LOC"}),
             labeled("s1", {"mr", "bob", "met", "alice"}, {"O", "B-PER", "O", "B-PER"}),
             labeled("s2", {"the", "city", "new", "london"}, {"O", "O", "B-LOC", "I-LOC"})},
            {contexts("s0", {"paris the city", "alice met bob in paris"}),
             contexts("s1", {"mr bob"}),
             contexts("s2", {"london city in the", "the city of london"})}};
}

inline ModelConfig tiny_config(FusionMode mode, std::size_t k = 2) {
    ModelConfig cfg;
    cfg.encoder.d_model = 8;
    cfg.encoder.n_layers = 1;
    cfg.encoder.n_heads = 2;
    cfg.encoder.max_len = 6;
    cfg.encoder.seed = 3;
    cfg.mode = mode;
    cfg.p = 0.5;
    cfg.k = k;
    return cfg;
}

/// Central-difference check of the summed CRF NLL over the tiny problem,
/// covering every trainable tensor of the model.
inline GradCheckResult model_gradcheck(FusionMode mode, std::size_t k = 2, std::size_t samples = 600,
                                       bool exhaustive = false) {
    Model model(tiny_config(mode, k), tiny_vocab(), tiny_labels());
    const auto prob = tiny_problem();
    std::vector<ChannelBatch> batches;
    std::vector<LabelPath> gold;
    for (std::size_t i = 0; i < prob.sentences.size(); ++i) {
        ExternalContexts ctx = prob.contexts[i];
        ctx.contexts.resize(std::min(ctx.contexts.size(), k));
        batches.push_back(model.make_batch(prob.sentences[i], &ctx));
        gold.push_back(model.gold_path(prob.sentences[i]));
    }
    model.zero_grad();
    for (std::size_t i = 0; i < batches.size(); ++i) model.accumulate_gradients(batches[i], gold[i]);
    auto loss = [&] {
        double total = 0.0;
        for (std::size_t i = 0; i < batches.size(); ++i) total += model.loss(batches[i], gold[i]);
        return total;
    };
    GradCheckOptions opt;
    opt.min_samples = samples;
    opt.exhaustive = exhaustive;
    return finite_difference_check(loss, model.param_refs(), 1e-5, opt);
}

/// Ten sentences in which every entity token and every label is determined
/// by the token itself.
inline std::vector<Sentence> separable_toy() {
    const std::vector<std::pair<std::string, std::string>> rows = {
        {"john lives in paris", "B-PER O O B-LOC"},
        {"mary works at acme", "B-PER O O B-ORG"},
        {"paris is big", "B-LOC O O"},
        {"acme hired john", "B-ORG O B-PER"},
        {"we met mary smith in rome", "O O B-PER I-PER O B-LOC"},
        {"rome and paris", "B-LOC O B-LOC"},
        {"globex bought acme", "B-ORG O B-ORG"},
        {"john smith visited new york", "B-PER I-PER O B-LOC I-LOC"},
        {"nothing happened today", "O O O"},
        {"mary left globex", "B-PER O B-ORG"},
    };
    std::vector<Sentence> out;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        out.push_back({"toy" + std::to_string(i), tokenize_text(rows[i].first), tokenize_text(rows[i].second)});
    }
    return out;
}

inline TrainConfig toy_config() {
    TrainConfig c;
    c.epochs = 30;
    c.batch_size = 2;
    c.k = 0;
    c.d_model = 16;
    c.n_layers = 1;
    c.n_heads = 2;
    c.max_len = 8;
    c.vocab_min_freq = 1;
    c.lr_encoder = 1e-2;
    c.lr_crf = 1e-2;
    c.seed = 1;
    return c;
}

inline std::vector<ExternalContexts> empty_contexts(const std::vector<Sentence>& data) {
    std::vector<ExternalContexts> out;
    for (const auto& s : data) out.push_back({s.id, {}});
    return out;
}

}  // namespace fixture
