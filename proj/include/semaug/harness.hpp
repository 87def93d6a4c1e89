#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <iomanip>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "semaug/bm25.hpp"
#include "semaug/datamodel.hpp"
#include "semaug/error.hpp"
#include "semaug/io.hpp"
#include "semaug/model.hpp"
#include "semaug/optim.hpp"
#include "semaug/retrieval.hpp"
#include "semaug/textrank.hpp"

namespace semaug {

/// Training, model and retrieval settings. JSON field names match the
/// member names.
struct TrainConfig {
    std::size_t epochs = 30;
    std::size_t batch_size = 12;
    double lr_encoder = 1e-3;
    double lr_fusion = 5e-3;
    double lr_crf = 1e-3;
    double warmup = 0.1;
    double weight_decay = 0.01;
    std::uint64_t seed = 0;
    std::size_t k = 3;
    double p = 0.5;
    std::string fusion_mode = "attention";
    std::size_t max_len = 32;
    std::size_t d_model = 32;
    std::size_t n_layers = 2;
    std::size_t n_heads = 2;
    std::size_t d_ff = 0;
    std::size_t vocab_min_freq = 2;
    std::size_t early_stopping_patience = 0;  // 0 disables; needs a dev set

    // Retrieval knobs used by the sweeps.
    std::size_t m = 5;
    std::size_t n_candidates = 20;
    std::size_t window = 5;
    double damping = 0.85;
    double k1 = 1.5;
    double b = 0.75;
    std::string stopwords;  // path, empty for none

    void validate() const {
        if (batch_size == 0) throw ConfigError("batch_size must be positive");
        if (!(lr_encoder > 0 && lr_fusion > 0 && lr_crf > 0)) throw ConfigError("learning rates must be positive");
        if (!(warmup >= 0.0 && warmup < 1.0)) throw ConfigError("warmup must lie in [0,1)");
        if (!(weight_decay >= 0.0)) throw ConfigError("weight_decay must be >= 0");
        if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("p must lie in [0,1]");
        parse_fusion_mode(fusion_mode);
        if (m == 0 || n_candidates == 0) throw ConfigError("m and n_candidates must be positive");
        if (window < 2) throw ConfigError("window must be >= 2");
        model_config().encoder.validate();
    }

    ModelConfig model_config() const {
        ModelConfig mc;
        mc.encoder.d_model = d_model;
        mc.encoder.n_layers = n_layers;
        mc.encoder.n_heads = n_heads;
        mc.encoder.d_ff = d_ff;
        mc.encoder.max_len = max_len;
        mc.encoder.seed = seed;
        mc.mode = parse_fusion_mode(fusion_mode);
        mc.p = p;
        mc.k = k;
        return mc;
    }

    AdamWConfig optimizer() const {
        AdamWConfig o;
        o.lr_encoder = lr_encoder;
        o.lr_fusion = lr_fusion;
        o.lr_crf = lr_crf;
        o.weight_decay = weight_decay;
        return o;
    }

    RetrievalConfig retrieval() const {
        RetrievalConfig r;
        r.m = m;
        r.n_candidates = n_candidates;
        r.k = k;
        r.bm25 = {k1, b};
        r.textrank.window = window;
        r.textrank.damping = damping;
        if (!stopwords.empty()) r.textrank.stopwords = load_stopwords(stopwords);
        return r;
    }
};

#define SEMAUG_CONFIG_FIELDS(X)                                                                    \
    X(epochs) X(batch_size) X(lr_encoder) X(lr_fusion) X(lr_crf) X(warmup) X(weight_decay) X(seed) \
    X(k) X(p) X(fusion_mode) X(max_len) X(d_model) X(n_layers) X(n_heads) X(d_ff) X(vocab_min_freq) \
    X(early_stopping_patience) X(m) X(n_candidates) X(window) X(damping) X(k1) X(b) X(stopwords)

inline nlohmann::ordered_json to_json(const TrainConfig& c) {
    nlohmann::ordered_json j;
#define X(f) j[#f] = c.f;
    SEMAUG_CONFIG_FIELDS(X)
#undef X
    return j;
}

/// Missing fields keep their defaults; unknown fields are rejected.
template <typename Json>
TrainConfig train_config_from_json(const Json& j) {
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    TrainConfig c;
    static const std::set<std::string> known = {
#define X(f) #f,
        SEMAUG_CONFIG_FIELDS(X)
#undef X
    };
    for (const auto& [key, _] : j.items()) {
        if (!known.count(key)) throw ConfigError("unknown config field '" + key + "'");
    }
    try {
#define X(f) \
    if (j.contains(#f)) j.at(#f).get_to(c.f);
        SEMAUG_CONFIG_FIELDS(X)
#undef X
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    c.validate();
    return c;
}

#undef SEMAUG_CONFIG_FIELDS

inline TrainConfig load_train_config(const std::string& path) {
    try {
        return train_config_from_json(nlohmann::json::parse(read_file(path)));
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(path + ": " + e.what());
    }
}

/// 64-bit FNV-1a over the canonical JSON of the config, as 16 hex digits.
inline std::string fingerprint(const TrainConfig& c) {
    const std::string s = to_json(c).dump();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : s) h = (h ^ ch) * 0x100000001b3ULL;
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << h;
    return os.str();
}

using ContextsIndex = std::unordered_map<std::string, const ExternalContexts*>;

inline ContextsIndex index_contexts(const std::vector<ExternalContexts>& cache) {
    ContextsIndex idx;
    for (const auto& c : cache) {
        if (!idx.emplace(c.sentence_id, &c).second) {
            throw ConfigError("contexts cache has two records for sentence " + c.sentence_id);
        }
    }
    return idx;
}

/// Tokens occurring in at least `min_freq` distinct training sentences,
/// counting a sentence's cached contexts as part of it. Sorted.
inline Vocab build_vocab(const std::vector<Sentence>& dataset, const ContextsIndex& contexts, std::size_t min_freq) {
    std::map<std::string, std::size_t> groups;
    for (const auto& s : dataset) {
        std::set<std::string> seen(s.tokens.begin(), s.tokens.end());
        if (auto it = contexts.find(s.id); it != contexts.end()) {
            for (const auto& c : it->second->contexts) {
                for (auto& t : tokenize_text(c.text)) seen.insert(std::move(t));
            }
        }
        for (const auto& t : seen) ++groups[t];
    }
    Vocab v;
    for (const auto& [t, n] : groups) {
        if (n >= std::max<std::size_t>(min_freq, 1) && t != "<pad>" && t != "<unk>") v.add(t);
    }
    return v;
}

/// "O" first, then B-/I- for every entity type seen, sorted by type.
inline std::vector<Label> label_inventory(const std::vector<Sentence>& dataset) {
    std::set<std::string> types;
    for (const auto& s : dataset) {
        if (!s.labels) continue;
        for (const auto& l : *s.labels) {
            if (l != "O") types.insert(l.substr(2));
        }
    }
    std::vector<Label> labels{"O"};
    for (const auto& t : types) {
        labels.push_back("B-" + t);
        labels.push_back("I-" + t);
    }
    return labels;
}

struct EpochMetrics {
    std::size_t epoch = 0;
    double train_nll = 0.0;     // mean sentence NLL over the training set after the epoch
    double mean_step_loss = 0.0;  // mean sentence NLL seen by the optimizer during the epoch
    std::size_t steps = 0;
    std::optional<double> dev_f1;
};

inline nlohmann::ordered_json to_json(const EpochMetrics& m) {
    nlohmann::ordered_json j;
    j["epoch"] = m.epoch;
    j["train_nll"] = m.train_nll;
    j["mean_step_loss"] = m.mean_step_loss;
    j["steps"] = m.steps;
    if (m.dev_f1) j["dev_f1"] = *m.dev_f1;
    return j;
}

inline std::string serialize_metrics_log(const std::vector<EpochMetrics>& log) {
    std::string out;
    for (const auto& m : log) out += to_json(m).dump() + "\n";
    return out;
}

struct TrainResult {
    Model model;
    std::vector<EpochMetrics> log;
};

struct DevSet {
    const std::vector<Sentence>* sentences = nullptr;
    const std::vector<ExternalContexts>* contexts = nullptr;
};

namespace detail {

struct Example {
    ChannelBatch batch;
    LabelPath gold;
};

inline std::vector<Example> make_examples(const Model& model, const std::vector<Sentence>& data,
                                          const ContextsIndex& ctx) {
    std::vector<Example> out;
    out.reserve(data.size());
    for (const auto& s : data) {
        out.push_back({model.make_batch(s, ctx.at(s.id)), model.gold_path(s)});
    }
    return out;
}

inline void check_contexts(const std::vector<Sentence>& data, const ContextsIndex& ctx, std::size_t k) {
    for (const auto& s : data) {
        auto it = ctx.find(s.id);
        if (it == ctx.end()) throw ConfigError("no contexts cache record for sentence " + s.id);
        if (it->second->contexts.size() > k) {
            throw ConfigError("sentence " + s.id + " has " + std::to_string(it->second->contexts.size()) +
                              " cached contexts but K=" + std::to_string(k));
        }
    }
}

}  // namespace detail

inline EvalReport evaluate(const Model& model, const std::vector<Sentence>& dataset,
                           const std::vector<ExternalContexts>& contexts);

/// Mini-batch AdamW training. Batch gradients are the mean over sentences,
/// accumulated in batch order, so a single-threaded run is bit-reproducible.
inline TrainResult train(const TrainConfig& cfg, const std::vector<Sentence>& dataset,
                         const std::vector<ExternalContexts>& contexts,
                         const std::optional<Vocab>& vocab_override = std::nullopt, DevSet dev = {}) {
    cfg.validate();
    const auto ctx = index_contexts(contexts);
    for (const auto& s : dataset) {
        if (!s.labels) throw ConfigError("training sentence " + s.id + " is unlabeled");
    }
    detail::check_contexts(dataset, ctx, cfg.k);

    Vocab vocab = vocab_override ? *vocab_override : build_vocab(dataset, ctx, cfg.vocab_min_freq);
    TrainResult result{Model(cfg.model_config(), std::move(vocab), label_inventory(dataset)), {}};
    Model& model = result.model;
    if (cfg.epochs == 0 || dataset.empty()) return result;

    const auto examples = detail::make_examples(model, dataset, ctx);
    const std::size_t batches_per_epoch = (examples.size() + cfg.batch_size - 1) / cfg.batch_size;
    const std::size_t total_steps = batches_per_epoch * cfg.epochs;
    const auto warmup_steps = static_cast<std::size_t>(cfg.warmup * static_cast<double>(total_steps));

    AdamW opt(cfg.optimizer());
    std::vector<std::size_t> order(examples.size());
    std::optional<Model> best;
    double best_f1 = -1.0;
    std::size_t since_best = 0;
    std::size_t step = 0;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        Rng rng(cfg.seed, "shuffle/" + std::to_string(epoch));
        rng.shuffle(order);

        EpochMetrics m;
        m.epoch = epoch + 1;
        double seen_loss = 0.0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
            const double scale = 1.0 / static_cast<double>(stop - start);
            model.zero_grad();
            for (std::size_t i = start; i < stop; ++i) {
                const auto& ex = examples[order[i]];
                seen_loss += model.accumulate_gradients(ex.batch, ex.gold, scale);
            }
            opt.step(model, warmup_linear_decay(step, total_steps, warmup_steps));
            ++step;
            ++m.steps;
        }
        m.mean_step_loss = seen_loss / static_cast<double>(examples.size());
        double total = 0.0;
        for (const auto& ex : examples) total += model.loss(ex.batch, ex.gold);
        m.train_nll = total / static_cast<double>(examples.size());

        if (cfg.early_stopping_patience > 0 && dev.sentences && dev.contexts) {
            const double f1 = evaluate(model, *dev.sentences, *dev.contexts).f1;
            m.dev_f1 = f1;
            result.log.push_back(m);
            if (f1 > best_f1) {
                best_f1 = f1;
                best = model;
                since_best = 0;
            } else if (++since_best >= cfg.early_stopping_patience) {
                break;
            }
            continue;
        }
        result.log.push_back(m);
    }
    if (best) result.model = std::move(*best);
    return result;
}

/// Per-sentence predictions (repaired BIO) for a dataset.
inline std::vector<std::vector<Label>> predict_all(const Model& model, const std::vector<Sentence>& dataset,
                                                   const std::vector<ExternalContexts>& contexts) {
    const auto ctx = index_contexts(contexts);
    detail::check_contexts(dataset, ctx, model.config().k);
    std::vector<std::vector<Label>> out;
    out.reserve(dataset.size());
    for (const auto& s : dataset) out.push_back(model.predict(s, ctx.at(s.id)));
    return out;
}

/// Viterbi-decodes every sentence and scores exact-match spans.
inline EvalReport evaluate(const Model& model, const std::vector<Sentence>& dataset,
                           const std::vector<ExternalContexts>& contexts) {
    for (const auto& s : dataset) {
        if (!s.labels) throw ConfigError("evaluation sentence " + s.id + " is unlabeled");
        for (const auto& l : *s.labels) model.label_index(l);
    }
    const auto pred = predict_all(model, dataset, contexts);
    std::vector<SpanSet> gold_spans, pred_spans;
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        gold_spans.push_back(extract_spans(*dataset[i].labels));
        pred_spans.push_back(extract_spans(pred[i]));
    }
    return exact_match_prf(gold_spans, pred_spans);
}

inline void save_checkpoint(const std::string& path, Model& model, const TrainConfig& cfg) {
    auto j = model.to_json();
    j["train_config"] = to_json(cfg);
    write_file(path, j.dump());
}

inline Model load_checkpoint(const std::string& path) {
    try {
        return Model::from_json(nlohmann::json::parse(read_file(path)));
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(path + ": " + e.what());
    }
}

// ---------------------------------------------------------------------------
// Synthetic data

struct SyntheticData {
    std::vector<Sentence> train;
    std::vector<Sentence> test;
    std::vector<Document> corpus;
    std::vector<std::string> stopwords;
    nlohmann::ordered_json manifest;
};

namespace synthetic {

inline const std::vector<std::string> types = {"LOC", "ORG", "PER"};

// Type-neutral sentence vocabulary.
inline const std::vector<std::string> neutral = {
    "yesterday", "today", "we", "they", "talked", "about", "heard", "saw", "news", "online",
    "posted", "again", "really", "wow", "lol", "so", "just", "everyone", "still", "tonight"};

// Type-revealing words placed next to unambiguous entities.
inline const std::map<std::string, std::vector<std::string>> local_cues = {
    {"PER", {"mr", "ms", "dr"}}, {"LOC", {"downtown", "uptown", "outside"}}, {"ORG", {"inc", "corp", "ltd"}}};

// Type-revealing words that appear only in retrieved documents.
inline const std::map<std::string, std::vector<std::string>> doc_cues = {
    {"PER", {"born", "singer", "actor", "actress", "married", "career", "childhood", "biography"}},
    {"LOC", {"city", "river", "province", "located", "population", "capital", "mountain", "coast"}},
    {"ORG", {"company", "founded", "headquarters", "ceo", "shares", "employees", "brand", "subsidiary"}}};

inline const std::vector<std::string> doc_filler = {"the", "a", "of", "and", "is", "was", "known", "for", "with", "by"};

inline constexpr std::size_t docs_per_instance = 3;
inline constexpr std::size_t ambiguous_forms = 24;
inline constexpr std::size_t plain_forms_per_type = 12;

inline std::string pseudo_word(Rng& rng) {
    static const std::string consonants = "bdfgklmnprstvz";
    static const std::string vowels = "aeiou";
    std::string w;
    const std::size_t syllables = 2 + rng.below(2);
    for (std::size_t i = 0; i < syllables; ++i) {
        w += consonants[rng.below(consonants.size())];
        w += vowels[rng.below(vowels.size())];
    }
    return w;
}

struct Form {
    std::vector<std::string> tokens;
    std::vector<std::string> types;  // one type, or two when ambiguous
    std::string text() const {
        std::string s;
        for (const auto& t : tokens) s += (s.empty() ? "" : " ") + t;
        return s;
    }
};

}  // namespace synthetic

/// Builds a labeled dataset where some entity surface forms are ambiguous
/// between two types. Around an ambiguous form the sentence is type-neutral;
/// the type is recoverable only from the corpus documents written for that
/// sentence, which share its rare tokens and carry type cue words.
inline SyntheticData gen_synthetic(std::size_t n_train, std::size_t n_test, double ambiguity_rate,
                                   std::uint64_t seed) {
    namespace syn = synthetic;
    if (!(ambiguity_rate > 0.0 && ambiguity_rate <= 1.0)) {
        throw ArgumentError("ambiguity_rate must lie in (0,1]");
    }
    if (n_train == 0 && n_test == 0) throw ArgumentError("n_train + n_test must be positive");
    Rng rng(seed, "synthetic");

    std::set<std::string> reserved(syn::neutral.begin(), syn::neutral.end());
    reserved.insert(syn::doc_filler.begin(), syn::doc_filler.end());
    for (const auto& [_, v] : syn::local_cues) reserved.insert(v.begin(), v.end());
    for (const auto& [_, v] : syn::doc_cues) reserved.insert(v.begin(), v.end());
    auto fresh_word = [&] {
        for (;;) {
            auto w = syn::pseudo_word(rng);
            if (reserved.insert(w).second) return w;
        }
    };
    auto make_form = [&](std::vector<std::string> form_types) {
        syn::Form f;
        f.tokens.push_back(fresh_word());
        if (rng.bernoulli(0.3)) f.tokens.push_back(fresh_word());
        f.types = std::move(form_types);
        return f;
    };

    std::vector<syn::Form> ambiguous, plain;
    for (std::size_t i = 0; i < syn::ambiguous_forms; ++i) {
        const auto& a = syn::types[i % 3];
        const auto& b = syn::types[(i + 1 + (i / 3) % 2) % 3];
        ambiguous.push_back(make_form({a, b}));
    }
    for (const auto& t : syn::types) {
        for (std::size_t i = 0; i < syn::plain_forms_per_type; ++i) plain.push_back(make_form({t}));
    }

    std::size_t rare_counter = 0;
    auto rare_token = [&] {
        std::ostringstream os;
        os << "zx" << std::hex << std::setw(5) << std::setfill('0') << (rare_counter++ * 7919 + 13) % 0xfffff;
        return os.str();
    };
    auto neutral_run = [&](std::size_t lo, std::size_t hi) {
        std::vector<std::string> out;
        const std::size_t n = lo + rng.below(hi - lo + 1);
        for (std::size_t i = 0; i < n; ++i) out.push_back(rng.pick(syn::neutral));
        return out;
    };

    SyntheticData data;
    auto instances = nlohmann::ordered_json::array();
    auto make_split = [&](const std::string& split, std::size_t n, std::vector<Sentence>& out) {
        for (std::size_t i = 0; i < n; ++i) {
            const bool is_amb = rng.bernoulli(ambiguity_rate);
            const auto& form = is_amb ? rng.pick(ambiguous) : rng.pick(plain);
            const std::string type = form.types[rng.below(form.types.size())];
            const std::string r1 = rare_token(), r2 = rare_token();

            Sentence s;
            s.id = "s" + std::to_string(i);
            std::vector<Label> labels;
            auto push = [&](const std::string& tok, const std::string& label) {
                s.tokens.push_back(tok);
                labels.push_back(label);
            };
            for (const auto& w : neutral_run(1, 3)) push(w, "O");
            if (!is_amb && type != "ORG") push(rng.pick(syn::local_cues.at(type)), "O");
            for (std::size_t t = 0; t < form.tokens.size(); ++t) push(form.tokens[t], (t == 0 ? "B-" : "I-") + type);
            if (!is_amb && type == "ORG") push(rng.pick(syn::local_cues.at(type)), "O");
            for (const auto& w : neutral_run(1, 2)) push(w, "O");
            push(r1, "O");
            push(r2, "O");
            for (const auto& w : neutral_run(0, 2)) push(w, "O");
            s.labels = std::move(labels);

            auto doc_ids = nlohmann::ordered_json::array();
            for (std::size_t d = 0; d < syn::docs_per_instance; ++d) {
                std::vector<std::string> units{form.text(), r1, r2};
                const auto& cues = syn::doc_cues.at(type);
                std::vector<std::string> pool = cues;
                rng.shuffle(pool);
                units.insert(units.end(), pool.begin(), pool.begin() + 3);
                const std::size_t fill = 3 + rng.below(3);
                for (std::size_t f = 0; f < fill; ++f) units.push_back(rng.pick(syn::doc_filler));
                rng.shuffle(units);
                std::string text;
                for (const auto& u : units) text += (text.empty() ? "" : " ") + u;
                std::ostringstream id;
                id << split << "-" << std::setw(5) << std::setfill('0') << i << "-" << d;
                data.corpus.push_back(make_document(id.str(), text));
                doc_ids.push_back(id.str());
            }
            nlohmann::ordered_json inst;
            inst["split"] = split;
            inst["sentence_id"] = s.id;
            inst["form"] = form.text();
            inst["type"] = type;
            inst["ambiguous"] = is_amb;
            inst["rare_tokens"] = {r1, r2};
            inst["doc_ids"] = std::move(doc_ids);
            instances.push_back(std::move(inst));
            out.push_back(std::move(s));
        }
    };
    make_split("train", n_train, data.train);
    make_split("test", n_test, data.test);

    std::set<std::string> stop(syn::neutral.begin(), syn::neutral.end());
    stop.insert(syn::doc_filler.begin(), syn::doc_filler.end());
    data.stopwords.assign(stop.begin(), stop.end());

    auto forms = nlohmann::ordered_json::object();
    for (const auto& f : ambiguous) forms[f.text()] = f.types;
    for (const auto& f : plain) forms[f.text()] = f.types;
    auto& man = data.manifest;
    man["seed"] = seed;
    man["n_train"] = n_train;
    man["n_test"] = n_test;
    man["ambiguity_rate"] = ambiguity_rate;
    man["types"] = syn::types;
    man["doc_cues"] = syn::doc_cues;
    man["local_cues"] = syn::local_cues;
    man["forms"] = std::move(forms);
    man["instances"] = std::move(instances);
    return data;
}

inline std::string serialize_corpus(const std::vector<Document>& docs) {
    std::string out;
    for (const auto& d : docs) {
        nlohmann::ordered_json j;
        j["id"] = d.doc_id;
        j["text"] = d.raw_text;
        out += j.dump() + "\n";
    }
    return out;
}

/// Writes train.conll, test.conll, corpus.jsonl, stopwords.txt and
/// manifest.json into out_dir.
inline void write_synthetic(const SyntheticData& data, const std::string& out_dir) {
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create " + out_dir + ": " + ec.message());
    const std::filesystem::path dir(out_dir);
    write_file((dir / "train.conll").string(), serialize_conll(data.train));
    write_file((dir / "test.conll").string(), serialize_conll(data.test));
    write_file((dir / "corpus.jsonl").string(), serialize_corpus(data.corpus));
    std::string stop;
    for (const auto& w : data.stopwords) stop += w + "\n";
    write_file((dir / "stopwords.txt").string(), stop);
    write_file((dir / "manifest.json").string(), data.manifest.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Sweeps

struct SweepRow {
    double value = 0.0;
    EvalReport report;
    std::string fingerprint;
};

struct SweepReport {
    std::string parameter;  // "k" or "p"
    TrainConfig base;
    std::vector<SweepRow> rows;
};

inline nlohmann::ordered_json to_json(const SweepReport& r) {
    nlohmann::ordered_json j;
    j["parameter"] = r.parameter;
    j["seed"] = r.base.seed;
    j["base_fingerprint"] = fingerprint(r.base);
    j["base_config"] = to_json(r.base);
    auto rows = nlohmann::ordered_json::array();
    for (const auto& row : r.rows) {
        nlohmann::ordered_json o;
        o["value"] = row.value;
        o["precision"] = row.report.precision;
        o["recall"] = row.report.recall;
        o["f1"] = row.report.f1;
        o["tp"] = row.report.tp;
        o["fp"] = row.report.fp;
        o["fn"] = row.report.fn;
        o["fingerprint"] = row.fingerprint;
        rows.push_back(std::move(o));
    }
    j["rows"] = std::move(rows);
    return j;
}

struct SweepInputs {
    const std::vector<Sentence>& train;
    const std::vector<Sentence>& test;
    const std::vector<Document>& corpus;
};

/// One full train/evaluate run for a fully specified config.
inline EvalReport run_experiment(const TrainConfig& cfg, const SweepInputs& in, const WarningSink& warn = {}) {
    const LocalCorpusBackend backend(in.corpus, {cfg.k1, cfg.b});
    const auto rc = cfg.retrieval();
    const auto train_ctx = build_contexts_cache(in.train, backend, rc, warn);
    const auto test_ctx = build_contexts_cache(in.test, backend, rc, warn);
    const auto trained = train(cfg, in.train, train_ctx);
    return evaluate(trained.model, in.test, test_ctx);
}

/// For each K: rebuild the contexts caches, train from the same seed,
/// evaluate on the test split.
inline SweepReport sweep_k(const TrainConfig& base, const std::vector<std::size_t>& k_values, const SweepInputs& in,
                           const WarningSink& warn = {}) {
    if (k_values.empty()) throw ArgumentError("sweep-k: no K values");
    if (std::set<std::size_t>(k_values.begin(), k_values.end()).size() != k_values.size()) {
        throw ArgumentError("sweep-k: duplicate K values");
    }
    SweepReport report{"k", base, {}};
    for (const auto k : k_values) {
        TrainConfig cfg = base;
        cfg.k = k;
        report.rows.push_back({static_cast<double>(k), run_experiment(cfg, in, warn), fingerprint(cfg)});
    }
    return report;
}

/// One contexts cache shared by every p; one training run per p.
inline SweepReport sweep_p(const TrainConfig& base, const std::vector<double>& p_values, const SweepInputs& in,
                           const WarningSink& warn = {}) {
    if (p_values.empty()) throw ArgumentError("sweep-p: no p values");
    for (const double p : p_values) {
        if (!(p >= 0.0 && p <= 1.0)) throw ArgumentError("sweep-p: p values must lie in [0,1]");
    }
    const LocalCorpusBackend backend(in.corpus, {base.k1, base.b});
    const auto rc = base.retrieval();
    const auto train_ctx = build_contexts_cache(in.train, backend, rc, warn);
    const auto test_ctx = build_contexts_cache(in.test, backend, rc, warn);
    SweepReport report{"p", base, {}};
    for (const double p : p_values) {
        TrainConfig cfg = base;
        cfg.p = p;
        const auto trained = train(cfg, in.train, train_ctx);
        report.rows.push_back({p, evaluate(trained.model, in.test, test_ctx), fingerprint(cfg)});
    }
    return report;
}

}  // namespace semaug
