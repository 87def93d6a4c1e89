#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "semaug/bm25.hpp"
#include "semaug/datamodel.hpp"
#include "semaug/error.hpp"
#include "semaug/io.hpp"
#include "semaug/textrank.hpp"

namespace semaug {

struct ContextEntry {
    std::string doc_id;
    double score = 0.0;
    std::string text;

    friend bool operator==(const ContextEntry&, const ContextEntry&) = default;
};

/// The top-K retrieved texts attached to one sentence, best first.
struct ExternalContexts {
    std::string sentence_id;
    std::vector<ContextEntry> contexts;

    friend bool operator==(const ExternalContexts&, const ExternalContexts&) = default;
};

/// Anything that maps a keyword list to at most n documents.
class SearchBackend {
public:
    virtual ~SearchBackend() = default;
    virtual std::vector<Document> search(const std::vector<std::string>& keywords, std::size_t n) const = 0;
    virtual std::string name() const = 0;
};

/// BM25 over a local corpus with the keyword list itself as the query. Only
/// documents sharing at least one keyword are returned.
class LocalCorpusBackend final : public SearchBackend {
public:
    explicit LocalCorpusBackend(std::vector<Document> docs, Bm25Params params = {})
        : index_(Bm25Index::build(docs, params)) {
        for (auto& d : docs) docs_.emplace(d.doc_id, std::move(d));
    }

    std::vector<Document> search(const std::vector<std::string>& keywords, std::size_t n) const override {
        std::vector<Document> out;
        if (n == 0 || index_.n_docs() == 0) return out;
        for (const auto& [id, s] : index_.rank(keywords, n)) {
            if (s <= 0.0) break;
            out.push_back(docs_.at(id));
        }
        return out;
    }

    std::string name() const override { return "local-corpus"; }

    const Bm25Index& index() const { return index_; }

private:
    Bm25Index index_;
    std::unordered_map<std::string, Document> docs_;
};

/// Replays recorded search responses, matched by exact keyword-list equality:
///   {"keywords": [...], "results": [{"id": ..., "text": ...}, ...]}
class FileBackend final : public SearchBackend {
public:
    static FileBackend parse(std::string_view text) {
        FileBackend fb;
        for (const auto& [line_no, line] : jsonl_lines(text)) {
            try {
                const auto j = nlohmann::json::parse(line);
                auto keywords = j.at("keywords").get<std::vector<std::string>>();
                std::vector<Document> results;
                for (const auto& r : j.at("results")) {
                    results.push_back(make_document(r.at("id").get<std::string>(), r.at("text").get<std::string>()));
                }
                if (!fb.recordings_.emplace(std::move(keywords), std::move(results)).second) {
                    throw ParseError("recording line " + std::to_string(line_no) + ": duplicate keyword list");
                }
            } catch (const nlohmann::json::exception& e) {
                throw ParseError("recording line " + std::to_string(line_no) + ": " + e.what());
            }
        }
        return fb;
    }

    static FileBackend load(const std::string& path) { return parse(read_file(path)); }

    std::vector<Document> search(const std::vector<std::string>& keywords, std::size_t n) const override {
        auto it = recordings_.find(keywords);
        if (it == recordings_.end()) return {};
        const auto& r = it->second;
        return {r.begin(), r.begin() + static_cast<std::ptrdiff_t>(std::min(n, r.size()))};
    }

    std::string name() const override { return "file"; }

private:
    std::map<std::vector<std::string>, std::vector<Document>> recordings_;
};

struct RetrievalConfig {
    std::size_t m = 5;
    std::size_t n_candidates = 20;
    std::size_t k = 3;
    Bm25Params bm25;
    TextRankConfig textrank;
};

/// m query keywords by TextRank; falls back to the leading tokens when every
/// token is a stopword.
inline std::vector<std::string> generate_query(const Sentence& sentence, std::size_t m,
                                               const TextRankConfig& cfg = {}) {
    if (sentence.tokens.empty()) throw ArgumentError("generate_query on an empty sentence");
    if (m == 0) throw ArgumentError("m must be >= 1");
    const auto graph = build_graph(sentence.tokens, cfg.window, cfg.stopwords);
    if (graph.empty()) {
        const auto n = std::min(m, sentence.tokens.size());
        return {sentence.tokens.begin(), sentence.tokens.begin() + static_cast<std::ptrdiff_t>(n)};
    }
    return top_m_keywords(textrank_scores(graph, cfg), m);
}

inline std::vector<Document> retrieve_candidates(const SearchBackend& backend,
                                                 const std::vector<std::string>& keywords,
                                                 std::size_t n_candidates) {
    if (keywords.empty()) throw ArgumentError("retrieve_candidates: no keywords");
    std::vector<Document> raw;
    try {
        raw = backend.search(keywords, n_candidates);
    } catch (const std::exception& e) {
        throw RetrievalError("backend '" + backend.name() + "' failed: " + e.what());
    }
    std::vector<Document> out;
    std::set<std::string> seen;
    for (auto& d : raw) {
        if (out.size() == n_candidates) break;
        if (seen.insert(d.doc_id).second) out.push_back(std::move(d));
    }
    return out;
}

/// BM25 over the candidate set alone, queried with the full sentence.
inline ExternalContexts rerank_topk(const std::vector<Document>& candidates, const Sentence& sentence,
                                    std::size_t k, Bm25Params params = {}) {
    ExternalContexts out{sentence.id, {}};
    if (k == 0 || candidates.empty()) return out;
    std::vector<Document> unique;
    std::set<std::string> seen;
    for (const auto& d : candidates) {
        if (seen.insert(d.doc_id).second) unique.push_back(d);
    }
    const auto index = Bm25Index::build(unique, params);
    std::unordered_map<std::string, const Document*> by_id;
    for (const auto& d : unique) by_id.emplace(d.doc_id, &d);
    for (const auto& [id, s] : index.rank(sentence.tokens, k)) {
        out.contexts.push_back({id, s, by_id.at(id)->raw_text});
    }
    return out;
}

inline nlohmann::ordered_json to_json(const ExternalContexts& c) {
    auto arr = nlohmann::ordered_json::array();
    for (const auto& e : c.contexts) {
        nlohmann::ordered_json o;
        o["doc_id"] = e.doc_id;
        o["score"] = e.score;
        o["text"] = e.text;
        arr.push_back(std::move(o));
    }
    nlohmann::ordered_json j;
    j["sentence_id"] = c.sentence_id;
    j["contexts"] = std::move(arr);
    return j;
}

inline std::string serialize_contexts_cache(const std::vector<ExternalContexts>& records) {
    std::string out;
    for (const auto& r : records) {
        out += to_json(r).dump();
        out += '\n';
    }
    return out;
}

inline std::vector<ExternalContexts> parse_contexts_cache(std::string_view text) {
    std::vector<ExternalContexts> out;
    for (const auto& [line_no, line] : jsonl_lines(text)) {
        try {
            const auto j = nlohmann::json::parse(line);
            ExternalContexts c;
            c.sentence_id = j.at("sentence_id").get<std::string>();
            for (const auto& e : j.at("contexts")) {
                c.contexts.push_back({e.at("doc_id").get<std::string>(), e.at("score").get<double>(),
                                      e.at("text").get<std::string>()});
            }
            out.push_back(std::move(c));
        } catch (const nlohmann::json::exception& e) {
            throw ParseError("contexts cache line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return out;
}

inline std::vector<ExternalContexts> load_contexts_cache(const std::string& path) {
    try {
        return parse_contexts_cache(read_file(path));
    } catch (const ParseError& e) {
        throw ParseError(path + ": " + e.what());
    }
}

using WarningSink = std::function<void(const std::string&)>;

/// Runs keyword generation, search and re-ranking for every sentence, in
/// dataset order. A failing backend yields an empty record plus a warning.
inline std::vector<ExternalContexts> build_contexts_cache(const std::vector<Sentence>& dataset,
                                                          const SearchBackend& backend,
                                                          const RetrievalConfig& cfg,
                                                          const WarningSink& warn = {}) {
    std::vector<ExternalContexts> out;
    out.reserve(dataset.size());
    for (const auto& s : dataset) {
        if (cfg.k == 0 || s.tokens.empty()) {
            out.push_back({s.id, {}});
            continue;
        }
        const auto keywords = generate_query(s, cfg.m, cfg.textrank);
        std::vector<Document> candidates;
        try {
            candidates = retrieve_candidates(backend, keywords, cfg.n_candidates);
        } catch (const RetrievalError& e) {
            if (warn) warn("sentence " + s.id + ": " + e.what());
        }
        out.push_back(rerank_topk(candidates, s, cfg.k, cfg.bm25));
    }
    return out;
}

inline void write_contexts_cache(const std::string& path, const std::vector<ExternalContexts>& records) {
    write_file(path, serialize_contexts_cache(records));
}

}  // namespace semaug
