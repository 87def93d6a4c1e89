#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "semaug/datamodel.hpp"
#include "semaug/error.hpp"
#include "semaug/io.hpp"

namespace semaug {

struct Document {
    std::string doc_id;
    std::vector<Token> tokens;
    std::string raw_text;

    friend bool operator==(const Document&, const Document&) = default;
};

/// Whitespace split when the text contains any whitespace, otherwise one
/// token per UTF-8 code point (character-level text such as Chinese).
inline std::vector<Token> tokenize_text(std::string_view text) {
    std::vector<Token> tokens;
    const bool has_space = text.find_first_of(" \t\n\r\f\v") != std::string_view::npos;
    if (has_space) {
        std::size_t pos = 0;
        while (pos < text.size()) {
            pos = text.find_first_not_of(" \t\n\r\f\v", pos);
            if (pos == std::string_view::npos) break;
            std::size_t end = text.find_first_of(" \t\n\r\f\v", pos);
            if (end == std::string_view::npos) end = text.size();
            tokens.emplace_back(text.substr(pos, end - pos));
            pos = end;
        }
        return tokens;
    }
    std::size_t pos = 0;
    while (pos < text.size()) {
        const auto lead = static_cast<unsigned char>(text[pos]);
        std::size_t len = 1;
        if (lead >= 0xF0) len = 4;
        else if (lead >= 0xE0) len = 3;
        else if (lead >= 0xC0) len = 2;
        len = std::min(len, text.size() - pos);
        tokens.emplace_back(text.substr(pos, len));
        pos += len;
    }
    return tokens;
}

inline Document make_document(std::string id, std::string text) {
    Document d;
    d.doc_id = std::move(id);
    d.tokens = tokenize_text(text);
    d.raw_text = std::move(text);
    return d;
}

/// Corpus file: one {"id": ..., "text": ...} object per line.
inline std::vector<Document> parse_corpus_jsonl(std::string_view text) {
    std::vector<Document> docs;
    for (const auto& [line_no, line] : jsonl_lines(text)) {
        try {
            const auto j = nlohmann::json::parse(line);
            docs.push_back(make_document(j.at("id").get<std::string>(), j.at("text").get<std::string>()));
        } catch (const nlohmann::json::exception& e) {
            throw ParseError("corpus line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return docs;
}

inline std::vector<Document> load_corpus(const std::string& path) {
    try {
        return parse_corpus_jsonl(read_file(path));
    } catch (const ParseError& e) {
        throw ParseError(path + ": " + e.what());
    }
}

struct Posting {
    std::size_t doc = 0;  // index into Bm25Index::doc_ids()
    std::size_t tf = 0;

    friend bool operator==(const Posting&, const Posting&) = default;
};

struct Bm25Params {
    double k1 = 1.5;
    double b = 0.75;
};

/// Okapi BM25 over an immutable inverted index.
///
///   score(q, d) = sum_{t in q} idf(t) * f(t,d) (k1 + 1) / (f(t,d) + k1 (1 - b + b |d| / avgdl))
///   idf(t)      = ln((N - n_t + 0.5) / (n_t + 0.5) + 1)
///
/// Query terms are used as given; a term repeated in the query contributes
/// once per occurrence.
class Bm25Index {
public:
    Bm25Index() = default;

    static Bm25Index build(const std::vector<Document>& docs, Bm25Params params = {}) {
        check_params(params);
        Bm25Index idx;
        idx.params_ = params;
        std::size_t total = 0;
        for (const auto& d : docs) {
            if (idx.id_lookup_.count(d.doc_id)) throw ArgumentError("duplicate doc_id '" + d.doc_id + "'");
            const std::size_t di = idx.doc_ids_.size();
            idx.id_lookup_.emplace(d.doc_id, di);
            idx.doc_ids_.push_back(d.doc_id);
            idx.doc_lengths_.push_back(d.tokens.size());
            total += d.tokens.size();
            std::map<std::string, std::size_t> tf;
            for (const auto& t : d.tokens) ++tf[t];
            for (const auto& [term, f] : tf) idx.postings_[term].push_back({di, f});
        }
        idx.avgdl_ = docs.empty() ? 0.0 : static_cast<double>(total) / static_cast<double>(docs.size());
        return idx;
    }

    std::size_t n_docs() const { return doc_ids_.size(); }
    double avgdl() const { return avgdl_; }
    const Bm25Params& params() const { return params_; }
    const std::vector<std::string>& doc_ids() const { return doc_ids_; }
    const std::vector<std::size_t>& doc_lengths() const { return doc_lengths_; }
    const std::map<std::string, std::vector<Posting>>& postings() const { return postings_; }

    std::size_t doc_index(const std::string& doc_id) const {
        auto it = id_lookup_.find(doc_id);
        if (it == id_lookup_.end()) throw LookupError("unknown doc_id '" + doc_id + "'");
        return it->second;
    }

    double idf(const std::string& term) const {
        auto it = postings_.find(term);
        const double nt = it == postings_.end() ? 0.0 : static_cast<double>(it->second.size());
        const double n = static_cast<double>(n_docs());
        return std::log((n - nt + 0.5) / (nt + 0.5) + 1.0);
    }

    double score(const std::vector<Token>& query, const std::string& doc_id) const {
        const std::size_t di = doc_index(doc_id);
        double s = 0.0;
        for (const auto& t : query) {
            auto it = postings_.find(t);
            if (it == postings_.end()) continue;
            const auto& plist = it->second;
            auto p = std::lower_bound(plist.begin(), plist.end(), di,
                                      [](const Posting& x, std::size_t d) { return x.doc < d; });
            if (p == plist.end() || p->doc != di) continue;
            s += idf(t) * term_weight(p->tf, doc_lengths_[di]);
        }
        return s;
    }

    /// Top min(k, n_docs) documents by descending score, ties by ascending
    /// doc_id. Zero-score documents appear only to fill k.
    std::vector<std::pair<std::string, double>> rank(const std::vector<Token>& query, std::size_t k) const {
        if (k == 0) throw ArgumentError("rank: k must be >= 1");
        std::vector<double> acc(n_docs(), 0.0);
        for (const auto& t : query) {
            auto it = postings_.find(t);
            if (it == postings_.end()) continue;
            const double w = idf(t);
            for (const auto& p : it->second) acc[p.doc] += w * term_weight(p.tf, doc_lengths_[p.doc]);
        }
        std::vector<std::size_t> order(n_docs());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        const std::size_t take = std::min(k, order.size());
        std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take), order.end(),
                          [&](std::size_t a, std::size_t b) {
                              if (acc[a] != acc[b]) return acc[a] > acc[b];
                              return doc_ids_[a] < doc_ids_[b];
                          });
        std::vector<std::pair<std::string, double>> out;
        out.reserve(take);
        for (std::size_t i = 0; i < take; ++i) out.emplace_back(doc_ids_[order[i]], acc[order[i]]);
        return out;
    }

    /// Deterministic persistence: terms sorted, postings sorted by doc_id.
    nlohmann::json to_json() const {
        nlohmann::json postings = nlohmann::json::object();
        for (const auto& [term, plist] : postings_) {
            std::vector<std::pair<std::string, std::size_t>> rows;
            for (const auto& p : plist) rows.emplace_back(doc_ids_[p.doc], p.tf);
            std::sort(rows.begin(), rows.end());
            auto arr = nlohmann::json::array();
            for (const auto& [id, tf] : rows) arr.push_back({id, tf});
            postings[term] = std::move(arr);
        }
        nlohmann::json lengths = nlohmann::json::object();
        for (std::size_t i = 0; i < doc_ids_.size(); ++i) lengths[doc_ids_[i]] = doc_lengths_[i];
        return {{"format", "semaug-bm25-v1"},
                {"k1", params_.k1},
                {"b", params_.b},
                {"n_docs", n_docs()},
                {"avgdl", avgdl_},
                {"doc_lengths", std::move(lengths)},
                {"postings", std::move(postings)}};
    }

    static Bm25Index from_json(const nlohmann::json& j) {
        try {
            Bm25Index idx;
            idx.params_ = {j.at("k1").get<double>(), j.at("b").get<double>()};
            check_params(idx.params_);
            // doc_lengths is a JSON object, so ids come back sorted.
            std::size_t total = 0;
            for (const auto& [id, len] : j.at("doc_lengths").items()) {
                idx.id_lookup_.emplace(id, idx.doc_ids_.size());
                idx.doc_ids_.push_back(id);
                idx.doc_lengths_.push_back(len.get<std::size_t>());
                total += idx.doc_lengths_.back();
            }
            if (j.at("n_docs").get<std::size_t>() != idx.n_docs()) {
                throw ParseError("bm25 index: n_docs does not match doc_lengths");
            }
            idx.avgdl_ = idx.n_docs() == 0 ? 0.0 : static_cast<double>(total) / static_cast<double>(idx.n_docs());
            for (const auto& [term, arr] : j.at("postings").items()) {
                auto& plist = idx.postings_[term];
                for (const auto& row : arr) {
                    const auto tf = row.at(1).get<std::size_t>();
                    if (tf == 0) throw ParseError("bm25 index: zero term frequency for '" + term + "'");
                    plist.push_back({idx.doc_index(row.at(0).get<std::string>()), tf});
                }
                std::sort(plist.begin(), plist.end(), [](auto& a, auto& b) { return a.doc < b.doc; });
            }
            return idx;
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(std::string("bm25 index: ") + e.what());
        } catch (const LookupError& e) {
            throw ParseError(std::string("bm25 index: ") + e.what());
        }
    }

private:
    static void check_params(const Bm25Params& p) {
        if (!(p.k1 >= 0.0)) throw ArgumentError("bm25: k1 must be >= 0");
        if (!(p.b >= 0.0 && p.b <= 1.0)) throw ArgumentError("bm25: b must lie in [0,1]");
    }

    double term_weight(std::size_t tf, std::size_t doc_len) const {
        const double f = static_cast<double>(tf);
        const double norm = avgdl_ > 0.0 ? static_cast<double>(doc_len) / avgdl_ : 0.0;
        return f * (params_.k1 + 1.0) / (f + params_.k1 * (1.0 - params_.b + params_.b * norm));
    }

    Bm25Params params_;
    std::vector<std::string> doc_ids_;
    std::vector<std::size_t> doc_lengths_;
    std::unordered_map<std::string, std::size_t> id_lookup_;
    std::map<std::string, std::vector<Posting>> postings_;
    double avgdl_ = 0.0;
};

}  // namespace semaug
