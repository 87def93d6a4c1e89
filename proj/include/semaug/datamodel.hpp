#pragma once

#include <algorithm>
#include <compare>
#include <cstddef>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "semaug/error.hpp"

namespace semaug {

using Token = std::string;
using Label = std::string;

struct Sentence {
    std::string id;
    std::vector<Token> tokens;
    std::optional<std::vector<Label>> labels;

    std::size_t size() const { return tokens.size(); }
    bool labeled() const { return labels.has_value(); }

    friend bool operator==(const Sentence&, const Sentence&) = default;
};

struct EntitySpan {
    std::size_t start = 0;  // inclusive
    std::size_t end = 0;    // exclusive
    std::string etype;

    friend auto operator<=>(const EntitySpan&, const EntitySpan&) = default;
};

using SpanSet = std::vector<EntitySpan>;

struct EvalReport {
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t fn = 0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;

    friend bool operator==(const EvalReport&, const EvalReport&) = default;
};

namespace detail {

inline bool is_blank(std::string_view line) {
    return std::all_of(line.begin(), line.end(),
                       [](char c) { return c == ' ' || c == '\t' || c == '\r'; });
}

struct ParsedTag {
    char prefix = 'O';  // 'O', 'B' or 'I'
    std::string_view etype;
};

inline std::optional<ParsedTag> parse_tag(std::string_view tag) {
    if (tag == "O") return ParsedTag{};
    if (tag.size() > 2 && (tag[0] == 'B' || tag[0] == 'I') && tag[1] == '-') {
        return ParsedTag{tag[0], tag.substr(2)};
    }
    return std::nullopt;
}

}  // namespace detail

/// Checks the BIO grammar: every tag is O, B-<type> or I-<type>, and an I- tag
/// only continues an entity of the same type.
inline void validate_bio(const std::vector<Label>& labels, std::string_view sentence_id) {
    std::string_view open_type;
    bool open = false;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const auto tag = detail::parse_tag(labels[i]);
        if (!tag) {
            throw ValidationError("sentence " + std::string(sentence_id) + " position " +
                                  std::to_string(i) + ": malformed tag '" + labels[i] + "'");
        }
        if (tag->prefix == 'I' && (!open || tag->etype != open_type)) {
            throw ValidationError("sentence " + std::string(sentence_id) + " position " +
                                  std::to_string(i) + ": '" + labels[i] +
                                  "' does not continue an entity of the same type");
        }
        open = tag->prefix != 'O';
        open_type = tag->etype;
    }
}

inline bool is_valid_bio(const std::vector<Label>& labels) {
    try {
        validate_bio(labels, "");
        return true;
    } catch (const ValidationError&) {
        return false;
    }
}

/// Parses tab-separated token/label lines with blank-line sentence breaks.
/// Sentence ids are assigned sequentially as s0, s1, ...
inline std::vector<Sentence> parse_conll(std::string_view text) {
    std::vector<Sentence> out;
    Sentence current;
    std::optional<bool> current_labeled;
    std::size_t line_no = 0;

    auto flush = [&] {
        if (current.tokens.empty()) return;
        current.id = "s" + std::to_string(out.size());
        if (current.labels) validate_bio(*current.labels, current.id);
        out.push_back(std::move(current));
        current = Sentence{};
        current_labeled.reset();
    };

    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t nl = text.find('\n', pos);
        if (nl == std::string_view::npos) nl = text.size();
        std::string_view line = text.substr(pos, nl - pos);
        pos = nl + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);

        if (detail::is_blank(line)) {
            flush();
            continue;
        }
        const auto tab = line.find('\t');
        if (tab != std::string_view::npos && line.find('\t', tab + 1) != std::string_view::npos) {
            throw ParseError("line " + std::to_string(line_no) + ": more than one tab");
        }
        const bool labeled = tab != std::string_view::npos;
        if (current_labeled && *current_labeled != labeled) {
            throw ParseError("line " + std::to_string(line_no) +
                             ": labeled and unlabeled lines mixed within one sentence");
        }
        current_labeled = labeled;
        std::string_view token = labeled ? line.substr(0, tab) : line;
        if (token.empty()) {
            throw ParseError("line " + std::to_string(line_no) + ": empty token");
        }
        current.tokens.emplace_back(token);
        if (labeled) {
            if (!current.labels) current.labels.emplace();
            current.labels->emplace_back(line.substr(tab + 1));
        }
    }
    flush();
    return out;
}

inline std::string serialize_conll(const std::vector<Sentence>& sentences) {
    std::string out;
    for (const auto& s : sentences) {
        for (std::size_t i = 0; i < s.tokens.size(); ++i) {
            out += s.tokens[i];
            if (s.labels) {
                out += '\t';
                out += (*s.labels)[i];
            }
            out += '\n';
        }
        out += '\n';
    }
    return out;
}

/// Maximal B-I runs of one type, sorted by start. Expects valid BIO.
inline SpanSet extract_spans(const std::vector<Label>& labels) {
    SpanSet spans;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const auto tag = detail::parse_tag(labels[i]);
        if (!tag || tag->prefix == 'O') continue;
        if (tag->prefix == 'I' && !spans.empty() && spans.back().end == i &&
            spans.back().etype == tag->etype) {
            spans.back().end = i + 1;
        } else {
            spans.push_back({i, i + 1, std::string(tag->etype)});
        }
    }
    return spans;
}

inline std::vector<Label> spans_to_bio(const SpanSet& spans, std::size_t length) {
    std::vector<Label> labels(length, "O");
    for (const auto& s : spans) {
        if (s.start >= s.end || s.end > length) {
            throw ArgumentError("span out of range");
        }
        labels[s.start] = "B-" + s.etype;
        for (std::size_t i = s.start + 1; i < s.end; ++i) labels[i] = "I-" + s.etype;
    }
    return labels;
}

/// Rewrites each orphan I-X (after O, at the start, or after another type) to B-X.
inline std::vector<Label> repair_bio(std::vector<Label> labels) {
    std::string open_type;
    bool open = false;
    for (auto& label : labels) {
        const auto tag = detail::parse_tag(label);
        if (!tag) {
            label = "O";
            open = false;
            continue;
        }
        std::string etype(tag->etype);
        if (tag->prefix == 'I' && (!open || etype != open_type)) {
            label = "B-" + etype;
        }
        open = tag->prefix != 'O';
        open_type = std::move(etype);
    }
    return labels;
}

inline EvalReport make_report(std::size_t tp, std::size_t fp, std::size_t fn) {
    EvalReport r{tp, fp, fn, 0.0, 0.0, 0.0};
    if (tp + fp > 0) r.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
    if (tp + fn > 0) r.recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
    if (r.precision + r.recall > 0.0) {
        r.f1 = 2.0 * r.precision * r.recall / (r.precision + r.recall);
    }
    return r;
}

/// Micro-averaged exact-match scores over aligned per-sentence span sets.
inline EvalReport exact_match_prf(const std::vector<SpanSet>& gold, const std::vector<SpanSet>& pred) {
    if (gold.size() != pred.size()) {
        throw ArgumentError("exact_match_prf: " + std::to_string(gold.size()) + " gold vs " +
                            std::to_string(pred.size()) + " predicted sentences");
    }
    std::size_t tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < gold.size(); ++i) {
        const std::set<EntitySpan> g(gold[i].begin(), gold[i].end());
        const std::set<EntitySpan> p(pred[i].begin(), pred[i].end());
        std::size_t hit = 0;
        for (const auto& s : p) hit += g.count(s);
        tp += hit;
        fp += p.size() - hit;
        fn += g.size() - hit;
    }
    return make_report(tp, fp, fn);
}

inline nlohmann::ordered_json to_json(const EvalReport& r) {
    nlohmann::ordered_json j;
    j["tp"] = r.tp;
    j["fp"] = r.fp;
    j["fn"] = r.fn;
    j["precision"] = r.precision;
    j["recall"] = r.recall;
    j["f1"] = r.f1;
    return j;
}

template <typename Json>
inline EvalReport eval_report_from_json(const Json& j) {
    return {j.at("tp").template get<std::size_t>(), j.at("fp").template get<std::size_t>(),
            j.at("fn").template get<std::size_t>(), j.at("precision").template get<double>(),
            j.at("recall").template get<double>(), j.at("f1").template get<double>()};
}

}  // namespace semaug
