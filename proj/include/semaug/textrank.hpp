#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "semaug/datamodel.hpp"
#include "semaug/error.hpp"

namespace semaug {

/// Undirected co-occurrence graph. Nodes are kept in lexicographic order so
/// every traversal is deterministic.
class CooccurrenceGraph {
public:
    CooccurrenceGraph() = default;

    explicit CooccurrenceGraph(std::vector<std::string> nodes) : nodes_(std::move(nodes)) {
        std::sort(nodes_.begin(), nodes_.end());
        nodes_.erase(std::unique(nodes_.begin(), nodes_.end()), nodes_.end());
        adj_.resize(nodes_.size());
    }

    std::size_t size() const { return nodes_.size(); }
    bool empty() const { return nodes_.empty(); }
    const std::vector<std::string>& nodes() const { return nodes_; }

    std::size_t index_of(const std::string& node) const {
        auto it = std::lower_bound(nodes_.begin(), nodes_.end(), node);
        if (it == nodes_.end() || *it != node) throw LookupError("unknown graph node '" + node + "'");
        return static_cast<std::size_t>(it - nodes_.begin());
    }

    /// Adds `w` to the symmetric edge (u, v). Self-loops are rejected.
    void add_edge(const std::string& u, const std::string& v, double w = 1.0) {
        if (u == v) throw ArgumentError("self-loop on '" + u + "'");
        if (!(w > 0.0)) throw ArgumentError("edge weight must be positive");
        const auto i = index_of(u), j = index_of(v);
        adj_[i][j] += w;
        adj_[j][i] += w;
    }

    double weight(const std::string& u, const std::string& v) const {
        const auto& row = adj_[index_of(u)];
        auto it = row.find(index_of(v));
        return it == row.end() ? 0.0 : it->second;
    }

    /// Neighbors of node i with edge weights, ordered by neighbor index.
    const std::map<std::size_t, double>& neighbors(std::size_t i) const { return adj_[i]; }

    std::size_t edge_count() const {
        std::size_t n = 0;
        for (const auto& row : adj_) n += row.size();
        return n / 2;
    }

    CooccurrenceGraph scaled(double factor) const {
        CooccurrenceGraph g = *this;
        for (auto& row : g.adj_) {
            for (auto& [_, w] : row) w *= factor;
        }
        return g;
    }

private:
    std::vector<std::string> nodes_;
    std::vector<std::map<std::size_t, double>> adj_;
};

struct TextRankConfig {
    std::size_t window = 5;
    double damping = 0.85;
    double tol = 1e-6;
    std::size_t max_iter = 100;
    std::set<std::string> stopwords;
};

struct ConvergenceReport {
    bool converged = false;
    std::size_t iterations = 0;
    double max_delta = 0.0;
};

struct KeywordScores {
    std::map<std::string, double> scores;
    ConvergenceReport convergence;
};

/// Counts co-occurrences of distinct non-stopword tokens whose positions in
/// the original sequence differ by less than `window`.
inline CooccurrenceGraph build_graph(const std::vector<Token>& tokens, std::size_t window,
                                     const std::set<std::string>& stopwords) {
    if (window < 2) throw ArgumentError("textrank window must be >= 2");
    std::vector<std::string> candidates;
    for (const auto& t : tokens) {
        if (!stopwords.count(t)) candidates.push_back(t);
    }
    CooccurrenceGraph g(std::move(candidates));
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (stopwords.count(tokens[i])) continue;
        for (std::size_t j = i + 1; j < tokens.size() && j < i + window; ++j) {
            if (stopwords.count(tokens[j]) || tokens[i] == tokens[j]) continue;
            g.add_edge(tokens[i], tokens[j]);
        }
    }
    return g;
}

/// Weighted TextRank by synchronous iteration from all-ones:
///   WS(i) = (1 - d) + d * sum_j [w_ji / sum_k w_jk] * WS(j)
inline KeywordScores textrank_scores(const CooccurrenceGraph& graph, double damping = 0.85,
                                     double tol = 1e-6, std::size_t max_iter = 100) {
    if (graph.empty()) throw ArgumentError("textrank on an empty graph");
    if (!(damping > 0.0 && damping < 1.0)) throw ArgumentError("damping must lie in (0,1)");
    if (!(tol > 0.0)) throw ArgumentError("tolerance must be positive");
    if (max_iter == 0) throw ArgumentError("max_iter must be positive");

    const std::size_t n = graph.size();
    std::vector<double> out_weight(n, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
        for (const auto& [_, w] : graph.neighbors(j)) out_weight[j] += w;
    }
    // Incoming contributions share[i] = {(j, w_ji / out_weight[j])}. Divide
    // rather than multiply by a reciprocal so uniformly scaled integer weights
    // give bit-identical ratios.
    std::vector<std::vector<std::pair<std::size_t, double>>> share(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (const auto& [j, w] : graph.neighbors(i)) {
            share[i].emplace_back(j, w / out_weight[j]);
        }
    }

    std::vector<double> score(n, 1.0), next(n);
    KeywordScores result;
    for (std::size_t it = 0; it < max_iter; ++it) {
        double delta = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double acc = 0.0;
            for (const auto& [j, s] : share[i]) acc += s * score[j];
            next[i] = (1.0 - damping) + damping * acc;
            delta = std::max(delta, std::abs(next[i] - score[i]));
        }
        score.swap(next);
        result.convergence.iterations = it + 1;
        result.convergence.max_delta = delta;
        if (delta < tol) {
            result.convergence.converged = true;
            break;
        }
    }
    for (std::size_t i = 0; i < n; ++i) result.scores.emplace(graph.nodes()[i], score[i]);
    return result;
}

inline KeywordScores textrank_scores(const CooccurrenceGraph& graph, const TextRankConfig& cfg) {
    return textrank_scores(graph, cfg.damping, cfg.tol, cfg.max_iter);
}

/// Highest-scoring nodes, descending; equal scores fall back to token order.
inline std::vector<std::string> top_m_keywords(const KeywordScores& scores, std::size_t m) {
    if (m == 0) throw ArgumentError("m must be >= 1");
    std::vector<std::pair<std::string, double>> items(scores.scores.begin(), scores.scores.end());
    std::stable_sort(items.begin(), items.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });
    std::vector<std::string> out;
    for (std::size_t i = 0; i < items.size() && i < m; ++i) out.push_back(items[i].first);
    return out;
}

inline std::set<std::string> parse_stopwords(std::string_view text) {
    std::set<std::string> words;
    std::istringstream in{std::string(text)};
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty()) words.insert(line);
    }
    return words;
}

inline std::set<std::string> load_stopwords(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open stopword file " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_stopwords(ss.str());
}

}  // namespace semaug
