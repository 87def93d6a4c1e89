#include <cstdio>
#include <numeric>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "semaug/textrank.hpp"

using namespace semaug;

namespace {

std::string node_name(std::size_t i) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "n%04zu", i);
    return buf;
}

struct RandomGraph {
    CooccurrenceGraph graph;
    Eigen::MatrixXd dense;
};

RandomGraph random_graph(Rng& rng, std::size_t n, double edge_prob, int max_weight) {
    std::vector<std::string> names;
    for (std::size_t i = 0; i < n; ++i) names.push_back(node_name(i));
    RandomGraph r{CooccurrenceGraph(names), Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n))};
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            if (!rng.bernoulli(edge_prob)) continue;
            const double w = static_cast<double>(1 + rng.below(static_cast<std::uint64_t>(max_weight)));
            r.graph.add_edge(names[i], names[j], w);
            r.dense(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = w;
            r.dense(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = w;
        }
    }
    return r;
}

CooccurrenceGraph graph_of(const std::vector<std::string>& nodes,
                           const std::vector<std::tuple<std::string, std::string, double>>& edges) {
    CooccurrenceGraph g(nodes);
    for (const auto& [u, v, w] : edges) g.add_edge(u, v, w);
    return g;
}

}  // namespace

TEST(BuildGraph, RepeatedPairCounts) {
    const auto g = build_graph({"a", "b", "a"}, 2, {});
    EXPECT_EQ(g.nodes(), (std::vector<std::string>{"a", "b"}));
    EXPECT_EQ(g.weight("a", "b"), 2.0);
    EXPECT_EQ(g.weight("b", "a"), 2.0);
    EXPECT_EQ(g.edge_count(), 1u);
}

TEST(BuildGraph, SingleTokenAndAllStopwords) {
    const auto g = build_graph({"a"}, 5, {});
    EXPECT_EQ(g.size(), 1u);
    EXPECT_EQ(g.edge_count(), 0u);
    EXPECT_TRUE(build_graph({"the", "the"}, 3, {"the"}).empty());
    EXPECT_TRUE(build_graph({}, 3, {}).empty());
}

TEST(BuildGraph, WindowCountsPositionsIncludingStopwords) {
    // a and c are 2 positions apart: inside window 3, outside window 2.
    EXPECT_EQ(build_graph({"a", "the", "c"}, 3, {"the"}).weight("a", "c"), 1.0);
    EXPECT_EQ(build_graph({"a", "the", "c"}, 2, {"the"}).weight("a", "c"), 0.0);
}

TEST(BuildGraph, MatchesPairEnumeration) {
    Rng rng(6);
    for (int rep = 0; rep < 50; ++rep) {
        std::vector<Token> toks;
        const auto len = rng.below(30);
        for (std::size_t i = 0; i < len; ++i) toks.push_back(std::string(1, static_cast<char>('a' + rng.below(6))));
        const std::size_t window = 2 + rng.below(5);
        const std::set<std::string> stop{"a"};
        const auto g = build_graph(toks, window, stop);
        std::map<std::pair<std::string, std::string>, double> expect;
        for (std::size_t i = 0; i < toks.size(); ++i)
            for (std::size_t j = 0; j < toks.size(); ++j)
                if (i < j && j - i < window && toks[i] != toks[j] && !stop.count(toks[i]) && !stop.count(toks[j]))
                    expect[std::minmax(toks[i], toks[j])] += 1.0;
        std::size_t edges = 0;
        for (const auto& u : g.nodes()) {
            for (const auto& v : g.nodes()) {
                const double w = expect.count(std::minmax(u, v)) ? expect[std::minmax(u, v)] : 0.0;
                if (u < v) {
                    EXPECT_EQ(g.weight(u, v), w);
                    EXPECT_EQ(g.weight(v, u), w);
                    edges += w > 0;
                }
            }
        }
        EXPECT_EQ(g.edge_count(), edges);
    }
}

TEST(BuildGraph, Errors) {
    EXPECT_THROW(build_graph({"a"}, 1, {}), ArgumentError);
    CooccurrenceGraph g({"a", "b"});
    EXPECT_THROW(g.add_edge("a", "a"), ArgumentError);
    EXPECT_THROW(g.add_edge("a", "b", 0.0), ArgumentError);
    EXPECT_THROW(g.add_edge("a", "z"), LookupError);
}

TEST(TextRank, CompleteGraphAllOnes) {
    const auto r = textrank_scores(graph_of({"a", "b", "c"}, {{"a", "b", 1}, {"b", "c", 1}, {"a", "c", 1}}));
    for (const auto& [_, s] : r.scores) EXPECT_NEAR(s, 1.0, 1e-12);
    EXPECT_TRUE(r.convergence.converged);
}

TEST(TextRank, IsolatedNode) {
    const auto r = textrank_scores(CooccurrenceGraph({"a"}));
    EXPECT_NEAR(r.scores.at("a"), 0.15, 1e-12);
    EXPECT_TRUE(r.convergence.converged);
}

TEST(TextRank, PathGraphAgainstDenseOracles) {
    const auto g = graph_of({"a", "b", "c"}, {{"a", "b", 1}, {"b", "c", 1}});
    Eigen::MatrixXd w(3, 3);
    w << 0, 1, 0, 1, 0, 1, 0, 1, 0;
    const auto power = oracle::textrank_power(w, 0.85);
    const auto solve = oracle::textrank_dense(w, 0.85);
    EXPECT_LT((power - solve).cwiseAbs().maxCoeff(), 1e-11);
    const auto r = textrank_scores(g, 0.85, 1e-12, 10000);
    EXPECT_NEAR(r.scores.at("a"), solve(0), 1e-10);
    EXPECT_NEAR(r.scores.at("b"), solve(1), 1e-10);
    EXPECT_NEAR(r.scores.at("c"), solve(2), 1e-10);
    EXPECT_GT(r.scores.at("b"), r.scores.at("a"));
    EXPECT_EQ(r.scores.at("a"), r.scores.at("c"));
    EXPECT_EQ(top_m_keywords(r, 3), (std::vector<std::string>{"b", "a", "c"}));
    EXPECT_EQ(top_m_keywords(textrank_scores(g), 3), (std::vector<std::string>{"b", "a", "c"}));
}

TEST(TextRank, RandomGraphsAgainstDenseOracle) {
    Rng rng(77);
    for (int rep = 0; rep < 40; ++rep) {
        const std::size_t n = 1 + rng.below(50);
        const auto g = random_graph(rng, n, rng.uniform(0.05, 0.6), 4);
        const auto expected = oracle::textrank_power(g.dense, 0.85);
        const auto tight = textrank_scores(g.graph, 0.85, 1e-12, 10000);
        const auto dflt = textrank_scores(g.graph);
        EXPECT_TRUE(dflt.convergence.converged);
        EXPECT_LE(dflt.convergence.iterations, 100u);
        for (std::size_t i = 0; i < n; ++i) {
            EXPECT_NEAR(tight.scores.at(node_name(i)), expected(static_cast<Eigen::Index>(i)), 1e-10);
            EXPECT_NEAR(dflt.scores.at(node_name(i)), expected(static_cast<Eigen::Index>(i)), 1e-5);
            EXPECT_GT(dflt.scores.at(node_name(i)), 0.0);
        }
    }
}

TEST(TextRank, ScalingWeightsIsExact) {
    Rng rng(13);
    for (int rep = 0; rep < 30; ++rep) {
        const auto g = random_graph(rng, 2 + rng.below(40), 0.3, 5);
        const auto base = textrank_scores(g.graph);
        for (double f : {2.0, 3.0, 7.0, 0.5, 0.125, 1000.0}) {
            const auto scaled = textrank_scores(g.graph.scaled(f));
            EXPECT_EQ(scaled.scores, base.scores) << "factor " << f;
            EXPECT_EQ(top_m_keywords(scaled, 5), top_m_keywords(base, 5));
        }
        for (double f : {0.3, 1.7}) {
            const auto scaled = textrank_scores(g.graph.scaled(f));
            for (const auto& [k, v] : base.scores) EXPECT_NEAR(scaled.scores.at(k), v, 1e-12);
        }
    }
}

TEST(TextRank, PermutationEquivariance) {
    Rng rng(31);
    for (int rep = 0; rep < 20; ++rep) {
        const std::size_t n = 2 + rng.below(30);
        const auto g = random_graph(rng, n, 0.3, 3);
        std::vector<std::size_t> perm(n);
        std::iota(perm.begin(), perm.end(), 0);
        rng.shuffle(perm);
        std::vector<std::string> names;
        for (std::size_t i = 0; i < n; ++i) names.push_back(node_name(perm[i]));
        CooccurrenceGraph h(names);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j)
                if (const double w = g.dense(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)); w > 0)
                    h.add_edge(node_name(perm[i]), node_name(perm[j]), w);
        const auto a = textrank_scores(g.graph);
        const auto b = textrank_scores(h);
        for (std::size_t i = 0; i < n; ++i) EXPECT_NEAR(b.scores.at(node_name(perm[i])), a.scores.at(node_name(i)), 1e-12);
    }
}

TEST(TextRank, AutomorphismOrbitsAgree) {
    const double tol = 1e-6;
    // Star: all leaves are interchangeable.
    CooccurrenceGraph star({"hub", "l1", "l2", "l3", "l4"});
    for (const char* l : {"l1", "l2", "l3", "l4"}) star.add_edge("hub", l);
    auto r = textrank_scores(star);
    for (const char* l : {"l2", "l3", "l4"}) EXPECT_NEAR(r.scores.at(l), r.scores.at("l1"), 10 * tol);
    EXPECT_GT(r.scores.at("hub"), r.scores.at("l1"));

    // Cycle of 7: every node in one orbit.
    std::vector<std::string> names;
    for (int i = 0; i < 7; ++i) names.push_back("c" + std::to_string(i));
    CooccurrenceGraph cycle(names);
    for (int i = 0; i < 7; ++i) cycle.add_edge(names[i], names[(i + 1) % 7], 2.0);
    r = textrank_scores(cycle);
    for (const auto& [_, s] : r.scores) EXPECT_NEAR(s, r.scores.at("c0"), 10 * tol);

    // Complete bipartite K(2,3) with unequal side sizes.
    CooccurrenceGraph kb({"u1", "u2", "v1", "v2", "v3"});
    for (const char* u : {"u1", "u2"})
        for (const char* v : {"v1", "v2", "v3"}) kb.add_edge(u, v);
    r = textrank_scores(kb);
    EXPECT_NEAR(r.scores.at("u1"), r.scores.at("u2"), 10 * tol);
    EXPECT_NEAR(r.scores.at("v1"), r.scores.at("v3"), 10 * tol);
    EXPECT_NEAR(r.scores.at("v2"), r.scores.at("v3"), 10 * tol);
}

TEST(TextRank, ConvergesOnLargeGraphs) {
    Rng rng(1000);
    for (std::size_t n : {200u, 600u, 1000u}) {
        std::vector<Token> toks;
        for (std::size_t i = 0; i < 5 * n; ++i) toks.push_back(node_name(rng.below(n)));
        const auto g = build_graph(toks, 5, {});
        const auto r = textrank_scores(g);
        EXPECT_TRUE(r.convergence.converged) << n;
        EXPECT_LE(r.convergence.iterations, 100u);
        EXPECT_LT(r.convergence.max_delta, 1e-6);
    }
    // A long path is the slowest-mixing shape at this size.
    std::vector<Token> path;
    for (std::size_t i = 0; i < 1000; ++i) path.push_back(node_name(i));
    EXPECT_TRUE(textrank_scores(build_graph(path, 2, {})).convergence.converged);
}

TEST(TextRank, NonConvergenceIsReported) {
    const auto g = graph_of({"a", "b", "c"}, {{"a", "b", 1}, {"b", "c", 1}});
    const auto r = textrank_scores(g, 0.85, 1e-15, 2);
    EXPECT_FALSE(r.convergence.converged);
    EXPECT_EQ(r.convergence.iterations, 2u);
    EXPECT_EQ(r.scores.size(), 3u);
}

TEST(TextRank, Errors) {
    EXPECT_THROW(textrank_scores(CooccurrenceGraph{}), ArgumentError);
    CooccurrenceGraph g({"a"});
    EXPECT_THROW(textrank_scores(g, 1.0), ArgumentError);
    EXPECT_THROW(textrank_scores(g, 0.85, 0.0), ArgumentError);
    EXPECT_THROW(textrank_scores(g, 0.85, 1e-6, 0), ArgumentError);
}

TEST(TopM, OrderingAndTies) {
    KeywordScores s;
    s.scores = {{"a", 1.0}, {"b", 2.0}};
    EXPECT_EQ(top_m_keywords(s, 1), (std::vector<std::string>{"b"}));
    s.scores = {{"a", 1.0}, {"b", 1.0}};
    EXPECT_EQ(top_m_keywords(s, 1), (std::vector<std::string>{"a"}));
    EXPECT_EQ(top_m_keywords(s, 10), (std::vector<std::string>{"a", "b"}));
    s.scores = {{"z", 3.0}, {"y", 1.0}, {"x", 3.0}};
    EXPECT_EQ(top_m_keywords(s, 3), (std::vector<std::string>{"x", "z", "y"}));
    EXPECT_THROW(top_m_keywords(s, 0), ArgumentError);
}

TEST(Stopwords, ParseLines) {
    EXPECT_EQ(parse_stopwords("the\r\na\n\nof\n"), (std::set<std::string>{"a", "of", "the"}));
    EXPECT_THROW(load_stopwords("/nonexistent/stop.txt"), IoError);
}
