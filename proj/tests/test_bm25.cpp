#include <algorithm>
#include <cmath>
#include <cstdio>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "semaug/bm25.hpp"

using namespace semaug;

namespace {

Document doc(std::string id, std::vector<Token> toks) { return {std::move(id), std::move(toks), ""}; }

std::vector<Document> toy() { return {doc("d1", {"a", "b", "a"}), doc("d2", {"c"})}; }

struct RandomCorpus {
    std::vector<Document> docs;
    std::vector<std::vector<std::string>> tokens;
};

RandomCorpus random_corpus(Rng& rng, std::size_t n, std::size_t vocab) {
    RandomCorpus c;
    for (std::size_t i = 0; i < n; ++i) {
        char id[16];
        std::snprintf(id, sizeof id, "doc%03zu", i);
        std::vector<Token> toks;
        const auto len = 1 + rng.below(15);
        for (std::size_t t = 0; t < len; ++t) toks.push_back("t" + std::to_string(rng.below(vocab)));
        c.tokens.push_back(toks);
        c.docs.push_back(doc(id, toks));
    }
    return c;
}

}  // namespace

TEST(Bm25Build, PostingsAndLengths) {
    const auto idx = Bm25Index::build(toy());
    EXPECT_EQ(idx.n_docs(), 2u);
    EXPECT_EQ(idx.avgdl(), 2.0);
    const auto& p = idx.postings();
    ASSERT_EQ(p.size(), 3u);
    EXPECT_EQ(p.at("a").size(), 1u);
    EXPECT_EQ(idx.doc_ids()[p.at("a")[0].doc], "d1");
    EXPECT_EQ(p.at("a")[0].tf, 2u);
    EXPECT_EQ(p.at("b")[0].tf, 1u);
    EXPECT_EQ(idx.doc_ids()[p.at("c")[0].doc], "d2");
    EXPECT_EQ(p.at("c")[0].tf, 1u);
}

TEST(Bm25Build, EmptyAndRepeated) {
    const auto empty = Bm25Index::build({});
    EXPECT_EQ(empty.n_docs(), 0u);
    EXPECT_TRUE(empty.rank({"a"}, 3).empty());

    const auto one = Bm25Index::build({doc("d", {"a", "a", "a"})});
    EXPECT_EQ(one.avgdl(), 3.0);
    EXPECT_EQ(one.postings().at("a")[0].tf, 3u);
}

TEST(Bm25Build, Errors) {
    EXPECT_THROW(Bm25Index::build({doc("x", {"a"}), doc("x", {"b"})}), ArgumentError);
    EXPECT_THROW(Bm25Index::build(toy(), {-1.0, 0.75}), ArgumentError);
    EXPECT_THROW(Bm25Index::build(toy(), {1.5, 1.5}), ArgumentError);
}

TEST(Bm25Score, HandComputedExample) {
    // N=2, n_a=1: idf = ln(1.5/1.5 + 1) = ln 2.
    // f=2, |d1|=3, avgdl=2: norm = 1 - 0.75 + 0.75 * 1.5 = 1.375; denominator = 2 + 1.5 * 1.375 = 4.0625.
    const double expected = std::log(2.0) * (2.0 * 2.5) / 4.0625;
    EXPECT_NEAR(expected, 0.8531, 1e-4);
    const auto idx = Bm25Index::build(toy(), {1.5, 0.75});
    EXPECT_NEAR(idx.score({"a"}, "d1"), expected, 1e-12);
    EXPECT_NEAR(idx.idf("a"), std::log(2.0), 1e-15);
}

TEST(Bm25Score, TrivialCases) {
    const auto idx = Bm25Index::build(toy());
    EXPECT_EQ(idx.score({"z"}, "d1"), 0.0);
    EXPECT_EQ(idx.score({}, "d2"), 0.0);
    EXPECT_EQ(idx.score({"a"}, "d2"), 0.0);
    EXPECT_THROW(idx.score({"a"}, "d9"), LookupError);
}

TEST(Bm25Score, DuplicateQueryTermsCountTwice) {
    const auto idx = Bm25Index::build(toy());
    EXPECT_NEAR(idx.score({"a", "a"}, "d1"), 2.0 * idx.score({"a"}, "d1"), 1e-15);
}

TEST(Bm25Rank, Examples) {
    const auto idx = Bm25Index::build(toy());
    const auto r = idx.rank({"a"}, 2);
    ASSERT_EQ(r.size(), 2u);
    EXPECT_EQ(r[0].first, "d1");
    EXPECT_NEAR(r[0].second, 0.8531, 1e-4);
    EXPECT_EQ(r[1].first, "d2");
    EXPECT_EQ(r[1].second, 0.0);

    const auto c = idx.rank({"c"}, 1);
    ASSERT_EQ(c.size(), 1u);
    EXPECT_EQ(c[0].first, "d2");
    EXPECT_GT(c[0].second, 0.0);

    const auto twins = Bm25Index::build({doc("y", {"p", "q"}), doc("x", {"p", "q"})});
    const auto t = twins.rank({"p"}, 2);
    EXPECT_EQ(t[0].first, "x");
    EXPECT_EQ(t[1].first, "y");
    EXPECT_EQ(t[0].second, t[1].second);

    EXPECT_THROW(idx.rank({"a"}, 0), ArgumentError);
    EXPECT_EQ(idx.rank({"a"}, 10).size(), 2u);
}

TEST(Bm25Rank, MatchesBruteForceOracle) {
    Rng rng(404);
    for (int rep = 0; rep < 30; ++rep) {
        const std::size_t n = 1 + rng.below(200);
        const auto c = random_corpus(rng, n, 1 + rng.below(40));
        const double k1 = rng.uniform(0.0, 3.0), b = rng.uniform(0.0, 1.0);
        const auto idx = Bm25Index::build(c.docs, {k1, b});
        std::vector<Token> query;
        for (std::size_t i = 0, q = 1 + rng.below(5); i < q; ++i) query.push_back("t" + std::to_string(rng.below(50)));

        std::vector<std::pair<std::string, double>> expect;
        for (std::size_t i = 0; i < n; ++i) {
            const double s = oracle::bm25(c.tokens, query, i, k1, b);
            expect.emplace_back(c.docs[i].doc_id, s);
            EXPECT_NEAR(idx.score(query, c.docs[i].doc_id), s, 1e-12);
            EXPECT_GE(idx.score(query, c.docs[i].doc_id), 0.0);
        }
        std::sort(expect.begin(), expect.end(), [](const auto& x, const auto& y) {
            if (std::abs(x.second - y.second) > 1e-12) return x.second > y.second;
            return x.first < y.first;
        });
        const auto got = idx.rank(query, n);
        ASSERT_EQ(got.size(), n);
        for (std::size_t i = 0; i < n; ++i) {
            EXPECT_EQ(got[i].first, expect[i].first);
            EXPECT_NEAR(got[i].second, expect[i].second, 1e-12);
        }
        const auto k = 1 + rng.below(n);
        const auto top = idx.rank(query, k);
        ASSERT_EQ(top.size(), k);
        for (std::size_t i = 0; i < k; ++i) EXPECT_EQ(top[i].first, got[i].first);
    }
}

TEST(Bm25Score, MonotoneInTermFrequency) {
    // Same length and document frequency; only the count of the query term grows.
    const std::vector<Document> others{doc("o1", {"q", "y"}), doc("o2", {"z"}), doc("o3", {"y", "y", "z"})};
    double prev = 0.0;
    for (std::size_t f = 1; f <= 6; ++f) {
        std::vector<Token> t(6, "x");
        std::fill(t.begin(), t.begin() + static_cast<std::ptrdiff_t>(f), "q");
        auto docs = others;
        docs.push_back(doc("t", t));
        const double s = Bm25Index::build(docs).score({"q"}, "t");
        EXPECT_GT(s, prev);
        prev = s;
    }
}

TEST(Bm25Score, NonMatchingDocChangesOnlyThroughCorpusStatistics) {
    Rng rng(8);
    for (int rep = 0; rep < 20; ++rep) {
        auto c = random_corpus(rng, 2 + rng.below(30), 10);
        const std::vector<Token> query{"t1", "t2"};
        c.docs.push_back(doc("zzz", {"unrelated", "words", "only"}));
        c.tokens.push_back({"unrelated", "words", "only"});
        const auto idx = Bm25Index::build(c.docs);
        for (std::size_t i = 0; i < c.docs.size(); ++i) {
            EXPECT_NEAR(idx.score(query, c.docs[i].doc_id), oracle::bm25(c.tokens, query, i, 1.5, 0.75), 1e-12);
        }
        EXPECT_EQ(idx.score(query, "zzz"), 0.0);
    }
}

TEST(Bm25Json, RoundTripAndSortedOutput) {
    Rng rng(12);
    const auto c = random_corpus(rng, 40, 15);
    const auto idx = Bm25Index::build(c.docs, {1.2, 0.6});
    const auto j = idx.to_json();
    EXPECT_EQ(j.at("format"), "semaug-bm25-v1");
    EXPECT_EQ(j.at("n_docs"), 40);
    const auto back = Bm25Index::from_json(nlohmann::json::parse(j.dump()));
    EXPECT_EQ(back.to_json().dump(), j.dump());
    EXPECT_EQ(back.avgdl(), idx.avgdl());
    const std::vector<Token> q{"t1", "t3", "t3"};
    EXPECT_EQ(back.rank(q, 40), idx.rank(q, 40));
    // Postings rows are sorted by doc id.
    for (const auto& [term, rows] : j.at("postings").items()) {
        for (std::size_t i = 1; i < rows.size(); ++i) EXPECT_LT(rows[i - 1][0], rows[i][0]);
    }
}

TEST(Bm25Json, MalformedRejected) {
    EXPECT_THROW(Bm25Index::from_json(nlohmann::json::object()), ParseError);
    auto j = Bm25Index::build(toy()).to_json();
    j["postings"]["a"][0][0] = "ghost";
    EXPECT_THROW(Bm25Index::from_json(j), ParseError);
    j = Bm25Index::build(toy()).to_json();
    j["n_docs"] = 7;
    EXPECT_THROW(Bm25Index::from_json(j), ParseError);
}

TEST(Corpus, TokenizeAndParse) {
    EXPECT_EQ(tokenize_text("  a b\tc "), (std::vector<Token>{"a", "b", "c"}));
    EXPECT_EQ(tokenize_text("特朗普"), (std::vector<Token>{"特", "朗", "普"}));
    EXPECT_EQ(tokenize_text("ab"), (std::vector<Token>{"a", "b"}));
    const auto docs = parse_corpus_jsonl("{\"id\": \"x\", \"text\": \"a b a\"}\n\n{\"id\": \"y\", \"text\": \"中文\"}\n");
    ASSERT_EQ(docs.size(), 2u);
    EXPECT_EQ(docs[0].doc_id, "x");
    EXPECT_EQ(docs[0].tokens, (std::vector<Token>{"a", "b", "a"}));
    EXPECT_EQ(docs[0].raw_text, "a b a");
    EXPECT_EQ(docs[1].tokens, (std::vector<Token>{"中", "文"}));
    EXPECT_THROW(parse_corpus_jsonl("{\"id\": \"x\"}\n"), ParseError);
    EXPECT_THROW(parse_corpus_jsonl("not json\n"), ParseError);
    EXPECT_THROW(load_corpus("/nonexistent/corpus.jsonl"), IoError);
}
