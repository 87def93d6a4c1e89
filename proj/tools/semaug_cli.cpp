#include <cstdlib>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "semaug.hpp"

namespace {

using namespace semaug;

void warn(const std::string& msg) { std::cerr << "warning: " << msg << "\n"; }

template <typename T>
std::vector<T> parse_list(const std::string& text, const char* flag) {
    std::vector<T> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        std::istringstream is(item);
        T v;
        if (!(is >> v) || !is.eof()) throw ArgumentError(std::string(flag) + ": bad value '" + item + "'");
        out.push_back(v);
    }
    if (out.empty()) throw ArgumentError(std::string(flag) + ": empty list");
    return out;
}

std::vector<Sentence> load_dataset(const std::string& path) {
    try {
        return parse_conll(read_file(path));
    } catch (const ParseError& e) {
        throw ParseError(path + ": " + e.what());
    } catch (const ValidationError& e) {
        throw ValidationError(path + ": " + e.what());
    }
}

void emit(const std::string& out_path, const std::string& content) {
    if (out_path.empty()) {
        std::cout << content;
    } else {
        write_file(out_path, content);
    }
}

int exit_code(const std::string& code) {
    if (code == "E_PARSE" || code == "E_VALIDATION") return 3;
    if (code == "E_CONFIG") return 4;
    if (code == "E_IO") return 5;
    if (code == "E_ARGUMENT") return 6;
    return 7;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Retrieval-augmented sequence labeling toolkit"};
    app.require_subcommand(1);

    // index
    std::string corpus_path, out_path;
    double k1 = 1.5, b = 0.75;
    auto* index = app.add_subcommand("index", "Build and persist a BM25 index over a JSONL corpus");
    index->add_option("--corpus", corpus_path, "corpus JSONL")->required();
    index->add_option("--out", out_path, "index JSON (stdout if omitted)");
    index->add_option("--k1", k1);
    index->add_option("--b", b);

    // retrieve
    std::string dataset_path, recording_path, stopwords_path;
    std::size_t k = 3, m = 5, n_candidates = 20, window = 5;
    auto* retrieve = app.add_subcommand("retrieve", "Build the per-sentence contexts cache");
    retrieve->add_option("--dataset", dataset_path)->required();
    auto* corpus_opt = retrieve->add_option("--corpus", corpus_path, "local corpus JSONL backend");
    auto* rec_opt = retrieve->add_option("--recording", recording_path, "recorded search responses (JSONL)");
    corpus_opt->excludes(rec_opt);
    retrieve->add_option("--k", k, "contexts kept per sentence");
    retrieve->add_option("--m", m, "query keywords");
    retrieve->add_option("--n-candidates", n_candidates);
    retrieve->add_option("--window", window, "TextRank co-occurrence window");
    retrieve->add_option("--stopwords", stopwords_path);
    retrieve->add_option("--k1", k1);
    retrieve->add_option("--b", b);
    retrieve->add_option("--out", out_path)->required();

    // train
    std::string config_path, contexts_path, metrics_path, dev_path, dev_contexts_path;
    auto* train_cmd = app.add_subcommand("train", "Train a model from a dataset and its contexts cache");
    train_cmd->add_option("--config", config_path)->required();
    train_cmd->add_option("--dataset", dataset_path)->required();
    train_cmd->add_option("--contexts", contexts_path)->required();
    train_cmd->add_option("--out", out_path, "checkpoint JSON")->required();
    train_cmd->add_option("--metrics", metrics_path, "per-epoch metrics JSONL (default: <out>.metrics.jsonl)");
    train_cmd->add_option("--dev", dev_path, "dev set for early stopping");
    train_cmd->add_option("--dev-contexts", dev_contexts_path);

    // eval
    std::string checkpoint_path;
    auto* eval_cmd = app.add_subcommand("eval", "Exact-match evaluation of a checkpoint");
    eval_cmd->add_option("--checkpoint", checkpoint_path)->required();
    eval_cmd->add_option("--dataset", dataset_path)->required();
    eval_cmd->add_option("--contexts", contexts_path)->required();
    eval_cmd->add_option("--out", out_path, "report JSON (stdout if omitted)");

    // sweeps
    std::string values, train_path, test_path;
    auto add_sweep = [&](const char* name, const char* flag, const char* help) {
        auto* cmd = app.add_subcommand(name, help);
        cmd->add_option(flag, values)->required();
        cmd->add_option("--config", config_path)->required();
        cmd->add_option("--train", train_path)->required();
        cmd->add_option("--test", test_path)->required();
        cmd->add_option("--corpus", corpus_path)->required();
        cmd->add_option("--out", out_path, "report JSON (stdout if omitted)");
        return cmd;
    };
    auto* sweep_k_cmd = add_sweep("sweep-k", "--k-values", "Train and evaluate once per number of contexts K");
    auto* sweep_p_cmd = add_sweep("sweep-p", "--p-values", "Train and evaluate once per fusion factor p");

    // gen-synthetic
    std::size_t n_train = 400, n_test = 100;
    double ambiguity = 0.5;
    std::uint64_t seed = 7;
    std::string out_dir;
    auto* gen = app.add_subcommand("gen-synthetic", "Write a synthetic dataset, corpus and manifest");
    gen->add_option("--n-train", n_train);
    gen->add_option("--n-test", n_test);
    gen->add_option("--ambiguity-rate", ambiguity);
    gen->add_option("--seed", seed);
    gen->add_option("--out-dir", out_dir)->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "E_USAGE: " << e.what() << "\n";
        return 2;
    }

    try {
        if (*index) {
            const auto idx = Bm25Index::build(load_corpus(corpus_path), {k1, b});
            emit(out_path, idx.to_json().dump() + "\n");
        } else if (*retrieve) {
            const auto dataset = load_dataset(dataset_path);
            RetrievalConfig rc;
            rc.k = k;
            rc.m = m;
            rc.n_candidates = n_candidates;
            rc.bm25 = {k1, b};
            rc.textrank.window = window;
            if (!stopwords_path.empty()) rc.textrank.stopwords = load_stopwords(stopwords_path);
            std::vector<ExternalContexts> cache;
            if (!recording_path.empty()) {
                cache = build_contexts_cache(dataset, FileBackend::load(recording_path), rc, warn);
            } else if (!corpus_path.empty()) {
                cache = build_contexts_cache(dataset, LocalCorpusBackend(load_corpus(corpus_path), rc.bm25), rc, warn);
            } else {
                throw ArgumentError("retrieve needs --corpus or --recording");
            }
            write_contexts_cache(out_path, cache);
        } else if (*train_cmd) {
            const auto cfg = load_train_config(config_path);
            const auto dataset = load_dataset(dataset_path);
            const auto contexts = load_contexts_cache(contexts_path);
            std::vector<Sentence> dev;
            std::vector<ExternalContexts> dev_ctx;
            DevSet dev_set;
            if (!dev_path.empty()) {
                if (dev_contexts_path.empty()) throw ArgumentError("--dev requires --dev-contexts");
                dev = load_dataset(dev_path);
                dev_ctx = load_contexts_cache(dev_contexts_path);
                dev_set = {&dev, &dev_ctx};
            }
            auto result = train(cfg, dataset, contexts, std::nullopt, dev_set);
            save_checkpoint(out_path, result.model, cfg);
            write_file(metrics_path.empty() ? out_path + ".metrics.jsonl" : metrics_path,
                       serialize_metrics_log(result.log));
        } else if (*eval_cmd) {
            const auto model = load_checkpoint(checkpoint_path);
            const auto report = evaluate(model, load_dataset(dataset_path), load_contexts_cache(contexts_path));
            emit(out_path, to_json(report).dump() + "\n");
        } else if (*sweep_k_cmd || *sweep_p_cmd) {
            const auto cfg = load_train_config(config_path);
            const auto train_set = load_dataset(train_path);
            const auto test_set = load_dataset(test_path);
            const auto corpus = load_corpus(corpus_path);
            const SweepInputs in{train_set, test_set, corpus};
            const auto report = *sweep_k_cmd ? sweep_k(cfg, parse_list<std::size_t>(values, "--k-values"), in, warn)
                                             : sweep_p(cfg, parse_list<double>(values, "--p-values"), in, warn);
            emit(out_path, to_json(report).dump(2) + "\n");
        } else if (*gen) {
            write_synthetic(gen_synthetic(n_train, n_test, ambiguity, seed), out_dir);
        }
    } catch (const Error& e) {
        std::cerr << e.code() << ": " << e.what() << "\n";
        return exit_code(e.code());
    } catch (const std::exception& e) {
        std::cerr << "E_INTERNAL: " << e.what() << "\n";
        return 8;
    }
    return 0;
}
