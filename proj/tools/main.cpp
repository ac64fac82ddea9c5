// tensemb command line: build vocabularies, train cps/jcps embeddings, and
// evaluate them with outlier detection, word similarity, and neighbor queries.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "tensemb/corpus.hpp"
#include "tensemb/cooccurrence.hpp"
#include "tensemb/embedding.hpp"
#include "tensemb/error.hpp"
#include "tensemb/evaluation.hpp"
#include "tensemb/factorization.hpp"
#include "tensemb/manifest.hpp"

namespace {

using namespace tensemb;

std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string fmt6(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw data_error("cannot open for writing: " + path);
    out << text;
    if (!out) throw data_error("write failed: " + path);
}

struct VocabArgs {
    std::string corpus;
    std::string stopwords;
    std::string out;
    uint64_t min_count = 5;
};

int cmd_vocab(const VocabArgs& a) {
    std::unordered_set<std::string> stop;
    if (!a.stopwords.empty()) stop = load_stopwords(a.stopwords);
    Vocabulary vocab = count_corpus_file(a.corpus).finish(a.min_count, stop);
    vocab.save(a.out);

    RunManifest m;
    m.subcommand = "vocab";
    m.flags["corpus"] = a.corpus;
    m.flags["min-count"] = std::to_string(a.min_count);
    m.flags["stopwords"] = a.stopwords;
    m.flags["out"] = a.out;
    m.inputs.emplace_back(a.corpus, file_digest(a.corpus));
    if (!a.stopwords.empty()) m.inputs.emplace_back(a.stopwords, file_digest(a.stopwords));
    m.outputs.push_back(a.out);
    write_manifest(m, a.out);

    std::cerr << "vocab: " << vocab.size() << " words -> " << a.out << "\n";
    return 0;
}

struct TrainArgs {
    std::string corpus;
    std::string vocab;
    std::string out;
    std::string mode = "cps";
    std::string resume;
    uint32_t rank = 300;
    double shift = std::nan("");  // resolved per mode
    uint32_t window = 5;
    uint32_t chunk = 1000;
    double neg_ratio = 1.0;
    uint32_t epochs = 1;
    uint64_t seed = 1;
    double lr = 1e-3;
    bool quiet = false;
};

int cmd_train(const TrainArgs& a) {
    TrainConfig cfg;
    cfg.mode = a.mode == "jcps" ? TrainMode::jcps : TrainMode::cps;
    cfg.rank = a.rank;
    cfg.shift = std::isnan(a.shift) ? TrainConfig::default_shift(cfg.mode) : a.shift;
    cfg.window = a.window;
    cfg.chunk_sentences = a.chunk;
    cfg.negative_ratio = a.neg_ratio;
    cfg.epochs = a.epochs;
    cfg.seed = a.seed;
    cfg.lr = a.lr;
    if (cfg.mode == TrainMode::jcps && cfg.shift != 0.0) {
        std::cerr << "warning: training jcps with shift " << cfg.shift
                  << "; nonzero shifts tend to degrade jcps embeddings\n";
    }

    Vocabulary vocab = Vocabulary::load(a.vocab);
    auto corpus = load_indexed_corpus(a.corpus, vocab);

    Trainer trainer(corpus, vocab.size(), cfg);
    size_t support = 0;
    for (const auto& t : trainer.tensors()) support += t.nnz();
    if (support == 0) {
        std::cerr << "warning: no PPMI entries survive shift " << cfg.shift
                  << "; the factors will stay at their initialization\n";
    }
    if (!a.resume.empty()) {
        auto ck = Checkpoint::load(a.resume);
        if (ck.adam.lr != cfg.lr) {
            std::cerr << "warning: resuming with the checkpoint's learning rate " << ck.adam.lr
                      << " (flag value " << cfg.lr << " ignored)\n";
        }
        trainer.resume(ck);
    } else {
        trainer.init();
    }

    ProgressFn progress;
    if (!a.quiet) {
        progress = [](uint32_t epoch, uint64_t chunk, size_t examples, double loss) {
            if (chunk % 50 == 0) {
                std::cerr << "epoch " << epoch << " chunk " << chunk << ": " << examples
                          << " examples, loss " << loss << "\n";
            }
        };
    }
    auto t0 = std::chrono::steady_clock::now();
    trainer.run(progress);
    auto secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    Embedding emb = make_embedding(vocab, trainer.factors());
    save_embedding(emb, a.out);
    std::string ckpt = a.out + ".ckpt";
    trainer.checkpoint().save(ckpt);

    RunManifest m;
    m.subcommand = "train";
    m.seed = a.seed;
    m.flags["corpus"] = a.corpus;
    m.flags["vocab"] = a.vocab;
    m.flags["mode"] = a.mode;
    m.flags["rank"] = std::to_string(a.rank);
    m.flags["shift"] = fmt_double(cfg.shift);
    m.flags["window"] = std::to_string(a.window);
    m.flags["chunk"] = std::to_string(a.chunk);
    m.flags["neg-ratio"] = fmt_double(a.neg_ratio);
    m.flags["epochs"] = std::to_string(a.epochs);
    m.flags["seed"] = std::to_string(a.seed);
    m.flags["lr"] = fmt_double(a.lr);
    m.flags["resume"] = a.resume;
    m.flags["out"] = a.out;
    m.inputs.emplace_back(a.corpus, file_digest(a.corpus));
    m.inputs.emplace_back(a.vocab, file_digest(a.vocab));
    if (!a.resume.empty()) m.inputs.emplace_back(a.resume, file_digest(a.resume));
    m.outputs.push_back(a.out);
    m.outputs.push_back(ckpt);
    write_manifest(m, a.out);

    std::cerr << "train: " << vocab.size() << " words, rank " << a.rank << ", "
              << trainer.epochs_done() << " epochs in " << fmt6(secs) << "s -> " << a.out << "\n";
    return 0;
}

struct EvalOutlierArgs {
    std::string emb;
    std::string cases;
    std::string mode = "od2";
    std::string out;
};

int cmd_eval_outlier(const EvalOutlierArgs& a) {
    Embedding emb = normalize(load_embedding(a.emb));
    auto cases = load_outlier_cases(a.cases);
    OutlierMode mode = a.mode == "od3" ? OutlierMode::od3 : OutlierMode::od2;
    EvalReport report = run_outlier_eval(emb, cases, mode);

    std::ostringstream body;
    body << "accuracy=" << fmt6(report.accuracy) << "\n";
    body << "opp=" << fmt6(report.opp) << "\n";
    body << "cases=" << report.cases_total << "\n";
    body << "skipped=" << report.cases_skipped << "\n";

    std::cout << "outlier detection (" << a.mode << "): " << report.cases_total << " cases, "
              << report.cases_skipped << " skipped; accuracy " << fmt6(report.accuracy)
              << ", OPP " << fmt6(100.0 * report.opp) << "%\n";
    std::cout << body.str();

    if (!a.out.empty()) {
        write_text_file(a.out, body.str());
        RunManifest m;
        m.subcommand = "eval-outlier";
        m.flags["emb"] = a.emb;
        m.flags["cases"] = a.cases;
        m.flags["mode"] = a.mode;
        m.flags["out"] = a.out;
        m.inputs.emplace_back(a.emb, file_digest(a.emb));
        m.inputs.emplace_back(a.cases, file_digest(a.cases));
        m.outputs.push_back(a.out);
        write_manifest(m, a.out);
    }
    return 0;
}

struct EvalWordsimArgs {
    std::string emb;
    std::string pairs;
    std::string out;
};

int cmd_eval_wordsim(const EvalWordsimArgs& a) {
    Embedding emb = normalize(load_embedding(a.emb));
    auto pairs = load_sim_pairs(a.pairs);
    SpearmanResult r = spearman(emb, pairs);

    std::ostringstream body;
    body << "rho=" << fmt6(r.rho) << "\n";
    body << "used=" << r.used << "\n";
    body << "skipped=" << r.skipped << "\n";

    std::cout << "word similarity: " << r.used << " pairs used, " << r.skipped
              << " skipped; Spearman rho " << fmt6(r.rho) << "\n";
    std::cout << body.str();

    if (!a.out.empty()) {
        write_text_file(a.out, body.str());
        RunManifest m;
        m.subcommand = "eval-wordsim";
        m.flags["emb"] = a.emb;
        m.flags["pairs"] = a.pairs;
        m.flags["out"] = a.out;
        m.inputs.emplace_back(a.emb, file_digest(a.emb));
        m.inputs.emplace_back(a.pairs, file_digest(a.pairs));
        m.outputs.push_back(a.out);
        write_manifest(m, a.out);
    }
    return 0;
}

struct NnArgs {
    std::string emb;
    std::string word;
    size_t k = 10;
    bool include_self = false;
};

int cmd_nn(const NnArgs& a) {
    Embedding emb = normalize(load_embedding(a.emb));
    uint32_t id = emb.require_id(a.word);
    std::vector<double> query(emb.row(id).begin(), emb.row(id).end());
    std::unordered_set<std::string> exclude;
    if (!a.include_self) exclude.insert(a.word);
    for (const auto& n : nearest_neighbors(emb, query, a.k, exclude)) {
        std::cout << n.word << '\t' << fmt6(n.similarity) << "\n";
    }
    return 0;
}

struct ComposeArgs {
    std::string emb;
    std::string w1;
    std::string w2;
    std::string mode = "mult";
    size_t k = 10;
    bool include_sources = false;
};

int cmd_compose(const ComposeArgs& a) {
    Embedding emb = normalize(load_embedding(a.emb));
    ComposeMode mode = a.mode == "add" ? ComposeMode::additive : ComposeMode::multiplicative;
    std::vector<double> query = compose(emb, a.w1, a.w2, mode);
    std::unordered_set<std::string> exclude;
    if (!a.include_sources) {
        exclude.insert(a.w1);
        exclude.insert(a.w2);
    }
    for (const auto& n : nearest_neighbors(emb, query, a.k, exclude)) {
        std::cout << n.word << '\t' << fmt6(n.similarity) << "\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"word embeddings via streaming symmetric CP decomposition of "
                 "shifted-PPMI co-occurrence tensors"};
    app.require_subcommand(1);

    VocabArgs vocab_args;
    auto* vocab_cmd = app.add_subcommand("vocab", "build a frequency-filtered vocabulary");
    vocab_cmd->add_option("--corpus", vocab_args.corpus, "corpus text, one sentence per line")
        ->required();
    vocab_cmd->add_option("--min-count", vocab_args.min_count, "minimum corpus frequency")
        ->default_val(5);
    vocab_cmd->add_option("--stopwords", vocab_args.stopwords, "stopword file, one token per line");
    vocab_cmd->add_option("-o,--out", vocab_args.out, "output vocabulary file")->required();

    TrainArgs train_args;
    auto* train_cmd = app.add_subcommand("train", "train cps or jcps embeddings");
    train_cmd->add_option("--corpus", train_args.corpus, "corpus text")->required();
    train_cmd->add_option("--vocab", train_args.vocab, "vocabulary file")->required();
    train_cmd->add_option("--mode", train_args.mode, "cps or jcps")
        ->check(CLI::IsMember({"cps", "jcps"}))
        ->default_val("cps");
    train_cmd->add_option("--rank", train_args.rank, "embedding rank R")->default_val(300);
    train_cmd->add_option("--shift", train_args.shift,
                          "PMI shift; defaults to 3 for cps, 0 for jcps");
    train_cmd->add_option("--window", train_args.window, "context window length")->default_val(5);
    train_cmd->add_option("--chunk", train_args.chunk, "sentences per minibatch chunk")
        ->default_val(1000);
    train_cmd->add_option("--neg-ratio", train_args.neg_ratio, "negative samples per positive")
        ->default_val(1.0);
    train_cmd->add_option("--epochs", train_args.epochs, "training epochs")->default_val(1);
    train_cmd->add_option("--seed", train_args.seed, "run seed")->default_val(1);
    train_cmd->add_option("--lr", train_args.lr, "Adam learning rate")->default_val(1e-3);
    train_cmd->add_option("--resume", train_args.resume, "continue from a checkpoint file");
    train_cmd->add_flag("--quiet", train_args.quiet, "suppress progress output");
    train_cmd->add_option("-o,--out", train_args.out, "output embedding file")->required();

    EvalOutlierArgs eo_args;
    auto* eo_cmd = app.add_subcommand("eval-outlier", "outlier detection evaluation");
    eo_cmd->add_option("--emb", eo_args.emb, "embedding file")->required();
    eo_cmd->add_option("--cases", eo_args.cases, "outlier case file")->required();
    eo_cmd->add_option("--mode", eo_args.mode, "od2 or od3")
        ->check(CLI::IsMember({"od2", "od3"}))
        ->default_val("od2");
    eo_cmd->add_option("-o,--out", eo_args.out, "write the key=value report here");

    EvalWordsimArgs ew_args;
    auto* ew_cmd = app.add_subcommand("eval-wordsim", "word similarity evaluation");
    ew_cmd->add_option("--emb", ew_args.emb, "embedding file")->required();
    ew_cmd->add_option("--pairs", ew_args.pairs, "similarity pair file")->required();
    ew_cmd->add_option("-o,--out", ew_args.out, "write the key=value report here");

    NnArgs nn_args;
    auto* nn_cmd = app.add_subcommand("nn", "nearest neighbors of a word");
    nn_cmd->add_option("--emb", nn_args.emb, "embedding file")->required();
    nn_cmd->add_option("--word", nn_args.word, "query word")->required();
    nn_cmd->add_option("-k", nn_args.k, "number of neighbors")->default_val(10);
    nn_cmd->add_flag("--include-self", nn_args.include_self, "keep the query word in results");

    ComposeArgs comp_args;
    auto* comp_cmd = app.add_subcommand("compose", "neighbors of a composed word pair");
    comp_cmd->add_option("--emb", comp_args.emb, "embedding file")->required();
    comp_cmd->add_option("--w1", comp_args.w1, "first word")->required();
    comp_cmd->add_option("--w2", comp_args.w2, "second word")->required();
    comp_cmd->add_option("--mode", comp_args.mode, "mult or add")
        ->check(CLI::IsMember({"mult", "add"}))
        ->default_val("mult");
    comp_cmd->add_option("-k", comp_args.k, "number of neighbors")->default_val(10);
    comp_cmd->add_flag("--include-sources", comp_args.include_sources,
                       "keep the source words in results");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }

    try {
        if (vocab_cmd->parsed()) return cmd_vocab(vocab_args);
        if (train_cmd->parsed()) return cmd_train(train_args);
        if (eo_cmd->parsed()) return cmd_eval_outlier(eo_args);
        if (ew_cmd->parsed()) return cmd_eval_wordsim(ew_args);
        if (nn_cmd->parsed()) return cmd_nn(nn_args);
        if (comp_cmd->parsed()) return cmd_compose(comp_args);
    } catch (const usage_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const data_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const numeric_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 1;
}
