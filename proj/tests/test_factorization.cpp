#include <doctest.h>

#include <cmath>
#include <map>
#include <numeric>

#include "oracles.hpp"
#include "tensemb/error.hpp"
#include "tensemb/factorization.hpp"

using namespace tensemb;

namespace {

FactorMatrix random_factors(uint32_t dim, uint32_t rank, uint64_t seed, double stddev = 1.0) {
    Rng rng(seed);
    return FactorMatrix::gaussian_init(dim, rank, stddev, rng);
}

Minibatch random_batch(int order, uint32_t dim, size_t count, uint64_t seed) {
    Rng rng(seed);
    Minibatch batch;
    batch.order = order;
    while (batch.examples.size() < count) {
        std::array<uint32_t, 3> ids{0, 0, 0};
        for (int a = 0; a < order; ++a) ids[a] = static_cast<uint32_t>(rng.uniform_below(dim));
        std::sort(ids.begin(), ids.begin() + order);
        bool distinct = true;
        for (int a = 0; a + 1 < order; ++a) {
            if (ids[a] == ids[a + 1]) distinct = false;
        }
        if (!distinct) continue;
        batch.examples.push_back({ids, rng.gaussian()});
    }
    return batch;
}

// Central finite differences of batch_loss on every row the batch touches.
RowGradient fd_gradient(const FactorMatrix& u, const Minibatch& batch, double h) {
    std::set<uint32_t> rows;
    for (const auto& ex : batch.examples) {
        for (int a = 0; a < batch.order; ++a) rows.insert(ex.ids[a]);
    }
    RowGradient grad;
    FactorMatrix probe = u;
    for (uint32_t row : rows) {
        std::vector<double> g(u.rank);
        for (uint32_t r = 0; r < u.rank; ++r) {
            double original = probe.row(row)[r];
            probe.row(row)[r] = original + h;
            double up = batch_loss(probe, batch);
            probe.row(row)[r] = original - h;
            double down = batch_loss(probe, batch);
            probe.row(row)[r] = original;
            g[r] = (up - down) / (2.0 * h);
        }
        grad[row] = std::move(g);
    }
    return grad;
}

double max_rel_error(const RowGradient& analytic, const RowGradient& fd) {
    double worst = 0.0;
    for (const auto& [row, g_fd] : fd) {
        auto it = analytic.find(row);
        for (size_t r = 0; r < g_fd.size(); ++r) {
            double a = it == analytic.end() ? 0.0 : it->second[r];
            double rel = std::abs(a - g_fd[r]) / std::max({1.0, std::abs(a), std::abs(g_fd[r])});
            worst = std::max(worst, rel);
        }
    }
    return worst;
}

SparseSymTensor tensor_from_factors(const FactorMatrix& u, int order) {
    SparseSymTensor t(order, u.dim);
    if (order == 2) {
        for (uint32_t i = 0; i < u.dim; ++i) {
            for (uint32_t j = i + 1; j < u.dim; ++j) {
                std::array<uint32_t, 2> ids{i, j};
                double v = predict(u, ids);
                if (v > 0.0) t.set(ids, v);
            }
        }
    } else {
        for (uint32_t i = 0; i < u.dim; ++i) {
            for (uint32_t j = i + 1; j < u.dim; ++j) {
                for (uint32_t k = j + 1; k < u.dim; ++k) {
                    std::array<uint32_t, 3> ids{i, j, k};
                    double v = predict(u, ids);
                    if (v > 0.0) t.set(ids, v);
                }
            }
        }
    }
    return t;
}

FactorMatrix abs_gaussian_factors(uint32_t dim, uint32_t rank, uint64_t seed) {
    auto u = random_factors(dim, rank, seed);
    for (double& x : u.values) x = std::abs(x);
    return u;
}

}  // namespace

TEST_CASE("predict on the all-ones matrix returns the rank") {
    FactorMatrix u;
    u.dim = 4;
    u.rank = 2;
    u.values.assign(8, 1.0);
    std::array<uint32_t, 3> triple{0, 2, 3};
    CHECK(predict(u, triple) == 2.0);
    std::array<uint32_t, 2> pair{1, 3};
    CHECK(predict(u, pair) == 2.0);
}

TEST_CASE("predict is exactly invariant under index permutations") {
    auto u = random_factors(6, 4, 17);
    std::array<uint32_t, 3> ids{0, 3, 5};
    double base = predict(u, ids);
    std::array<uint32_t, 3> perm = ids;
    std::sort(perm.begin(), perm.end());
    do {
        CHECK(predict(u, perm) == base);
    } while (std::next_permutation(perm.begin(), perm.end()));
}

TEST_CASE("predict matches the direct summation oracle") {
    auto u = random_factors(4, 3, 99);
    std::vector<std::vector<double>> rows(4, std::vector<double>(3));
    for (uint32_t i = 0; i < 4; ++i) {
        for (uint32_t r = 0; r < 3; ++r) rows[i][r] = u.row(i)[r];
    }
    std::array<uint32_t, 3> ids{0, 1, 2};
    CHECK(predict(u, ids) == doctest::Approx(oracle::predict_ref(rows, {0, 1, 2})).epsilon(1e-12));
    std::array<uint32_t, 2> pair{1, 3};
    CHECK(predict(u, pair) == doctest::Approx(oracle::predict_ref(rows, {1, 3})).epsilon(1e-12));
}

TEST_CASE("batch_loss is zero at a perfect fit and sums squared targets at zero") {
    auto u = random_factors(5, 3, 3);
    Minibatch batch = random_batch(3, 5, 6, 4);
    for (auto& ex : batch.examples) {
        ex.target = predict(u, std::span<const uint32_t>(ex.ids.data(), 3));
    }
    CHECK(batch_loss(u, batch) == 0.0);

    FactorMatrix zeros;
    zeros.dim = 5;
    zeros.rank = 3;
    zeros.values.assign(15, 0.0);
    double expected = 0.0;
    for (const auto& ex : batch.examples) expected += ex.target * ex.target;
    CHECK(batch_loss(zeros, batch) == doctest::Approx(expected).epsilon(1e-12));

    Minibatch empty;
    CHECK_THROWS_AS(batch_loss(u, empty), usage_error);
}

TEST_CASE("batch_loss matches naive per-example recomputation") {
    auto u = random_factors(6, 4, 8);
    auto batch = random_batch(3, 6, 10, 9);
    double naive = 0.0;
    for (const auto& ex : batch.examples) {
        double p = predict(u, std::span<const uint32_t>(ex.ids.data(), 3));
        naive += (ex.target - p) * (ex.target - p);
    }
    CHECK(batch_loss(u, batch) == doctest::Approx(naive).epsilon(1e-12));
}

TEST_CASE("zero residuals produce an empty gradient") {
    auto u = random_factors(5, 2, 21);
    auto batch = random_batch(2, 5, 4, 22);
    for (auto& ex : batch.examples) {
        ex.target = predict(u, std::span<const uint32_t>(ex.ids.data(), 2));
    }
    CHECK(batch_gradient(u, batch).empty());
}

TEST_CASE("order-2 gradient matches the hand-computed 2x2 case") {
    // U = [[1,2],[3,4]], example (0,1) with target 5:
    // prediction 1*3 + 2*4 = 11, residual 6, grad row0 = 12*(3,4), row1 = 12*(1,2)
    FactorMatrix u;
    u.dim = 2;
    u.rank = 2;
    u.values = {1.0, 2.0, 3.0, 4.0};
    Minibatch batch;
    batch.order = 2;
    batch.examples.push_back({{0, 1, 0}, 5.0});
    auto grad = batch_gradient(u, batch);
    REQUIRE(grad.size() == 2);
    CHECK(grad[0] == std::vector<double>{36.0, 48.0});
    CHECK(grad[1] == std::vector<double>{12.0, 24.0});
}

TEST_CASE("analytic gradients match central finite differences") {
    for (int order : {2, 3}) {
        for (uint64_t trial = 0; trial < 10; ++trial) {
            uint32_t dim = 4 + trial % 7;   // up to 10
            uint32_t rank = 1 + trial % 4;  // up to 4
            auto u = random_factors(dim, rank, 100 + trial);
            auto batch = random_batch(order, dim, 3 + trial % 10, 200 + trial);
            auto analytic = batch_gradient(u, batch);
            auto fd = fd_gradient(u, batch, 1e-5);
            CHECK(max_rel_error(analytic, fd) < 1e-5);
        }
    }
}

TEST_CASE("gradients stay correct when examples share rows") {
    auto u = random_factors(4, 3, 55);
    Minibatch batch;
    batch.order = 3;
    batch.examples.push_back({{0, 1, 2}, 0.5});
    batch.examples.push_back({{0, 1, 3}, -0.25});
    batch.examples.push_back({{1, 2, 3}, 1.0});
    batch.examples.push_back({{0, 1, 2}, 0.75});  // repeated tuple
    auto analytic = batch_gradient(u, batch);
    auto fd = fd_gradient(u, batch, 1e-5);
    CHECK(max_rel_error(analytic, fd) < 1e-5);
}

TEST_CASE("adam leaves factors unchanged for an all-zero gradient") {
    auto u = random_factors(3, 2, 77);
    auto before = u.values;
    auto state = AdamState::zeros(3, 2);
    RowGradient grad;
    grad[1] = {0.0, 0.0};
    adam_step(u, grad, state);
    CHECK(u.values == before);
    CHECK(state.t == 1);
}

TEST_CASE("first adam step follows the bias-corrected scalar formula") {
    FactorMatrix u;
    u.dim = 1;
    u.rank = 1;
    u.values = {0.3};
    auto state = AdamState::zeros(1, 1);
    double g = 0.5;
    RowGradient grad;
    grad[0] = {g};
    adam_step(u, grad, state);
    double expected = 0.3 - state.lr * g / (std::abs(g) + state.eps * std::sqrt(1.0 - state.beta2));
    CHECK(u.values[0] == doctest::Approx(expected).epsilon(1e-6));
}

TEST_CASE("sparse adam matches the reference implementation over many steps") {
    const uint32_t dim = 5;
    const uint32_t rank = 3;
    const double lr = 0.01;
    auto u = random_factors(dim, rank, 31);
    std::vector<std::vector<double>> ref_params(dim, std::vector<double>(rank));
    for (uint32_t i = 0; i < dim; ++i) {
        for (uint32_t r = 0; r < rank; ++r) ref_params[i][r] = u.row(i)[r];
    }
    auto state = AdamState::zeros(dim, rank, lr);
    oracle::AdamRef ref(dim, rank, lr);

    Rng rng(32);
    for (int step = 0; step < 25; ++step) {
        RowGradient grad;
        std::map<int, std::vector<double>> ref_grad;
        size_t touched = 1 + rng.uniform_below(dim);
        for (size_t i = 0; i < touched; ++i) {
            uint32_t row = static_cast<uint32_t>(rng.uniform_below(dim));
            if (grad.contains(row)) continue;
            std::vector<double> g(rank);
            for (auto& x : g) x = rng.gaussian();
            grad[row] = g;
            ref_grad[static_cast<int>(row)] = g;
        }
        adam_step(u, grad, state);
        ref.step(ref_params, ref_grad);
        for (uint32_t i = 0; i < dim; ++i) {
            for (uint32_t r = 0; r < rank; ++r) {
                CHECK(u.row(i)[r] == doctest::Approx(ref_params[i][r]).epsilon(1e-12));
            }
        }
    }
    CHECK(state.t == 25);
}

TEST_CASE("non-finite gradients abort the step without touching state") {
    auto u = random_factors(3, 2, 41);
    auto before = u.values;
    auto state = AdamState::zeros(3, 2);
    RowGradient grad;
    grad[0] = {1.0, std::nan("")};
    CHECK_THROWS_AS(adam_step(u, grad, state), numeric_error);
    CHECK(u.values == before);
    CHECK(state.t == 0);
    CHECK(state.m == std::vector<double>(6, 0.0));
}

TEST_CASE("full-batch fit recovers a synthetic symmetric tensor") {
    auto truth = abs_gaussian_factors(10, 3, 7);
    auto tensor = tensor_from_factors(truth, 3);
    const SparseSymTensor* tensors[] = {&tensor};
    auto fitted = fit_full_batch(tensors, 3, 2000, 0.02, 5);
    CHECK(reconstruction_error(fitted, tensor) < 0.05);
    for (double x : fitted.values) CHECK(std::isfinite(x));
}

TEST_CASE("full-batch loss drops below 10% of the initial loss on a dense 20^3 problem") {
    auto truth = abs_gaussian_factors(20, 4, 11);
    auto tensor = tensor_from_factors(truth, 3);
    Minibatch batch;
    batch.order = 3;
    for (const auto& e : tensor.sorted_entries()) batch.examples.push_back({e.ids, e.value});

    Rng init_rng(substream_seed(13, "init"));
    auto u = FactorMatrix::gaussian_init(20, 4, 0.3, init_rng);
    for (double& x : u.values) x = std::abs(x);
    auto state = AdamState::zeros(20, 4, 0.05);
    double initial = batch_loss(u, batch);
    for (int step = 0; step < 500; ++step) {
        adam_step(u, batch_gradient(u, batch), state);
    }
    CHECK(batch_loss(u, batch) < 0.1 * initial);
}

TEST_CASE("training on an empty corpus is a configuration error") {
    std::vector<IndexedSentence> corpus;
    Vocabulary vocab = Vocabulary::from_entries({{"a", 1}, {"b", 1}, {"c", 1}});
    TrainConfig cfg;
    cfg.rank = 2;
    CHECK_THROWS_AS(train_cps(corpus, vocab, cfg), usage_error);

    std::vector<IndexedSentence> empties = {{}, {}};
    CHECK_THROWS_AS(train_cps(empties, vocab, cfg), usage_error);
}

namespace {

std::vector<IndexedSentence> toy_corpus(uint32_t dim, size_t sentences, size_t len, uint64_t seed) {
    Rng rng(seed);
    std::vector<IndexedSentence> corpus;
    for (size_t s = 0; s < sentences; ++s) {
        IndexedSentence sent;
        for (size_t i = 0; i < len; ++i) {
            sent.push_back(static_cast<uint32_t>(rng.uniform_below(dim)));
        }
        corpus.push_back(std::move(sent));
    }
    return corpus;
}

Vocabulary toy_vocab(uint32_t dim) {
    std::vector<std::pair<std::string, uint64_t>> entries;
    for (uint32_t i = 0; i < dim; ++i) entries.emplace_back("w" + std::to_string(i), 1);
    return Vocabulary::from_entries(std::move(entries));
}

}  // namespace

TEST_CASE("cps training is bitwise reproducible per seed") {
    auto corpus = toy_corpus(14, 30, 4, 3);
    auto vocab = toy_vocab(14);
    TrainConfig cfg;
    cfg.rank = 4;
    cfg.shift = 0.0;
    cfg.chunk_sentences = 5;
    cfg.epochs = 2;
    cfg.seed = 12;
    auto u1 = train_cps(corpus, vocab, cfg);
    auto u2 = train_cps(corpus, vocab, cfg);
    CHECK(u1.values == u2.values);
}

TEST_CASE("jcps with no triples reduces to matrix factorization of the pair tensor") {
    // two-token sentences never produce a triple
    std::vector<IndexedSentence> corpus = {{0, 1}, {1, 2}, {0, 2}, {0, 1}, {2, 3}, {1, 3}};
    auto vocab = toy_vocab(4);
    TrainConfig cfg;
    cfg.mode = TrainMode::jcps;
    cfg.rank = 3;
    cfg.shift = 0.0;
    cfg.chunk_sentences = 2;
    cfg.epochs = 3;
    cfg.seed = 77;
    cfg.negative_ratio = 0.5;  // only one pair of the 4-word space is unused

    Trainer trainer(corpus, vocab.size(), cfg);
    REQUIRE(trainer.tensors().size() == 2);
    CHECK(trainer.tensors()[1].nnz() == 0);  // order-3 tensor is empty
    trainer.init();
    trainer.run();

    // replay the loop with only the pair tensor and the same streams
    auto stats = count_cooccurrences(corpus, 4, cfg.window);
    auto m2 = build_ppmi(stats, 2, 0.0);
    Rng init_rng(substream_seed(cfg.seed, "init"));
    auto u = FactorMatrix::gaussian_init(4, cfg.rank, cfg.init_stddev, init_rng);
    auto adam = AdamState::zeros(4, cfg.rank, cfg.lr);
    Rng neg_rng(substream_seed(cfg.seed, "negatives"));
    for (uint32_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        for (size_t begin = 0; begin < corpus.size(); begin += cfg.chunk_sentences) {
            size_t end = std::min(begin + cfg.chunk_sentences, corpus.size());
            std::span<const IndexedSentence> chunk(corpus.data() + begin, end - begin);
            auto batch = add_negatives(positives_from_chunk(chunk, m2, cfg.window), m2,
                                       cfg.negative_ratio, neg_rng);
            if (batch.examples.empty()) continue;
            adam_step(u, batch_gradient(u, batch), adam);
        }
    }
    CHECK(trainer.factors().values == u.values);
}

TEST_CASE("joint loss and gradient equal the sum over the per-order batches") {
    auto u = random_factors(6, 3, 61);
    auto b2 = random_batch(2, 6, 5, 62);
    auto b3 = random_batch(3, 6, 7, 63);

    double joint = batch_loss(u, b2) + batch_loss(u, b3);
    CHECK(joint == batch_loss(u, b2) + batch_loss(u, b3));  // additive by definition

    RowGradient combined;
    accumulate_gradient(combined, u, b2);
    accumulate_gradient(combined, u, b3);

    // finite differences of the summed loss
    std::set<uint32_t> rows;
    for (const auto& [row, g] : combined) rows.insert(row);
    FactorMatrix probe = u;
    double worst = 0.0;
    for (uint32_t row : rows) {
        for (uint32_t r = 0; r < u.rank; ++r) {
            double original = probe.row(row)[r];
            double h = 1e-5;
            probe.row(row)[r] = original + h;
            double up = batch_loss(probe, b2) + batch_loss(probe, b3);
            probe.row(row)[r] = original - h;
            double down = batch_loss(probe, b2) + batch_loss(probe, b3);
            probe.row(row)[r] = original;
            double fd = (up - down) / (2.0 * h);
            double a = combined[row][r];
            worst = std::max(worst, std::abs(a - fd) / std::max({1.0, std::abs(a), std::abs(fd)}));
        }
    }
    CHECK(worst < 1e-5);
}

TEST_CASE("checkpoint save/load round trips exactly") {
    auto corpus = toy_corpus(14, 20, 4, 8);
    TrainConfig cfg;
    cfg.rank = 3;
    cfg.shift = 0.0;
    cfg.chunk_sentences = 4;
    cfg.seed = 5;
    Trainer trainer(corpus, 14, cfg);
    trainer.init();
    trainer.run();
    auto ck = trainer.checkpoint();
    std::string path = "checkpoint_roundtrip.tmp";
    ck.save(path);
    auto loaded = Checkpoint::load(path);
    CHECK(loaded.mode == ck.mode);
    CHECK(loaded.u.values == ck.u.values);
    CHECK(loaded.adam.m == ck.adam.m);
    CHECK(loaded.adam.v == ck.adam.v);
    CHECK(loaded.adam.t == ck.adam.t);
    CHECK(loaded.epochs_done == ck.epochs_done);
    CHECK(loaded.rng_state == ck.rng_state);
    std::remove(path.c_str());

    CHECK_THROWS_AS(Checkpoint::load("no_such_checkpoint.tmp"), data_error);
}

TEST_CASE("resuming a checkpoint equals an uninterrupted run") {
    auto corpus = toy_corpus(15, 25, 4, 14);
    TrainConfig one_epoch;
    one_epoch.rank = 3;
    one_epoch.shift = 0.0;
    one_epoch.chunk_sentences = 5;
    one_epoch.epochs = 1;
    one_epoch.seed = 20;

    TrainConfig two_epochs = one_epoch;
    two_epochs.epochs = 2;

    Trainer first(corpus, 15, one_epoch);
    first.init();
    first.run();
    auto ck = first.checkpoint();
    CHECK(ck.epochs_done == 1);

    Trainer resumed(corpus, 15, two_epochs);
    resumed.resume(ck);
    resumed.run();

    Trainer straight(corpus, 15, two_epochs);
    straight.init();
    straight.run();

    CHECK(resumed.factors().values == straight.factors().values);
    CHECK(resumed.adam().t == straight.adam().t);
}

TEST_CASE("relabeling ids and permuting initial rows permutes the result") {
    // permutation of {0,1,2,3}
    std::vector<uint32_t> perm = {2, 0, 3, 1};
    auto u0 = random_factors(4, 3, 91, 0.1);
    FactorMatrix u0_perm = u0;
    for (uint32_t i = 0; i < 4; ++i) {
        for (uint32_t r = 0; r < 3; ++r) u0_perm.row(perm[i])[r] = u0.row(i)[r];
    }

    auto relabel = [&](const std::vector<IndexedSentence>& corpus) {
        std::vector<IndexedSentence> out;
        for (const auto& s : corpus) {
            IndexedSentence t;
            for (uint32_t id : s) t.push_back(perm[id]);
            out.push_back(std::move(t));
        }
        return out;
    };

    SUBCASE("order-2 path is bitwise equivariant") {
        std::vector<IndexedSentence> corpus = {{0, 1}, {1, 2}, {2, 3}, {0, 2}, {1, 3}, {0, 1}};
        TrainConfig cfg;
        cfg.mode = TrainMode::jcps;  // no triples in two-token sentences
        cfg.rank = 3;
        cfg.shift = 0.0;
        cfg.chunk_sentences = 3;
        cfg.epochs = 2;
        cfg.negative_ratio = 0.0;  // negative draws do not commute with relabeling
        Trainer a(corpus, 4, cfg);
        a.init_with(u0);
        a.run();
        auto relabeled = relabel(corpus);
        Trainer b(relabeled, 4, cfg);
        b.init_with(u0_perm);
        b.run();
        for (uint32_t i = 0; i < 4; ++i) {
            for (uint32_t r = 0; r < 3; ++r) {
                CHECK(b.factors().row(perm[i])[r] == a.factors().row(i)[r]);
            }
        }
    }

    SUBCASE("order-3 path is equivariant up to reassociated products") {
        std::vector<IndexedSentence> corpus = {{0, 1, 2}, {1, 2, 3}, {0, 2, 3}, {0, 1, 3},
                                               {0, 1, 2}, {2, 3, 1}};
        TrainConfig cfg;
        cfg.rank = 3;
        cfg.shift = 0.0;
        cfg.chunk_sentences = 2;
        cfg.epochs = 2;
        cfg.negative_ratio = 0.0;
        Trainer a(corpus, 4, cfg);
        a.init_with(u0);
        a.run();
        auto relabeled = relabel(corpus);
        Trainer b(relabeled, 4, cfg);
        b.init_with(u0_perm);
        b.run();
        for (uint32_t i = 0; i < 4; ++i) {
            for (uint32_t r = 0; r < 3; ++r) {
                CHECK(b.factors().row(perm[i])[r] ==
                      doctest::Approx(a.factors().row(i)[r]).epsilon(1e-9));
            }
        }
    }
}

TEST_CASE("train wrappers enforce their mode") {
    auto corpus = toy_corpus(5, 10, 4, 2);
    auto vocab = toy_vocab(5);
    TrainConfig cfg;
    cfg.mode = TrainMode::jcps;
    cfg.rank = 2;
    CHECK_THROWS_AS(train_cps(corpus, vocab, cfg), usage_error);
    cfg.mode = TrainMode::cps;
    CHECK_THROWS_AS(train_jcps(corpus, vocab, cfg), usage_error);
}

TEST_CASE("invalid configurations are rejected") {
    auto corpus = toy_corpus(5, 10, 4, 2);
    TrainConfig cfg;
    cfg.rank = 0;
    CHECK_THROWS_AS(Trainer(corpus, 5, cfg), usage_error);
    cfg.rank = 2;
    cfg.epochs = 0;
    CHECK_THROWS_AS(Trainer(corpus, 5, cfg), usage_error);
    cfg.epochs = 1;
    cfg.shift = -1.0;
    CHECK_THROWS_AS(Trainer(corpus, 5, cfg), usage_error);
}
