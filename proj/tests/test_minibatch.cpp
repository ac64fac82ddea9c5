#include <doctest.h>

#include <set>

#include "oracles.hpp"
#include "tensemb/cooccurrence.hpp"
#include "tensemb/error.hpp"
#include "tensemb/minibatch.hpp"

using namespace tensemb;

namespace {

SparseSymTensor toy_tensor3() {
    SparseSymTensor t(3, 6);
    std::array<uint32_t, 3> a{0, 1, 2};
    std::array<uint32_t, 3> b{1, 2, 3};
    t.set(a, 1.5);
    t.set(b, 0.25);
    return t;
}

}  // namespace

TEST_CASE("chunks with no supported tuples produce no positives") {
    auto tensor = toy_tensor3();
    std::vector<IndexedSentence> chunk = {{3, 4, 5}, {0, 4}};
    CHECK(positives_from_chunk(chunk, tensor, 3).empty());
}

TEST_CASE("a single in-support window produces one positive") {
    auto tensor = toy_tensor3();
    std::vector<IndexedSentence> chunk = {{0, 1, 2}};
    auto positives = positives_from_chunk(chunk, tensor, 3);
    REQUIRE(positives.size() == 1);
    CHECK(positives[0].ids == std::array<uint32_t, 3>{0, 1, 2});
    CHECK(positives[0].target == 1.5);
}

TEST_CASE("chunk positives equal the enumeration oracle intersected with support") {
    std::vector<IndexedSentence> corpus = {
        {0, 1, 2, 3, 4}, {1, 2, 3}, {4, 5, 0, 1}, {2}, {}, {5, 5, 1, 2}, {3, 4, 5, 1, 2, 0},
        {0, 2, 4}, {1, 3, 5}, {0, 1, 2}};
    const uint32_t window = 4;
    auto stats = count_cooccurrences(corpus, 6, window);
    auto tensor = build_ppmi(stats, 3, 0.1);

    auto positives = positives_from_chunk(corpus, tensor, window);
    std::set<std::tuple<int, int, int>> got;
    for (const auto& p : positives) {
        CHECK(p.target == tensor.at(std::span<const uint32_t>(p.ids.data(), 3)));
        got.insert({static_cast<int>(p.ids[0]), static_cast<int>(p.ids[1]),
                    static_cast<int>(p.ids[2])});
    }
    CHECK(got.size() == positives.size());  // tuples are deduplicated

    std::vector<std::vector<uint32_t>> plain(corpus.begin(), corpus.end());
    std::set<std::tuple<int, int, int>> expected;
    for (const auto& t : oracle::window_triples(plain, window)) {
        auto [i, j, k] = t;
        std::array<uint32_t, 3> ids{static_cast<uint32_t>(i), static_cast<uint32_t>(j),
                                    static_cast<uint32_t>(k)};
        if (tensor.at(ids) != 0.0) expected.insert(t);
    }
    CHECK(got == expected);
}

TEST_CASE("epoch chunk coverage equals the tensor support") {
    std::vector<IndexedSentence> corpus = {
        {0, 1, 2, 3}, {2, 3, 4, 5}, {0, 5, 1}, {4, 1, 0, 2, 3}, {5, 2, 0}};
    const uint32_t window = 3;
    auto stats = count_cooccurrences(corpus, 6, window);
    auto tensor = build_ppmi(stats, 3, 0.0);

    std::set<uint64_t> covered;
    const size_t chunk_size = 2;
    for (size_t begin = 0; begin < corpus.size(); begin += chunk_size) {
        size_t end = std::min(begin + chunk_size, corpus.size());
        std::span<const IndexedSentence> chunk(corpus.data() + begin, end - begin);
        for (const auto& p : positives_from_chunk(chunk, tensor, window)) {
            covered.insert(keypack::pack3(p.ids[0], p.ids[1], p.ids[2]));
        }
    }
    std::set<uint64_t> support;
    for (const auto& [key, value] : tensor.raw()) support.insert(key);
    CHECK(covered == support);
}

TEST_CASE("ratio zero adds no negatives") {
    auto tensor = toy_tensor3();
    std::vector<IndexedSentence> chunk = {{0, 1, 2}};
    auto positives = positives_from_chunk(chunk, tensor, 3);
    Rng rng(5);
    auto batch = add_negatives(std::move(positives), tensor, 0.0, rng);
    CHECK(batch.order == 3);
    CHECK(batch.examples.size() == 1);
}

TEST_CASE("negatives have zero tensor value and match the requested count") {
    SparseSymTensor tensor(3, 12);
    std::vector<TrainingExample> positives;
    for (uint32_t i = 0; i < 8; ++i) {
        std::array<uint32_t, 3> ids{i, i + 1, i + 2};
        tensor.set(ids, 1.0 + i);
        positives.push_back({ids, 1.0 + i});
    }
    Rng rng(99);
    auto batch = add_negatives(std::move(positives), tensor, 1.0, rng);
    REQUIRE(batch.examples.size() == 16);
    std::set<uint64_t> seen_negative_keys;
    for (size_t e = 8; e < batch.examples.size(); ++e) {
        const auto& ex = batch.examples[e];
        CHECK(ex.target == 0.0);
        CHECK(ex.ids[0] < ex.ids[1]);
        CHECK(ex.ids[1] < ex.ids[2]);
        CHECK(tensor.at(std::span<const uint32_t>(ex.ids.data(), 3)) == 0.0);
        CHECK(seen_negative_keys.insert(keypack::pack3(ex.ids[0], ex.ids[1], ex.ids[2])).second);
    }
}

TEST_CASE("negative sampling is deterministic per seed") {
    auto tensor = toy_tensor3();
    std::vector<IndexedSentence> chunk = {{0, 1, 2}, {1, 2, 3}};
    auto make = [&]() {
        Rng rng(1234);
        return add_negatives(positives_from_chunk(chunk, tensor, 3), tensor, 3.0, rng);
    };
    auto b1 = make();
    auto b2 = make();
    REQUIRE(b1.examples.size() == b2.examples.size());
    for (size_t i = 0; i < b1.examples.size(); ++i) {
        CHECK(b1.examples[i].ids == b2.examples[i].ids);
        CHECK(b1.examples[i].target == b2.examples[i].target);
    }
}

TEST_CASE("negative sampling fails loudly when the tensor is saturated") {
    // dim 3, order 2: all 3 canonical pairs are present, so no negatives exist
    SparseSymTensor tensor(2, 3);
    std::vector<TrainingExample> positives;
    for (uint32_t i = 0; i < 3; ++i) {
        for (uint32_t j = i + 1; j < 3; ++j) {
            std::array<uint32_t, 2> ids{i, j};
            tensor.set(ids, 1.0);
            positives.push_back({{i, j, 0}, 1.0});
        }
    }
    Rng rng(42);
    CHECK_THROWS_AS(add_negatives(std::move(positives), tensor, 1.0, rng), data_error);
}
