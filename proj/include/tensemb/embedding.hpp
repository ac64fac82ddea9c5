#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "tensemb/corpus.hpp"
#include "tensemb/factorization.hpp"

namespace tensemb {

// Finished word vectors. Files hold the raw (unnormalized) factors; callers
// normalize before evaluation.
struct Embedding {
    Vocabulary vocab;
    uint32_t dim = 0;
    std::vector<double> vectors;  // row-major |V| x dim
    bool normalized = false;

    std::span<const double> row(uint32_t id) const {
        return {vectors.data() + static_cast<size_t>(id) * dim, dim};
    }
    // Throws data_error naming the word when it is out of vocabulary.
    uint32_t require_id(std::string_view word) const;
};

Embedding make_embedding(Vocabulary vocab, const FactorMatrix& factors);

// Each row divided by its L2 norm. A zero row raises numeric_error naming the
// word. Idempotent up to rounding.
Embedding normalize(Embedding emb);

double cosine(const Embedding& emb, std::string_view w1, std::string_view w2);

struct Neighbor {
    std::string word;
    double similarity;
};

// Top-k by cosine against the query, descending, ties broken by ascending id.
// Excluded words are omitted; k beyond the available words returns them all.
std::vector<Neighbor> nearest_neighbors(const Embedding& emb, std::span<const double> query,
                                        size_t k, const std::unordered_set<std::string>& exclude);

enum class ComposeMode { multiplicative, additive };

// Elementwise product or sum. With normalize_inputs the two vectors are
// unit-normalized first (the evaluation convention); the raw path preserves
// the identity <u_i * u_j, u_k> = predict((i,j,k)). The result is not
// renormalized; nearest_neighbors normalizes queries itself.
std::vector<double> compose(const Embedding& emb, std::string_view w1, std::string_view w2,
                            ComposeMode mode, bool normalize_inputs = true);

// I.I.D. Gaussian entries, mean 0, variance 1/2; the informationless baseline.
Embedding random_embedding(Vocabulary vocab, uint32_t dim, uint64_t seed);

// Text format: header "|V| dim", then one "word v1 .. vdim" line per id with
// 9 significant digits. save(load(path)) reproduces the file byte for byte.
void save_embedding(const Embedding& emb, const std::string& path);
Embedding load_embedding(const std::string& path);

}  // namespace tensemb
