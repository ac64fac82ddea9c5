#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "tensemb/corpus.hpp"

namespace tensemb {

// Canonical index tuples are packed into one 64-bit key, 21 bits per index
// (high to low), which keeps numeric key order equal to lexicographic tuple
// order. Caps the vocabulary at 2^21 ids.
namespace keypack {

inline constexpr int kIndexBits = 21;
inline constexpr uint32_t kMaxDim = 1u << kIndexBits;

inline uint64_t pack2(uint32_t i, uint32_t j) {
    return (static_cast<uint64_t>(i) << kIndexBits) | j;
}

inline uint64_t pack3(uint32_t i, uint32_t j, uint32_t k) {
    return (static_cast<uint64_t>(i) << (2 * kIndexBits)) |
           (static_cast<uint64_t>(j) << kIndexBits) | k;
}

inline std::array<uint32_t, 3> unpack(uint64_t key, int order) {
    constexpr uint64_t mask = kMaxDim - 1;
    if (order == 2) {
        return {static_cast<uint32_t>((key >> kIndexBits) & mask),
                static_cast<uint32_t>(key & mask), 0};
    }
    return {static_cast<uint32_t>((key >> (2 * kIndexBits)) & mask),
            static_cast<uint32_t>((key >> kIndexBits) & mask), static_cast<uint32_t>(key & mask)};
}

}  // namespace keypack

// Raw co-occurrence counts. Pair/triple keys are canonical (strictly
// increasing ids), so tuples with repeated word types are never stored.
struct CoocStats {
    uint32_t dim = 0;
    std::vector<uint64_t> unigram;                  // id -> raw token count
    std::unordered_map<uint64_t, uint64_t> pair;    // pack2(i<j) -> window count
    std::unordered_map<uint64_t, uint64_t> triple;  // pack3(i<j<k) -> window count
    uint64_t total_tokens = 0;
    uint64_t total_pairs = 0;
    uint64_t total_triples = 0;

    // Shards counted over disjoint sentence sets merge by addition.
    void merge(const CoocStats& other);
};

// Slides a window of the given length one position at a time; sentences
// shorter than the window form a single window of their own length. Within a
// window each unordered pair/triple of distinct word types counts once.
CoocStats count_cooccurrences(std::span<const IndexedSentence> sentences, uint32_t dim,
                              uint32_t window);

// log p(i,j) / (p(i) p(j)); -inf when the pair was never counted.
double pmi2(const CoocStats& stats, uint32_t i, uint32_t j);

// log p(i,j,k) / (p(i) p(j) p(k)); -inf when the triple was never counted.
double pmi3(const CoocStats& stats, uint32_t i, uint32_t j, uint32_t k);

// Sparse supersymmetric nonnegative tensor of order 2 or 3. Only canonical
// tuples with strictly positive values are stored; lookups at any index
// permutation resolve to the canonical entry, everything else is 0.
class SparseSymTensor {
  public:
    struct Entry {
        std::array<uint32_t, 3> ids;  // ids[order..2] are zero-filled
        double value;
    };

    SparseSymTensor(int order, uint32_t dim);

    int order() const { return order_; }
    uint32_t dim() const { return dim_; }
    size_t nnz() const { return entries_.size(); }

    // ids must be canonical (strictly increasing); value must be > 0.
    void set(std::span<const uint32_t> ids, double value);

    // Any permutation; 0 for absent tuples and tuples with repeated ids.
    double at(std::span<const uint32_t> ids) const;

    bool contains_key(uint64_t key) const { return entries_.contains(key); }
    double at_key(uint64_t key) const;

    // Entries in ascending canonical-tuple order.
    std::vector<Entry> sorted_entries() const;

    const std::unordered_map<uint64_t, double>& raw() const { return entries_; }

    // Text format: header "order dim nnz", then one canonical entry per line,
    // ids ascending, values with 17 significant digits.
    void save(const std::string& path) const;
    static SparseSymTensor load(const std::string& path);

  private:
    int order_;
    uint32_t dim_;
    std::unordered_map<uint64_t, double> entries_;
};

// Entries hold max(PMI - shift, 0) for every counted tuple where that value
// is strictly positive. Requires counted totals for the requested order to
// exist only if any entries do; an orderless corpus yields an empty tensor.
SparseSymTensor build_ppmi(const CoocStats& stats, int order, double shift);

}  // namespace tensemb
