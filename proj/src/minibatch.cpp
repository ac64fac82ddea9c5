#include "tensemb/minibatch.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "tensemb/error.hpp"

namespace tensemb {

std::vector<TrainingExample> positives_from_chunk(std::span<const IndexedSentence> chunk,
                                                  const SparseSymTensor& tensor, uint32_t window) {
    if (window < 2) throw usage_error("window must be >= 2");
    const int order = tensor.order();
    std::vector<TrainingExample> out;
    std::unordered_set<uint64_t> seen;
    std::vector<uint32_t> types;

    auto consider = [&](uint64_t key, const std::array<uint32_t, 3>& ids) {
        if (!seen.insert(key).second) return;
        double value = tensor.at_key(key);
        if (value != 0.0) out.push_back({ids, value});
    };

    for (const auto& sentence : chunk) {
        size_t n = sentence.size();
        if (n < 2) continue;
        size_t wlen = std::min<size_t>(window, n);
        size_t nwin = n <= window ? 1 : n - window + 1;
        for (size_t start = 0; start < nwin; ++start) {
            types.assign(sentence.begin() + start, sentence.begin() + start + wlen);
            std::sort(types.begin(), types.end());
            types.erase(std::unique(types.begin(), types.end()), types.end());
            size_t m = types.size();
            if (order == 2) {
                for (size_t a = 0; a + 1 < m; ++a) {
                    for (size_t b = a + 1; b < m; ++b) {
                        consider(keypack::pack2(types[a], types[b]), {types[a], types[b], 0});
                    }
                }
            } else {
                for (size_t a = 0; a + 2 < m; ++a) {
                    for (size_t b = a + 1; b + 1 < m; ++b) {
                        for (size_t c = b + 1; c < m; ++c) {
                            consider(keypack::pack3(types[a], types[b], types[c]),
                                     {types[a], types[b], types[c]});
                        }
                    }
                }
            }
        }
    }
    return out;
}

Minibatch add_negatives(std::vector<TrainingExample> positives, const SparseSymTensor& tensor,
                        double ratio, Rng& rng) {
    if (ratio < 0.0) throw usage_error("negative ratio must be >= 0");
    const int order = tensor.order();
    const uint64_t dim = tensor.dim();
    if (dim < static_cast<uint64_t>(order)) throw usage_error("dim must be >= tensor order");

    Minibatch batch;
    batch.order = order;
    batch.examples = std::move(positives);

    size_t needed = static_cast<size_t>(std::ceil(ratio * static_cast<double>(batch.examples.size())));
    if (needed == 0) return batch;

    const size_t budget = 100 * needed;
    size_t attempts = 0;
    size_t got = 0;
    std::unordered_set<uint64_t> drawn;
    std::array<uint32_t, 3> ids{};
    while (got < needed) {
        if (attempts >= budget) {
            throw data_error("negative sampling exhausted after " + std::to_string(attempts) +
                             " draws (" + std::to_string(got) + "/" + std::to_string(needed) +
                             " found); the tensor is too dense for the requested ratio");
        }
        ++attempts;
        for (int a = 0; a < order; ++a) ids[a] = static_cast<uint32_t>(rng.uniform_below(dim));
        std::sort(ids.begin(), ids.begin() + order);
        bool distinct = true;
        for (int a = 0; a + 1 < order; ++a) {
            if (ids[a] == ids[a + 1]) distinct = false;
        }
        if (!distinct) continue;
        uint64_t key =
            order == 2 ? keypack::pack2(ids[0], ids[1]) : keypack::pack3(ids[0], ids[1], ids[2]);
        if (tensor.contains_key(key)) continue;
        if (!drawn.insert(key).second) continue;
        std::array<uint32_t, 3> stored{ids[0], ids[1], order == 3 ? ids[2] : 0};
        batch.examples.push_back({stored, 0.0});
        ++got;
    }
    return batch;
}

}  // namespace tensemb
