#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "tensemb/cooccurrence.hpp"
#include "tensemb/rng.hpp"

namespace tensemb {

struct TrainingExample {
    std::array<uint32_t, 3> ids;  // canonical; ids[order..2] zero-filled
    double target;                // stored tensor value, or 0 for negatives
};

struct Minibatch {
    int order = 3;
    uint64_t step = 0;
    std::vector<TrainingExample> examples;
};

// One example per distinct canonical tuple occurring in the chunk's windows
// that has a nonzero tensor value, in first-seen order. Window semantics match
// count_cooccurrences.
std::vector<TrainingExample> positives_from_chunk(std::span<const IndexedSentence> chunk,
                                                  const SparseSymTensor& tensor, uint32_t window);

// Appends ceil(ratio * |positives|) zero-target examples drawn uniformly over
// distinct-id canonical tuples, rejecting tuples present in the tensor or
// already drawn for this batch. Total draw budget is 100 per needed sample;
// exceeding it raises data_error.
Minibatch add_negatives(std::vector<TrainingExample> positives, const SparseSymTensor& tensor,
                        double ratio, Rng& rng);

}  // namespace tensemb
