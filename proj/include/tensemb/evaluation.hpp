#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tensemb/embedding.hpp"

namespace tensemb {

// One outlier-detection instance: n related words plus one unrelated word.
struct OutlierCase {
    std::vector<std::string> words;  // n+1 distinct words
    uint32_t outlier_index = 0;
};

struct EvalReport {
    uint64_t cases_total = 0;
    uint64_t cases_skipped = 0;  // out-of-vocabulary cases
    double accuracy = 0.0;       // fraction of used cases with rank n
    double opp = 0.0;            // mean rank/n over used cases, in [0,1]
};

struct SimPair {
    std::string w1;
    std::string w2;
    double human_score;
};

enum class OutlierMode { od2, od3 };

// Mean pairwise cosine over L minus w. Vectors are unit-normalized first.
double compactness2(const Embedding& emb, std::span<const std::string> words, std::string_view w);

// Sum over unordered 3-subsets of L minus w of 1/max(eps, mean distance to the
// subset centroid), eps = 1e-9; unit-normalized vectors throughout.
double compactness3(const Embedding& emb, std::span<const std::string> words, std::string_view w);

inline constexpr double kCentroidDistanceFloor = 1e-9;

struct OutlierResult {
    uint32_t predicted_index;  // argmax compactness, ties to the lowest position
    uint32_t outlier_rank;     // 0-based rank of the true outlier, ascending by
                               // compactness; rank n means detected
};

// nullopt when any case word is out of vocabulary (the case is skipped).
std::optional<OutlierResult> detect_outlier(const Embedding& emb, const OutlierCase& c,
                                            OutlierMode mode);

// Throws data_error when every case was skipped.
EvalReport run_outlier_eval(const Embedding& emb, std::span<const OutlierCase> cases,
                            OutlierMode mode);

struct SpearmanResult {
    double rho;
    uint64_t used;
    uint64_t skipped;
};

// Spearman rank correlation between cosine similarities and human scores,
// average ranks for ties. Pairs with OOV words are skipped and counted;
// fewer than 2 usable pairs raises data_error.
SpearmanResult spearman(const Embedding& emb, std::span<const SimPair> pairs);

// Blank-line separated blocks of words, one per line, with the true outlier
// prefixed "OUTLIER:".
std::vector<OutlierCase> load_outlier_cases(const std::string& path);

// One "w1<TAB>w2<TAB>score" line per pair.
std::vector<SimPair> load_sim_pairs(const std::string& path);

}  // namespace tensemb
