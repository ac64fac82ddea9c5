#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "tensemb/cooccurrence.hpp"
#include "tensemb/corpus.hpp"
#include "tensemb/minibatch.hpp"
#include "tensemb/rng.hpp"

namespace tensemb {

enum class TrainMode { cps, jcps };

// The single factor matrix shared by every tensor mode; row i is the word
// vector for id i while training.
struct FactorMatrix {
    uint32_t dim = 0;
    uint32_t rank = 0;
    std::vector<double> values;  // row-major dim x rank

    double* row(uint32_t i) { return values.data() + static_cast<size_t>(i) * rank; }
    const double* row(uint32_t i) const { return values.data() + static_cast<size_t>(i) * rank; }

    static FactorMatrix gaussian_init(uint32_t dim, uint32_t rank, double stddev, Rng& rng);
};

struct AdamState {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    uint64_t t = 0;
    std::vector<double> m;  // first moments, row-major dim x rank
    std::vector<double> v;  // second moments, entrywise >= 0

    static AdamState zeros(uint32_t dim, uint32_t rank, double lr = 1e-3, double beta1 = 0.9,
                           double beta2 = 0.999, double eps = 1e-8);
};

// Sparse per-row gradient; ordered so that update application is deterministic.
using RowGradient = std::map<uint32_t, std::vector<double>>;

// sum_r prod over the tuple of u[id][r]. Indices are sorted internally, so the
// result is invariant under any permutation of the tuple, bit for bit.
double predict(const FactorMatrix& u, std::span<const uint32_t> ids);

// Sum of squared residuals (target - predict)^2 over the batch.
double batch_loss(const FactorMatrix& u, const Minibatch& batch);

RowGradient batch_gradient(const FactorMatrix& u, const Minibatch& batch);

// Adds weight * d(batch loss)/dU into grad; rows with zero residual everywhere
// are never materialized.
void accumulate_gradient(RowGradient& grad, const FactorMatrix& u, const Minibatch& batch,
                         double weight = 1.0);

// Bias-corrected Adam applied to the touched rows only; t is global and
// increments once per call. Non-finite gradient entries abort the step with
// numeric_error before any state changes.
void adam_step(FactorMatrix& u, const RowGradient& grad, AdamState& state);

struct TrainConfig {
    TrainMode mode = TrainMode::cps;
    uint32_t rank = 300;
    double shift = 3.0;
    uint32_t window = 5;
    uint32_t chunk_sentences = 1000;
    double negative_ratio = 1.0;
    uint32_t epochs = 1;
    uint64_t seed = 1;
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double init_stddev = 0.1;
    double joint_pair_weight = 1.0;  // weight on the order-2 loss under jcps

    static double default_shift(TrainMode mode) { return mode == TrainMode::cps ? 3.0 : 0.0; }
};

// Complete optimizer state; loading one and continuing equals an
// uninterrupted run byte for byte.
struct Checkpoint {
    TrainMode mode = TrainMode::cps;
    FactorMatrix u;
    AdamState adam;
    uint32_t epochs_done = 0;
    std::string rng_state;  // serialized negative-sampling stream

    void save(const std::string& path) const;
    static Checkpoint load(const std::string& path);
};

using ProgressFn =
    std::function<void(uint32_t epoch, uint64_t chunk, size_t examples, double loss)>;

// Streaming trainer: builds the shifted-PPMI tensor(s) once, then walks the
// corpus in consecutive sentence chunks, one Adam step per chunk. jcps sums
// the order-2 and order-3 chunk losses into a single step.
class Trainer {
  public:
    // The corpus must outlive the trainer.
    Trainer(const std::vector<IndexedSentence>& corpus, uint32_t dim, const TrainConfig& config);
    Trainer(std::vector<IndexedSentence>&& corpus, uint32_t dim, const TrainConfig& config) =
        delete;

    void init();                        // fresh factors from the run seed
    void init_with(FactorMatrix u0);    // explicit initial factors
    void resume(const Checkpoint& ck);  // continue a checkpointed run

    // Runs epochs [epochs_done, config.epochs). The loss passed to progress is
    // the pre-step chunk loss and is only computed when a callback is set.
    void run(const ProgressFn& progress = {});

    const FactorMatrix& factors() const { return u_; }
    const AdamState& adam() const { return adam_; }
    uint32_t epochs_done() const { return epochs_done_; }
    const std::vector<SparseSymTensor>& tensors() const { return tensors_; }

    Checkpoint checkpoint() const;

  private:
    const std::vector<IndexedSentence>* corpus_;
    TrainConfig config_;
    uint32_t dim_;
    std::vector<SparseSymTensor> tensors_;  // [M3] for cps, [M2, M3] for jcps
    FactorMatrix u_;
    AdamState adam_;
    Rng neg_rng_;
    uint32_t epochs_done_ = 0;
};

FactorMatrix train_cps(const std::vector<IndexedSentence>& corpus, const Vocabulary& vocab,
                       const TrainConfig& config);
FactorMatrix train_jcps(const std::vector<IndexedSentence>& corpus, const Vocabulary& vocab,
                        const TrainConfig& config);

// Full-batch joint fit over every stored entry of the given tensors (no
// negative samples); used for small dense problems. Initial factors are
// half-normal (|N(0, stddev)|): the stored tensors are nonnegative, and a
// mean-zero init tends to strand odd-order fits in sign-frustrated minima.
FactorMatrix fit_full_batch(std::span<const SparseSymTensor* const> tensors, uint32_t rank,
                            uint32_t steps, double lr, uint64_t seed, double init_stddev = 0.3,
                            bool nonnegative_init = true);

// Relative Frobenius error over the stored entries of the tensor.
double reconstruction_error(const FactorMatrix& u, const SparseSymTensor& tensor);

}  // namespace tensemb
