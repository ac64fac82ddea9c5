#include "tensemb/factorization.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "tensemb/error.hpp"

namespace tensemb {

namespace {

constexpr char kCheckpointMagic[8] = {'T', 'N', 'S', 'E', 'M', 'B', '0', '1'};

void write_bytes(std::ostream& os, const void* p, size_t n) {
    os.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

void read_bytes(std::istream& is, void* p, size_t n) {
    is.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (!is) throw data_error("truncated checkpoint file");
}

template <typename T>
void write_pod(std::ostream& os, const T& v) {
    write_bytes(os, &v, sizeof(T));
}

template <typename T>
T read_pod(std::istream& is) {
    T v;
    read_bytes(is, &v, sizeof(T));
    return v;
}

void validate_config(const TrainConfig& c) {
    if (c.rank < 1) throw usage_error("rank must be >= 1");
    if (c.epochs < 1) throw usage_error("epochs must be >= 1");
    if (c.shift < 0.0) throw usage_error("shift must be >= 0");
    if (c.window < 2) throw usage_error("window must be >= 2");
    if (c.chunk_sentences < 1) throw usage_error("chunk size must be >= 1");
    if (c.negative_ratio < 0.0) throw usage_error("negative ratio must be >= 0");
    if (!(c.lr > 0.0)) throw usage_error("learning rate must be > 0");
}

}  // namespace

FactorMatrix FactorMatrix::gaussian_init(uint32_t dim, uint32_t rank, double stddev, Rng& rng) {
    FactorMatrix u;
    u.dim = dim;
    u.rank = rank;
    u.values.resize(static_cast<size_t>(dim) * rank);
    for (double& x : u.values) x = stddev * rng.gaussian();
    return u;
}

AdamState AdamState::zeros(uint32_t dim, uint32_t rank, double lr, double beta1, double beta2,
                           double eps) {
    AdamState s;
    s.lr = lr;
    s.beta1 = beta1;
    s.beta2 = beta2;
    s.eps = eps;
    s.m.assign(static_cast<size_t>(dim) * rank, 0.0);
    s.v.assign(static_cast<size_t>(dim) * rank, 0.0);
    return s;
}

double predict(const FactorMatrix& u, std::span<const uint32_t> ids) {
    std::array<uint32_t, 3> t{0, 0, 0};
    std::copy(ids.begin(), ids.end(), t.begin());
    std::sort(t.begin(), t.begin() + static_cast<int>(ids.size()));
    const double* a = u.row(t[0]);
    const double* b = u.row(t[1]);
    double sum = 0.0;
    if (ids.size() == 2) {
        for (uint32_t r = 0; r < u.rank; ++r) sum += a[r] * b[r];
    } else {
        const double* c = u.row(t[2]);
        for (uint32_t r = 0; r < u.rank; ++r) sum += a[r] * b[r] * c[r];
    }
    return sum;
}

double batch_loss(const FactorMatrix& u, const Minibatch& batch) {
    if (batch.examples.empty()) throw usage_error("batch must be nonempty");
    double loss = 0.0;
    for (const auto& ex : batch.examples) {
        double e = ex.target -
                   predict(u, std::span<const uint32_t>(ex.ids.data(), batch.order));
        loss += e * e;
    }
    return loss;
}

void accumulate_gradient(RowGradient& grad, const FactorMatrix& u, const Minibatch& batch,
                         double weight) {
    if (batch.examples.empty()) throw usage_error("batch must be nonempty");
    const uint32_t rank = u.rank;
    auto row_of = [&](uint32_t id) -> std::vector<double>& {
        auto [it, inserted] = grad.try_emplace(id);
        if (inserted) it->second.assign(rank, 0.0);
        return it->second;
    };
    for (const auto& ex : batch.examples) {
        double e = predict(u, std::span<const uint32_t>(ex.ids.data(), batch.order)) - ex.target;
        if (e == 0.0) continue;
        double scale = 2.0 * weight * e;
        if (batch.order == 2) {
            const double* ui = u.row(ex.ids[0]);
            const double* uj = u.row(ex.ids[1]);
            auto& gi = row_of(ex.ids[0]);
            auto& gj = row_of(ex.ids[1]);
            for (uint32_t r = 0; r < rank; ++r) {
                gi[r] += scale * uj[r];
                gj[r] += scale * ui[r];
            }
        } else {
            const double* ui = u.row(ex.ids[0]);
            const double* uj = u.row(ex.ids[1]);
            const double* uk = u.row(ex.ids[2]);
            auto& gi = row_of(ex.ids[0]);
            auto& gj = row_of(ex.ids[1]);
            auto& gk = row_of(ex.ids[2]);
            for (uint32_t r = 0; r < rank; ++r) {
                gi[r] += scale * uj[r] * uk[r];
                gj[r] += scale * ui[r] * uk[r];
                gk[r] += scale * ui[r] * uj[r];
            }
        }
    }
}

RowGradient batch_gradient(const FactorMatrix& u, const Minibatch& batch) {
    RowGradient grad;
    accumulate_gradient(grad, u, batch, 1.0);
    return grad;
}

void adam_step(FactorMatrix& u, const RowGradient& grad, AdamState& state) {
    const uint32_t rank = u.rank;
    if (state.m.size() != u.values.size() || state.v.size() != u.values.size()) {
        throw usage_error("optimizer state does not match factor matrix");
    }
    for (const auto& [id, g] : grad) {
        if (id >= u.dim || g.size() != rank) throw usage_error("gradient shape mismatch");
        for (uint32_t r = 0; r < rank; ++r) {
            if (!std::isfinite(g[r])) {
                throw numeric_error("non-finite gradient for row " + std::to_string(id) +
                                    "; step aborted");
            }
        }
    }
    state.t += 1;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
    for (const auto& [id, g] : grad) {
        size_t base = static_cast<size_t>(id) * rank;
        double* m = state.m.data() + base;
        double* v = state.v.data() + base;
        double* w = u.values.data() + base;
        for (uint32_t r = 0; r < rank; ++r) {
            m[r] = state.beta1 * m[r] + (1.0 - state.beta1) * g[r];
            v[r] = state.beta2 * v[r] + (1.0 - state.beta2) * g[r] * g[r];
            double mhat = m[r] / bc1;
            double vhat = v[r] / bc2;
            w[r] -= state.lr * mhat / (std::sqrt(vhat) + state.eps);
        }
    }
}

Trainer::Trainer(const std::vector<IndexedSentence>& corpus, uint32_t dim,
                 const TrainConfig& config)
    : corpus_(&corpus),
      config_(config),
      dim_(dim),
      neg_rng_(substream_seed(config.seed, "negatives")) {
    validate_config(config_);
    if (corpus.empty()) throw usage_error("corpus is empty");
    CoocStats stats = count_cooccurrences(corpus, dim, config_.window);
    if (stats.total_tokens == 0) throw usage_error("corpus is empty");
    if (config_.mode == TrainMode::jcps) {
        tensors_.push_back(build_ppmi(stats, 2, config_.shift));
    }
    tensors_.push_back(build_ppmi(stats, 3, config_.shift));
}

void Trainer::init() {
    Rng init_rng(substream_seed(config_.seed, "init"));
    u_ = FactorMatrix::gaussian_init(dim_, config_.rank, config_.init_stddev, init_rng);
    adam_ = AdamState::zeros(dim_, config_.rank, config_.lr, config_.beta1, config_.beta2,
                             config_.eps);
    epochs_done_ = 0;
}

void Trainer::init_with(FactorMatrix u0) {
    if (u0.dim != dim_ || u0.rank != config_.rank) {
        throw usage_error("initial factors do not match configured shape");
    }
    u_ = std::move(u0);
    adam_ = AdamState::zeros(dim_, config_.rank, config_.lr, config_.beta1, config_.beta2,
                             config_.eps);
    epochs_done_ = 0;
}

void Trainer::resume(const Checkpoint& ck) {
    if (ck.mode != config_.mode) throw data_error("checkpoint mode does not match configuration");
    if (ck.u.dim != dim_ || ck.u.rank != config_.rank) {
        throw data_error("checkpoint shape does not match configuration");
    }
    u_ = ck.u;
    adam_ = ck.adam;
    epochs_done_ = ck.epochs_done;
    std::istringstream is(ck.rng_state);
    neg_rng_ = Rng::restore(is);
}

void Trainer::run(const ProgressFn& progress) {
    const auto& corpus = *corpus_;
    const size_t chunk_size = config_.chunk_sentences;
    for (uint32_t epoch = epochs_done_; epoch < config_.epochs; ++epoch) {
        uint64_t chunk_index = 0;
        for (size_t begin = 0; begin < corpus.size(); begin += chunk_size, ++chunk_index) {
            size_t end = std::min(begin + chunk_size, corpus.size());
            std::span<const IndexedSentence> chunk(corpus.data() + begin, end - begin);
            RowGradient grad;
            double loss = 0.0;
            size_t examples = 0;
            for (const auto& tensor : tensors_) {
                auto batch = add_negatives(positives_from_chunk(chunk, tensor, config_.window),
                                           tensor, config_.negative_ratio, neg_rng_);
                if (batch.examples.empty()) continue;
                batch.step = adam_.t;
                examples += batch.examples.size();
                double weight = tensor.order() == 2 ? config_.joint_pair_weight : 1.0;
                accumulate_gradient(grad, u_, batch, weight);
                if (progress) loss += weight * batch_loss(u_, batch);
            }
            if (examples == 0) continue;
            adam_step(u_, grad, adam_);
            if (progress) progress(epoch, chunk_index, examples, loss);
        }
        epochs_done_ = epoch + 1;
    }
}

Checkpoint Trainer::checkpoint() const {
    Checkpoint ck;
    ck.mode = config_.mode;
    ck.u = u_;
    ck.adam = adam_;
    ck.epochs_done = epochs_done_;
    std::ostringstream os;
    neg_rng_.save(os);
    ck.rng_state = os.str();
    return ck;
}

void Checkpoint::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw data_error("cannot open for writing: " + path);
    write_bytes(out, kCheckpointMagic, sizeof(kCheckpointMagic));
    write_pod<uint32_t>(out, mode == TrainMode::cps ? 0u : 1u);
    write_pod<uint32_t>(out, u.dim);
    write_pod<uint32_t>(out, u.rank);
    write_pod<uint64_t>(out, adam.t);
    write_pod<double>(out, adam.lr);
    write_pod<double>(out, adam.beta1);
    write_pod<double>(out, adam.beta2);
    write_pod<double>(out, adam.eps);
    write_bytes(out, u.values.data(), u.values.size() * sizeof(double));
    write_bytes(out, adam.m.data(), adam.m.size() * sizeof(double));
    write_bytes(out, adam.v.data(), adam.v.size() * sizeof(double));
    write_pod<uint32_t>(out, epochs_done);
    write_pod<uint64_t>(out, rng_state.size());
    write_bytes(out, rng_state.data(), rng_state.size());
    if (!out) throw data_error("write failed: " + path);
}

Checkpoint Checkpoint::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw data_error("cannot open checkpoint file: " + path);
    char magic[8];
    read_bytes(in, magic, sizeof(magic));
    if (std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0) {
        throw data_error(path + ": not a recognized checkpoint file");
    }
    Checkpoint ck;
    uint32_t mode = read_pod<uint32_t>(in);
    if (mode > 1) throw data_error(path + ": unknown training mode");
    ck.mode = mode == 0 ? TrainMode::cps : TrainMode::jcps;
    ck.u.dim = read_pod<uint32_t>(in);
    ck.u.rank = read_pod<uint32_t>(in);
    ck.adam.t = read_pod<uint64_t>(in);
    ck.adam.lr = read_pod<double>(in);
    ck.adam.beta1 = read_pod<double>(in);
    ck.adam.beta2 = read_pod<double>(in);
    ck.adam.eps = read_pod<double>(in);
    size_t n = static_cast<size_t>(ck.u.dim) * ck.u.rank;
    ck.u.values.resize(n);
    ck.adam.m.resize(n);
    ck.adam.v.resize(n);
    read_bytes(in, ck.u.values.data(), n * sizeof(double));
    read_bytes(in, ck.adam.m.data(), n * sizeof(double));
    read_bytes(in, ck.adam.v.data(), n * sizeof(double));
    ck.epochs_done = read_pod<uint32_t>(in);
    uint64_t rng_len = read_pod<uint64_t>(in);
    ck.rng_state.resize(rng_len);
    read_bytes(in, ck.rng_state.data(), rng_len);
    return ck;
}

FactorMatrix train_cps(const std::vector<IndexedSentence>& corpus, const Vocabulary& vocab,
                       const TrainConfig& config) {
    if (config.mode != TrainMode::cps) throw usage_error("train_cps requires cps mode");
    Trainer trainer(corpus, vocab.size(), config);
    trainer.init();
    trainer.run();
    return trainer.factors();
}

FactorMatrix train_jcps(const std::vector<IndexedSentence>& corpus, const Vocabulary& vocab,
                        const TrainConfig& config) {
    if (config.mode != TrainMode::jcps) throw usage_error("train_jcps requires jcps mode");
    Trainer trainer(corpus, vocab.size(), config);
    trainer.init();
    trainer.run();
    return trainer.factors();
}

FactorMatrix fit_full_batch(std::span<const SparseSymTensor* const> tensors, uint32_t rank,
                            uint32_t steps, double lr, uint64_t seed, double init_stddev,
                            bool nonnegative_init) {
    if (tensors.empty()) throw usage_error("fit_full_batch: no tensors given");
    if (rank < 1) throw usage_error("rank must be >= 1");
    const uint32_t dim = tensors[0]->dim();
    std::vector<Minibatch> batches;
    for (const auto* tensor : tensors) {
        if (tensor->dim() != dim) throw usage_error("tensors must share one dim");
        Minibatch b;
        b.order = tensor->order();
        for (const auto& e : tensor->sorted_entries()) b.examples.push_back({e.ids, e.value});
        if (!b.examples.empty()) batches.push_back(std::move(b));
    }
    Rng init_rng(substream_seed(seed, "init"));
    FactorMatrix u = FactorMatrix::gaussian_init(dim, rank, init_stddev, init_rng);
    if (nonnegative_init) {
        for (double& x : u.values) x = std::abs(x);
    }
    AdamState adam = AdamState::zeros(dim, rank, lr);
    for (uint32_t step = 0; step < steps; ++step) {
        RowGradient grad;
        for (auto& b : batches) {
            b.step = adam.t;
            accumulate_gradient(grad, u, b);
        }
        adam_step(u, grad, adam);
    }
    return u;
}

double reconstruction_error(const FactorMatrix& u, const SparseSymTensor& tensor) {
    double num = 0.0;
    double den = 0.0;
    for (const auto& e : tensor.sorted_entries()) {
        double p = predict(u, std::span<const uint32_t>(e.ids.data(), tensor.order()));
        num += (e.value - p) * (e.value - p);
        den += e.value * e.value;
    }
    if (den == 0.0) throw usage_error("reconstruction_error: tensor has no entries");
    return std::sqrt(num / den);
}

}  // namespace tensemb
