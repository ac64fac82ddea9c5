#include "tensemb/cooccurrence.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "tensemb/error.hpp"

namespace tensemb {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void check_id(const CoocStats& stats, uint32_t id) {
    if (id >= stats.dim) {
        throw usage_error("word id " + std::to_string(id) + " out of range (dim " +
                          std::to_string(stats.dim) + ")");
    }
}

}  // namespace

void CoocStats::merge(const CoocStats& other) {
    if (other.dim != dim) throw usage_error("cannot merge counts with different dims");
    for (uint32_t i = 0; i < dim; ++i) unigram[i] += other.unigram[i];
    for (const auto& [k, c] : other.pair) pair[k] += c;
    for (const auto& [k, c] : other.triple) triple[k] += c;
    total_tokens += other.total_tokens;
    total_pairs += other.total_pairs;
    total_triples += other.total_triples;
}

CoocStats count_cooccurrences(std::span<const IndexedSentence> sentences, uint32_t dim,
                              uint32_t window) {
    if (window < 2) throw usage_error("window must be >= 2");
    if (dim == 0 || dim >= keypack::kMaxDim) {
        throw usage_error("vocabulary size out of range for tensor indexing");
    }
    CoocStats stats;
    stats.dim = dim;
    stats.unigram.assign(dim, 0);

    std::vector<uint32_t> types;
    for (const auto& sentence : sentences) {
        size_t n = sentence.size();
        stats.total_tokens += n;
        for (uint32_t id : sentence) {
            if (id >= dim) throw usage_error("sentence id out of vocabulary range");
            ++stats.unigram[id];
        }
        if (n < 2) continue;
        size_t wlen = std::min<size_t>(window, n);
        size_t nwin = n <= window ? 1 : n - window + 1;
        for (size_t start = 0; start < nwin; ++start) {
            types.assign(sentence.begin() + start, sentence.begin() + start + wlen);
            std::sort(types.begin(), types.end());
            types.erase(std::unique(types.begin(), types.end()), types.end());
            size_t m = types.size();
            for (size_t a = 0; a + 1 < m; ++a) {
                for (size_t b = a + 1; b < m; ++b) {
                    ++stats.pair[keypack::pack2(types[a], types[b])];
                    ++stats.total_pairs;
                    for (size_t c = b + 1; c < m; ++c) {
                        ++stats.triple[keypack::pack3(types[a], types[b], types[c])];
                        ++stats.total_triples;
                    }
                }
            }
        }
    }
    return stats;
}

double pmi2(const CoocStats& stats, uint32_t i, uint32_t j) {
    if (i == j) throw usage_error("pmi2: indices must be distinct");
    check_id(stats, i);
    check_id(stats, j);
    auto it = stats.pair.find(keypack::pack2(std::min(i, j), std::max(i, j)));
    if (it == stats.pair.end()) return kNegInf;
    double joint = static_cast<double>(it->second) / static_cast<double>(stats.total_pairs);
    double pi = static_cast<double>(stats.unigram[i]) / static_cast<double>(stats.total_tokens);
    double pj = static_cast<double>(stats.unigram[j]) / static_cast<double>(stats.total_tokens);
    return std::log(joint / (pi * pj));
}

double pmi3(const CoocStats& stats, uint32_t i, uint32_t j, uint32_t k) {
    if (i == j || i == k || j == k) throw usage_error("pmi3: indices must be pairwise distinct");
    check_id(stats, i);
    check_id(stats, j);
    check_id(stats, k);
    std::array<uint32_t, 3> t{i, j, k};
    std::sort(t.begin(), t.end());
    auto it = stats.triple.find(keypack::pack3(t[0], t[1], t[2]));
    if (it == stats.triple.end()) return kNegInf;
    double joint = static_cast<double>(it->second) / static_cast<double>(stats.total_triples);
    double pi = static_cast<double>(stats.unigram[i]) / static_cast<double>(stats.total_tokens);
    double pj = static_cast<double>(stats.unigram[j]) / static_cast<double>(stats.total_tokens);
    double pk = static_cast<double>(stats.unigram[k]) / static_cast<double>(stats.total_tokens);
    return std::log(joint / (pi * pj * pk));
}

SparseSymTensor::SparseSymTensor(int order, uint32_t dim) : order_(order), dim_(dim) {
    if (order != 2 && order != 3) throw usage_error("tensor order must be 2 or 3");
    if (dim == 0 || dim >= keypack::kMaxDim) {
        throw usage_error("tensor dim out of range");
    }
}

void SparseSymTensor::set(std::span<const uint32_t> ids, double value) {
    if (static_cast<int>(ids.size()) != order_) throw usage_error("tensor index arity mismatch");
    for (size_t a = 0; a < ids.size(); ++a) {
        if (ids[a] >= dim_) throw usage_error("tensor index out of range");
        if (a > 0 && ids[a - 1] >= ids[a]) {
            throw usage_error("tensor indices must be strictly increasing");
        }
    }
    if (!(value > 0.0)) throw usage_error("tensor values must be strictly positive");
    uint64_t key = order_ == 2 ? keypack::pack2(ids[0], ids[1])
                               : keypack::pack3(ids[0], ids[1], ids[2]);
    entries_[key] = value;
}

double SparseSymTensor::at(std::span<const uint32_t> ids) const {
    if (static_cast<int>(ids.size()) != order_) throw usage_error("tensor index arity mismatch");
    std::array<uint32_t, 3> t{0, 0, 0};
    std::copy(ids.begin(), ids.end(), t.begin());
    std::sort(t.begin(), t.begin() + order_);
    for (int a = 0; a + 1 < order_; ++a) {
        if (t[a] == t[a + 1]) return 0.0;  // repeated word types are implicitly 0
    }
    uint64_t key = order_ == 2 ? keypack::pack2(t[0], t[1]) : keypack::pack3(t[0], t[1], t[2]);
    return at_key(key);
}

double SparseSymTensor::at_key(uint64_t key) const {
    auto it = entries_.find(key);
    return it == entries_.end() ? 0.0 : it->second;
}

std::vector<SparseSymTensor::Entry> SparseSymTensor::sorted_entries() const {
    std::vector<std::pair<uint64_t, double>> kv(entries_.begin(), entries_.end());
    std::sort(kv.begin(), kv.end());
    std::vector<Entry> out;
    out.reserve(kv.size());
    for (const auto& [key, value] : kv) {
        out.push_back({keypack::unpack(key, order_), value});
    }
    return out;
}

void SparseSymTensor::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw data_error("cannot open for writing: " + path);
    out << order_ << ' ' << dim_ << ' ' << nnz() << '\n';
    char buf[64];
    for (const auto& e : sorted_entries()) {
        for (int a = 0; a < order_; ++a) out << e.ids[a] << ' ';
        std::snprintf(buf, sizeof(buf), "%.17g", e.value);
        out << buf << '\n';
    }
    if (!out) throw data_error("write failed: " + path);
}

SparseSymTensor SparseSymTensor::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw data_error("cannot open tensor file: " + path);
    std::string line;
    if (!std::getline(in, line)) throw data_error(path + ": missing header");
    int order = 0;
    uint32_t dim = 0;
    size_t nnz = 0;
    {
        std::istringstream hs(line);
        if (!(hs >> order >> dim >> nnz)) throw data_error(path + ": malformed header");
    }
    if (order != 2 && order != 3) throw data_error(path + ": unsupported order");
    SparseSymTensor tensor(order, dim);
    size_t lineno = 1;
    std::array<uint32_t, 3> ids{};
    double value = 0.0;
    size_t read = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream ls(line);
        for (int a = 0; a < order; ++a) {
            if (!(ls >> ids[a])) {
                throw data_error(path + " line " + std::to_string(lineno) + ": malformed entry");
            }
        }
        if (!(ls >> value)) {
            throw data_error(path + " line " + std::to_string(lineno) + ": malformed value");
        }
        try {
            tensor.set(std::span<const uint32_t>(ids.data(), order), value);
        } catch (const usage_error& e) {
            throw data_error(path + " line " + std::to_string(lineno) + ": " + e.what());
        }
        ++read;
    }
    if (read != nnz) {
        throw data_error(path + ": header declares " + std::to_string(nnz) + " entries, found " +
                         std::to_string(read));
    }
    return tensor;
}

SparseSymTensor build_ppmi(const CoocStats& stats, int order, double shift) {
    if (order != 2 && order != 3) throw usage_error("ppmi order must be 2 or 3");
    if (shift < 0.0) throw usage_error("shift must be >= 0");
    if (stats.total_tokens == 0) throw usage_error("co-occurrence statistics are empty");
    SparseSymTensor tensor(order, stats.dim);
    if (order == 2) {
        for (const auto& [key, count] : stats.pair) {
            auto ids = keypack::unpack(key, 2);
            double v = pmi2(stats, ids[0], ids[1]) - shift;
            if (v > 0.0) tensor.set(std::span<const uint32_t>(ids.data(), 2), v);
        }
    } else {
        for (const auto& [key, count] : stats.triple) {
            auto ids = keypack::unpack(key, 3);
            double v = pmi3(stats, ids[0], ids[1], ids[2]) - shift;
            if (v > 0.0) tensor.set(std::span<const uint32_t>(ids.data(), 3), v);
        }
    }
    return tensor;
}

}  // namespace tensemb
