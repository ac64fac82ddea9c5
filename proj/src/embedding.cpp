#include "tensemb/embedding.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "tensemb/error.hpp"
#include "tensemb/rng.hpp"

namespace tensemb {

namespace {

double l2_norm(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

}  // namespace

uint32_t Embedding::require_id(std::string_view word) const {
    if (auto id = vocab.id_of(word)) return *id;
    throw data_error("word not in vocabulary: " + std::string(word));
}

Embedding make_embedding(Vocabulary vocab, const FactorMatrix& factors) {
    if (vocab.size() != factors.dim) throw usage_error("vocabulary and factors disagree on size");
    Embedding emb;
    emb.vocab = std::move(vocab);
    emb.dim = factors.rank;
    emb.vectors = factors.values;
    emb.normalized = false;
    return emb;
}

Embedding normalize(Embedding emb) {
    for (uint32_t id = 0; id < emb.vocab.size(); ++id) {
        double* row = emb.vectors.data() + static_cast<size_t>(id) * emb.dim;
        double norm = l2_norm({row, emb.dim});
        if (norm == 0.0) {
            throw numeric_error("cannot normalize zero vector for word: " + emb.vocab.tokens[id]);
        }
        for (uint32_t d = 0; d < emb.dim; ++d) row[d] /= norm;
    }
    emb.normalized = true;
    return emb;
}

double cosine(const Embedding& emb, std::string_view w1, std::string_view w2) {
    uint32_t i = emb.require_id(w1);
    uint32_t j = emb.require_id(w2);
    auto a = emb.row(i);
    auto b = emb.row(j);
    double d = dot(a, b);
    if (emb.normalized) return d;
    double na = l2_norm(a);
    double nb = l2_norm(b);
    if (na == 0.0) throw numeric_error("zero vector for word: " + std::string(w1));
    if (nb == 0.0) throw numeric_error("zero vector for word: " + std::string(w2));
    return d / (na * nb);
}

std::vector<Neighbor> nearest_neighbors(const Embedding& emb, std::span<const double> query,
                                        size_t k, const std::unordered_set<std::string>& exclude) {
    if (k < 1) throw usage_error("k must be >= 1");
    if (query.size() != emb.dim) throw usage_error("query dimension mismatch");
    double qn = l2_norm(query);
    if (qn == 0.0) throw numeric_error("zero query vector");

    std::vector<std::pair<double, uint32_t>> scored;
    scored.reserve(emb.vocab.size());
    for (uint32_t id = 0; id < emb.vocab.size(); ++id) {
        if (exclude.contains(emb.vocab.tokens[id])) continue;
        auto row = emb.row(id);
        double rn = emb.normalized ? 1.0 : l2_norm(row);
        if (rn == 0.0) throw numeric_error("zero vector for word: " + emb.vocab.tokens[id]);
        scored.emplace_back(dot(row, query) / (rn * qn), id);
    }
    std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    if (scored.size() > k) scored.resize(k);

    std::vector<Neighbor> out;
    out.reserve(scored.size());
    for (const auto& [sim, id] : scored) out.push_back({emb.vocab.tokens[id], sim});
    return out;
}

std::vector<double> compose(const Embedding& emb, std::string_view w1, std::string_view w2,
                            ComposeMode mode, bool normalize_inputs) {
    uint32_t i = emb.require_id(w1);
    uint32_t j = emb.require_id(w2);
    std::vector<double> a(emb.row(i).begin(), emb.row(i).end());
    std::vector<double> b(emb.row(j).begin(), emb.row(j).end());
    if (normalize_inputs && !emb.normalized) {
        double na = l2_norm(a);
        double nb = l2_norm(b);
        if (na == 0.0) throw numeric_error("zero vector for word: " + std::string(w1));
        if (nb == 0.0) throw numeric_error("zero vector for word: " + std::string(w2));
        for (double& x : a) x /= na;
        for (double& x : b) x /= nb;
    }
    std::vector<double> out(emb.dim);
    if (mode == ComposeMode::multiplicative) {
        for (uint32_t d = 0; d < emb.dim; ++d) out[d] = a[d] * b[d];
    } else {
        for (uint32_t d = 0; d < emb.dim; ++d) out[d] = a[d] + b[d];
    }
    return out;
}

Embedding random_embedding(Vocabulary vocab, uint32_t dim, uint64_t seed) {
    if (dim < 1) throw usage_error("dim must be >= 1");
    Embedding emb;
    emb.vocab = std::move(vocab);
    emb.dim = dim;
    emb.vectors.resize(static_cast<size_t>(emb.vocab.size()) * dim);
    Rng rng(substream_seed(seed, "random-embedding"));
    const double stddev = std::sqrt(0.5);  // variance 1/2
    for (double& x : emb.vectors) x = stddev * rng.gaussian();
    emb.normalized = false;
    return emb;
}

void save_embedding(const Embedding& emb, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw data_error("cannot open for writing: " + path);
    out << emb.vocab.size() << ' ' << emb.dim << '\n';
    char buf[64];
    for (uint32_t id = 0; id < emb.vocab.size(); ++id) {
        out << emb.vocab.tokens[id];
        auto row = emb.row(id);
        for (uint32_t d = 0; d < emb.dim; ++d) {
            std::snprintf(buf, sizeof(buf), "%.9g", row[d]);
            out << ' ' << buf;
        }
        out << '\n';
    }
    if (!out) throw data_error("write failed: " + path);
}

Embedding load_embedding(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw data_error("cannot open embedding file: " + path);
    std::string line;
    if (!std::getline(in, line)) throw data_error(path + ": missing header");
    uint64_t nwords = 0;
    uint32_t dim = 0;
    {
        std::istringstream hs(line);
        std::string extra;
        if (!(hs >> nwords >> dim) || (hs >> extra)) {
            throw data_error(path + " line 1: expected header \"words dim\"");
        }
    }
    if (nwords == 0 || dim == 0) throw data_error(path + " line 1: empty embedding");

    Embedding emb;
    emb.dim = dim;
    emb.vectors.reserve(nwords * dim);
    std::vector<std::pair<std::string, uint64_t>> entries;
    entries.reserve(nwords);
    size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string word;
        if (!(ls >> word)) {
            throw data_error(path + " line " + std::to_string(lineno) + ": missing word");
        }
        double value = 0.0;
        for (uint32_t d = 0; d < dim; ++d) {
            if (!(ls >> value)) {
                throw data_error(path + " line " + std::to_string(lineno) +
                                 ": expected " + std::to_string(dim) + " values");
            }
            emb.vectors.push_back(value);
        }
        std::string extra;
        if (ls >> extra) {
            throw data_error(path + " line " + std::to_string(lineno) + ": trailing values");
        }
        entries.emplace_back(std::move(word), 0);
    }
    if (entries.size() != nwords) {
        throw data_error(path + ": header declares " + std::to_string(nwords) +
                         " words, found " + std::to_string(entries.size()));
    }
    try {
        emb.vocab = Vocabulary::from_entries(std::move(entries));
    } catch (const data_error& e) {
        throw data_error(path + ": " + e.what());
    }
    emb.normalized = false;
    return emb;
}

}  // namespace tensemb
