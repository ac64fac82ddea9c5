#include "tensemb/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include "tensemb/error.hpp"

namespace tensemb {

namespace {

// Unit vector for a word; the evaluation convention normalizes everything.
std::vector<double> unit_vector(const Embedding& emb, uint32_t id) {
    auto row = emb.row(id);
    std::vector<double> v(row.begin(), row.end());
    if (emb.normalized) return v;
    double s = 0.0;
    for (double x : v) s += x * x;
    double norm = std::sqrt(s);
    if (norm == 0.0) {
        throw numeric_error("zero vector for word: " + emb.vocab.tokens[id]);
    }
    for (double& x : v) x /= norm;
    return v;
}

// Unit vectors of L minus w; w must be a member of L.
std::vector<std::vector<double>> gather_rest(const Embedding& emb,
                                             std::span<const std::string> words,
                                             std::string_view w) {
    bool found = false;
    std::vector<std::vector<double>> rest;
    rest.reserve(words.size());
    for (const auto& word : words) {
        if (!found && word == w) {
            found = true;
            continue;
        }
        rest.push_back(unit_vector(emb, emb.require_id(word)));
    }
    if (!found) throw usage_error("word is not a member of the list: " + std::string(w));
    return rest;
}

double triple_sim(const std::vector<double>& a, const std::vector<double>& b,
                  const std::vector<double>& c) {
    size_t dim = a.size();
    std::vector<double> centroid(dim);
    for (size_t i = 0; i < dim; ++i) centroid[i] = (a[i] + b[i] + c[i]) / 3.0;
    double sum_dist = 0.0;
    for (const auto* v : {&a, &b, &c}) {
        double d2 = 0.0;
        for (size_t i = 0; i < dim; ++i) {
            double diff = (*v)[i] - centroid[i];
            d2 += diff * diff;
        }
        sum_dist += std::sqrt(d2);
    }
    double mean_dist = sum_dist / 3.0;
    return 1.0 / std::max(kCentroidDistanceFloor, mean_dist);
}

void validate_case(const OutlierCase& c) {
    if (c.words.size() < 3) throw usage_error("outlier case needs at least 3 words");
    if (c.outlier_index >= c.words.size()) throw usage_error("outlier index out of range");
    std::unordered_set<std::string_view> seen;
    for (const auto& w : c.words) {
        if (w.empty()) throw usage_error("outlier case has an empty word");
        if (!seen.insert(w).second) throw usage_error("outlier case has duplicate word: " + w);
    }
}

std::string strip_cr(std::string s) {
    if (!s.empty() && s.back() == '\r') s.pop_back();
    return s;
}

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t");
    return s.substr(a, b - a + 1);
}

}  // namespace

double compactness2(const Embedding& emb, std::span<const std::string> words, std::string_view w) {
    if (words.size() < 3) throw usage_error("compactness2 needs at least 3 words");
    auto rest = gather_rest(emb, words, w);
    size_t m = rest.size();
    double sum = 0.0;
    size_t pairs = 0;
    for (size_t a = 0; a + 1 < m; ++a) {
        for (size_t b = a + 1; b < m; ++b) {
            double d = 0.0;
            for (size_t i = 0; i < rest[a].size(); ++i) d += rest[a][i] * rest[b][i];
            sum += d;
            ++pairs;
        }
    }
    return sum / static_cast<double>(pairs);
}

double compactness3(const Embedding& emb, std::span<const std::string> words, std::string_view w) {
    if (words.size() < 4) throw usage_error("compactness3 needs at least 4 words");
    auto rest = gather_rest(emb, words, w);
    size_t m = rest.size();
    double sum = 0.0;
    for (size_t a = 0; a + 2 < m; ++a) {
        for (size_t b = a + 1; b + 1 < m; ++b) {
            for (size_t c = b + 1; c < m; ++c) {
                sum += triple_sim(rest[a], rest[b], rest[c]);
            }
        }
    }
    return sum;
}

std::optional<OutlierResult> detect_outlier(const Embedding& emb, const OutlierCase& c,
                                            OutlierMode mode) {
    validate_case(c);
    if (mode == OutlierMode::od3 && c.words.size() < 4) {
        throw usage_error("od3 needs cases of at least 4 words");
    }
    for (const auto& w : c.words) {
        if (!emb.vocab.id_of(w)) return std::nullopt;  // skip the whole case
    }
    size_t n_plus_1 = c.words.size();
    std::vector<double> comp(n_plus_1);
    for (size_t p = 0; p < n_plus_1; ++p) {
        comp[p] = mode == OutlierMode::od2 ? compactness2(emb, c.words, c.words[p])
                                           : compactness3(emb, c.words, c.words[p]);
    }
    auto max_it = std::max_element(comp.begin(), comp.end());
    uint32_t predicted = static_cast<uint32_t>(max_it - comp.begin());

    std::vector<uint32_t> order(n_plus_1);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](uint32_t a, uint32_t b) { return comp[a] < comp[b]; });
    uint32_t rank = 0;
    for (uint32_t p = 0; p < n_plus_1; ++p) {
        if (order[p] == c.outlier_index) {
            rank = p;
            break;
        }
    }
    return OutlierResult{predicted, rank};
}

EvalReport run_outlier_eval(const Embedding& emb, std::span<const OutlierCase> cases,
                            OutlierMode mode) {
    if (cases.empty()) throw usage_error("no outlier cases given");
    EvalReport report;
    report.cases_total = cases.size();
    uint64_t used = 0;
    uint64_t correct = 0;
    double opp_sum = 0.0;
    for (const auto& c : cases) {
        auto result = detect_outlier(emb, c, mode);
        if (!result) {
            ++report.cases_skipped;
            continue;
        }
        ++used;
        uint32_t n = static_cast<uint32_t>(c.words.size()) - 1;
        if (result->outlier_rank == n) ++correct;
        opp_sum += static_cast<double>(result->outlier_rank) / static_cast<double>(n);
    }
    if (used == 0) throw data_error("every outlier case was skipped (out-of-vocabulary words)");
    report.accuracy = static_cast<double>(correct) / static_cast<double>(used);
    report.opp = opp_sum / static_cast<double>(used);
    return report;
}

namespace {

// Average ranks (1-based) with ties sharing the mean of their positions.
std::vector<double> average_ranks(const std::vector<double>& values) {
    size_t n = values.size();
    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](size_t a, size_t b) { return values[a] < values[b]; });
    std::vector<double> ranks(n);
    size_t i = 0;
    while (i < n) {
        size_t j = i;
        while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
        double mean_rank = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
        for (size_t k = i; k <= j; ++k) ranks[order[k]] = mean_rank;
        i = j + 1;
    }
    return ranks;
}

}  // namespace

SpearmanResult spearman(const Embedding& emb, std::span<const SimPair> pairs) {
    std::vector<double> model;
    std::vector<double> human;
    uint64_t skipped = 0;
    for (const auto& p : pairs) {
        if (!emb.vocab.id_of(p.w1) || !emb.vocab.id_of(p.w2)) {
            ++skipped;
            continue;
        }
        model.push_back(cosine(emb, p.w1, p.w2));
        human.push_back(p.human_score);
    }
    if (model.size() < 2) {
        throw data_error("fewer than 2 usable similarity pairs (" + std::to_string(skipped) +
                         " skipped)");
    }
    auto rx = average_ranks(model);
    auto ry = average_ranks(human);
    size_t n = rx.size();
    double mx = 0.0;
    double my = 0.0;
    for (size_t i = 0; i < n; ++i) {
        mx += rx[i];
        my += ry[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxy = 0.0;
    double sxx = 0.0;
    double syy = 0.0;
    for (size_t i = 0; i < n; ++i) {
        double dx = rx[i] - mx;
        double dy = ry[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0.0 || syy == 0.0) {
        throw numeric_error("rank variance is zero; correlation undefined");
    }
    return {sxy / std::sqrt(sxx * syy), model.size(), skipped};
}

std::vector<OutlierCase> load_outlier_cases(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw data_error("cannot open outlier case file: " + path);
    std::vector<OutlierCase> cases;
    OutlierCase current;
    int outlier_lines = 0;
    size_t lineno = 0;
    size_t block_start = 0;

    auto flush = [&]() {
        if (current.words.empty()) return;
        if (outlier_lines != 1) {
            throw data_error(path + ": block starting at line " + std::to_string(block_start) +
                             " must have exactly one OUTLIER: line");
        }
        try {
            validate_case(current);
        } catch (const usage_error& e) {
            throw data_error(path + ": block starting at line " + std::to_string(block_start) +
                             ": " + e.what());
        }
        cases.push_back(std::move(current));
        current = OutlierCase{};
        outlier_lines = 0;
    };

    std::string line;
    while (std::getline(in, line)) {
        ++lineno;
        line = trim(strip_cr(std::move(line)));
        if (line.empty()) {
            flush();
            continue;
        }
        if (current.words.empty()) block_start = lineno;
        constexpr std::string_view prefix = "OUTLIER:";
        if (line.starts_with(prefix)) {
            current.outlier_index = static_cast<uint32_t>(current.words.size());
            current.words.push_back(trim(line.substr(prefix.size())));
            ++outlier_lines;
        } else {
            current.words.push_back(line);
        }
    }
    flush();
    if (cases.empty()) throw data_error(path + ": no outlier cases found");
    return cases;
}

std::vector<SimPair> load_sim_pairs(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw data_error("cannot open similarity file: " + path);
    std::vector<SimPair> pairs;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        line = strip_cr(std::move(line));
        if (trim(line).empty()) continue;
        size_t t1 = line.find('\t');
        size_t t2 = t1 == std::string::npos ? std::string::npos : line.find('\t', t1 + 1);
        if (t2 == std::string::npos) {
            throw data_error(path + " line " + std::to_string(lineno) +
                             ": expected w1<TAB>w2<TAB>score");
        }
        SimPair p;
        p.w1 = trim(line.substr(0, t1));
        p.w2 = trim(line.substr(t1 + 1, t2 - t1 - 1));
        std::string score = trim(line.substr(t2 + 1));
        try {
            size_t pos = 0;
            p.human_score = std::stod(score, &pos);
            if (pos != score.size()) throw std::invalid_argument("trailing bytes");
        } catch (const std::exception&) {
            throw data_error(path + " line " + std::to_string(lineno) + ": bad score");
        }
        if (p.w1.empty() || p.w2.empty()) {
            throw data_error(path + " line " + std::to_string(lineno) + ": empty word");
        }
        if (p.w1 == p.w2) {
            throw data_error(path + " line " + std::to_string(lineno) + ": identical words");
        }
        pairs.push_back(std::move(p));
    }
    if (pairs.empty()) throw data_error(path + ": no similarity pairs found");
    return pairs;
}

}  // namespace tensemb
