#include "tensemb/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include "tensemb/error.hpp"

namespace tensemb {

size_t find_invalid_utf8(std::string_view bytes) {
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
    size_t n = bytes.size();
    size_t i = 0;
    while (i < n) {
        unsigned char b0 = p[i];
        if (b0 < 0x80) {
            ++i;
            continue;
        }
        int len;
        uint32_t cp;
        if ((b0 & 0xE0) == 0xC0) {
            len = 2;
            cp = b0 & 0x1F;
        } else if ((b0 & 0xF0) == 0xE0) {
            len = 3;
            cp = b0 & 0x0F;
        } else if ((b0 & 0xF8) == 0xF0) {
            len = 4;
            cp = b0 & 0x07;
        } else {
            return i;
        }
        if (i + len > n) return i;
        for (int k = 1; k < len; ++k) {
            if ((p[i + k] & 0xC0) != 0x80) return i;
            cp = (cp << 6) | (p[i + k] & 0x3F);
        }
        // Overlong encodings, surrogates, and out-of-range codepoints.
        if (len == 2 && cp < 0x80) return i;
        if (len == 3 && (cp < 0x800 || (cp >= 0xD800 && cp <= 0xDFFF))) return i;
        if (len == 4 && (cp < 0x10000 || cp > 0x10FFFF)) return i;
        i += len;
    }
    return std::string_view::npos;
}

namespace {

bool is_token_char(unsigned char c) {
    return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
}

std::vector<std::string> scan_tokens(std::string_view line) {
    std::vector<std::string> tokens;
    std::string current;
    for (unsigned char c : line) {
        if (is_token_char(c)) {
            current.push_back(static_cast<char>(std::tolower(c)));
        } else if (!current.empty()) {
            tokens.push_back(std::move(current));
            current.clear();
        }
    }
    if (!current.empty()) tokens.push_back(std::move(current));
    return tokens;
}

std::string lowercase_ascii(std::string s) {
    for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

std::string strip_cr(std::string s) {
    if (!s.empty() && s.back() == '\r') s.pop_back();
    return s;
}

}  // namespace

std::vector<std::string> tokenize_line(std::string_view line) {
    size_t bad = find_invalid_utf8(line);
    if (bad != std::string_view::npos) {
        throw data_error("invalid UTF-8 at byte offset " + std::to_string(bad));
    }
    return scan_tokens(line);
}

std::vector<std::vector<std::string>> tokenize(std::string_view text) {
    size_t bad = find_invalid_utf8(text);
    if (bad != std::string_view::npos) {
        throw data_error("invalid UTF-8 at byte offset " + std::to_string(bad));
    }
    std::vector<std::vector<std::string>> sentences;
    size_t start = 0;
    while (start <= text.size()) {
        size_t end = text.find('\n', start);
        if (end == std::string_view::npos) {
            if (start < text.size()) sentences.push_back(scan_tokens(text.substr(start)));
            break;
        }
        std::string_view line = text.substr(start, end - start);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        sentences.push_back(scan_tokens(line));
        start = end + 1;
    }
    return sentences;
}

std::optional<uint32_t> Vocabulary::id_of(std::string_view token) const {
    auto it = index.find(std::string(token));
    if (it == index.end()) return std::nullopt;
    return it->second;
}

std::string Vocabulary::to_text() const {
    std::ostringstream os;
    for (uint32_t id = 0; id < size(); ++id) {
        os << tokens[id] << '\t' << counts[id] << '\n';
    }
    return os.str();
}

void Vocabulary::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw data_error("cannot open for writing: " + path);
    out << to_text();
    if (!out) throw data_error("write failed: " + path);
}

Vocabulary Vocabulary::from_entries(std::vector<std::pair<std::string, uint64_t>> entries) {
    Vocabulary v;
    v.tokens.reserve(entries.size());
    v.counts.reserve(entries.size());
    for (auto& [token, count] : entries) {
        auto [it, inserted] = v.index.emplace(token, static_cast<uint32_t>(v.tokens.size()));
        if (!inserted) throw data_error("duplicate token in vocabulary: " + token);
        v.tokens.push_back(std::move(token));
        v.counts.push_back(count);
    }
    return v;
}

Vocabulary Vocabulary::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw data_error("cannot open vocabulary file: " + path);
    std::vector<std::pair<std::string, uint64_t>> entries;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        line = strip_cr(std::move(line));
        if (line.empty()) continue;
        size_t tab = line.find('\t');
        if (tab == std::string::npos) {
            throw data_error(path + " line " + std::to_string(lineno) + ": expected token<TAB>count");
        }
        std::string token = line.substr(0, tab);
        uint64_t count = 0;
        try {
            size_t pos = 0;
            count = std::stoull(line.substr(tab + 1), &pos);
            if (pos != line.size() - tab - 1) throw std::invalid_argument("trailing bytes");
        } catch (const std::exception&) {
            throw data_error(path + " line " + std::to_string(lineno) + ": bad count");
        }
        entries.emplace_back(std::move(token), count);
    }
    if (entries.empty()) throw data_error("empty vocabulary file: " + path);
    try {
        return from_entries(std::move(entries));
    } catch (const data_error& e) {
        throw data_error(path + ": " + e.what());
    }
}

void VocabCounter::add(const std::vector<std::string>& sentence) {
    for (const auto& token : sentence) ++counts_[token];
}

void VocabCounter::merge(const VocabCounter& other) {
    for (const auto& [token, count] : other.counts_) counts_[token] += count;
}

Vocabulary VocabCounter::finish(uint64_t min_count,
                                const std::unordered_set<std::string>& stopwords) const {
    if (min_count < 1) throw usage_error("min_count must be >= 1");
    std::vector<std::pair<std::string, uint64_t>> entries;
    for (const auto& [token, count] : counts_) {
        if (count < min_count) continue;
        if (stopwords.contains(token)) continue;
        entries.emplace_back(token, count);
    }
    if (entries.empty()) {
        throw usage_error("vocabulary is empty after filtering (min_count=" +
                          std::to_string(min_count) + ")");
    }
    std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    return Vocabulary::from_entries(std::move(entries));
}

Vocabulary build_vocab(const std::vector<std::vector<std::string>>& sentences, uint64_t min_count,
                       const std::unordered_set<std::string>& stopwords) {
    VocabCounter counter;
    for (const auto& sentence : sentences) counter.add(sentence);
    return counter.finish(min_count, stopwords);
}

IndexedSentence index_sentence(const std::vector<std::string>& sentence, const Vocabulary& vocab) {
    IndexedSentence ids;
    ids.reserve(sentence.size());
    for (const auto& token : sentence) {
        if (auto id = vocab.id_of(token)) ids.push_back(*id);
    }
    return ids;
}

std::vector<IndexedSentence> index_sentences(const std::vector<std::vector<std::string>>& sentences,
                                             const Vocabulary& vocab) {
    std::vector<IndexedSentence> out;
    out.reserve(sentences.size());
    for (const auto& sentence : sentences) out.push_back(index_sentence(sentence, vocab));
    return out;
}

std::unordered_set<std::string> load_stopwords(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw data_error("cannot open stopword file: " + path);
    std::unordered_set<std::string> words;
    std::string line;
    while (std::getline(in, line)) {
        line = strip_cr(std::move(line));
        // trim surrounding spaces
        size_t a = line.find_first_not_of(" \t");
        if (a == std::string::npos) continue;
        size_t b = line.find_last_not_of(" \t");
        words.insert(lowercase_ascii(line.substr(a, b - a + 1)));
    }
    return words;
}

VocabCounter count_corpus_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw data_error("cannot open corpus file: " + path);
    VocabCounter counter;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        line = strip_cr(std::move(line));
        try {
            counter.add(tokenize_line(line));
        } catch (const data_error& e) {
            throw data_error(path + " line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return counter;
}

std::vector<IndexedSentence> load_indexed_corpus(const std::string& path, const Vocabulary& vocab) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw data_error("cannot open corpus file: " + path);
    std::vector<IndexedSentence> corpus;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        line = strip_cr(std::move(line));
        try {
            corpus.push_back(index_sentence(tokenize_line(line), vocab));
        } catch (const data_error& e) {
            throw data_error(path + " line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return corpus;
}

}  // namespace tensemb
