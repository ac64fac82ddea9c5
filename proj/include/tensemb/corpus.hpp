#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace tensemb {

// A sentence after vocabulary lookup; out-of-vocabulary tokens are dropped.
using IndexedSentence = std::vector<uint32_t>;

// Byte offset of the first malformed UTF-8 sequence, or npos if valid.
size_t find_invalid_utf8(std::string_view bytes);

// Tokens are lowercased maximal runs of ASCII alphanumerics; every other
// character (including multi-byte codepoints) separates tokens.
std::vector<std::string> tokenize_line(std::string_view line);

// One input line = one sentence. Blank lines become empty sentences.
// Throws data_error naming the byte offset on malformed UTF-8.
std::vector<std::vector<std::string>> tokenize(std::string_view text);

struct Vocabulary {
    std::vector<std::string> tokens;  // id -> token, ids dense 0..|V|-1
    std::vector<uint64_t> counts;     // id -> corpus frequency
    std::unordered_map<std::string, uint32_t> index;

    uint32_t size() const { return static_cast<uint32_t>(tokens.size()); }
    std::optional<uint32_t> id_of(std::string_view token) const;

    // One "token<TAB>count" line per id, in id order.
    std::string to_text() const;
    void save(const std::string& path) const;
    static Vocabulary load(const std::string& path);
    static Vocabulary from_entries(std::vector<std::pair<std::string, uint64_t>> entries);
};

// Streaming token counter. Shards counted independently can be merged; the
// merged result equals sequential counting exactly.
class VocabCounter {
  public:
    void add(const std::vector<std::string>& sentence);
    void merge(const VocabCounter& other);

    // Ids assigned in descending frequency order, ties broken lexicographically.
    // Throws usage_error when nothing survives the filters.
    Vocabulary finish(uint64_t min_count, const std::unordered_set<std::string>& stopwords) const;

  private:
    std::unordered_map<std::string, uint64_t> counts_;
};

Vocabulary build_vocab(const std::vector<std::vector<std::string>>& sentences, uint64_t min_count,
                       const std::unordered_set<std::string>& stopwords);

IndexedSentence index_sentence(const std::vector<std::string>& sentence, const Vocabulary& vocab);
std::vector<IndexedSentence> index_sentences(const std::vector<std::vector<std::string>>& sentences,
                                             const Vocabulary& vocab);

// One token per line, lowercased on load to match tokenizer output.
std::unordered_set<std::string> load_stopwords(const std::string& path);

// Line-streamed file pipelines used by the CLI.
VocabCounter count_corpus_file(const std::string& path);
std::vector<IndexedSentence> load_indexed_corpus(const std::string& path, const Vocabulary& vocab);

}  // namespace tensemb
