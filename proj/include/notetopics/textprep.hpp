#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "notetopics/common.hpp"

namespace notetopics {

// Lowercase letter runs; apostrophe and hyphen stay only between letters.
// Digits, punctuation and non-ASCII bytes act as separators.
std::vector<std::string> tokenize(std::string_view text);

class StopwordSet {
  public:
    static const StopwordSet& bundled();
    // Plain text, one word per line, '#' comments.
    static StopwordSet from_file(const std::filesystem::path& path);
    static StopwordSet empty();

    bool contains(const std::string& token) const { return words_.count(token) > 0; }
    std::size_t size() const { return words_.size(); }

  private:
    std::unordered_set<std::string> words_;
};

std::vector<std::string> remove_stopwords(const std::vector<std::string>& tokens,
                                          const StopwordSet& stopwords);

// Deterministic rule lemmatizer: exception lexicon first, then ordered
// suffix rules (ies->y, es->e or drop, s->drop, ed/ing strip with Porter
// style fix-ups). Suffix rules need a stem of at least 3 characters.
// Idempotent by construction.
std::string lemmatize(const std::string& token);

struct TokenStream {
    std::string unit_id;
    std::vector<std::string> tokens;
};

// tokenize -> stopword filter -> lemmatize. The stopword filter runs again
// after lemmatization so no emitted lemma is a stopword.
TokenStream normalize_unit(std::string unit_id, std::string_view text,
                           const StopwordSet& stopwords);

struct Vocabulary {
    std::vector<std::string> terms;  // lexicographic order; index = term id
    std::unordered_map<std::string, std::uint32_t> term_to_id;
    std::vector<std::uint32_t> doc_freq;  // aligned with terms

    std::size_t size() const { return terms.size(); }
    std::uint64_t content_hash() const;
};

// Retains terms whose document frequency over the non-empty streams lies in
// [min_df, max_df_fraction * N], both bounds inclusive.
Vocabulary build_vocabulary(const std::vector<TokenStream>& streams,
                            std::size_t min_df = 2, double max_df_fraction = 0.5);

struct SparseCount {
    std::uint32_t term_id = 0;
    std::uint32_t count = 0;
    friend bool operator==(const SparseCount&, const SparseCount&) = default;
};

struct DocTermMatrix {
    std::vector<std::string> unit_ids;                 // aligned with rows
    std::vector<std::vector<SparseCount>> rows;        // term ids ascending
    std::uint32_t vocab_size = 0;
    std::uint64_t total_tokens = 0;
    std::vector<std::string> dropped_units;            // empty after OOV removal

    std::size_t num_docs() const { return rows.size(); }
    std::uint64_t row_sum(std::size_t row) const;
};

DocTermMatrix to_doc_term_matrix(const std::vector<TokenStream>& streams,
                                 const Vocabulary& vocab);

// Pipeline file formats (tab separated, deterministic).
void save_matrix(const DocTermMatrix& matrix, const Vocabulary& vocab,
                 const std::filesystem::path& path);
std::pair<DocTermMatrix, Vocabulary> load_matrix(const std::filesystem::path& path);

void dump_token_streams(const std::vector<TokenStream>& streams,
                        const std::filesystem::path& path);

}  // namespace notetopics
