#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "notetopics/common.hpp"
#include "notetopics/corpus.hpp"
#include "notetopics/textprep.hpp"

namespace notetopics {

enum class Provenance { seed, embedding_proposed, reviewer_added };

std::string to_string(Provenance p);
Provenance provenance_from_string(std::string_view s);

struct LexiconEntry {
    std::string term;  // lowercase, single-spaced; may be multiword
    Provenance provenance = Provenance::seed;
    bool accepted = true;
};

class KeywordLexicon {
  public:
    // Returns false (and changes nothing) when the normalized term exists.
    bool add(std::string_view term, Provenance provenance, bool accepted);
    bool contains(std::string_view term) const;

    const std::vector<LexiconEntry>& entries() const { return entries_; }
    std::vector<std::string> accepted_terms() const;
    std::size_t accepted_count() const;

    // CSV `term,provenance,accepted` with header, or plain one term per
    // line (-> seed, accepted).
    static KeywordLexicon load(const std::filesystem::path& path);
    void save(const std::filesystem::path& path) const;

  private:
    std::vector<LexiconEntry> entries_;
    std::unordered_map<std::string, std::size_t> index_;
};

struct EmbeddingTable {
    std::size_t dimension = 0;
    std::vector<std::string> words;                       // file order
    std::vector<std::vector<double>> vectors;             // aligned with words
    std::unordered_map<std::string, std::size_t> index;   // lowercase word -> row

    const std::vector<double>* find(const std::string& word) const;

    // Word-vector text format: "<vocab_size> <dimension>" then one line per
    // word. NaN/Inf components and dimension mismatches are rejected.
    static EmbeddingTable load(const std::filesystem::path& path);
};

// dot(u,v) / (|u| |v|). Throws DataError on a zero vector.
double cosine_similarity(std::span<const double> u, std::span<const double> v);

struct CandidateProposal {
    std::string term;
    std::string nearest_seed;
    double cosine = 0.0;
};

// Per accepted single-word lexicon term found in the table: its top_n
// nearest table words at cosine >= min_cosine, excluding lexicon terms and
// stopwords; merged keeping each candidate's best seed, sorted by cosine
// descending with lexicographic tie-break.
std::vector<CandidateProposal> propose_candidates(const KeywordLexicon& lexicon,
                                                  const EmbeddingTable& embeddings,
                                                  std::size_t top_n, double min_cosine,
                                                  const StopwordSet& stopwords);

enum class Decision { accept, reject };

struct ReviewResult {
    bool converged = false;       // no new term was accepted this round
    std::size_t added = 0;
    std::size_t already_present = 0;  // idempotent re-additions, warned
};

// Every proposal needs a decision and every decision must name a proposal.
// Manual additions come from sample review and enter as reviewer_added.
ReviewResult snowball_review(KeywordLexicon& lexicon,
                             const std::vector<CandidateProposal>& proposals,
                             const std::map<std::string, Decision>& decisions,
                             const std::vector<std::string>& manual_additions = {});

// Case-insensitive whole-token matcher over the accepted lexicon terms.
// Multiword terms match as consecutive token runs. A text matches when
// either its raw lowercased tokens or their lemmas contain the term.
class KeywordMatcher {
  public:
    explicit KeywordMatcher(const KeywordLexicon& lexicon);

    std::vector<std::string> match(std::string_view text) const;  // sorted, distinct
    bool any_match(std::string_view text) const;
    bool empty() const { return patterns_.empty(); }

  private:
    struct Pattern {
        std::string term;
        std::vector<std::string> tokens;
    };
    bool pattern_hits(const Pattern& p, const std::vector<std::string>& raw,
                      const std::vector<std::string>& lemmas) const;
    std::vector<Pattern> patterns_;
};

std::vector<std::string> match_text(std::string_view text, const KeywordLexicon& lexicon);

enum class Strategy { all_notes, keyword_notes, keyword_sentences };

std::string to_string(Strategy s);
Strategy strategy_from_string(std::string_view s);  // accepts s1/s2/s3

struct DocumentUnit {
    std::string unit_id;  // note_id, or note_id#index under keyword_sentences
    std::string patient_id;
    std::string note_id;
    std::optional<std::size_t> sentence_index;
    std::string text;
    Strategy strategy = Strategy::all_notes;
};

// Notes must already be deduplicated and length filtered.
std::vector<DocumentUnit> apply_strategy(const std::vector<NoteRecord>& notes,
                                         const KeywordLexicon& lexicon, Strategy strategy,
                                         const AbbreviationSet& abbreviations);
std::vector<DocumentUnit> apply_strategy(const std::vector<NoteRecord>& notes,
                                         const KeywordLexicon& lexicon, Strategy strategy);

// units.jsonl round-trip for the pipeline stage boundary.
void save_units(const std::vector<DocumentUnit>& units, const std::filesystem::path& path);
std::vector<DocumentUnit> load_units(const std::filesystem::path& path);

}  // namespace notetopics
