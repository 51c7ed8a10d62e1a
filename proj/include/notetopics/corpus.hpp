#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "notetopics/common.hpp"

namespace notetopics {

struct NoteRecord {
    std::string note_id;
    std::string patient_id;
    std::string text;
    std::optional<std::string> note_date;  // carried for provenance, never used
};

struct LoadNotesResult {
    std::vector<NoteRecord> notes;           // file order
    std::vector<std::size_t> skipped_lines;  // 1-based numbers of malformed lines
};

// JSON-lines loader. Required keys per line: note_id, patient_id, text
// (non-empty strings). Malformed lines are skipped and reported; a repeated
// note_id is treated as corrupt input and raises DataError.
LoadNotesResult load_notes(const std::filesystem::path& path);

struct DedupStats {
    std::size_t kept = 0;
    std::size_t duplicates = 0;
    std::size_t short_dropped = 0;
};

// Keeps the first occurrence of each distinct whitespace-trimmed text whose
// Unicode scalar count is at least min_chars. A repeated text counts as a
// duplicate even when its first occurrence was dropped as short.
std::vector<NoteRecord> dedup_and_filter(const std::vector<NoteRecord>& notes,
                                         std::size_t min_chars = 50,
                                         DedupStats* stats = nullptr);

struct Sentence {
    std::string note_id;
    std::size_t index = 0;  // 0-based, contiguous within the note
    std::string text;       // trimmed substring of the note text
};

class AbbreviationSet {
  public:
    static AbbreviationSet bundled();
    // One abbreviation per line (with or without the trailing period),
    // '#' starts a comment. Extends the bundled set.
    void extend_from_file(const std::filesystem::path& path);
    void add(std::string_view abbrev);
    bool contains(std::string_view token_with_period) const;

  private:
    std::unordered_set<std::string> entries_;
};

// Rule-based splitter: a sentence ends at a run of '.', '!' or '?' followed
// by whitespace or end of text, or at a newline. A lone '.' does not split
// when the preceding token is a known abbreviation. Returns at least one
// sentence for non-empty input.
std::vector<Sentence> segment_sentences(const NoteRecord& note,
                                        const AbbreviationSet& abbreviations);
std::vector<Sentence> segment_sentences(const NoteRecord& note);

enum class Sex { female, male, unknown };

std::string to_string(Sex sex);

struct PatientRecord {
    std::string patient_id;
    Sex sex = Sex::unknown;
    std::optional<int> birth_year;
    std::optional<int> age_years;
};

struct PatientTable {
    std::vector<PatientRecord> rows;
    std::unordered_map<std::string, std::size_t> by_id;
    std::size_t unknown_sex_rows = 0;  // rows whose sex value was not recognized

    const PatientRecord* find(const std::string& patient_id) const;
};

// CSV with header patient_id,sex,birth_year (or age instead of birth_year).
// Unrecognized sex values map to unknown with a warning count; a missing
// required column or duplicate patient_id is fatal.
PatientTable load_patients(const std::filesystem::path& path);

// Age in years. Records with birth_year require reference_year.
int age_of(const PatientRecord& record, std::optional<int> reference_year);

}  // namespace notetopics
