#include "notetopics/corpus.hpp"

#include <cctype>
#include <fstream>
#include <iostream>
#include <sstream>

#include <json.hpp>

namespace notetopics {

namespace {

bool string_field(const nlohmann::json& obj, const char* key, std::string& out,
                  bool allow_empty) {
    auto it = obj.find(key);
    if (it == obj.end() || !it->is_string()) return false;
    out = it->get<std::string>();
    return allow_empty || !out.empty();
}

}  // namespace

LoadNotesResult load_notes(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot read notes file: " + path.string());

    LoadNotesResult result;
    std::unordered_set<std::string> seen_ids;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim_view(line).empty()) {
            result.skipped_lines.push_back(line_no);
            std::cerr << "warning: line " << line_no << ": blank line skipped\n";
            continue;
        }
        nlohmann::json obj = nlohmann::json::parse(line, nullptr, /*allow_exceptions=*/false);
        NoteRecord note;
        if (obj.is_discarded() || !obj.is_object() ||
            !string_field(obj, "note_id", note.note_id, false) ||
            !string_field(obj, "patient_id", note.patient_id, false) ||
            !string_field(obj, "text", note.text, false)) {
            result.skipped_lines.push_back(line_no);
            std::cerr << "warning: line " << line_no << ": malformed note skipped\n";
            continue;
        }
        std::string date;
        if (string_field(obj, "note_date", date, false)) note.note_date = date;
        if (!seen_ids.insert(note.note_id).second) {
            throw DataError("duplicate note_id \"" + note.note_id + "\" at line " +
                            std::to_string(line_no));
        }
        result.notes.push_back(std::move(note));
    }
    return result;
}

std::vector<NoteRecord> dedup_and_filter(const std::vector<NoteRecord>& notes,
                                         std::size_t min_chars, DedupStats* stats) {
    std::vector<NoteRecord> kept;
    std::unordered_set<std::string> seen_texts;
    DedupStats local;
    for (const NoteRecord& note : notes) {
        std::string key = trim(note.text);
        if (!seen_texts.insert(key).second) {
            ++local.duplicates;
            continue;
        }
        if (utf8_length(key) < min_chars) {
            ++local.short_dropped;
            continue;
        }
        ++local.kept;
        kept.push_back(note);
    }
    if (stats) *stats = local;
    return kept;
}

// ---- sentence segmentation ----

AbbreviationSet AbbreviationSet::bundled() {
    static const char* kDefaults[] = {"dr.",  "mr.",   "mrs.",  "ms.", "vs.",
                                      "e.g.", "i.e.",  "etc.",  "st.", "jr.",
                                      "sr.",  "prof.", "dept.", "approx."};
    AbbreviationSet set;
    for (const char* a : kDefaults) set.entries_.insert(a);
    return set;
}

void AbbreviationSet::add(std::string_view abbrev) {
    std::string key = to_lower(trim_view(abbrev));
    if (key.empty()) return;
    if (key.back() != '.') key.push_back('.');
    entries_.insert(std::move(key));
}

void AbbreviationSet::extend_from_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot read abbreviation file: " + path.string());
    std::string line;
    while (std::getline(in, line)) {
        auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        add(line);
    }
}

bool AbbreviationSet::contains(std::string_view token_with_period) const {
    return entries_.count(to_lower(token_with_period)) > 0;
}

namespace {

bool is_terminator(char c) { return c == '.' || c == '!' || c == '?'; }

// The maximal non-whitespace run ending at text[dot], with leading
// punctuation stripped ("(Dr." -> "dr.").
std::string_view token_before(std::string_view text, std::size_t dot) {
    std::size_t start = dot;
    while (start > 0 && !std::isspace(static_cast<unsigned char>(text[start - 1]))) --start;
    while (start < dot && !std::isalpha(static_cast<unsigned char>(text[start]))) ++start;
    return text.substr(start, dot - start + 1);
}

}  // namespace

std::vector<Sentence> segment_sentences(const NoteRecord& note,
                                        const AbbreviationSet& abbreviations) {
    const std::string& text = note.text;
    std::vector<Sentence> sentences;
    auto emit = [&](std::size_t begin, std::size_t end) {
        std::string_view piece = trim_view(std::string_view(text).substr(begin, end - begin));
        if (piece.empty()) return;
        sentences.push_back({note.note_id, sentences.size(), std::string(piece)});
    };

    std::size_t start = 0;
    std::size_t i = 0;
    const std::size_t n = text.size();
    while (i < n) {
        char c = text[i];
        if (c == '\n') {
            emit(start, i);
            start = i + 1;
            ++i;
        } else if (is_terminator(c)) {
            std::size_t run_end = i;
            while (run_end + 1 < n && is_terminator(text[run_end + 1])) ++run_end;
            bool at_boundary = run_end + 1 == n ||
                               std::isspace(static_cast<unsigned char>(text[run_end + 1]));
            if (at_boundary) {
                bool guarded = run_end == i && c == '.' &&
                               abbreviations.contains(token_before(text, i));
                if (!guarded) {
                    emit(start, run_end + 1);
                    start = run_end + 1;
                }
            }
            i = run_end + 1;
        } else {
            ++i;
        }
    }
    emit(start, n);
    if (sentences.empty()) {
        sentences.push_back({note.note_id, 0, trim(text)});
    }
    return sentences;
}

std::vector<Sentence> segment_sentences(const NoteRecord& note) {
    static const AbbreviationSet defaults = AbbreviationSet::bundled();
    return segment_sentences(note, defaults);
}

// ---- patients ----

std::string to_string(Sex sex) {
    switch (sex) {
        case Sex::female: return "female";
        case Sex::male: return "male";
        default: return "unknown";
    }
}

const PatientRecord* PatientTable::find(const std::string& patient_id) const {
    auto it = by_id.find(patient_id);
    return it == by_id.end() ? nullptr : &rows[it->second];
}

namespace {

int parse_int_field(const std::string& value, const char* what, std::size_t line_no) {
    std::size_t pos = 0;
    int parsed = 0;
    try {
        parsed = std::stoi(value, &pos);
    } catch (const std::exception&) {
        pos = std::string::npos;
    }
    if (pos != value.size() || value.empty()) {
        throw DataError(std::string("patients row ") + std::to_string(line_no) +
                        ": invalid " + what + " \"" + value + "\"");
    }
    return parsed;
}

}  // namespace

PatientTable load_patients(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot read patients file: " + path.string());

    std::string line;
    if (!std::getline(in, line)) throw DataError("patients file is empty: " + path.string());

    auto header = split_csv_line(line);
    int col_id = -1, col_sex = -1, col_birth = -1, col_age = -1;
    for (std::size_t i = 0; i < header.size(); ++i) {
        std::string name = to_lower(trim_view(header[i]));
        if (name == "patient_id") col_id = static_cast<int>(i);
        else if (name == "sex") col_sex = static_cast<int>(i);
        else if (name == "birth_year") col_birth = static_cast<int>(i);
        else if (name == "age") col_age = static_cast<int>(i);
    }
    if (col_id < 0 || col_sex < 0) {
        throw DataError("patients file missing required column (patient_id, sex): " +
                        path.string());
    }
    if (col_birth < 0 && col_age < 0) {
        throw DataError("patients file needs a birth_year or age column: " + path.string());
    }
    if (col_birth >= 0 && col_age >= 0) {
        throw DataError("patients file has both birth_year and age columns: " + path.string());
    }

    PatientTable table;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim_view(line).empty()) continue;
        auto fields = split_csv_line(line);
        std::size_t needed = static_cast<std::size_t>(std::max({col_id, col_sex, col_birth, col_age})) + 1;
        if (fields.size() < needed) {
            throw DataError("patients row " + std::to_string(line_no) + ": too few columns");
        }
        PatientRecord rec;
        rec.patient_id = trim(fields[static_cast<std::size_t>(col_id)]);
        if (rec.patient_id.empty()) {
            throw DataError("patients row " + std::to_string(line_no) + ": empty patient_id");
        }
        std::string sex = to_lower(trim_view(fields[static_cast<std::size_t>(col_sex)]));
        if (sex == "f" || sex == "female") {
            rec.sex = Sex::female;
        } else if (sex == "m" || sex == "male") {
            rec.sex = Sex::male;
        } else {
            rec.sex = Sex::unknown;
            ++table.unknown_sex_rows;
            std::cerr << "warning: patients row " << line_no << ": unrecognized sex \""
                      << sex << "\" mapped to unknown\n";
        }
        if (col_birth >= 0) {
            rec.birth_year = parse_int_field(trim(fields[static_cast<std::size_t>(col_birth)]),
                                             "birth_year", line_no);
        } else {
            int age = parse_int_field(trim(fields[static_cast<std::size_t>(col_age)]), "age",
                                      line_no);
            if (age < 0) {
                throw DataError("patients row " + std::to_string(line_no) + ": negative age");
            }
            rec.age_years = age;
        }
        if (table.by_id.count(rec.patient_id)) {
            throw DataError("duplicate patient_id \"" + rec.patient_id + "\" at row " +
                            std::to_string(line_no));
        }
        table.by_id.emplace(rec.patient_id, table.rows.size());
        table.rows.push_back(std::move(rec));
    }
    return table;
}

int age_of(const PatientRecord& record, std::optional<int> reference_year) {
    if (record.age_years) return *record.age_years;
    if (!record.birth_year) {
        throw DataError("patient \"" + record.patient_id + "\" has neither age nor birth_year");
    }
    if (!reference_year) {
        throw DataError("--reference-year is required when demographics use birth_year");
    }
    int age = *reference_year - *record.birth_year;
    if (age < 0) {
        throw DataError("patient \"" + record.patient_id +
                        "\": negative age from birth_year " + std::to_string(*record.birth_year));
    }
    return age;
}

}  // namespace notetopics
