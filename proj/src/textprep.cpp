#include "notetopics/textprep.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include <json.hpp>

namespace notetopics {

namespace {

bool is_ascii_letter(char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
}

char lower_ascii(char c) {
    return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c;
}

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> tokens;
    std::size_t i = 0;
    const std::size_t n = text.size();
    while (i < n) {
        if (!is_ascii_letter(text[i])) {
            ++i;
            continue;
        }
        std::string token;
        token.push_back(lower_ascii(text[i]));
        ++i;
        while (i < n) {
            char c = text[i];
            if (is_ascii_letter(c)) {
                token.push_back(lower_ascii(c));
                ++i;
            } else if ((c == '\'' || c == '-') && i + 1 < n && is_ascii_letter(text[i + 1])) {
                token.push_back(c);
                token.push_back(lower_ascii(text[i + 1]));
                i += 2;
            } else {
                break;
            }
        }
        tokens.push_back(std::move(token));
    }
    return tokens;
}

// ---- stopwords ----

namespace {

// Standard English list in the NLTK lineage, plus whole-word contractions
// (the tokenizer keeps internal apostrophes).
const char* const kBundledStopwords[] = {
    "a", "about", "above", "after", "again", "against", "all", "am", "an", "and",
    "any", "are", "as", "at", "be", "because", "been", "before", "being", "below",
    "between", "both", "but", "by", "can", "cannot", "could", "did", "do", "does",
    "doing", "down", "during", "each", "few", "for", "from", "further", "had",
    "has", "have", "having", "he", "her", "here", "hers", "herself", "him",
    "himself", "his", "how", "i", "if", "in", "into", "is", "it", "its", "itself",
    "just", "me", "more", "most", "my", "myself", "no", "nor", "not", "now", "of",
    "off", "on", "once", "only", "or", "other", "our", "ours", "ourselves", "out",
    "over", "own", "per", "same", "she", "should", "so", "some", "such", "than",
    "that", "the", "their", "theirs", "them", "themselves", "then", "there",
    "these", "they", "this", "those", "through", "to", "too", "under", "until",
    "up", "upon", "very", "was", "we", "were", "what", "when", "where", "which",
    "while", "who", "whom", "why", "will", "with", "would", "you", "your",
    "yours", "yourself", "yourselves",
    "ain't", "aren't", "can't", "couldn't", "didn't", "doesn't", "don't",
    "hadn't", "hasn't", "haven't", "he's", "i'm", "isn't", "it's", "let's",
    "she's", "shouldn't", "that's", "there's", "they're", "wasn't", "we're",
    "weren't", "won't", "wouldn't", "you're",
};

}  // namespace

const StopwordSet& StopwordSet::bundled() {
    static const StopwordSet set = [] {
        StopwordSet s;
        for (const char* w : kBundledStopwords) s.words_.insert(w);
        return s;
    }();
    return set;
}

StopwordSet StopwordSet::from_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot read stopword file: " + path.string());
    StopwordSet set;
    std::string line;
    while (std::getline(in, line)) {
        auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::string word = to_lower(trim_view(line));
        if (!word.empty()) set.words_.insert(std::move(word));
    }
    return set;
}

StopwordSet StopwordSet::empty() { return StopwordSet{}; }

std::vector<std::string> remove_stopwords(const std::vector<std::string>& tokens,
                                          const StopwordSet& stopwords) {
    std::vector<std::string> kept;
    kept.reserve(tokens.size());
    for (const std::string& t : tokens) {
        if (!stopwords.contains(t)) kept.push_back(t);
    }
    return kept;
}

// ---- lemmatizer ----

namespace {

// Irregular forms plus words the suffix rules would mangle. Values must be
// fixed points of lemmatize() (checked by a property test).
const std::pair<const char*, const char*> kLemmaExceptions[] = {
    // irregular nouns
    {"feet", "foot"}, {"teeth", "tooth"}, {"men", "man"}, {"women", "woman"},
    {"children", "child"}, {"mice", "mouse"}, {"geese", "goose"},
    {"wives", "wife"}, {"knives", "knife"}, {"buses", "bus"},
    // irregular verbs
    {"said", "say"}, {"went", "go"}, {"gone", "go"}, {"goes", "go"},
    {"done", "do"}, {"got", "get"}, {"gotten", "get"}, {"took", "take"},
    {"taken", "take"}, {"gave", "give"}, {"given", "give"}, {"made", "make"},
    {"found", "find"}, {"felt", "feel"}, {"kept", "keep"}, {"left", "leave"},
    {"told", "tell"}, {"thought", "think"}, {"brought", "bring"},
    {"bought", "buy"}, {"saw", "see"}, {"seen", "see"}, {"came", "come"},
    {"ran", "run"}, {"ate", "eat"}, {"eaten", "eat"}, {"fell", "fall"},
    {"fallen", "fall"}, {"drank", "drink"}, {"drunk", "drink"},
    {"slept", "sleep"}, {"spoke", "speak"}, {"spoken", "speak"},
    {"wrote", "write"}, {"written", "write"}, {"met", "meet"}, {"sat", "sit"},
    {"stood", "stand"}, {"held", "hold"}, {"lost", "lose"}, {"paid", "pay"},
    {"heard", "hear"}, {"sent", "send"}, {"built", "build"},
    {"spent", "spend"}, {"meant", "mean"}, {"dealt", "deal"},
    {"drove", "drive"}, {"driven", "drive"}, {"rose", "rise"},
    {"risen", "rise"}, {"grew", "grow"}, {"grown", "grow"}, {"knew", "know"},
    {"known", "know"}, {"began", "begin"}, {"begun", "begin"},
    {"broke", "break"}, {"broken", "break"}, {"chose", "choose"},
    {"chosen", "choose"}, {"woke", "wake"}, {"wore", "wear"}, {"worn", "wear"},
    // short stems the min-stem-3 rule blocks
    {"denied", "deny"}, {"died", "die"}, {"dies", "die"}, {"tried", "try"},
    {"tries", "try"}, {"cried", "cry"}, {"lied", "lie"}, {"used", "use"},
    {"using", "use"}, {"dying", "die"}, {"lying", "lie"}, {"ties", "tie"},
    // -ied pasts outside the listed rule forms
    {"worried", "worry"}, {"married", "marry"}, {"carried", "carry"},
    {"studied", "study"}, {"applied", "apply"}, {"complied", "comply"},
    {"replied", "reply"}, {"varied", "vary"},
    // -ed pasts where the fix-ups under-restore the final e
    {"abused", "abuse"}, {"refused", "refuse"}, {"declined", "decline"},
    {"scheduled", "schedule"}, {"cancelled", "cancel"}, {"canceled", "cancel"},
    {"increased", "increase"}, {"decreased", "decrease"},
    {"diagnosed", "diagnose"}, {"discharged", "discharge"},
    {"prescribed", "prescribe"}, {"experienced", "experience"},
    {"improved", "improve"}, {"involved", "involve"}, {"observed", "observe"},
    {"received", "receive"}, {"noticed", "notice"}, {"managed", "manage"},
    {"required", "require"}, {"advised", "advise"}, {"arranged", "arrange"},
    {"described", "describe"}, {"resolved", "resolve"},
    // clinical terms the plural rules would mangle
    {"aids", "aids"}, {"diabetes", "diabetes"}, {"herpes", "herpes"},
    {"species", "species"}, {"rabies", "rabies"}, {"scabies", "scabies"},
    {"measles", "measles"}, {"viruses", "virus"}, {"statuses", "status"},
    {"fetuses", "fetus"}, {"diagnoses", "diagnosis"},
    {"prognoses", "prognosis"}, {"crises", "crisis"}, {"analyses", "analysis"},
    {"noted", "note"}, {"notes", "note"},
    // -ing nouns that are their own base form
    {"housing", "housing"}, {"nursing", "nursing"}, {"morning", "morning"},
    {"evening", "evening"}, {"nothing", "nothing"}, {"something", "something"},
    {"everything", "everything"}, {"anything", "anything"},
};

const std::unordered_map<std::string, std::string>& lemma_exceptions() {
    static const std::unordered_map<std::string, std::string> map = [] {
        std::unordered_map<std::string, std::string> m;
        for (const auto& [from, to] : kLemmaExceptions) m.emplace(from, to);
        return m;
    }();
    return map;
}

bool is_vowel_at(const std::string& s, std::size_t i) {
    char c = s[i];
    if (c == 'a' || c == 'e' || c == 'i' || c == 'o' || c == 'u') return true;
    // y acts as a vowel after a consonant
    return c == 'y' && i > 0 && !is_vowel_at(s, i - 1);
}

bool has_vowel(const std::string& s) {
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (is_vowel_at(s, i)) return true;
    }
    return false;
}

// Porter's measure: the number of vowel-consonant transitions.
int porter_measure(const std::string& s) {
    int m = 0;
    bool prev_vowel = false;
    for (std::size_t i = 0; i < s.size(); ++i) {
        bool v = is_vowel_at(s, i);
        if (prev_vowel && !v) ++m;
        prev_vowel = v;
    }
    return m;
}

bool ends_cvc(const std::string& s) {
    std::size_t n = s.size();
    if (n < 3) return false;
    if (is_vowel_at(s, n - 3) || !is_vowel_at(s, n - 2) || is_vowel_at(s, n - 1)) return false;
    char last = s[n - 1];
    return last != 'w' && last != 'x' && last != 'y';
}

bool ends_with(const std::string& s, std::string_view suffix) {
    return s.size() >= suffix.size() &&
           s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

// Porter step-1b style cleanup after stripping "ed"/"ing".
std::string fix_stripped_stem(std::string stem) {
    if (ends_with(stem, "at") || ends_with(stem, "bl") || ends_with(stem, "iz")) {
        stem.push_back('e');
        return stem;
    }
    std::size_t n = stem.size();
    if (n >= 2 && stem[n - 1] == stem[n - 2] && !is_vowel_at(stem, n - 1) &&
        stem[n - 1] != 'l' && stem[n - 1] != 's' && stem[n - 1] != 'z') {
        stem.pop_back();
        return stem;
    }
    if (porter_measure(stem) == 1 && ends_cvc(stem)) stem.push_back('e');
    return stem;
}

constexpr std::size_t kMinStem = 3;

}  // namespace

std::string lemmatize(const std::string& token) {
    auto it = lemma_exceptions().find(token);
    if (it != lemma_exceptions().end()) return it->second;

    auto stem_of = [&](std::size_t suffix_len) {
        return token.substr(0, token.size() - suffix_len);
    };

    if (ends_with(token, "ies") && token.size() >= kMinStem + 3) {
        return stem_of(3) + "y";
    }
    if (ends_with(token, "es") && token.size() >= kMinStem + 2) {
        std::string stem = stem_of(2);
        if (ends_with(stem, "ss") || ends_with(stem, "ch") || ends_with(stem, "sh") ||
            stem.back() == 'x' || stem.back() == 'z' || stem.back() == 'o') {
            return stem;  // boxes -> box, wishes -> wish, tomatoes -> tomato
        }
        return stem + "e";  // causes -> cause, abuses -> abuse
    }
    if (token.back() == 's' && token.size() >= kMinStem + 1 && !ends_with(token, "ss") &&
        !ends_with(token, "us") && !ends_with(token, "is")) {
        return stem_of(1);
    }
    if (ends_with(token, "ing") && token.size() >= kMinStem + 3) {
        std::string stem = stem_of(3);
        if (has_vowel(stem)) return fix_stripped_stem(std::move(stem));
    }
    if (ends_with(token, "ed") && token.size() >= kMinStem + 2) {
        std::string stem = stem_of(2);
        if (has_vowel(stem)) return fix_stripped_stem(std::move(stem));
    }
    return token;
}

TokenStream normalize_unit(std::string unit_id, std::string_view text,
                           const StopwordSet& stopwords) {
    TokenStream stream;
    stream.unit_id = std::move(unit_id);
    for (const std::string& raw : tokenize(text)) {
        if (stopwords.contains(raw)) continue;
        std::string lemma = lemmatize(raw);
        if (stopwords.contains(lemma)) continue;
        stream.tokens.push_back(std::move(lemma));
    }
    return stream;
}

// ---- vocabulary ----

std::uint64_t Vocabulary::content_hash() const {
    std::uint64_t h = kFnvOffset;
    for (const std::string& term : terms) {
        h = fnv1a64(term, h);
        h = fnv1a64("\n", h);
    }
    return h;
}

Vocabulary build_vocabulary(const std::vector<TokenStream>& streams, std::size_t min_df,
                            double max_df_fraction) {
    std::map<std::string, std::uint32_t> df;  // ordered: output is lexicographic
    std::size_t non_empty = 0;
    for (const TokenStream& stream : streams) {
        if (stream.tokens.empty()) continue;
        ++non_empty;
        std::unordered_set<std::string_view> distinct;
        for (const std::string& t : stream.tokens) distinct.insert(t);
        for (std::string_view t : distinct) ++df[std::string(t)];
    }
    if (non_empty == 0) throw DataError("cannot build vocabulary: no non-empty units");

    const double max_df = max_df_fraction * static_cast<double>(non_empty);
    Vocabulary vocab;
    for (const auto& [term, freq] : df) {
        if (freq < min_df || static_cast<double>(freq) > max_df) continue;
        vocab.term_to_id.emplace(term, static_cast<std::uint32_t>(vocab.terms.size()));
        vocab.terms.push_back(term);
        vocab.doc_freq.push_back(freq);
    }
    if (vocab.terms.empty()) {
        throw DataError("vocabulary is empty after pruning; relax --min-df/--max-df");
    }
    return vocab;
}

std::uint64_t DocTermMatrix::row_sum(std::size_t row) const {
    std::uint64_t sum = 0;
    for (const SparseCount& c : rows[row]) sum += c.count;
    return sum;
}

DocTermMatrix to_doc_term_matrix(const std::vector<TokenStream>& streams,
                                 const Vocabulary& vocab) {
    DocTermMatrix matrix;
    matrix.vocab_size = static_cast<std::uint32_t>(vocab.size());
    for (const TokenStream& stream : streams) {
        std::map<std::uint32_t, std::uint32_t> counts;
        for (const std::string& token : stream.tokens) {
            auto it = vocab.term_to_id.find(token);
            if (it != vocab.term_to_id.end()) ++counts[it->second];
        }
        if (counts.empty()) {
            matrix.dropped_units.push_back(stream.unit_id);
            continue;
        }
        std::vector<SparseCount> row;
        row.reserve(counts.size());
        for (const auto& [term_id, count] : counts) {
            row.push_back({term_id, count});
            matrix.total_tokens += count;
        }
        matrix.unit_ids.push_back(stream.unit_id);
        matrix.rows.push_back(std::move(row));
    }
    return matrix;
}

// ---- pipeline files ----

void save_matrix(const DocTermMatrix& matrix, const Vocabulary& vocab,
                 const std::filesystem::path& path) {
    if (matrix.vocab_size != vocab.size()) {
        throw InternalError("matrix/vocabulary size mismatch on save");
    }
    std::ostringstream out;
    out << "ntdtm\t1\n";
    out << "vocab\t" << vocab.size() << "\n";
    for (std::size_t i = 0; i < vocab.size(); ++i) {
        out << vocab.terms[i] << "\t" << vocab.doc_freq[i] << "\n";
    }
    out << "units\t" << matrix.num_docs() << "\t" << matrix.total_tokens << "\n";
    for (std::size_t d = 0; d < matrix.num_docs(); ++d) {
        out << matrix.unit_ids[d];
        for (const SparseCount& c : matrix.rows[d]) {
            out << "\t" << c.term_id << ":" << c.count;
        }
        out << "\n";
    }
    write_file(path, out.str());
}

namespace {

std::vector<std::string> split_tabs(const std::string& line) {
    std::vector<std::string> parts;
    std::size_t start = 0;
    while (true) {
        std::size_t tab = line.find('\t', start);
        if (tab == std::string::npos) {
            parts.push_back(line.substr(start));
            break;
        }
        parts.push_back(line.substr(start, tab - start));
        start = tab + 1;
    }
    return parts;
}

[[noreturn]] void bad_matrix(const std::filesystem::path& path, const std::string& why) {
    throw DataError("malformed matrix file " + path.string() + ": " + why);
}

std::uint64_t parse_u64(const std::string& text, const std::filesystem::path& path,
                        const char* what) {
    std::size_t pos = 0;
    std::uint64_t value = 0;
    try {
        value = std::stoull(text, &pos);
    } catch (const std::exception&) {
        pos = std::string::npos;
    }
    if (pos != text.size() || text.empty()) {
        bad_matrix(path, std::string("bad ") + what + " \"" + text + "\"");
    }
    return value;
}

}  // namespace

std::pair<DocTermMatrix, Vocabulary> load_matrix(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot read matrix file: " + path.string());
    std::string line;
    if (!std::getline(in, line) || split_tabs(line) != std::vector<std::string>{"ntdtm", "1"}) {
        bad_matrix(path, "bad header");
    }
    if (!std::getline(in, line)) bad_matrix(path, "missing vocab header");
    auto vocab_header = split_tabs(line);
    if (vocab_header.size() != 2 || vocab_header[0] != "vocab") bad_matrix(path, "bad vocab header");
    std::size_t vocab_size = parse_u64(vocab_header[1], path, "vocabulary size");

    Vocabulary vocab;
    for (std::size_t i = 0; i < vocab_size; ++i) {
        if (!std::getline(in, line)) bad_matrix(path, "truncated vocabulary");
        auto parts = split_tabs(line);
        if (parts.size() != 2) bad_matrix(path, "bad vocabulary line");
        vocab.term_to_id.emplace(parts[0], static_cast<std::uint32_t>(vocab.terms.size()));
        vocab.terms.push_back(parts[0]);
        vocab.doc_freq.push_back(static_cast<std::uint32_t>(parse_u64(parts[1], path, "doc freq")));
    }

    if (!std::getline(in, line)) bad_matrix(path, "missing units header");
    auto units_header = split_tabs(line);
    if (units_header.size() != 3 || units_header[0] != "units") bad_matrix(path, "bad units header");
    std::size_t num_units = parse_u64(units_header[1], path, "unit count");
    std::uint64_t declared_tokens = parse_u64(units_header[2], path, "token total");

    DocTermMatrix matrix;
    matrix.vocab_size = static_cast<std::uint32_t>(vocab.size());
    for (std::size_t d = 0; d < num_units; ++d) {
        if (!std::getline(in, line)) bad_matrix(path, "truncated unit rows");
        auto parts = split_tabs(line);
        if (parts.size() < 2) bad_matrix(path, "empty unit row");
        std::vector<SparseCount> row;
        std::uint32_t prev_id = 0;
        for (std::size_t i = 1; i < parts.size(); ++i) {
            std::size_t colon = parts[i].find(':');
            if (colon == std::string::npos) bad_matrix(path, "bad count pair");
            auto term_id = static_cast<std::uint32_t>(parse_u64(parts[i].substr(0, colon), path, "term id"));
            auto count = static_cast<std::uint32_t>(parse_u64(parts[i].substr(colon + 1), path, "count"));
            if (term_id >= vocab.size()) bad_matrix(path, "term id out of range");
            if (count == 0) bad_matrix(path, "zero count");
            if (i > 1 && term_id <= prev_id) bad_matrix(path, "term ids not ascending");
            prev_id = term_id;
            row.push_back({term_id, count});
            matrix.total_tokens += count;
        }
        matrix.unit_ids.push_back(parts[0]);
        matrix.rows.push_back(std::move(row));
    }
    if (matrix.total_tokens != declared_tokens) bad_matrix(path, "token total mismatch");
    return {std::move(matrix), std::move(vocab)};
}

void dump_token_streams(const std::vector<TokenStream>& streams,
                        const std::filesystem::path& path) {
    std::ostringstream out;
    for (const TokenStream& stream : streams) {
        nlohmann::json obj;
        obj["unit_id"] = stream.unit_id;
        obj["tokens"] = stream.tokens;
        out << obj.dump() << "\n";
    }
    write_file(path, out.str());
}

}  // namespace notetopics
