#include "notetopics/lexicon.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>

#include <json.hpp>

namespace notetopics {

std::string to_string(Provenance p) {
    switch (p) {
        case Provenance::seed: return "seed";
        case Provenance::embedding_proposed: return "embedding_proposed";
        default: return "reviewer_added";
    }
}

Provenance provenance_from_string(std::string_view s) {
    if (s == "seed") return Provenance::seed;
    if (s == "embedding_proposed") return Provenance::embedding_proposed;
    if (s == "reviewer_added") return Provenance::reviewer_added;
    throw DataError("unknown provenance: " + std::string(s));
}

namespace {

std::string normalize_term(std::string_view term) {
    return collapse_whitespace(to_lower(term));
}

}  // namespace

bool KeywordLexicon::add(std::string_view term, Provenance provenance, bool accepted) {
    std::string key = normalize_term(term);
    if (key.empty()) throw DataError("empty lexicon term");
    if (index_.count(key)) return false;
    index_.emplace(key, entries_.size());
    entries_.push_back({key, provenance, accepted});
    return true;
}

bool KeywordLexicon::contains(std::string_view term) const {
    return index_.count(normalize_term(term)) > 0;
}

std::vector<std::string> KeywordLexicon::accepted_terms() const {
    std::vector<std::string> out;
    for (const LexiconEntry& e : entries_) {
        if (e.accepted) out.push_back(e.term);
    }
    return out;
}

std::size_t KeywordLexicon::accepted_count() const {
    std::size_t n = 0;
    for (const LexiconEntry& e : entries_) n += e.accepted ? 1 : 0;
    return n;
}

KeywordLexicon KeywordLexicon::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot read lexicon file: " + path.string());
    KeywordLexicon lexicon;
    std::string line;
    bool first = true;
    bool csv = false;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (first) {
            first = false;
            csv = to_lower(trim_view(line)) == "term,provenance,accepted";
            if (csv) continue;
        }
        std::string stripped = trim(line);
        if (stripped.empty() || stripped[0] == '#') continue;
        if (csv) {
            auto fields = split_csv_line(stripped);
            if (fields.size() != 3) {
                throw DataError("lexicon row " + std::to_string(line_no) + ": expected 3 fields");
            }
            std::string accepted = to_lower(trim_view(fields[2]));
            if (accepted != "true" && accepted != "false") {
                throw DataError("lexicon row " + std::to_string(line_no) +
                                ": accepted must be true or false");
            }
            if (!lexicon.add(fields[0], provenance_from_string(trim(fields[1])),
                             accepted == "true")) {
                std::cerr << "warning: lexicon row " << line_no << ": duplicate term dropped\n";
            }
        } else {
            if (!lexicon.add(stripped, Provenance::seed, true)) {
                std::cerr << "warning: lexicon row " << line_no << ": duplicate term dropped\n";
            }
        }
    }
    if (lexicon.entries().empty()) throw DataError("lexicon file has no terms: " + path.string());
    return lexicon;
}

void KeywordLexicon::save(const std::filesystem::path& path) const {
    std::ostringstream out;
    out << "term,provenance,accepted\n";
    for (const LexiconEntry& e : entries_) {
        out << csv_escape(e.term) << "," << to_string(e.provenance) << ","
            << (e.accepted ? "true" : "false") << "\n";
    }
    write_file(path, out.str());
}

// ---- embeddings ----

const std::vector<double>* EmbeddingTable::find(const std::string& word) const {
    auto it = index.find(word);
    return it == index.end() ? nullptr : &vectors[it->second];
}

EmbeddingTable EmbeddingTable::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot read embedding file: " + path.string());

    std::size_t declared_words = 0;
    EmbeddingTable table;
    if (!(in >> declared_words >> table.dimension) || table.dimension == 0) {
        throw DataError("bad embedding header (want '<vocab_size> <dimension>'): " +
                        path.string());
    }
    for (std::size_t row = 0; row < declared_words; ++row) {
        std::string word;
        if (!(in >> word)) {
            throw DataError("embedding file truncated at word " + std::to_string(row) + ": " +
                            path.string());
        }
        std::vector<double> vec(table.dimension);
        for (std::size_t j = 0; j < table.dimension; ++j) {
            if (!(in >> vec[j])) {
                throw DataError("embedding vector truncated for \"" + word + "\": " +
                                path.string());
            }
            if (!std::isfinite(vec[j])) {
                throw DataError("non-finite embedding component for \"" + word + "\"");
            }
        }
        std::string key = to_lower(word);
        if (!table.index.emplace(key, table.words.size()).second) {
            std::cerr << "warning: duplicate embedding word \"" << key << "\" ignored\n";
            continue;
        }
        table.words.push_back(std::move(key));
        table.vectors.push_back(std::move(vec));
    }
    return table;
}

double cosine_similarity(std::span<const double> u, std::span<const double> v) {
    if (u.size() != v.size()) throw InternalError("cosine: dimension mismatch");
    double dot = 0.0, nu = 0.0, nv = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        dot += u[i] * v[i];
        nu += u[i] * u[i];
        nv += v[i] * v[i];
    }
    if (nu == 0.0 || nv == 0.0) throw DataError("cosine similarity of a zero vector is undefined");
    return dot / (std::sqrt(nu) * std::sqrt(nv));
}

std::vector<CandidateProposal> propose_candidates(const KeywordLexicon& lexicon,
                                                  const EmbeddingTable& embeddings,
                                                  std::size_t top_n, double min_cosine,
                                                  const StopwordSet& stopwords) {
    std::vector<std::string> seeds;
    std::vector<std::string> missing;
    for (const LexiconEntry& e : lexicon.entries()) {
        if (!e.accepted || e.term.find(' ') != std::string::npos) continue;
        if (embeddings.find(e.term)) seeds.push_back(e.term);
        else missing.push_back(e.term);
    }
    if (seeds.empty()) {
        std::string msg = "no accepted lexicon term found in the embedding table; missing:";
        for (const std::string& m : missing) msg += " " + m;
        throw DataError(msg);
    }

    // candidate term -> best (cosine, seed); higher cosine wins, ties keep
    // the lexicographically smaller seed
    std::unordered_map<std::string, std::pair<double, std::string>> best;
    for (const std::string& seed : seeds) {
        const std::vector<double>& seed_vec = *embeddings.find(seed);
        std::vector<CandidateProposal> local;
        for (std::size_t row = 0; row < embeddings.words.size(); ++row) {
            const std::string& word = embeddings.words[row];
            if (lexicon.contains(word) || stopwords.contains(word)) continue;
            double cos = cosine_similarity(seed_vec, embeddings.vectors[row]);
            if (cos >= min_cosine) local.push_back({word, seed, cos});
        }
        std::sort(local.begin(), local.end(), [](const auto& a, const auto& b) {
            if (a.cosine != b.cosine) return a.cosine > b.cosine;
            return a.term < b.term;
        });
        if (local.size() > top_n) local.resize(top_n);
        for (const CandidateProposal& p : local) {
            auto it = best.find(p.term);
            if (it == best.end() || p.cosine > it->second.first ||
                (p.cosine == it->second.first && p.nearest_seed < it->second.second)) {
                best[p.term] = {p.cosine, p.nearest_seed};
            }
        }
    }

    std::vector<CandidateProposal> merged;
    merged.reserve(best.size());
    for (const auto& [term, seed_cos] : best) {
        merged.push_back({term, seed_cos.second, seed_cos.first});
    }
    std::sort(merged.begin(), merged.end(), [](const auto& a, const auto& b) {
        if (a.cosine != b.cosine) return a.cosine > b.cosine;
        return a.term < b.term;
    });
    return merged;
}

ReviewResult snowball_review(KeywordLexicon& lexicon,
                             const std::vector<CandidateProposal>& proposals,
                             const std::map<std::string, Decision>& decisions,
                             const std::vector<std::string>& manual_additions) {
    std::unordered_set<std::string> proposed;
    for (const CandidateProposal& p : proposals) proposed.insert(p.term);
    for (const auto& [term, decision] : decisions) {
        (void)decision;
        if (!proposed.count(term)) {
            throw DataError("decision for unknown term \"" + term + "\"");
        }
    }
    for (const CandidateProposal& p : proposals) {
        if (!decisions.count(p.term)) {
            throw DataError("missing decision for proposed term \"" + p.term + "\"");
        }
    }

    ReviewResult result;
    for (const CandidateProposal& p : proposals) {
        if (decisions.at(p.term) != Decision::accept) continue;
        if (lexicon.add(p.term, Provenance::embedding_proposed, true)) ++result.added;
        else ++result.already_present;
    }
    for (const std::string& term : manual_additions) {
        if (lexicon.add(term, Provenance::reviewer_added, true)) {
            ++result.added;
        } else {
            ++result.already_present;
            std::cerr << "warning: reviewer addition \"" << term << "\" already in lexicon\n";
        }
    }
    result.converged = result.added == 0;
    return result;
}

// ---- matching ----

KeywordMatcher::KeywordMatcher(const KeywordLexicon& lexicon) {
    for (const LexiconEntry& e : lexicon.entries()) {
        if (!e.accepted) continue;
        Pattern p{e.term, tokenize(e.term)};
        if (p.tokens.empty()) {
            std::cerr << "warning: lexicon term \"" << e.term << "\" has no tokens, ignored\n";
            continue;
        }
        patterns_.push_back(std::move(p));
    }
}

namespace {

bool contains_run(const std::vector<std::string>& haystack,
                  const std::vector<std::string>& needle) {
    if (needle.empty() || haystack.size() < needle.size()) return false;
    for (std::size_t i = 0; i + needle.size() <= haystack.size(); ++i) {
        bool all = true;
        for (std::size_t j = 0; j < needle.size(); ++j) {
            if (haystack[i + j] != needle[j]) {
                all = false;
                break;
            }
        }
        if (all) return true;
    }
    return false;
}

}  // namespace

bool KeywordMatcher::pattern_hits(const Pattern& p, const std::vector<std::string>& raw,
                                  const std::vector<std::string>& lemmas) const {
    return contains_run(raw, p.tokens) || contains_run(lemmas, p.tokens);
}

std::vector<std::string> KeywordMatcher::match(std::string_view text) const {
    std::vector<std::string> raw = tokenize(text);
    std::vector<std::string> lemmas;
    lemmas.reserve(raw.size());
    for (const std::string& t : raw) lemmas.push_back(lemmatize(t));

    std::vector<std::string> hits;
    for (const Pattern& p : patterns_) {
        if (pattern_hits(p, raw, lemmas)) hits.push_back(p.term);
    }
    std::sort(hits.begin(), hits.end());
    return hits;
}

bool KeywordMatcher::any_match(std::string_view text) const {
    std::vector<std::string> raw = tokenize(text);
    std::vector<std::string> lemmas;
    lemmas.reserve(raw.size());
    for (const std::string& t : raw) lemmas.push_back(lemmatize(t));
    for (const Pattern& p : patterns_) {
        if (pattern_hits(p, raw, lemmas)) return true;
    }
    return false;
}

std::vector<std::string> match_text(std::string_view text, const KeywordLexicon& lexicon) {
    return KeywordMatcher(lexicon).match(text);
}

// ---- strategies ----

std::string to_string(Strategy s) {
    switch (s) {
        case Strategy::all_notes: return "s1";
        case Strategy::keyword_notes: return "s2";
        default: return "s3";
    }
}

Strategy strategy_from_string(std::string_view s) {
    if (s == "s1") return Strategy::all_notes;
    if (s == "s2") return Strategy::keyword_notes;
    if (s == "s3") return Strategy::keyword_sentences;
    throw DataError("unknown strategy \"" + std::string(s) + "\" (expected s1, s2 or s3)");
}

std::vector<DocumentUnit> apply_strategy(const std::vector<NoteRecord>& notes,
                                         const KeywordLexicon& lexicon, Strategy strategy,
                                         const AbbreviationSet& abbreviations) {
    std::vector<DocumentUnit> units;
    if (strategy == Strategy::all_notes) {
        for (const NoteRecord& note : notes) {
            units.push_back({note.note_id, note.patient_id, note.note_id, std::nullopt,
                             note.text, strategy});
        }
        return units;
    }

    KeywordMatcher matcher(lexicon);
    if (matcher.empty()) {
        throw DataError("strategy " + to_string(strategy) + " needs a non-empty lexicon");
    }
    if (strategy == Strategy::keyword_notes) {
        for (const NoteRecord& note : notes) {
            if (!matcher.any_match(note.text)) continue;
            units.push_back({note.note_id, note.patient_id, note.note_id, std::nullopt,
                             note.text, strategy});
        }
        return units;
    }

    for (const NoteRecord& note : notes) {
        for (const Sentence& sentence : segment_sentences(note, abbreviations)) {
            if (!matcher.any_match(sentence.text)) continue;
            units.push_back({note.note_id + "#" + std::to_string(sentence.index),
                             note.patient_id, note.note_id, sentence.index, sentence.text,
                             strategy});
        }
    }
    return units;
}

std::vector<DocumentUnit> apply_strategy(const std::vector<NoteRecord>& notes,
                                         const KeywordLexicon& lexicon, Strategy strategy) {
    return apply_strategy(notes, lexicon, strategy, AbbreviationSet::bundled());
}

// ---- unit files ----

void save_units(const std::vector<DocumentUnit>& units, const std::filesystem::path& path) {
    std::ostringstream out;
    for (const DocumentUnit& u : units) {
        nlohmann::json obj;
        obj["unit_id"] = u.unit_id;
        obj["patient_id"] = u.patient_id;
        obj["note_id"] = u.note_id;
        if (u.sentence_index) obj["sentence_index"] = *u.sentence_index;
        obj["strategy"] = to_string(u.strategy);
        obj["text"] = u.text;
        out << obj.dump() << "\n";
    }
    write_file(path, out.str());
}

std::vector<DocumentUnit> load_units(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot read units file: " + path.string());
    std::vector<DocumentUnit> units;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim_view(line).empty()) continue;
        nlohmann::json obj = nlohmann::json::parse(line, nullptr, false);
        if (obj.is_discarded() || !obj.is_object()) {
            throw DataError("units file line " + std::to_string(line_no) + " is malformed");
        }
        DocumentUnit u;
        try {
            u.unit_id = obj.at("unit_id").get<std::string>();
            u.patient_id = obj.at("patient_id").get<std::string>();
            u.note_id = obj.at("note_id").get<std::string>();
            u.strategy = strategy_from_string(obj.at("strategy").get<std::string>());
            if (obj.contains("sentence_index")) {
                u.sentence_index = obj["sentence_index"].get<std::size_t>();
            }
            if (obj.contains("text")) u.text = obj["text"].get<std::string>();
        } catch (const nlohmann::json::exception& e) {
            throw DataError("units file line " + std::to_string(line_no) + ": " + e.what());
        }
        units.push_back(std::move(u));
    }
    return units;
}

}  // namespace notetopics
