#include <doctest.h>

#include <algorithm>
#include <random>

#include "notetopics/textprep.hpp"
#include "support/testutil.hpp"

using namespace notetopics;
using testutil::TempDir;
using testutil::write_temp;

TEST_SUITE("textprep") {

TEST_CASE("tokenize lowercases and strips punctuation") {
    CHECK(tokenize("Denies DEPRESSION, anxiety.") ==
          std::vector<std::string>{"denies", "depression", "anxiety"});
}

TEST_CASE("tokenize drops digits as separators") {
    // letter-run rule applied by hand: "CD4" -> "cd", "250" vanishes
    CHECK(tokenize("CD4 count 250") == std::vector<std::string>{"cd", "count"});
}

TEST_CASE("tokenize empty and whitespace") {
    CHECK(tokenize("").empty());
    CHECK(tokenize("   \t\n 123 !!").empty());
}

TEST_CASE("tokenize keeps internal apostrophe and hyphen only") {
    CHECK(tokenize("self-image doesn't matter-") ==
          std::vector<std::string>{"self-image", "doesn't", "matter"});
    CHECK(tokenize("'quoted' --dashes--") == std::vector<std::string>{"quoted", "dashes"});
}

TEST_CASE("token grammar property: [a-z][a-z'-]* with internal marks") {
    std::mt19937_64 rng(7);
    const std::string alphabet = "abcXYZ 0123.,'-\n\xc3\xa9!";
    for (int trial = 0; trial < 200; ++trial) {
        std::string text;
        for (int i = 0; i < 60; ++i) text += alphabet[rng() % alphabet.size()];
        for (const std::string& token : tokenize(text)) {
            REQUIRE(!token.empty());
            CHECK(token.front() >= 'a');
            CHECK(token.front() <= 'z');
            CHECK(token.back() != '\'');
            CHECK(token.back() != '-');
            for (char c : token) {
                CHECK(((c >= 'a' && c <= 'z') || c == '\'' || c == '-'));
            }
        }
    }
}

TEST_CASE("bundled stopword list covers the classic function words") {
    const StopwordSet& stops = StopwordSet::bundled();
    CHECK(stops.contains("the"));
    CHECK(stops.contains("is"));
    CHECK(stops.contains("of"));
    CHECK(stops.size() >= 130);
    CHECK(!stops.contains("patient"));
    CHECK(!stops.contains("denies"));
}

TEST_CASE("remove_stopwords filters in order") {
    std::vector<std::string> tokens = {"the", "patient", "is", "anxious"};
    CHECK(remove_stopwords(tokens, StopwordSet::bundled()) ==
          std::vector<std::string>{"patient", "anxious"});
    CHECK(remove_stopwords({}, StopwordSet::bundled()).empty());
    std::vector<std::string> clean = {"patient", "anxious"};
    CHECK(remove_stopwords(clean, StopwordSet::bundled()) == clean);
}

TEST_CASE("stopword override file") {
    TempDir dir("stops");
    auto path = write_temp(dir, "stop.txt", "# custom list\nfoo\nBAR\n");
    StopwordSet set = StopwordSet::from_file(path);
    CHECK(set.contains("foo"));
    CHECK(set.contains("bar"));
    CHECK(!set.contains("the"));
}

TEST_CASE("lemmatizer: rule and exception spot checks") {
    CHECK(lemmatize("denies") == "deny");   // ies -> y
    CHECK(lemmatize("feet") == "foot");     // exception lexicon
    CHECK(lemmatize("hiv") == "hiv");       // no rule applies
    CHECK(lemmatize("notes") == "note");
    CHECK(lemmatize("boxes") == "box");
    CHECK(lemmatize("symptoms") == "symptom");
    CHECK(lemmatize("violated") == "violate");
    CHECK(lemmatize("missed") == "miss");
    CHECK(lemmatize("feeling") == "feel");
    CHECK(lemmatize("running") == "run");
    CHECK(lemmatize("taking") == "take");
    CHECK(lemmatize("abuses") == "abuse");
    CHECK(lemmatize("abused") == "abuse");
    CHECK(lemmatize("status") == "status");
    CHECK(lemmatize("illness") == "illness");
    CHECK(lemmatize("diagnosis") == "diagnosis");
    CHECK(lemmatize("aids") == "aids");
    CHECK(lemmatize("isolated") == "isolate");
    CHECK(lemmatize("refused") == "refuse");
}

TEST_CASE("lemmatizer is idempotent") {
    // every spot-check word, plus random letter strings
    std::vector<std::string> words = {"denies", "feet",    "hiv",     "notes",  "boxes",
                                      "missed", "feeling", "running", "taking", "abused",
                                      "cries",  "studies", "walking", "hoped",  "stopped"};
    std::mt19937_64 rng(11);
    for (int i = 0; i < 500; ++i) {
        std::string w;
        int len = 1 + static_cast<int>(rng() % 10);
        for (int j = 0; j < len; ++j) w += static_cast<char>('a' + rng() % 26);
        words.push_back(w);
    }
    for (const std::string& w : words) {
        std::string once = lemmatize(w);
        CHECK(lemmatize(once) == once);
        CHECK(once.size() <= w.size() + 1);  // rules never grow a token by more than the e
    }
}

TEST_CASE("normalization is deterministic and never emits stopwords") {
    const StopwordSet& stops = StopwordSet::bundled();
    std::string text = "The patient DENIES using drugs; reports 2 falls. Having isolation fears!";
    TokenStream a = normalize_unit("u", text, stops);
    TokenStream b = normalize_unit("u", text, stops);
    CHECK(a.tokens == b.tokens);
    for (const std::string& t : a.tokens) CHECK(!stops.contains(t));
    // "having" -> stopword before lemmatization; "using" -> "use" survives
    CHECK(std::count(a.tokens.begin(), a.tokens.end(), "use") == 1);
    CHECK(std::count(a.tokens.begin(), a.tokens.end(), "deny") == 1);
    CHECK(std::count(a.tokens.begin(), a.tokens.end(), "fall") == 1);
}

static std::vector<TokenStream> streams_fixture() {
    // df(common)=3, df(rare)=1, df(everywhere)=4 of 4 docs
    return {
        {"u0", {"common", "everywhere", "deny"}},
        {"u1", {"common", "everywhere", "fear"}},
        {"u2", {"common", "everywhere", "fear", "fear"}},
        {"u3", {"everywhere", "rare"}},
    };
}

TEST_CASE("vocabulary pruning by document frequency") {
    // df: common 3, everywhere 4, deny 1, fear 2, rare 1; N = 4
    auto vocab = build_vocabulary(streams_fixture(), 2, 0.8);
    CHECK(vocab.terms == std::vector<std::string>{"common", "fear"});
    CHECK(vocab.doc_freq == std::vector<std::uint32_t>{3, 2});
}

TEST_CASE("vocabulary bounds are inclusive") {
    std::vector<TokenStream> streams;
    for (int d = 0; d < 10; ++d) {
        TokenStream s{"u" + std::to_string(d), {}};
        if (d < 5) s.tokens.push_back("athalf");    // df 5 = 0.5 * 10 exactly
        if (d < 6) s.tokens.push_back("overhalf");  // df 6 > 5
        if (d < 2) s.tokens.push_back("attwo");     // df 2 = min_df exactly
        s.tokens.push_back("filler" + std::to_string(d));
        streams.push_back(s);
    }
    auto vocab = build_vocabulary(streams, 2, 0.5);
    CHECK(vocab.term_to_id.count("athalf"));
    CHECK(vocab.term_to_id.count("attwo"));
    CHECK(!vocab.term_to_id.count("overhalf"));
    CHECK(!vocab.term_to_id.count("filler0"));
}

TEST_CASE("vocabulary ids are lexicographic and stable") {
    auto a = build_vocabulary(streams_fixture(), 1, 1.0);
    auto b = build_vocabulary(streams_fixture(), 1, 1.0);
    CHECK(a.terms == b.terms);
    CHECK(std::is_sorted(a.terms.begin(), a.terms.end()));
    for (std::size_t i = 0; i < a.terms.size(); ++i) {
        CHECK(a.term_to_id.at(a.terms[i]) == i);
        CHECK(a.doc_freq[i] >= 1);
    }
    CHECK(a.content_hash() == b.content_hash());
}

TEST_CASE("empty vocabulary after pruning is fatal") {
    std::vector<TokenStream> streams = {{"u0", {"once"}}, {"u1", {"twice"}}};
    CHECK_THROWS_AS(build_vocabulary(streams, 2, 0.5), DataError);
}

TEST_CASE("doc-term matrix counts and drops") {
    Vocabulary vocab = build_vocabulary({{"a", {"deny", "fear"}}, {"b", {"deny", "fear"}}}, 1, 1.0);
    REQUIRE(vocab.terms == std::vector<std::string>{"deny", "fear"});

    std::vector<TokenStream> streams = {{"u0", {"deny", "deny", "fear"}},
                                        {"u1", {"oov", "words"}},
                                        {"u2", {"deny", "deny", "fear"}}};
    DocTermMatrix matrix = to_doc_term_matrix(streams, vocab);
    REQUIRE(matrix.num_docs() == 2);
    CHECK(matrix.rows[0] == std::vector<SparseCount>{{0, 2}, {1, 1}});
    CHECK(matrix.rows[1] == matrix.rows[0]);  // identical streams, no cross-unit dedup
    CHECK(matrix.dropped_units == std::vector<std::string>{"u1"});
    CHECK(matrix.total_tokens == 6);
}

TEST_CASE("matrix conservation: row sums equal in-vocabulary stream lengths") {
    auto streams = streams_fixture();
    auto vocab = build_vocabulary(streams, 1, 1.0);
    auto matrix = to_doc_term_matrix(streams, vocab);
    REQUIRE(matrix.num_docs() == streams.size());
    std::uint64_t total = 0;
    for (std::size_t d = 0; d < matrix.num_docs(); ++d) {
        std::size_t in_vocab = 0;
        for (const auto& t : streams[d].tokens) in_vocab += vocab.term_to_id.count(t);
        CHECK(matrix.row_sum(d) == in_vocab);
        total += matrix.row_sum(d);
    }
    CHECK(total == matrix.total_tokens);
}

TEST_CASE("matrix file round-trip") {
    TempDir dir("dtm");
    auto streams = streams_fixture();
    auto vocab = build_vocabulary(streams, 1, 1.0);
    auto matrix = to_doc_term_matrix(streams, vocab);
    save_matrix(matrix, vocab, dir.file("m.dtm"));

    auto [loaded, loaded_vocab] = load_matrix(dir.file("m.dtm"));
    CHECK(loaded_vocab.terms == vocab.terms);
    CHECK(loaded_vocab.doc_freq == vocab.doc_freq);
    CHECK(loaded.unit_ids == matrix.unit_ids);
    CHECK(loaded.total_tokens == matrix.total_tokens);
    REQUIRE(loaded.rows.size() == matrix.rows.size());
    for (std::size_t d = 0; d < matrix.rows.size(); ++d) CHECK(loaded.rows[d] == matrix.rows[d]);
    CHECK(loaded_vocab.content_hash() == vocab.content_hash());

    CHECK_THROWS_AS(load_matrix(dir.file("missing.dtm")), DataError);
    write_temp(dir, "bad.dtm", "ntdtm\t9\n");
    CHECK_THROWS_AS(load_matrix(dir.file("bad.dtm")), DataError);
}

}  // TEST_SUITE
