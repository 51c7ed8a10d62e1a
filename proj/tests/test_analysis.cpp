#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "notetopics/analysis.hpp"
#include "support/testutil.hpp"

using namespace notetopics;
using testutil::TempDir;
using testutil::write_temp;

namespace {

Vocabulary make_vocab(std::vector<std::string> terms) {
    Vocabulary v;
    for (auto& t : terms) {
        v.term_to_id.emplace(t, static_cast<std::uint32_t>(v.terms.size()));
        v.terms.push_back(std::move(t));
        v.doc_freq.push_back(1);
    }
    return v;
}

// model whose phi rows are exactly proportional to the given counts
LdaModel model_from_counts(const std::vector<std::vector<std::uint32_t>>& counts,
                           double beta = 1e-9) {
    LdaModel m;
    m.config.num_topics = static_cast<std::uint32_t>(counts.size());
    m.config.alpha = 0.5;
    m.config.beta = beta;
    m.vocab_size = static_cast<std::uint32_t>(counts[0].size());
    m.topic_total.assign(counts.size(), 0);
    for (const auto& row : counts) {
        for (std::uint32_t c : row) {
            m.topic_word.push_back(c);
            m.topic_total[&row - &counts[0]] += c;
        }
    }
    m.num_docs = 1;
    m.doc_offsets = {0, 0};
    m.doc_topic.assign(m.config.num_topics, 0);
    m.total_tokens = 0;
    return m;
}

DenseMatrix theta_rows(const std::vector<std::vector<double>>& rows) {
    DenseMatrix t;
    t.rows = rows.size();
    t.cols = rows[0].size();
    for (const auto& r : rows) t.values.insert(t.values.end(), r.begin(), r.end());
    return t;
}

std::vector<std::string> ids_for(std::size_t n) {
    std::vector<std::string> ids;
    for (std::size_t i = 0; i < n; ++i) ids.push_back("u" + std::to_string(i));
    return ids;
}

DocumentUnit unit_of(const std::string& unit_id, const std::string& patient) {
    return {unit_id, patient, unit_id, std::nullopt, "", Strategy::all_notes};
}

PatientTable patients_with_ages(const std::vector<std::pair<std::string, int>>& ages,
                                const std::vector<std::pair<std::string, Sex>>& sexes = {}) {
    PatientTable table;
    for (const auto& [id, age] : ages) {
        PatientRecord rec;
        rec.patient_id = id;
        rec.sex = Sex::female;
        rec.age_years = age;
        for (const auto& [sid, sex] : sexes) {
            if (sid == id) rec.sex = sex;
        }
        table.by_id.emplace(id, table.rows.size());
        table.rows.push_back(rec);
    }
    return table;
}

}  // namespace

TEST_SUITE("analysis") {

TEST_CASE("top_words sorts by weight and breaks ties by term id") {
    LdaModel m = model_from_counts({{5, 3, 2}});
    Vocabulary vocab = make_vocab({"alpha", "beta", "gamma"});
    auto top2 = top_words(m, vocab, 0, 2);
    REQUIRE(top2.size() == 2);
    CHECK(top2[0].word == "alpha");
    CHECK(top2[1].word == "beta");
    DenseMatrix p = phi(m);
    CHECK(top2[0].weight == doctest::Approx(p.at(0, 0)).epsilon(1e-15));
    CHECK(top2[1].weight == doctest::Approx(p.at(0, 1)).epsilon(1e-15));

    LdaModel uniform = model_from_counts({{0, 0, 0}});
    auto top3 = top_words(uniform, vocab, 0, 3);
    CHECK(top3[0].word == "alpha");
    CHECK(top3[1].word == "beta");
    CHECK(top3[2].word == "gamma");

    CHECK_THROWS_AS(top_words(m, vocab, 0, 4), DataError);
    CHECK_THROWS_AS(top_words(m, vocab, 7, 2), DataError);
}

TEST_CASE("top_words matches a full-sort oracle on random weights") {
    std::mt19937_64 rng(19);
    std::vector<std::vector<std::uint32_t>> counts(1, std::vector<std::uint32_t>(15));
    std::vector<std::string> names;
    for (std::size_t w = 0; w < 15; ++w) {
        counts[0][w] = static_cast<std::uint32_t>(rng() % 50);
        names.push_back("w" + std::to_string(w / 10) + std::to_string(w % 10));
    }
    LdaModel m = model_from_counts(counts);
    Vocabulary vocab = make_vocab(names);
    auto got = top_words(m, vocab, 0, 6);

    DenseMatrix p = phi(m);
    std::vector<std::uint32_t> order(15);
    std::iota(order.begin(), order.end(), 0u);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::uint32_t a, std::uint32_t b) { return p.at(0, a) > p.at(0, b); });
    for (std::size_t i = 0; i < got.size(); ++i) {
        CHECK(got[i].word == vocab.terms[order[i]]);
    }
}

TEST_CASE("top_words is permutation equivariant") {
    std::vector<std::vector<std::uint32_t>> counts = {{9, 1, 0, 4}, {0, 7, 2, 1}};
    Vocabulary vocab = make_vocab({"a", "b", "c", "d"});
    LdaModel m = model_from_counts(counts);
    LdaModel swapped = model_from_counts({counts[1], counts[0]});
    for (std::size_t n = 1; n <= 4; ++n) {
        auto t0 = top_words(m, vocab, 0, n);
        auto t1 = top_words(m, vocab, 1, n);
        auto s0 = top_words(swapped, vocab, 0, n);
        auto s1 = top_words(swapped, vocab, 1, n);
        for (std::size_t i = 0; i < n; ++i) {
            CHECK(t0[i].word == s1[i].word);
            CHECK(t1[i].word == s0[i].word);
        }
    }
}

TEST_CASE("wordcloud export: one record per topic and top word") {
    TempDir dir("cloud");
    LdaModel m = model_from_counts({{5, 3, 2, 0}, {0, 1, 7, 2}});
    Vocabulary vocab = make_vocab({"fear", "food", "pain", "rent"});
    wordcloud_export(m, vocab, 1, dir.file("wc1.csv"));
    std::string one = read_file(dir.file("wc1.csv"));
    CHECK(std::count(one.begin(), one.end(), '\n') == 3);  // header + K records

    wordcloud_export(m, vocab, 3, dir.file("wc.csv"));
    std::istringstream in(read_file(dir.file("wc.csv")));
    std::string line;
    std::getline(in, line);
    CHECK(line == "word,topic_id,weight");
    DenseMatrix p = phi(m);
    std::size_t records = 0;
    while (std::getline(in, line)) {
        auto fields = split_csv_line(line);
        REQUIRE(fields.size() == 3);
        std::uint32_t topic = static_cast<std::uint32_t>(std::stoul(fields[1]));
        std::uint32_t word = vocab.term_to_id.at(fields[0]);
        CHECK(fields[2] == format_double(p.at(topic, word), 9));
        ++records;
    }
    CHECK(records == 2 * 3);  // K * n, duplicates across topics allowed
}

TEST_CASE("stratify: two units in one group average their rows") {
    DenseMatrix t = theta_rows({{1.0, 0.0}, {0.0, 1.0}});
    std::vector<DocumentUnit> units = {unit_of("u0", "p0"), unit_of("u1", "p0")};
    PatientTable patients = patients_with_ages({{"p0", 30}});
    StratifyOptions options;
    options.axis = StratifyAxis::sex;
    auto result = stratify(t, ids_for(2), units, patients, options);
    REQUIRE(result.groups.size() == 1);
    CHECK(result.groups[0].group == "female");
    CHECK(result.groups[0].unit_count == 2);
    CHECK(result.groups[0].mean_theta[0] == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(result.groups[0].mean_theta[1] == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("stratify: single-group partition equals the global mean") {
    std::mt19937_64 rng(43);
    std::vector<std::vector<double>> rows;
    for (int i = 0; i < 12; ++i) {
        double a = (rng() % 1000) / 1000.0;
        rows.push_back({a, 1.0 - a});
    }
    DenseMatrix t = theta_rows(rows);
    std::vector<DocumentUnit> units;
    for (int i = 0; i < 12; ++i) units.push_back(unit_of("u" + std::to_string(i), "p0"));
    PatientTable patients = patients_with_ages({{"p0", 40}});
    StratifyOptions options;
    auto result = stratify(t, ids_for(12), units, patients, options);
    REQUIRE(result.groups.size() == 1);
    double mean0 = 0.0;
    for (const auto& r : rows) mean0 += r[0];
    mean0 /= 12.0;
    CHECK(result.groups[0].mean_theta[0] == doctest::Approx(mean0).epsilon(1e-12));
}

TEST_CASE("stratify matches a brute-force groupby oracle") {
    std::mt19937_64 rng(47);
    const std::size_t k_count = 4, n_units = 60;
    std::vector<std::vector<double>> rows;
    std::vector<DocumentUnit> units;
    std::vector<std::pair<std::string, Sex>> sexes = {
        {"pf", Sex::female}, {"pm", Sex::male}, {"pu", Sex::unknown}};
    std::vector<std::string> patient_of_unit;
    for (std::size_t i = 0; i < n_units; ++i) {
        std::vector<double> row(k_count);
        double total = 0.0;
        for (double& x : row) {
            x = 0.05 + (rng() % 1000) / 1000.0;
            total += x;
        }
        for (double& x : row) x /= total;
        rows.push_back(row);
        std::string patient = sexes[rng() % 3].first;
        patient_of_unit.push_back(patient);
        units.push_back(unit_of("u" + std::to_string(i), patient));
    }
    DenseMatrix t = theta_rows(rows);
    PatientTable patients =
        patients_with_ages({{"pf", 30}, {"pm", 40}, {"pu", 50}}, sexes);
    StratifyOptions options;
    auto result = stratify(t, ids_for(n_units), units, patients, options);

    // oracle: independent groupby accumulation
    std::map<std::string, std::pair<std::vector<double>, std::size_t>> oracle;
    for (std::size_t i = 0; i < n_units; ++i) {
        Sex sex = patients.find(patient_of_unit[i])->sex;
        std::string group = sex == Sex::unknown ? kUnknownSexGroup : to_string(sex);
        auto& slot = oracle[group];
        if (slot.first.empty()) slot.first.assign(k_count, 0.0);
        for (std::size_t k = 0; k < k_count; ++k) slot.first[k] += rows[i][k];
        ++slot.second;
    }
    REQUIRE(result.groups.size() == oracle.size());
    std::vector<double> weighted(k_count, 0.0);
    std::size_t total_units = 0;
    for (const auto& g : result.groups) {
        const auto& slot = oracle.at(g.group);
        CHECK(g.unit_count == slot.second);
        double row_sum = 0.0;
        for (std::size_t k = 0; k < k_count; ++k) {
            CHECK(g.mean_theta[k] ==
                  doctest::Approx(slot.first[k] / slot.second).epsilon(1e-12));
            weighted[k] += g.mean_theta[k] * static_cast<double>(g.unit_count);
            row_sum += g.mean_theta[k];
        }
        CHECK(row_sum == doctest::Approx(1.0).epsilon(1e-9));
        total_units += g.unit_count;
    }
    // unit-count-weighted means over the complete partition = global mean
    CHECK(total_units == n_units);
    for (std::size_t k = 0; k < k_count; ++k) {
        double global = 0.0;
        for (const auto& r : rows) global += r[k];
        global /= static_cast<double>(n_units);
        CHECK(weighted[k] / static_cast<double>(n_units) ==
              doctest::Approx(global).epsilon(1e-9));
    }
}

TEST_CASE("age bins partition 10..90 with the stated boundaries") {
    std::vector<std::pair<std::string, int>> ages = {
        {"p10", 10}, {"p19", 19}, {"p20", 20}, {"p89", 89}, {"p90", 90},
        {"p9", 9},   {"p91", 91},
    };
    std::vector<std::vector<double>> rows(ages.size(), {1.0});
    std::vector<DocumentUnit> units;
    std::vector<std::string> ids;
    for (std::size_t i = 0; i < ages.size(); ++i) {
        ids.push_back("u" + std::to_string(i));
        units.push_back(unit_of(ids[i], ages[i].first));
    }
    DenseMatrix t = theta_rows(rows);
    PatientTable patients = patients_with_ages(ages);
    StratifyOptions options;
    options.axis = StratifyAxis::age;
    auto result = stratify(t, ids, units, patients, options);

    std::map<std::string, std::size_t> counts;
    for (const auto& g : result.groups) counts[g.group] = g.unit_count;
    CHECK(counts["10-19"] == 2);  // ages 10 and 19
    CHECK(counts["20-29"] == 1);  // age 20
    CHECK(counts["80-90"] == 2);  // ages 89 and 90
    CHECK(counts[kOutOfRangeGroup] == 2);  // ages 9 and 91
    // empty decade bins are omitted but reported
    CHECK(!counts.count("30-39"));
    CHECK(std::find(result.empty_groups.begin(), result.empty_groups.end(), "30-39") !=
          result.empty_groups.end());
}

TEST_CASE("stratify counts unresolved units and can fail entirely") {
    DenseMatrix t = theta_rows({{0.5, 0.5}, {0.5, 0.5}});
    std::vector<DocumentUnit> units = {unit_of("u0", "p0"), unit_of("u1", "ghost")};
    PatientTable patients = patients_with_ages({{"p0", 30}});
    StratifyOptions options;
    auto result = stratify(t, ids_for(2), units, patients, options);
    CHECK(result.unresolved_units == 1);
    REQUIRE(result.groups.size() == 1);
    CHECK(result.groups[0].unit_count == 1);

    PatientTable empty;
    CHECK_THROWS_AS(stratify(t, ids_for(2), units, empty, options), DataError);
}

TEST_CASE("per-patient averaging weighs each patient once") {
    DenseMatrix t = theta_rows({{1.0, 0.0}, {1.0, 0.0}, {0.0, 1.0}});
    std::vector<DocumentUnit> units = {unit_of("u0", "pa"), unit_of("u1", "pa"),
                                       unit_of("u2", "pb")};
    PatientTable patients = patients_with_ages({{"pa", 30}, {"pb", 40}});
    StratifyOptions options;
    auto per_unit = stratify(t, ids_for(3), units, patients, options);
    REQUIRE(per_unit.groups.size() == 1);
    CHECK(per_unit.groups[0].mean_theta[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-12));

    options.per_patient = true;
    auto per_patient = stratify(t, ids_for(3), units, patients, options);
    REQUIRE(per_patient.groups.size() == 1);
    CHECK(per_patient.groups[0].mean_theta[0] == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("heatmap export shape, values and special-group exclusion") {
    TempDir dir("heat");
    std::vector<GroupTopicDistribution> groups = {
        {"female", {0.6, 0.3, 0.1}, 4},
        {"male", {0.2, 0.5, 0.3}, 6},
        {kUnknownSexGroup, {0.9, 0.05, 0.05}, 1},
    };
    TopicLabels labels = {{0, "Mood"}, {2, "Access"}};
    heatmap_export(groups, labels, dir.file("heat.tsv"));

    std::istringstream in(read_file(dir.file("heat.tsv")));
    std::string line;
    std::getline(in, line);
    CHECK(line == "topic\tfemale\tmale");  // unknown stays out of the figure
    std::vector<std::string> rows;
    while (std::getline(in, line)) rows.push_back(line);
    REQUIRE(rows.size() == 3);
    CHECK(rows[0] == "Mood\t0.6\t0.2");
    CHECK(rows[1] == "topic_1\t0.3\t0.5");
    CHECK(rows[2] == "Access\t0.1\t0.3");

    // column sums of the exported groups are 1 (row-stochastic means)
    double female_sum = 0.6 + 0.3 + 0.1, male_sum = 0.2 + 0.5 + 0.3;
    CHECK(female_sum == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(male_sum == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("topic label file") {
    TempDir dir("labels");
    auto path = write_temp(dir, "labels.csv",
                           "topic_id,label\n0,Mental Health\n2,\"Access, Limited\"\n");
    TopicLabels labels = load_topic_labels(path);
    REQUIRE(labels.size() == 2);
    CHECK(labels.at(0) == "Mental Health");
    CHECK(labels.at(2) == "Access, Limited");
    CHECK_THROWS_AS(load_topic_labels(write_temp(dir, "bad.csv", "x,y,z\n")), DataError);
}

}  // TEST_SUITE
