#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "notetopics/common.hpp"
#include "notetopics/corpus.hpp"
#include "notetopics/lda.hpp"
#include "notetopics/lexicon.hpp"

namespace notetopics {

struct WordWeight {
    std::string word;
    double weight = 0.0;
};

// n highest-phi words of one topic, ties broken by term id.
std::vector<WordWeight> top_words(const LdaModel& model, const Vocabulary& vocab,
                                  std::uint32_t topic_id, std::size_t n = 10);

using TopicLabels = std::map<std::uint32_t, std::string>;

// CSV `topic_id,label`. Labels are human annotations attached post hoc.
TopicLabels load_topic_labels(const std::filesystem::path& path);

// TSV, one row per topic: topic_id, label, then the n top words.
void write_top_words_tsv(const LdaModel& model, const Vocabulary& vocab, std::size_t n,
                         const TopicLabels& labels, const std::filesystem::path& path);

// CSV `word,topic_id,weight`; one record per (topic, top word), so a word
// shared by several topics appears once per topic.
void wordcloud_export(const LdaModel& model, const Vocabulary& vocab, std::size_t n,
                      const std::filesystem::path& path);

struct GroupTopicDistribution {
    std::string group;               // "female", "10-19", "out_of_range", ...
    std::vector<double> mean_theta;  // length K, sums to 1
    std::size_t unit_count = 0;
};

enum class StratifyAxis { sex, age };

struct AgeBin {
    int lower = 0;  // inclusive
    int upper = 0;  // exclusive, unless upper_inclusive
    bool upper_inclusive = false;
    std::string label;
};

// Eight decade bins: [10,20) ... [70,80), [80,90].
const std::vector<AgeBin>& default_age_bins();

inline constexpr const char* kOutOfRangeGroup = "out_of_range";
inline constexpr const char* kUnknownSexGroup = "unknown";

struct StratifyOptions {
    StratifyAxis axis = StratifyAxis::sex;
    std::optional<int> reference_year;        // required for birth_year demographics
    bool per_patient = false;                 // average within patient first
    std::vector<AgeBin> age_bins = default_age_bins();
};

struct StratifyResult {
    std::vector<GroupTopicDistribution> groups;  // fixed order, empty groups omitted
    std::size_t unresolved_units = 0;            // rows without unit or patient metadata
    std::vector<std::string> empty_groups;       // labels that attracted no units
};

// Groups theta rows by the patient attribute of each unit and averages them.
// theta row i corresponds to unit_ids[i]; units supply unit -> patient.
StratifyResult stratify(const DenseMatrix& theta, std::span<const std::string> unit_ids,
                        std::span<const DocumentUnit> units, const PatientTable& patients,
                        const StratifyOptions& options);

// TSV heatmap: rows = topics, columns = groups. The unknown-sex and
// out-of-range-age groups stay out of the figure export.
void heatmap_export(const std::vector<GroupTopicDistribution>& groups,
                    const TopicLabels& labels, const std::filesystem::path& path);

}  // namespace notetopics
