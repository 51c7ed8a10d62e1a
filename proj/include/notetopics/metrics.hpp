#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "notetopics/common.hpp"
#include "notetopics/lda.hpp"
#include "notetopics/textprep.hpp"

namespace notetopics {

// ---- metric cores over explicit top-word id lists ----

// |A ∩ B| / |A ∪ B| over two id sets (given as lists of distinct ids).
double jaccard_index(const std::vector<std::uint32_t>& a, const std::vector<std::uint32_t>& b);

// Mean pairwise Jaccard over all unordered topic pairs. Needs >= 2 lists.
double mean_pairwise_jaccard(const std::vector<std::vector<std::uint32_t>>& top_words);

// |union of all lists| / (K * top_n); every list must have top_n entries.
double diversity_of(const std::vector<std::vector<std::uint32_t>>& top_words,
                    std::size_t top_n);

// UMass: for ordered top words w_1..w_N of one topic,
//   sum_{i=2..N} sum_{j<i} log((D(w_i, w_j) + 1) / D(w_j))
// with D the (co-)document frequencies of the training matrix.
std::vector<double> umass_per_topic(const std::vector<std::vector<std::uint32_t>>& top_words,
                                    const DocTermMatrix& matrix);

// ---- model-level wrappers ----

std::vector<std::vector<std::uint32_t>> model_top_words(const LdaModel& model,
                                                        std::size_t top_n);

struct CoherenceResult {
    std::vector<double> per_topic;
    double mean = 0.0;
};

CoherenceResult umass_coherence(const LdaModel& model, const DocTermMatrix& matrix,
                                std::size_t top_n = 10);
double jaccard_topic_similarity(const LdaModel& model, std::size_t top_n = 10);
double topic_diversity(const LdaModel& model, std::size_t top_n = 25);

// ---- K sweep ----

struct TopicEvaluation {
    std::uint32_t num_topics = 0;
    double coherence = 0.0;   // mean UMass, higher is better
    double similarity = 0.0;  // mean pairwise Jaccard, lower is better
    double diversity = 0.0;   // unique fraction of top words, higher is better
    std::vector<double> per_topic_coherence;
};

struct SweepReport {
    std::vector<TopicEvaluation> evaluations;  // ascending K
    std::vector<double> composite;             // aligned with evaluations
    std::uint32_t selected_k = 0;
};

// z(coherence) + z(diversity) - z(similarity) across the swept K values;
// a zero-variance metric contributes nothing.
std::vector<double> composite_scores(const std::vector<TopicEvaluation>& evaluations);

// argmax of the composite; ties go to the smallest K.
std::uint32_t select_k(const std::vector<TopicEvaluation>& evaluations);

std::uint64_t sweep_seed(std::uint64_t base_seed, std::uint32_t k);

struct SweepOptions {
    std::size_t metric_top_n = 10;     // coherence and similarity
    std::size_t diversity_top_n = 25;
    bool parallel = true;
};

struct SweepResult {
    SweepReport report;
    std::vector<LdaModel> models;  // aligned with report.evaluations
};

// Trains one model per K in [k_min, k_max]; per-K seeds derive from the
// base seed so runs are reproducible yet mutually independent.
SweepResult sweep_k(const DocTermMatrix& matrix, std::uint32_t k_min, std::uint32_t k_max,
                    const LdaConfig& base_config, std::uint64_t vocab_hash = 0,
                    const SweepOptions& options = {});

void write_sweep_tsv(const SweepReport& report, const std::filesystem::path& path);
void write_sweep_json(const SweepReport& report, const std::filesystem::path& path);

}  // namespace notetopics
