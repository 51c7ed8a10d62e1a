#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "notetopics/common.hpp"
#include "notetopics/textprep.hpp"

namespace notetopics {

struct LdaConfig {
    std::uint32_t num_topics = 0;     // K, >= 2
    double alpha = 0.0;               // symmetric document-topic prior, > 0
    double beta = 0.01;               // symmetric topic-word prior, > 0
    std::uint32_t passes = 10;        // full sweeps over the corpus, >= 1
    std::uint32_t burn_in = 0;        // sweeps excluded from posterior averaging
    bool average_posteriors = false;  // when set, phi/theta average post-burn-in sweeps
    std::uint64_t seed = 42;
};

// resolves alpha <= 0 to the 50/K default
LdaConfig resolve_config(LdaConfig config);
void validate_config(const LdaConfig& config);

// Collapsed Gibbs state. Count tables are the sufficient statistics;
// token_words/doc_offsets pin the resampling order (documents in matrix
// order, tokens in row order), which makes runs bit-reproducible.
struct LdaModel {
    LdaConfig config;
    std::uint32_t num_docs = 0;
    std::uint32_t vocab_size = 0;
    std::uint64_t total_tokens = 0;
    std::uint64_t vocab_hash = 0;

    std::vector<std::uint32_t> doc_offsets;  // num_docs + 1 prefix sums
    std::vector<std::uint32_t> token_words;  // flat word ids
    std::vector<std::uint16_t> assignments;  // flat topic ids

    std::vector<std::uint32_t> doc_topic;    // num_docs x K, row major (n_dk)
    std::vector<std::uint32_t> topic_word;   // K x vocab_size, row major (n_kw)
    std::vector<std::uint64_t> topic_total;  // K (n_k)

    // posterior-average accumulators, used only with average_posteriors
    std::vector<double> phi_accum;
    std::vector<double> theta_accum;
    std::uint32_t averaged_sweeps = 0;

    std::uint32_t doc_length(std::size_t d) const {
        return doc_offsets[d + 1] - doc_offsets[d];
    }
};

// p(z = k) for one token of word w in document d, with that token's counts
// already removed: (n_dk + alpha) * (n_kw + beta) / (n_k + V beta),
// normalized. doc_topic/word_topic/topic_totals are per-topic slices.
std::vector<double> conditional_topic_distribution(std::span<const std::uint32_t> doc_topic,
                                                   std::span<const std::uint32_t> word_topic,
                                                   std::span<const std::uint64_t> topic_totals,
                                                   double alpha, double beta,
                                                   std::uint32_t vocab_size);

using PassObserver = std::function<void(std::uint32_t pass, const LdaModel&)>;

// Seeded mt19937_64; assignments start uniform over K, then `passes` full
// Gibbs sweeps. Identical (matrix, config) give identical models.
LdaModel train(const DocTermMatrix& matrix, const LdaConfig& config,
               std::uint64_t vocab_hash = 0, const PassObserver& on_pass = {});

// Throws InternalError when any count identity is broken.
void verify_counts(const LdaModel& model);

struct DenseMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> values;  // row major

    double at(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
    std::span<const double> row(std::size_t r) const {
        return {values.data() + r * cols, cols};
    }
};

// (n_kw + beta) / (n_k + V beta); posterior average when enabled.
DenseMatrix phi(const LdaModel& model);
// (n_dk + alpha) / (len_d + K alpha); posterior average when enabled.
DenseMatrix theta(const LdaModel& model);

// Token log-likelihood under the smoothed point estimates.
double log_likelihood(const LdaModel& model);

// Word ids of the n largest entries of one phi row; ties resolve to the
// smaller word id.
std::vector<std::uint32_t> top_row_indices(std::span<const double> row, std::size_t n);

// Binary model file: magic, version, config, dimensions, vocab hash,
// token/count tables, trailing FNV-1a checksum.
void save_model(const LdaModel& model, const std::filesystem::path& path);
LdaModel load_model(const std::filesystem::path& path);

void export_phi_tsv(const LdaModel& model, const std::filesystem::path& path);
void export_theta_tsv(const LdaModel& model, std::span<const std::string> unit_ids,
                      const std::filesystem::path& path);

}  // namespace notetopics
