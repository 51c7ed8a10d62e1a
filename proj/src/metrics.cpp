#include "notetopics/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <set>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

namespace notetopics {

double jaccard_index(const std::vector<std::uint32_t>& a, const std::vector<std::uint32_t>& b) {
    std::set<std::uint32_t> sa(a.begin(), a.end());
    std::set<std::uint32_t> sb(b.begin(), b.end());
    std::size_t intersection = 0;
    for (std::uint32_t x : sa) intersection += sb.count(x);
    std::size_t unioned = sa.size() + sb.size() - intersection;
    if (unioned == 0) throw InternalError("jaccard of two empty sets");
    return static_cast<double>(intersection) / static_cast<double>(unioned);
}

double mean_pairwise_jaccard(const std::vector<std::vector<std::uint32_t>>& top_words) {
    const std::size_t k_count = top_words.size();
    if (k_count < 2) throw DataError("topic similarity needs at least 2 topics");
    double sum = 0.0;
    std::size_t pairs = 0;
    for (std::size_t i = 0; i < k_count; ++i) {
        for (std::size_t j = i + 1; j < k_count; ++j) {
            sum += jaccard_index(top_words[i], top_words[j]);
            ++pairs;
        }
    }
    return sum / static_cast<double>(pairs);
}

double diversity_of(const std::vector<std::vector<std::uint32_t>>& top_words,
                    std::size_t top_n) {
    if (top_words.empty()) throw DataError("topic diversity needs at least 1 topic");
    std::set<std::uint32_t> unioned;
    for (const auto& list : top_words) {
        if (list.size() != top_n) {
            throw InternalError("diversity: top list size does not match top_n");
        }
        unioned.insert(list.begin(), list.end());
    }
    return static_cast<double>(unioned.size()) /
           static_cast<double>(top_words.size() * top_n);
}

std::vector<double> umass_per_topic(const std::vector<std::vector<std::uint32_t>>& top_words,
                                    const DocTermMatrix& matrix) {
    // doc-id lists for every word referenced by any top list
    std::unordered_map<std::uint32_t, std::vector<std::uint32_t>> docs_with;
    for (const auto& list : top_words) {
        for (std::uint32_t w : list) docs_with.emplace(w, std::vector<std::uint32_t>{});
    }
    for (std::size_t d = 0; d < matrix.num_docs(); ++d) {
        for (const SparseCount& c : matrix.rows[d]) {
            auto it = docs_with.find(c.term_id);
            if (it != docs_with.end()) it->second.push_back(static_cast<std::uint32_t>(d));
        }
    }

    auto co_count = [](const std::vector<std::uint32_t>& a, const std::vector<std::uint32_t>& b) {
        std::size_t i = 0, j = 0, n = 0;
        while (i < a.size() && j < b.size()) {
            if (a[i] == b[j]) ++n, ++i, ++j;
            else if (a[i] < b[j]) ++i;
            else ++j;
        }
        return n;
    };

    std::vector<double> scores;
    scores.reserve(top_words.size());
    for (const auto& list : top_words) {
        double score = 0.0;
        for (std::size_t i = 1; i < list.size(); ++i) {
            const auto& docs_i = docs_with.at(list[i]);
            for (std::size_t j = 0; j < i; ++j) {
                const auto& docs_j = docs_with.at(list[j]);
                if (docs_j.empty()) {
                    throw InternalError("coherence: top word has zero document frequency");
                }
                const std::size_t co = co_count(docs_i, docs_j);
                score += std::log((static_cast<double>(co) + 1.0) /
                                  static_cast<double>(docs_j.size()));
            }
        }
        scores.push_back(score);
    }
    return scores;
}

std::vector<std::vector<std::uint32_t>> model_top_words(const LdaModel& model,
                                                        std::size_t top_n) {
    const DenseMatrix phi_hat = phi(model);
    std::vector<std::vector<std::uint32_t>> tops;
    tops.reserve(phi_hat.rows);
    for (std::size_t k = 0; k < phi_hat.rows; ++k) {
        tops.push_back(top_row_indices(phi_hat.row(k), top_n));
    }
    return tops;
}

CoherenceResult umass_coherence(const LdaModel& model, const DocTermMatrix& matrix,
                                std::size_t top_n) {
    CoherenceResult result;
    result.per_topic = umass_per_topic(model_top_words(model, top_n), matrix);
    double sum = 0.0;
    for (double s : result.per_topic) sum += s;
    result.mean = sum / static_cast<double>(result.per_topic.size());
    return result;
}

double jaccard_topic_similarity(const LdaModel& model, std::size_t top_n) {
    if (model.config.num_topics < 2) {
        throw DataError("topic similarity needs at least 2 topics");
    }
    return mean_pairwise_jaccard(model_top_words(model, top_n));
}

double topic_diversity(const LdaModel& model, std::size_t top_n) {
    if (model.vocab_size < top_n) {
        throw DataError("topic diversity: vocabulary smaller than top_n=" +
                        std::to_string(top_n) + "; pass a smaller --diversity-top-n");
    }
    return diversity_of(model_top_words(model, top_n), top_n);
}

// ---- sweep ----

namespace {

std::vector<double> standard_scores(const std::vector<double>& values) {
    const double n = static_cast<double>(values.size());
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= n;
    double variance = 0.0;
    for (double v : values) variance += (v - mean) * (v - mean);
    variance /= n;
    const double sd = std::sqrt(variance);
    std::vector<double> z(values.size(), 0.0);
    if (sd > 0.0) {
        for (std::size_t i = 0; i < values.size(); ++i) z[i] = (values[i] - mean) / sd;
    }
    return z;
}

}  // namespace

std::vector<double> composite_scores(const std::vector<TopicEvaluation>& evaluations) {
    if (evaluations.empty()) throw DataError("empty sweep report");
    std::vector<double> coherence, similarity, diversity;
    for (const TopicEvaluation& e : evaluations) {
        coherence.push_back(e.coherence);
        similarity.push_back(e.similarity);
        diversity.push_back(e.diversity);
    }
    const auto z_coh = standard_scores(coherence);
    const auto z_sim = standard_scores(similarity);
    const auto z_div = standard_scores(diversity);
    std::vector<double> composite(evaluations.size());
    for (std::size_t i = 0; i < evaluations.size(); ++i) {
        composite[i] = z_coh[i] + z_div[i] - z_sim[i];
    }
    return composite;
}

std::uint32_t select_k(const std::vector<TopicEvaluation>& evaluations) {
    const std::vector<double> composite = composite_scores(evaluations);
    std::size_t best = 0;
    for (std::size_t i = 1; i < composite.size(); ++i) {
        if (composite[i] > composite[best]) best = i;
    }
    return evaluations[best].num_topics;
}

std::uint64_t sweep_seed(std::uint64_t base_seed, std::uint32_t k) {
    return combine_seed(base_seed, k);
}

SweepResult sweep_k(const DocTermMatrix& matrix, std::uint32_t k_min, std::uint32_t k_max,
                    const LdaConfig& base_config, std::uint64_t vocab_hash,
                    const SweepOptions& options) {
    if (k_min < 2) throw DataError("k-min must be at least 2");
    if (k_max < k_min) throw DataError("k-max must be >= k-min");

    auto run_one = [&](std::uint32_t k) {
        LdaConfig config = base_config;
        config.num_topics = k;
        if (base_config.alpha <= 0.0) config.alpha = 50.0 / static_cast<double>(k);
        config.seed = sweep_seed(base_config.seed, k);
        return train(matrix, config, vocab_hash);
    };

    const std::size_t count = k_max - k_min + 1;
    std::vector<LdaModel> models(count);
    if (options.parallel && count > 1) {
        std::vector<std::future<LdaModel>> futures;
        futures.reserve(count);
        for (std::uint32_t k = k_min; k <= k_max; ++k) {
            futures.push_back(std::async(std::launch::async, run_one, k));
        }
        for (std::size_t i = 0; i < count; ++i) models[i] = futures[i].get();
    } else {
        for (std::uint32_t k = k_min; k <= k_max; ++k) models[k - k_min] = run_one(k);
    }

    SweepResult result;
    for (std::size_t i = 0; i < count; ++i) {
        const LdaModel& model = models[i];
        TopicEvaluation eval;
        eval.num_topics = model.config.num_topics;
        CoherenceResult coherence = umass_coherence(model, matrix, options.metric_top_n);
        eval.coherence = coherence.mean;
        eval.per_topic_coherence = std::move(coherence.per_topic);
        eval.similarity = jaccard_topic_similarity(model, options.metric_top_n);
        eval.diversity = topic_diversity(model, options.diversity_top_n);
        result.report.evaluations.push_back(std::move(eval));
    }
    result.report.composite = composite_scores(result.report.evaluations);
    result.report.selected_k = select_k(result.report.evaluations);
    result.models = std::move(models);
    return result;
}

void write_sweep_tsv(const SweepReport& report, const std::filesystem::path& path) {
    std::ostringstream out;
    out << "K\tcoherence\tsimilarity\tdiversity\tcomposite\tselected\n";
    for (std::size_t i = 0; i < report.evaluations.size(); ++i) {
        const TopicEvaluation& e = report.evaluations[i];
        out << e.num_topics << "\t" << format_double(e.coherence, 6) << "\t"
            << format_double(e.similarity, 6) << "\t" << format_double(e.diversity, 6) << "\t"
            << format_double(report.composite[i], 6) << "\t"
            << (e.num_topics == report.selected_k ? 1 : 0) << "\n";
    }
    write_file(path, out.str());
}

void write_sweep_json(const SweepReport& report, const std::filesystem::path& path) {
    nlohmann::json doc;
    doc["selected_k"] = report.selected_k;
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t i = 0; i < report.evaluations.size(); ++i) {
        const TopicEvaluation& e = report.evaluations[i];
        nlohmann::json row;
        row["K"] = e.num_topics;
        row["coherence"] = e.coherence;
        row["similarity"] = e.similarity;
        row["diversity"] = e.diversity;
        row["composite"] = report.composite[i];
        row["per_topic_coherence"] = e.per_topic_coherence;
        rows.push_back(std::move(row));
    }
    doc["evaluations"] = std::move(rows);
    write_file(path, doc.dump(2) + "\n");
}

}  // namespace notetopics
