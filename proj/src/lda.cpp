#include "notetopics/lda.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <random>
#include <sstream>

namespace notetopics {

LdaConfig resolve_config(LdaConfig config) {
    if (config.alpha <= 0.0 && config.num_topics > 0) {
        config.alpha = 50.0 / static_cast<double>(config.num_topics);
    }
    return config;
}

void validate_config(const LdaConfig& config) {
    if (config.num_topics < 2) throw DataError("LDA needs at least 2 topics");
    if (config.num_topics > 0xFFFF) throw DataError("topic count exceeds 65535");
    if (config.alpha <= 0.0) throw DataError("alpha must be positive");
    if (config.beta <= 0.0) throw DataError("beta must be positive");
    if (config.passes < 1) throw DataError("passes must be at least 1");
}

std::vector<double> conditional_topic_distribution(std::span<const std::uint32_t> doc_topic,
                                                   std::span<const std::uint32_t> word_topic,
                                                   std::span<const std::uint64_t> topic_totals,
                                                   double alpha, double beta,
                                                   std::uint32_t vocab_size) {
    const std::size_t k_count = doc_topic.size();
    if (word_topic.size() != k_count || topic_totals.size() != k_count) {
        throw InternalError("conditional_topic_distribution: span size mismatch");
    }
    const double v_beta = static_cast<double>(vocab_size) * beta;
    std::vector<double> p(k_count);
    double total = 0.0;
    for (std::size_t k = 0; k < k_count; ++k) {
        p[k] = (static_cast<double>(doc_topic[k]) + alpha) *
               (static_cast<double>(word_topic[k]) + beta) /
               (static_cast<double>(topic_totals[k]) + v_beta);
        total += p[k];
    }
    for (double& x : p) x /= total;
    return p;
}

namespace {

// All random draws come from these two helpers so the consumption order is
// pinned: raw mt19937_64 outputs, modulo for topic init, 53-bit mantissa
// scaling for uniforms.
inline std::uint32_t next_topic(std::mt19937_64& rng, std::uint32_t k_count) {
    return static_cast<std::uint32_t>(rng() % k_count);
}

inline double next_unit_real(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace

LdaModel train(const DocTermMatrix& matrix, const LdaConfig& config_in,
               std::uint64_t vocab_hash, const PassObserver& on_pass) {
    LdaConfig config = resolve_config(config_in);
    validate_config(config);
    if (matrix.num_docs() == 0 || matrix.total_tokens == 0) {
        throw DataError("cannot train on an empty document-term matrix");
    }

    LdaModel model;
    model.config = config;
    model.num_docs = static_cast<std::uint32_t>(matrix.num_docs());
    model.vocab_size = matrix.vocab_size;
    model.total_tokens = matrix.total_tokens;
    model.vocab_hash = vocab_hash;

    const std::uint32_t k_count = config.num_topics;
    const std::uint32_t v = model.vocab_size;
    const double alpha = config.alpha;
    const double beta = config.beta;
    const double v_beta = static_cast<double>(v) * beta;

    // expand sparse rows to flat tokens in row order
    model.doc_offsets.reserve(model.num_docs + 1);
    model.token_words.reserve(matrix.total_tokens);
    model.doc_offsets.push_back(0);
    for (std::size_t d = 0; d < matrix.num_docs(); ++d) {
        for (const SparseCount& c : matrix.rows[d]) {
            for (std::uint32_t i = 0; i < c.count; ++i) model.token_words.push_back(c.term_id);
        }
        model.doc_offsets.push_back(static_cast<std::uint32_t>(model.token_words.size()));
    }

    model.assignments.resize(model.token_words.size());
    model.doc_topic.assign(static_cast<std::size_t>(model.num_docs) * k_count, 0);
    model.topic_word.assign(static_cast<std::size_t>(k_count) * v, 0);
    model.topic_total.assign(k_count, 0);

    std::mt19937_64 rng(config.seed);

    for (std::size_t d = 0; d < model.num_docs; ++d) {
        std::uint32_t* n_dk = model.doc_topic.data() + d * k_count;
        for (std::uint32_t t = model.doc_offsets[d]; t < model.doc_offsets[d + 1]; ++t) {
            const std::uint32_t w = model.token_words[t];
            const std::uint32_t k = next_topic(rng, k_count);
            model.assignments[t] = static_cast<std::uint16_t>(k);
            ++n_dk[k];
            ++model.topic_word[static_cast<std::size_t>(k) * v + w];
            ++model.topic_total[k];
        }
    }

    const bool averaging = config.average_posteriors;
    if (averaging) {
        model.phi_accum.assign(model.topic_word.size(), 0.0);
        model.theta_accum.assign(model.doc_topic.size(), 0.0);
    }

    std::vector<double> cumulative(k_count);
    for (std::uint32_t pass = 1; pass <= config.passes; ++pass) {
        for (std::size_t d = 0; d < model.num_docs; ++d) {
            std::uint32_t* n_dk = model.doc_topic.data() + d * k_count;
            for (std::uint32_t t = model.doc_offsets[d]; t < model.doc_offsets[d + 1]; ++t) {
                const std::uint32_t w = model.token_words[t];
                const std::uint32_t old_k = model.assignments[t];
                --n_dk[old_k];
                --model.topic_word[static_cast<std::size_t>(old_k) * v + w];
                --model.topic_total[old_k];

                double total = 0.0;
                for (std::uint32_t k = 0; k < k_count; ++k) {
                    const double weight =
                        (static_cast<double>(n_dk[k]) + alpha) *
                        (static_cast<double>(model.topic_word[static_cast<std::size_t>(k) * v + w]) +
                         beta) /
                        (static_cast<double>(model.topic_total[k]) + v_beta);
                    total += weight;
                    cumulative[k] = total;
                }

                const double target = next_unit_real(rng) * total;
                std::uint32_t new_k = 0;
                while (new_k + 1 < k_count && cumulative[new_k] < target) ++new_k;

                model.assignments[t] = static_cast<std::uint16_t>(new_k);
                ++n_dk[new_k];
                ++model.topic_word[static_cast<std::size_t>(new_k) * v + w];
                ++model.topic_total[new_k];
            }
        }
        if (averaging && pass > config.burn_in) {
            for (std::uint32_t k = 0; k < k_count; ++k) {
                const double denom = static_cast<double>(model.topic_total[k]) + v_beta;
                for (std::uint32_t w = 0; w < v; ++w) {
                    model.phi_accum[static_cast<std::size_t>(k) * v + w] +=
                        (static_cast<double>(model.topic_word[static_cast<std::size_t>(k) * v + w]) +
                         beta) / denom;
                }
            }
            for (std::size_t d = 0; d < model.num_docs; ++d) {
                const double denom =
                    static_cast<double>(model.doc_length(d)) + static_cast<double>(k_count) * alpha;
                for (std::uint32_t k = 0; k < k_count; ++k) {
                    model.theta_accum[d * k_count + k] +=
                        (static_cast<double>(model.doc_topic[d * k_count + k]) + alpha) / denom;
                }
            }
            ++model.averaged_sweeps;
        }
#ifndef NDEBUG
        verify_counts(model);
#endif
        if (on_pass) on_pass(pass, model);
    }
    return model;
}

void verify_counts(const LdaModel& model) {
    const std::uint32_t k_count = model.config.num_topics;
    const std::uint32_t v = model.vocab_size;
    for (std::size_t d = 0; d < model.num_docs; ++d) {
        std::uint64_t sum = 0;
        for (std::uint32_t k = 0; k < k_count; ++k) sum += model.doc_topic[d * k_count + k];
        if (sum != model.doc_length(d)) {
            throw InternalError("count invariant broken: doc_topic row " + std::to_string(d));
        }
    }
    std::uint64_t grand = 0;
    for (std::uint32_t k = 0; k < k_count; ++k) {
        std::uint64_t sum = 0;
        for (std::uint32_t w = 0; w < v; ++w) {
            sum += model.topic_word[static_cast<std::size_t>(k) * v + w];
        }
        if (sum != model.topic_total[k]) {
            throw InternalError("count invariant broken: topic_word row " + std::to_string(k));
        }
        grand += model.topic_total[k];
    }
    if (grand != model.total_tokens) {
        throw InternalError("count invariant broken: topic totals do not sum to corpus size");
    }
}

DenseMatrix phi(const LdaModel& model) {
    const std::uint32_t k_count = model.config.num_topics;
    const std::uint32_t v = model.vocab_size;
    DenseMatrix out{k_count, v, std::vector<double>(static_cast<std::size_t>(k_count) * v)};
    if (model.config.average_posteriors && model.averaged_sweeps > 0) {
        const double scale = 1.0 / static_cast<double>(model.averaged_sweeps);
        for (std::size_t i = 0; i < out.values.size(); ++i) {
            out.values[i] = model.phi_accum[i] * scale;
        }
        return out;
    }
    const double v_beta = static_cast<double>(v) * model.config.beta;
    for (std::uint32_t k = 0; k < k_count; ++k) {
        const double denom = static_cast<double>(model.topic_total[k]) + v_beta;
        for (std::uint32_t w = 0; w < v; ++w) {
            out.values[static_cast<std::size_t>(k) * v + w] =
                (static_cast<double>(model.topic_word[static_cast<std::size_t>(k) * v + w]) +
                 model.config.beta) / denom;
        }
    }
    return out;
}

DenseMatrix theta(const LdaModel& model) {
    const std::uint32_t k_count = model.config.num_topics;
    DenseMatrix out{model.num_docs, k_count,
                    std::vector<double>(static_cast<std::size_t>(model.num_docs) * k_count)};
    if (model.config.average_posteriors && model.averaged_sweeps > 0) {
        const double scale = 1.0 / static_cast<double>(model.averaged_sweeps);
        for (std::size_t i = 0; i < out.values.size(); ++i) {
            out.values[i] = model.theta_accum[i] * scale;
        }
        return out;
    }
    for (std::size_t d = 0; d < model.num_docs; ++d) {
        const double denom = static_cast<double>(model.doc_length(d)) +
                             static_cast<double>(k_count) * model.config.alpha;
        for (std::uint32_t k = 0; k < k_count; ++k) {
            out.values[d * k_count + k] =
                (static_cast<double>(model.doc_topic[d * k_count + k]) + model.config.alpha) /
                denom;
        }
    }
    return out;
}

double log_likelihood(const LdaModel& model) {
    const std::uint32_t k_count = model.config.num_topics;
    const DenseMatrix phi_hat = phi(model);
    const DenseMatrix theta_hat = theta(model);
    double ll = 0.0;
    for (std::size_t d = 0; d < model.num_docs; ++d) {
        std::span<const double> theta_row = theta_hat.row(d);
        for (std::uint32_t t = model.doc_offsets[d]; t < model.doc_offsets[d + 1]; ++t) {
            const std::uint32_t w = model.token_words[t];
            double p = 0.0;
            for (std::uint32_t k = 0; k < k_count; ++k) {
                p += theta_row[k] * phi_hat.at(k, w);
            }
            ll += std::log(p);
        }
    }
    return ll;
}

std::vector<std::uint32_t> top_row_indices(std::span<const double> row, std::size_t n) {
    if (n > row.size()) throw DataError("top-n exceeds vocabulary size");
    std::vector<std::uint32_t> ids(row.size());
    std::iota(ids.begin(), ids.end(), 0u);
    std::partial_sort(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n), ids.end(),
                      [&](std::uint32_t a, std::uint32_t b) {
                          if (row[a] != row[b]) return row[a] > row[b];
                          return a < b;
                      });
    ids.resize(n);
    return ids;
}

// ---- model file ----

namespace {

constexpr char kMagic[8] = {'N', 'T', 'L', 'D', 'A', 'M', 'D', 'L'};
constexpr std::uint32_t kFormatVersion = 1;

class Writer {
  public:
    void u8(std::uint8_t x) { buf_.push_back(static_cast<char>(x)); }
    void u16(std::uint16_t x) { le(x); }
    void u32(std::uint32_t x) { le(x); }
    void u64(std::uint64_t x) { le(x); }
    void f64(double x) {
        std::uint64_t bits;
        std::memcpy(&bits, &x, sizeof(bits));
        le(bits);
    }
    void raw(const char* data, std::size_t n) { buf_.append(data, n); }
    const std::string& bytes() const { return buf_; }

  private:
    template <typename T>
    void le(T x) {
        for (std::size_t i = 0; i < sizeof(T); ++i) {
            buf_.push_back(static_cast<char>((x >> (8 * i)) & 0xFF));
        }
    }
    std::string buf_;
};

class Reader {
  public:
    Reader(std::string_view data, const std::filesystem::path& path)
        : data_(data), path_(path) {}

    std::uint8_t u8() { return static_cast<std::uint8_t>(take(1)[0]); }
    std::uint16_t u16() { return le<std::uint16_t>(); }
    std::uint32_t u32() { return le<std::uint32_t>(); }
    std::uint64_t u64() { return le<std::uint64_t>(); }
    double f64() {
        std::uint64_t bits = le<std::uint64_t>();
        double x;
        std::memcpy(&x, &bits, sizeof(x));
        return x;
    }
    std::string_view take(std::size_t n) {
        if (pos_ + n > data_.size()) {
            throw DataError("model file truncated: " + path_.string());
        }
        std::string_view out = data_.substr(pos_, n);
        pos_ += n;
        return out;
    }

  private:
    template <typename T>
    T le() {
        std::string_view b = take(sizeof(T));
        T x = 0;
        for (std::size_t i = 0; i < sizeof(T); ++i) {
            x |= static_cast<T>(static_cast<unsigned char>(b[i])) << (8 * i);
        }
        return x;
    }
    std::string_view data_;
    std::size_t pos_ = 0;
    const std::filesystem::path& path_;
};

}  // namespace

void save_model(const LdaModel& model, const std::filesystem::path& path) {
    Writer w;
    w.raw(kMagic, sizeof(kMagic));
    w.u32(kFormatVersion);
    w.u32(model.config.num_topics);
    w.f64(model.config.alpha);
    w.f64(model.config.beta);
    w.u32(model.config.passes);
    w.u32(model.config.burn_in);
    w.u8(model.config.average_posteriors ? 1 : 0);
    w.u64(model.config.seed);
    w.u32(model.num_docs);
    w.u32(model.vocab_size);
    w.u64(model.total_tokens);
    w.u64(model.vocab_hash);
    for (std::uint32_t x : model.doc_offsets) w.u32(x);
    for (std::uint32_t x : model.token_words) w.u32(x);
    for (std::uint16_t x : model.assignments) w.u16(x);
    for (std::uint32_t x : model.doc_topic) w.u32(x);
    for (std::uint32_t x : model.topic_word) w.u32(x);
    for (std::uint64_t x : model.topic_total) w.u64(x);
    w.u32(model.averaged_sweeps);
    if (model.config.average_posteriors) {
        for (double x : model.phi_accum) w.f64(x);
        for (double x : model.theta_accum) w.f64(x);
    }
    std::uint64_t checksum = fnv1a64(w.bytes());
    w.u64(checksum);
    write_file(path, w.bytes());
}

LdaModel load_model(const std::filesystem::path& path) {
    const std::string data = read_file(path);
    if (data.size() < sizeof(kMagic) + 12) {
        throw DataError("model file truncated: " + path.string());
    }
    const std::uint64_t stored_checksum =
        Reader(std::string_view(data).substr(data.size() - 8), path).u64();
    const std::uint64_t actual = fnv1a64(std::string_view(data).substr(0, data.size() - 8));
    if (stored_checksum != actual) {
        throw DataError("model file checksum mismatch (truncated or corrupt): " + path.string());
    }

    Reader r(std::string_view(data).substr(0, data.size() - 8), path);
    if (r.take(sizeof(kMagic)) != std::string_view(kMagic, sizeof(kMagic))) {
        throw DataError("not a model file: " + path.string());
    }
    const std::uint32_t version = r.u32();
    if (version != kFormatVersion) {
        throw DataError("unsupported model format version " + std::to_string(version) + ": " +
                        path.string());
    }

    LdaModel model;
    model.config.num_topics = r.u32();
    model.config.alpha = r.f64();
    model.config.beta = r.f64();
    model.config.passes = r.u32();
    model.config.burn_in = r.u32();
    model.config.average_posteriors = r.u8() != 0;
    model.config.seed = r.u64();
    model.num_docs = r.u32();
    model.vocab_size = r.u32();
    model.total_tokens = r.u64();
    model.vocab_hash = r.u64();

    model.doc_offsets.resize(model.num_docs + 1);
    for (auto& x : model.doc_offsets) x = r.u32();
    model.token_words.resize(model.total_tokens);
    for (auto& x : model.token_words) x = r.u32();
    model.assignments.resize(model.total_tokens);
    for (auto& x : model.assignments) x = r.u16();
    model.doc_topic.resize(static_cast<std::size_t>(model.num_docs) * model.config.num_topics);
    for (auto& x : model.doc_topic) x = r.u32();
    model.topic_word.resize(static_cast<std::size_t>(model.config.num_topics) * model.vocab_size);
    for (auto& x : model.topic_word) x = r.u32();
    model.topic_total.resize(model.config.num_topics);
    for (auto& x : model.topic_total) x = r.u64();
    model.averaged_sweeps = r.u32();
    if (model.config.average_posteriors) {
        model.phi_accum.resize(model.topic_word.size());
        for (auto& x : model.phi_accum) x = r.f64();
        model.theta_accum.resize(model.doc_topic.size());
        for (auto& x : model.theta_accum) x = r.f64();
    }
    verify_counts(model);
    return model;
}

void export_phi_tsv(const LdaModel& model, const std::filesystem::path& path) {
    const DenseMatrix m = phi(model);
    std::ostringstream out;
    for (std::size_t k = 0; k < m.rows; ++k) {
        out << "topic_" << k;
        for (std::size_t w = 0; w < m.cols; ++w) {
            out << "\t" << format_double(m.at(k, w), 9);
        }
        out << "\n";
    }
    write_file(path, out.str());
}

void export_theta_tsv(const LdaModel& model, std::span<const std::string> unit_ids,
                      const std::filesystem::path& path) {
    if (unit_ids.size() != model.num_docs) {
        throw DataError("theta export: unit id count does not match the model");
    }
    const DenseMatrix m = theta(model);
    std::ostringstream out;
    for (std::size_t d = 0; d < m.rows; ++d) {
        out << unit_ids[d];
        for (std::size_t k = 0; k < m.cols; ++k) {
            out << "\t" << format_double(m.at(d, k), 9);
        }
        out << "\n";
    }
    write_file(path, out.str());
}

}  // namespace notetopics
