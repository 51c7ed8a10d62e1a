// Command-line pipeline: ingest -> lexicon -> prepare -> sweep/train -> analyze.
// Every stage talks to the next through files and writes a manifest that
// verify-manifest can replay.

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "notetopics/analysis.hpp"
#include "notetopics/common.hpp"
#include "notetopics/corpus.hpp"
#include "notetopics/lda.hpp"
#include "notetopics/lexicon.hpp"
#include "notetopics/manifest.hpp"
#include "notetopics/metrics.hpp"
#include "notetopics/textprep.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace notetopics;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitInternal = 3;

std::string absolute_path(const std::string& p) { return fs::absolute(p).string(); }

void ensure_out_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw DataError("cannot create output directory " + dir.string());
}

StopwordSet resolve_stopwords(const std::string& path) {
    return path.empty() ? StopwordSet::bundled() : StopwordSet::from_file(path);
}

AbbreviationSet resolve_abbreviations(const std::string& path) {
    AbbreviationSet abbrevs = AbbreviationSet::bundled();
    if (!path.empty()) abbrevs.extend_from_file(path);
    return abbrevs;
}

void add_input(RunManifest& manifest, const std::string& path) {
    if (!path.empty()) manifest.inputs[path] = hash_file_hex(path);
}

// ---- ingest ----

struct IngestParams {
    std::string notes;
    std::uint64_t min_chars = 50;
};

json to_json(const IngestParams& p) {
    return json{{"notes", p.notes}, {"min_chars", p.min_chars}};
}

IngestParams ingest_from_json(const json& j) {
    IngestParams p;
    p.notes = j.at("notes").get<std::string>();
    p.min_chars = j.at("min_chars").get<std::uint64_t>();
    return p;
}

std::vector<std::string> run_ingest(const IngestParams& params, const fs::path& out_dir,
                                    RunManifest& manifest) {
    LoadNotesResult loaded = load_notes(params.notes);
    if (loaded.notes.empty()) throw DataError("no notes loaded from " + params.notes);
    DedupStats stats;
    std::vector<NoteRecord> kept = dedup_and_filter(loaded.notes, params.min_chars, &stats);

    std::ostringstream out;
    for (const NoteRecord& note : kept) {
        json obj;
        obj["note_id"] = note.note_id;
        obj["patient_id"] = note.patient_id;
        obj["text"] = note.text;
        if (note.note_date) obj["note_date"] = *note.note_date;
        out << obj.dump() << "\n";
    }
    write_file(out_dir / "notes_clean.jsonl", out.str());

    manifest.stats = json{{"loaded", loaded.notes.size()},
                          {"skipped_lines", loaded.skipped_lines.size()},
                          {"kept", stats.kept},
                          {"duplicates", stats.duplicates},
                          {"short", stats.short_dropped}};
    std::cout << "ingest: kept=" << stats.kept << " duplicates=" << stats.duplicates
              << " short=" << stats.short_dropped
              << " skipped_lines=" << loaded.skipped_lines.size() << "\n";
    return {"notes_clean.jsonl"};
}

// ---- lexicon ----

struct LexiconParams {
    std::string lexicon;
    std::string embeddings;
    std::string stopwords;
    std::string decisions_file;
    std::string sample_notes;
    std::uint64_t top_n = 10;
    double min_cosine = 0.5;
    std::uint64_t sample_size = 3;
    std::uint64_t seed = 42;
    // resolved review outcome; filled from the decisions file or the
    // interactive session so a manifest replay needs no terminal
    std::map<std::string, std::string> decisions;
    std::vector<std::string> additions;
    bool review = false;  // false -> propose only
};

json to_json(const LexiconParams& p) {
    return json{{"lexicon", p.lexicon},
                {"embeddings", p.embeddings},
                {"stopwords", p.stopwords},
                {"decisions_file", p.decisions_file},
                {"sample_notes", p.sample_notes},
                {"top_n", p.top_n},
                {"min_cosine", p.min_cosine},
                {"sample_size", p.sample_size},
                {"seed", p.seed},
                {"decisions", p.decisions},
                {"additions", p.additions},
                {"review", p.review}};
}

LexiconParams lexicon_from_json(const json& j) {
    LexiconParams p;
    p.lexicon = j.at("lexicon").get<std::string>();
    p.embeddings = j.at("embeddings").get<std::string>();
    p.stopwords = j.value("stopwords", "");
    p.decisions_file = j.value("decisions_file", "");
    p.sample_notes = j.value("sample_notes", "");
    p.top_n = j.at("top_n").get<std::uint64_t>();
    p.min_cosine = j.at("min_cosine").get<double>();
    p.sample_size = j.value("sample_size", std::uint64_t{3});
    p.seed = j.value("seed", std::uint64_t{42});
    p.decisions = j.value("decisions", std::map<std::string, std::string>{});
    p.additions = j.value("additions", std::vector<std::string>{});
    p.review = j.at("review").get<bool>();
    return p;
}

std::map<std::string, Decision> parse_decisions(const std::map<std::string, std::string>& raw) {
    std::map<std::string, Decision> out;
    for (const auto& [term, decision] : raw) {
        if (decision == "accept") out[term] = Decision::accept;
        else if (decision == "reject") out[term] = Decision::reject;
        else throw DataError("decision for \"" + term + "\" must be accept or reject");
    }
    return out;
}

std::map<std::string, std::string> load_decisions_file(const fs::path& path) {
    std::map<std::string, std::string> out;
    std::istringstream in(read_file(path));
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string stripped = trim(line);
        if (stripped.empty() || stripped[0] == '#') continue;
        if (line_no == 1 && to_lower(stripped) == "term,decision") continue;
        auto fields = split_csv_line(stripped);
        if (fields.size() != 2) {
            throw DataError("decisions row " + std::to_string(line_no) + ": expected 2 fields");
        }
        out[collapse_whitespace(to_lower(fields[0]))] = to_lower(trim_view(fields[1]));
    }
    return out;
}

std::vector<std::string> run_lexicon(const LexiconParams& params, const fs::path& out_dir,
                                     RunManifest& manifest) {
    KeywordLexicon lexicon = KeywordLexicon::load(params.lexicon);
    EmbeddingTable embeddings = EmbeddingTable::load(params.embeddings);
    StopwordSet stopwords = resolve_stopwords(params.stopwords);

    std::vector<CandidateProposal> proposals =
        propose_candidates(lexicon, embeddings, params.top_n, params.min_cosine, stopwords);

    std::ostringstream proposals_csv;
    proposals_csv << "term,nearest_seed,cosine\n";
    for (const CandidateProposal& p : proposals) {
        proposals_csv << csv_escape(p.term) << "," << csv_escape(p.nearest_seed) << ","
                      << format_double(p.cosine, 9) << "\n";
    }
    write_file(out_dir / "proposals.csv", proposals_csv.str());

    json stats{{"proposals", proposals.size()}};
    if (params.review) {
        ReviewResult review = snowball_review(lexicon, proposals,
                                              parse_decisions(params.decisions),
                                              params.additions);
        stats["accepted"] = review.added;
        stats["already_present"] = review.already_present;
        stats["converged"] = review.converged;
        std::cout << (review.converged ? "converged: no new keywords accepted\n"
                                       : "accepted " + std::to_string(review.added) +
                                             " new keyword(s); review another round\n");
    } else {
        std::cout << "proposed " << proposals.size()
                  << " candidate(s); re-run with --decisions or --interactive to review\n";
    }
    lexicon.save(out_dir / "lexicon.csv");
    manifest.stats = stats;
    return {"lexicon.csv", "proposals.csv"};
}

// Terminal review loop. Collects decisions/additions into params so the
// manifest can replay the session non-interactively.
void interactive_review(LexiconParams& params) {
    KeywordLexicon lexicon = KeywordLexicon::load(params.lexicon);
    EmbeddingTable embeddings = EmbeddingTable::load(params.embeddings);
    StopwordSet stopwords = resolve_stopwords(params.stopwords);
    std::vector<CandidateProposal> proposals =
        propose_candidates(lexicon, embeddings, params.top_n, params.min_cosine, stopwords);

    std::vector<NoteRecord> sample;
    if (!params.sample_notes.empty()) sample = load_notes(params.sample_notes).notes;

    std::cout << proposals.size() << " candidate keyword(s) to review\n"
              << "commands: a=accept  r=reject  s=show sample notes  "
                 "add <term>=manual keyword  q=reject the rest\n";
    std::size_t index = 0;
    bool quit = false;
    while (index < proposals.size()) {
        const CandidateProposal& p = proposals[index];
        if (quit) {
            params.decisions[p.term] = "reject";
            ++index;
            continue;
        }
        std::cout << "[" << index + 1 << "/" << proposals.size() << "] " << p.term
                  << "  (nearest seed: " << p.nearest_seed
                  << ", cosine " << format_double(p.cosine, 4) << ") > ";
        std::string line;
        if (!std::getline(std::cin, line)) {
            quit = true;
            continue;
        }
        std::string cmd = trim(line);
        if (cmd == "a") {
            params.decisions[p.term] = "accept";
            ++index;
        } else if (cmd == "r") {
            params.decisions[p.term] = "reject";
            ++index;
        } else if (cmd == "q") {
            quit = true;
        } else if (cmd == "s") {
            std::size_t shown = 0;
            std::mt19937_64 rng(combine_seed(params.seed, index));
            std::vector<std::size_t> order(sample.size());
            for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
            std::shuffle(order.begin(), order.end(), rng);
            for (std::size_t i : order) {
                if (shown >= params.sample_size) break;
                if (to_lower(sample[i].text).find(p.term) == std::string::npos) continue;
                std::string snippet = collapse_whitespace(sample[i].text);
                if (snippet.size() > 160) snippet = snippet.substr(0, 160) + "...";
                std::cout << "  - " << snippet << "\n";
                ++shown;
            }
            if (shown == 0) std::cout << "  (no sampled note mentions \"" << p.term << "\")\n";
        } else if (cmd.rfind("add ", 0) == 0) {
            params.additions.push_back(trim(cmd.substr(4)));
            std::cout << "  noted manual keyword \"" << params.additions.back() << "\"\n";
        } else {
            std::cout << "  unrecognized command\n";
        }
    }
}

// ---- prepare ----

struct PrepareParams {
    std::string notes;
    std::string strategy = "s1";
    std::string lexicon;
    std::string stopwords;
    std::string abbreviations;
    std::uint64_t min_df = 2;
    double max_df = 0.5;
    bool dump_tokens = false;
};

json to_json(const PrepareParams& p) {
    return json{{"notes", p.notes},         {"strategy", p.strategy},
                {"lexicon", p.lexicon},     {"stopwords", p.stopwords},
                {"abbreviations", p.abbreviations}, {"min_df", p.min_df},
                {"max_df", p.max_df},       {"dump_tokens", p.dump_tokens}};
}

PrepareParams prepare_from_json(const json& j) {
    PrepareParams p;
    p.notes = j.at("notes").get<std::string>();
    p.strategy = j.at("strategy").get<std::string>();
    p.lexicon = j.value("lexicon", "");
    p.stopwords = j.value("stopwords", "");
    p.abbreviations = j.value("abbreviations", "");
    p.min_df = j.at("min_df").get<std::uint64_t>();
    p.max_df = j.at("max_df").get<double>();
    p.dump_tokens = j.value("dump_tokens", false);
    return p;
}

std::vector<std::string> run_prepare(const PrepareParams& params, const fs::path& out_dir,
                                     RunManifest& manifest) {
    Strategy strategy = strategy_from_string(params.strategy);
    std::vector<NoteRecord> notes = load_notes(params.notes).notes;
    if (notes.empty()) throw DataError("no notes loaded from " + params.notes);

    KeywordLexicon lexicon;
    if (!params.lexicon.empty()) {
        lexicon = KeywordLexicon::load(params.lexicon);
    } else if (strategy != Strategy::all_notes) {
        throw DataError("strategy " + params.strategy + " requires --lexicon");
    }
    AbbreviationSet abbreviations = resolve_abbreviations(params.abbreviations);
    std::vector<DocumentUnit> units = apply_strategy(notes, lexicon, strategy, abbreviations);
    if (units.empty()) throw DataError("strategy produced no document units");
    save_units(units, out_dir / "units.jsonl");

    StopwordSet stopwords = resolve_stopwords(params.stopwords);
    std::vector<TokenStream> streams;
    streams.reserve(units.size());
    for (const DocumentUnit& u : units) {
        streams.push_back(normalize_unit(u.unit_id, u.text, stopwords));
    }
    Vocabulary vocab = build_vocabulary(streams, params.min_df, params.max_df);
    DocTermMatrix matrix = to_doc_term_matrix(streams, vocab);
    save_matrix(matrix, vocab, out_dir / "matrix.dtm");

    std::vector<std::string> outputs = {"units.jsonl", "matrix.dtm"};
    if (params.dump_tokens) {
        dump_token_streams(streams, out_dir / "tokens.jsonl");
        outputs.push_back("tokens.jsonl");
    }

    manifest.stats = json{{"units", units.size()},
                          {"modeled_units", matrix.num_docs()},
                          {"dropped_empty_units", matrix.dropped_units.size()},
                          {"vocabulary", vocab.size()},
                          {"tokens", matrix.total_tokens}};
    std::cout << "prepare(" << params.strategy << "): units=" << units.size()
              << " modeled=" << matrix.num_docs() << " vocab=" << vocab.size()
              << " tokens=" << matrix.total_tokens << "\n";
    return outputs;
}

// ---- train ----

struct TrainParams {
    std::string matrix;
    std::uint64_t k = 0;
    double alpha = 0.0;  // 0 -> 50/K
    double beta = 0.01;
    std::uint64_t passes = 10;
    std::uint64_t burn_in = 0;
    bool average = false;
    std::uint64_t seed = 42;
    bool export_phi = false;
    bool export_theta = false;
};

json to_json(const TrainParams& p) {
    return json{{"matrix", p.matrix},   {"k", p.k},           {"alpha", p.alpha},
                {"beta", p.beta},       {"passes", p.passes}, {"burn_in", p.burn_in},
                {"average", p.average}, {"seed", p.seed},     {"export_phi", p.export_phi},
                {"export_theta", p.export_theta}};
}

TrainParams train_from_json(const json& j) {
    TrainParams p;
    p.matrix = j.at("matrix").get<std::string>();
    p.k = j.at("k").get<std::uint64_t>();
    p.alpha = j.at("alpha").get<double>();
    p.beta = j.at("beta").get<double>();
    p.passes = j.at("passes").get<std::uint64_t>();
    p.burn_in = j.at("burn_in").get<std::uint64_t>();
    p.average = j.at("average").get<bool>();
    p.seed = j.at("seed").get<std::uint64_t>();
    p.export_phi = j.value("export_phi", false);
    p.export_theta = j.value("export_theta", false);
    return p;
}

LdaConfig make_config(std::uint64_t k, double alpha, double beta, std::uint64_t passes,
                      std::uint64_t burn_in, bool average, std::uint64_t seed) {
    LdaConfig config;
    config.num_topics = static_cast<std::uint32_t>(k);
    config.alpha = alpha;
    config.beta = beta;
    config.passes = static_cast<std::uint32_t>(passes);
    config.burn_in = static_cast<std::uint32_t>(burn_in);
    config.average_posteriors = average;
    config.seed = seed;
    return config;
}

std::vector<std::string> run_train(const TrainParams& params, const fs::path& out_dir,
                                   RunManifest& manifest) {
    auto [matrix, vocab] = load_matrix(params.matrix);
    LdaConfig config = make_config(params.k, params.alpha, params.beta, params.passes,
                                   params.burn_in, params.average, params.seed);
    LdaModel model = train(matrix, config, vocab.content_hash());
    save_model(model, out_dir / "model.bin");
    std::vector<std::string> outputs = {"model.bin"};
    if (params.export_phi) {
        export_phi_tsv(model, out_dir / "phi.tsv");
        outputs.push_back("phi.tsv");
    }
    if (params.export_theta) {
        export_theta_tsv(model, matrix.unit_ids, out_dir / "theta.tsv");
        outputs.push_back("theta.tsv");
    }
    manifest.stats = json{{"docs", model.num_docs},
                          {"vocab", model.vocab_size},
                          {"tokens", model.total_tokens},
                          {"log_likelihood", log_likelihood(model)}};
    std::cout << "train: K=" << model.config.num_topics << " docs=" << model.num_docs
              << " tokens=" << model.total_tokens << "\n";
    return outputs;
}

// ---- sweep ----

struct SweepParams {
    std::string matrix;
    std::uint64_t k_min = 5;
    std::uint64_t k_max = 30;
    double alpha = 0.0;
    double beta = 0.01;
    std::uint64_t passes = 10;
    std::uint64_t burn_in = 0;
    bool average = false;
    std::uint64_t seed = 42;
    std::uint64_t metric_top_n = 10;
    std::uint64_t diversity_top_n = 25;
    bool save_models = true;
    bool parallel = true;
};

json to_json(const SweepParams& p) {
    return json{{"matrix", p.matrix},
                {"k_min", p.k_min},
                {"k_max", p.k_max},
                {"alpha", p.alpha},
                {"beta", p.beta},
                {"passes", p.passes},
                {"burn_in", p.burn_in},
                {"average", p.average},
                {"seed", p.seed},
                {"metric_top_n", p.metric_top_n},
                {"diversity_top_n", p.diversity_top_n},
                {"save_models", p.save_models},
                {"parallel", p.parallel}};
}

SweepParams sweep_from_json(const json& j) {
    SweepParams p;
    p.matrix = j.at("matrix").get<std::string>();
    p.k_min = j.at("k_min").get<std::uint64_t>();
    p.k_max = j.at("k_max").get<std::uint64_t>();
    p.alpha = j.at("alpha").get<double>();
    p.beta = j.at("beta").get<double>();
    p.passes = j.at("passes").get<std::uint64_t>();
    p.burn_in = j.at("burn_in").get<std::uint64_t>();
    p.average = j.at("average").get<bool>();
    p.seed = j.at("seed").get<std::uint64_t>();
    p.metric_top_n = j.at("metric_top_n").get<std::uint64_t>();
    p.diversity_top_n = j.at("diversity_top_n").get<std::uint64_t>();
    p.save_models = j.value("save_models", true);
    p.parallel = j.value("parallel", true);
    return p;
}

std::vector<std::string> run_sweep(const SweepParams& params, const fs::path& out_dir,
                                   RunManifest& manifest) {
    auto [matrix, vocab] = load_matrix(params.matrix);
    LdaConfig base = make_config(2, params.alpha, params.beta, params.passes, params.burn_in,
                                 params.average, params.seed);
    SweepOptions options;
    options.metric_top_n = params.metric_top_n;
    options.diversity_top_n = params.diversity_top_n;
    options.parallel = params.parallel;
    SweepResult result = sweep_k(matrix, static_cast<std::uint32_t>(params.k_min),
                                 static_cast<std::uint32_t>(params.k_max), base,
                                 vocab.content_hash(), options);

    write_sweep_tsv(result.report, out_dir / "sweep.tsv");
    write_sweep_json(result.report, out_dir / "sweep.json");
    std::vector<std::string> outputs = {"sweep.tsv", "sweep.json"};
    if (params.save_models) {
        for (const LdaModel& model : result.models) {
            std::string name = "model_K" + std::to_string(model.config.num_topics) + ".bin";
            save_model(model, out_dir / name);
            outputs.push_back(name);
        }
    }
    manifest.stats = json{{"evaluations", result.report.evaluations.size()},
                          {"selected_k", result.report.selected_k}};
    std::cout << "sweep: evaluated K in [" << params.k_min << ", " << params.k_max
              << "], selected K=" << result.report.selected_k << "\n";
    return outputs;
}

// ---- analyze ----

struct AnalyzeParams {
    std::string model;
    std::string matrix;
    std::string units;
    std::string demographics;
    std::string labels;
    std::string axis = "sex";
    std::uint64_t n_top = 10;
    std::int64_t reference_year = 0;  // 0 -> unset
    bool per_patient = false;
    bool export_phi = false;
    bool export_theta = false;
};

json to_json(const AnalyzeParams& p) {
    return json{{"model", p.model},
                {"matrix", p.matrix},
                {"units", p.units},
                {"demographics", p.demographics},
                {"labels", p.labels},
                {"axis", p.axis},
                {"n_top", p.n_top},
                {"reference_year", p.reference_year},
                {"per_patient", p.per_patient},
                {"export_phi", p.export_phi},
                {"export_theta", p.export_theta}};
}

AnalyzeParams analyze_from_json(const json& j) {
    AnalyzeParams p;
    p.model = j.at("model").get<std::string>();
    p.matrix = j.at("matrix").get<std::string>();
    p.units = j.value("units", "");
    p.demographics = j.value("demographics", "");
    p.labels = j.value("labels", "");
    p.axis = j.at("axis").get<std::string>();
    p.n_top = j.at("n_top").get<std::uint64_t>();
    p.reference_year = j.value("reference_year", std::int64_t{0});
    p.per_patient = j.value("per_patient", false);
    p.export_phi = j.value("export_phi", false);
    p.export_theta = j.value("export_theta", false);
    return p;
}

std::vector<std::string> run_analyze(const AnalyzeParams& params, const fs::path& out_dir,
                                     RunManifest& manifest) {
    LdaModel model = load_model(params.model);
    auto [matrix, vocab] = load_matrix(params.matrix);
    if (vocab.size() != model.vocab_size) {
        throw DataError("matrix vocabulary size does not match the model");
    }
    if (model.vocab_hash != 0 && vocab.content_hash() != model.vocab_hash) {
        std::cerr << "warning: vocabulary hash differs from the one the model was trained on\n";
    }
    if (matrix.num_docs() != model.num_docs) {
        throw DataError("matrix row count does not match the model");
    }

    TopicLabels labels;
    if (!params.labels.empty()) labels = load_topic_labels(params.labels);

    write_top_words_tsv(model, vocab, params.n_top, labels, out_dir / "top_words.tsv");
    wordcloud_export(model, vocab, params.n_top, out_dir / "wordcloud.csv");
    std::vector<std::string> outputs = {"top_words.tsv", "wordcloud.csv"};

    json stats{{"topics", model.config.num_topics}};
    if (!params.demographics.empty()) {
        if (params.units.empty()) {
            throw DataError("--units is required for stratification");
        }
        std::vector<DocumentUnit> units = load_units(params.units);
        PatientTable patients = load_patients(params.demographics);
        StratifyOptions options;
        options.axis = params.axis == "age" ? StratifyAxis::age : StratifyAxis::sex;
        options.per_patient = params.per_patient;
        if (params.reference_year != 0) {
            options.reference_year = static_cast<int>(params.reference_year);
        }
        DenseMatrix theta_hat = theta(model);
        StratifyResult strat = stratify(theta_hat, matrix.unit_ids, units, patients, options);
        std::string heatmap_name = "heatmap_" + params.axis + ".tsv";
        heatmap_export(strat.groups, labels, out_dir / heatmap_name);
        outputs.push_back(heatmap_name);
        stats["groups"] = strat.groups.size();
        stats["unresolved_units"] = strat.unresolved_units;
        stats["empty_groups"] = strat.empty_groups;
    }
    if (params.export_phi) {
        export_phi_tsv(model, out_dir / "phi.tsv");
        outputs.push_back("phi.tsv");
    }
    if (params.export_theta) {
        export_theta_tsv(model, matrix.unit_ids, out_dir / "theta.tsv");
        outputs.push_back("theta.tsv");
    }
    manifest.stats = stats;
    std::cout << "analyze: wrote " << outputs.size() << " file(s) to " << out_dir.string()
              << "\n";
    return outputs;
}

// ---- manifest plumbing ----

void finalize_manifest(RunManifest& manifest, const std::string& subcommand,
                       const json& parameters, const std::vector<std::string>& outputs,
                       const fs::path& out_dir) {
    manifest.subcommand = subcommand;
    manifest.parameters = parameters;
    for (const std::string& name : outputs) {
        manifest.outputs[name] = hash_file_hex(out_dir / name);
    }
    manifest.finished_at = utc_timestamp();
    write_manifest(manifest, out_dir / "manifest.json");
}

std::vector<std::string> dispatch(const std::string& subcommand, const json& parameters,
                                  const fs::path& out_dir, RunManifest& manifest) {
    if (subcommand == "ingest") {
        IngestParams p = ingest_from_json(parameters);
        add_input(manifest, p.notes);
        return run_ingest(p, out_dir, manifest);
    }
    if (subcommand == "lexicon") {
        LexiconParams p = lexicon_from_json(parameters);
        add_input(manifest, p.lexicon);
        add_input(manifest, p.embeddings);
        add_input(manifest, p.stopwords);
        add_input(manifest, p.decisions_file);
        add_input(manifest, p.sample_notes);
        return run_lexicon(p, out_dir, manifest);
    }
    if (subcommand == "prepare") {
        PrepareParams p = prepare_from_json(parameters);
        add_input(manifest, p.notes);
        add_input(manifest, p.lexicon);
        add_input(manifest, p.stopwords);
        add_input(manifest, p.abbreviations);
        return run_prepare(p, out_dir, manifest);
    }
    if (subcommand == "train") {
        TrainParams p = train_from_json(parameters);
        add_input(manifest, p.matrix);
        return run_train(p, out_dir, manifest);
    }
    if (subcommand == "sweep") {
        SweepParams p = sweep_from_json(parameters);
        add_input(manifest, p.matrix);
        return run_sweep(p, out_dir, manifest);
    }
    if (subcommand == "analyze") {
        AnalyzeParams p = analyze_from_json(parameters);
        add_input(manifest, p.model);
        add_input(manifest, p.matrix);
        add_input(manifest, p.units);
        add_input(manifest, p.demographics);
        add_input(manifest, p.labels);
        return run_analyze(p, out_dir, manifest);
    }
    throw DataError("manifest names unknown subcommand \"" + subcommand + "\"");
}

int run_with_manifest(const std::string& subcommand, const json& parameters,
                      const fs::path& out_dir) {
    ensure_out_dir(out_dir);
    RunManifest manifest;
    manifest.started_at = utc_timestamp();
    std::vector<std::string> outputs = dispatch(subcommand, parameters, out_dir, manifest);
    finalize_manifest(manifest, subcommand, parameters, outputs, out_dir);
    return kExitOk;
}

int verify_manifest(const fs::path& manifest_path, bool keep_temp) {
    RunManifest recorded = read_manifest(manifest_path);
    if (recorded.version != kToolVersion) {
        std::cerr << "warning: manifest written by version " << recorded.version
                  << ", this is " << kToolVersion << "\n";
    }
    for (const auto& [path, hash] : recorded.inputs) {
        std::string now = hash_file_hex(path);
        if (now != hash) {
            std::cerr << "input changed since the recorded run: " << path << "\n";
            return kExitData;
        }
    }

    fs::path temp_dir = fs::temp_directory_path() /
                        ("notetopics-verify-" + to_hex(combine_seed(
                             fnv1a64(manifest_path.string()),
                             static_cast<std::uint64_t>(
                                 std::chrono::steady_clock::now().time_since_epoch().count()))));
    ensure_out_dir(temp_dir);

    RunManifest replay;
    replay.started_at = utc_timestamp();
    std::vector<std::string> outputs =
        dispatch(recorded.subcommand, recorded.parameters, temp_dir, replay);

    bool all_match = true;
    std::map<std::string, std::string> replayed;
    for (const std::string& name : outputs) replayed[name] = hash_file_hex(temp_dir / name);
    for (const auto& [name, hash] : recorded.outputs) {
        auto it = replayed.find(name);
        if (it == replayed.end()) {
            std::cout << "MISSING  " << name << "\n";
            all_match = false;
        } else if (it->second != hash) {
            std::cout << "DIFFERS  " << name << "\n";
            all_match = false;
        } else {
            std::cout << "OK       " << name << "\n";
        }
    }
    for (const auto& [name, hash] : replayed) {
        (void)hash;
        if (!recorded.outputs.count(name)) {
            std::cout << "EXTRA    " << name << "\n";
            all_match = false;
        }
    }

    if (!keep_temp) {
        std::error_code ec;
        fs::remove_all(temp_dir, ec);
    } else {
        std::cout << "replay outputs kept in " << temp_dir.string() << "\n";
    }
    std::cout << (all_match ? "manifest verified: outputs reproduce bit-exactly\n"
                            : "manifest verification FAILED\n");
    return all_match ? kExitOk : kExitData;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"corpus-to-topics pipeline: keyword curation, corpus filtering, "
                 "LDA topic modeling and stratified topic analysis"};
    app.set_version_flag("--version", std::string(kToolVersion));
    app.require_subcommand(1);

    std::string out_dir;

    // ingest
    IngestParams ingest_params;
    auto* ingest_cmd = app.add_subcommand("ingest", "load, deduplicate and length-filter notes");
    ingest_cmd->add_option("--notes", ingest_params.notes, "notes JSONL file")->required();
    ingest_cmd->add_option("--min-chars", ingest_params.min_chars,
                           "drop notes shorter than this many characters")
        ->capture_default_str();
    ingest_cmd->add_option("--out", out_dir, "output directory")->required();

    // lexicon
    LexiconParams lexicon_params;
    bool interactive = false;
    auto* lexicon_cmd =
        app.add_subcommand("lexicon", "propose keyword candidates and run snowball review");
    lexicon_cmd->add_option("--lexicon", lexicon_params.lexicon, "seed lexicon file")->required();
    lexicon_cmd->add_option("--embeddings", lexicon_params.embeddings, "word-vector text file")
        ->required();
    lexicon_cmd->add_option("--stopwords", lexicon_params.stopwords, "stopword override file");
    lexicon_cmd->add_option("--decisions", lexicon_params.decisions_file,
                            "CSV term,decision with accept/reject per proposal");
    lexicon_cmd->add_flag("--interactive", interactive, "review proposals at the terminal");
    lexicon_cmd->add_option("--sample", lexicon_params.sample_notes,
                            "notes JSONL sampled during interactive review");
    lexicon_cmd->add_option("--sample-size", lexicon_params.sample_size,
                            "sampled notes shown per candidate")
        ->capture_default_str();
    lexicon_cmd->add_option("--top-n", lexicon_params.top_n, "candidates per seed term")
        ->capture_default_str();
    lexicon_cmd->add_option("--min-cosine", lexicon_params.min_cosine,
                            "minimum cosine similarity for candidates")
        ->capture_default_str();
    lexicon_cmd->add_option("--seed", lexicon_params.seed, "sampling seed")->capture_default_str();
    lexicon_cmd->add_option("--out", out_dir, "output directory")->required();

    // prepare
    PrepareParams prepare_params;
    auto* prepare_cmd = app.add_subcommand(
        "prepare", "apply a filtering strategy and build the document-term matrix");
    prepare_cmd->add_option("--notes", prepare_params.notes, "cleaned notes JSONL")->required();
    prepare_cmd->add_option("--strategy", prepare_params.strategy, "s1, s2 or s3")
        ->required()
        ->check(CLI::IsMember({"s1", "s2", "s3"}));
    prepare_cmd->add_option("--lexicon", prepare_params.lexicon,
                            "keyword lexicon (required for s2/s3)");
    prepare_cmd->add_option("--stopwords", prepare_params.stopwords, "stopword override file");
    prepare_cmd->add_option("--abbreviations", prepare_params.abbreviations,
                            "extra sentence-splitting abbreviations");
    prepare_cmd->add_option("--min-df", prepare_params.min_df, "minimum document frequency")
        ->capture_default_str();
    prepare_cmd->add_option("--max-df", prepare_params.max_df,
                            "maximum document frequency fraction")
        ->capture_default_str();
    prepare_cmd->add_flag("--dump-tokens", prepare_params.dump_tokens,
                          "also write tokens.jsonl (debug)");
    prepare_cmd->add_option("--out", out_dir, "output directory")->required();

    // train
    TrainParams train_params;
    auto* train_cmd = app.add_subcommand("train", "train a single LDA model");
    train_cmd->add_option("--matrix", train_params.matrix, "document-term matrix file")
        ->required();
    train_cmd->add_option("--k", train_params.k, "number of topics")->required();
    train_cmd->add_option("--alpha", train_params.alpha, "document-topic prior (0 = 50/K)")
        ->capture_default_str();
    train_cmd->add_option("--beta", train_params.beta, "topic-word prior")->capture_default_str();
    train_cmd->add_option("--passes", train_params.passes, "Gibbs sweeps over the corpus")
        ->capture_default_str();
    train_cmd->add_option("--burn-in", train_params.burn_in,
                          "sweeps excluded from posterior averaging")
        ->capture_default_str();
    train_cmd->add_flag("--average", train_params.average,
                        "average phi/theta over post-burn-in sweeps");
    train_cmd->add_option("--seed", train_params.seed, "RNG seed")->capture_default_str();
    train_cmd->add_flag("--export-phi", train_params.export_phi, "also write phi.tsv");
    train_cmd->add_flag("--export-theta", train_params.export_theta, "also write theta.tsv");
    train_cmd->add_option("--out", out_dir, "output directory")->required();

    // sweep
    SweepParams sweep_params;
    auto* sweep_cmd =
        app.add_subcommand("sweep", "train one model per K and pick the best topic count");
    sweep_cmd->add_option("--matrix", sweep_params.matrix, "document-term matrix file")
        ->required();
    sweep_cmd->add_option("--k-min", sweep_params.k_min, "smallest K")->capture_default_str();
    sweep_cmd->add_option("--k-max", sweep_params.k_max, "largest K")->capture_default_str();
    sweep_cmd->add_option("--alpha", sweep_params.alpha, "document-topic prior (0 = 50/K)")
        ->capture_default_str();
    sweep_cmd->add_option("--beta", sweep_params.beta, "topic-word prior")->capture_default_str();
    sweep_cmd->add_option("--passes", sweep_params.passes, "Gibbs sweeps per model")
        ->capture_default_str();
    sweep_cmd->add_option("--burn-in", sweep_params.burn_in,
                          "sweeps excluded from posterior averaging")
        ->capture_default_str();
    sweep_cmd->add_flag("--average", sweep_params.average,
                        "average phi/theta over post-burn-in sweeps");
    sweep_cmd->add_option("--seed", sweep_params.seed, "base seed; per-K seeds derive from it")
        ->capture_default_str();
    sweep_cmd->add_option("--metric-top-n", sweep_params.metric_top_n,
                          "top words for coherence/similarity")
        ->capture_default_str();
    sweep_cmd->add_option("--diversity-top-n", sweep_params.diversity_top_n,
                          "top words for diversity")
        ->capture_default_str();
    sweep_cmd->add_flag("!--no-save-models", sweep_params.save_models,
                        "skip writing per-K model files");
    sweep_cmd->add_flag("!--no-parallel", sweep_params.parallel, "train per-K models serially");
    sweep_cmd->add_option("--out", out_dir, "output directory")->required();

    // analyze
    AnalyzeParams analyze_params;
    auto* analyze_cmd = app.add_subcommand(
        "analyze", "top-word tables, word-cloud weights and stratified heatmap data");
    analyze_cmd->add_option("--model", analyze_params.model, "trained model file")->required();
    analyze_cmd->add_option("--matrix", analyze_params.matrix,
                            "matrix the model was trained on (vocabulary + unit ids)")
        ->required();
    analyze_cmd->add_option("--units", analyze_params.units, "units.jsonl from prepare");
    analyze_cmd->add_option("--demographics", analyze_params.demographics,
                            "patients CSV for stratification");
    analyze_cmd->add_option("--labels", analyze_params.labels, "CSV topic_id,label");
    analyze_cmd->add_option("--axis", analyze_params.axis, "stratification axis")
        ->check(CLI::IsMember({"sex", "age"}))
        ->capture_default_str();
    analyze_cmd->add_option("--n-top", analyze_params.n_top, "words per topic in reports")
        ->capture_default_str();
    analyze_cmd->add_option("--reference-year", analyze_params.reference_year,
                            "year used to turn birth_year into age");
    analyze_cmd->add_flag("--per-patient", analyze_params.per_patient,
                          "average per patient before averaging per group");
    analyze_cmd->add_flag("--export-phi", analyze_params.export_phi, "also write phi.tsv");
    analyze_cmd->add_flag("--export-theta", analyze_params.export_theta, "also write theta.tsv");
    analyze_cmd->add_option("--out", out_dir, "output directory")->required();

    // verify-manifest
    std::string manifest_path;
    bool keep_temp = false;
    auto* verify_cmd =
        app.add_subcommand("verify-manifest", "re-run a recorded manifest and diff the outputs");
    verify_cmd->add_option("manifest", manifest_path, "manifest.json from a previous run")
        ->required();
    verify_cmd->add_flag("--keep-temp", keep_temp, "keep the replay output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (ingest_cmd->parsed()) {
            ingest_params.notes = absolute_path(ingest_params.notes);
            return run_with_manifest("ingest", to_json(ingest_params), out_dir);
        }
        if (lexicon_cmd->parsed()) {
            lexicon_params.lexicon = absolute_path(lexicon_params.lexicon);
            lexicon_params.embeddings = absolute_path(lexicon_params.embeddings);
            if (!lexicon_params.stopwords.empty()) {
                lexicon_params.stopwords = absolute_path(lexicon_params.stopwords);
            }
            if (!lexicon_params.sample_notes.empty()) {
                lexicon_params.sample_notes = absolute_path(lexicon_params.sample_notes);
            }
            if (interactive && !lexicon_params.decisions_file.empty()) {
                throw DataError("--interactive and --decisions are mutually exclusive");
            }
            if (!lexicon_params.decisions_file.empty()) {
                lexicon_params.decisions_file = absolute_path(lexicon_params.decisions_file);
                lexicon_params.decisions = load_decisions_file(lexicon_params.decisions_file);
                lexicon_params.review = true;
            } else if (interactive) {
                interactive_review(lexicon_params);
                lexicon_params.review = true;
            }
            return run_with_manifest("lexicon", to_json(lexicon_params), out_dir);
        }
        if (prepare_cmd->parsed()) {
            prepare_params.notes = absolute_path(prepare_params.notes);
            if (!prepare_params.lexicon.empty()) {
                prepare_params.lexicon = absolute_path(prepare_params.lexicon);
            }
            if (!prepare_params.stopwords.empty()) {
                prepare_params.stopwords = absolute_path(prepare_params.stopwords);
            }
            if (!prepare_params.abbreviations.empty()) {
                prepare_params.abbreviations = absolute_path(prepare_params.abbreviations);
            }
            return run_with_manifest("prepare", to_json(prepare_params), out_dir);
        }
        if (train_cmd->parsed()) {
            train_params.matrix = absolute_path(train_params.matrix);
            return run_with_manifest("train", to_json(train_params), out_dir);
        }
        if (sweep_cmd->parsed()) {
            sweep_params.matrix = absolute_path(sweep_params.matrix);
            return run_with_manifest("sweep", to_json(sweep_params), out_dir);
        }
        if (analyze_cmd->parsed()) {
            analyze_params.model = absolute_path(analyze_params.model);
            analyze_params.matrix = absolute_path(analyze_params.matrix);
            if (!analyze_params.units.empty()) {
                analyze_params.units = absolute_path(analyze_params.units);
            }
            if (!analyze_params.demographics.empty()) {
                analyze_params.demographics = absolute_path(analyze_params.demographics);
            }
            if (!analyze_params.labels.empty()) {
                analyze_params.labels = absolute_path(analyze_params.labels);
            }
            return run_with_manifest("analyze", to_json(analyze_params), out_dir);
        }
        if (verify_cmd->parsed()) {
            return verify_manifest(manifest_path, keep_temp);
        }
    } catch (const DataError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    } catch (const InternalError& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return kExitInternal;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return kExitInternal;
    }
    return kExitUsage;
}
