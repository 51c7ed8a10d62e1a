#include "notetopics/analysis.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <sstream>
#include <unordered_map>

namespace notetopics {

std::vector<WordWeight> top_words(const LdaModel& model, const Vocabulary& vocab,
                                  std::uint32_t topic_id, std::size_t n) {
    if (topic_id >= model.config.num_topics) throw DataError("topic id out of range");
    if (n > model.vocab_size) throw DataError("top-n exceeds vocabulary size");
    if (vocab.size() != model.vocab_size) {
        throw DataError("vocabulary size does not match the model");
    }
    const DenseMatrix phi_hat = phi(model);
    std::vector<WordWeight> out;
    for (std::uint32_t w : top_row_indices(phi_hat.row(topic_id), n)) {
        out.push_back({vocab.terms[w], phi_hat.at(topic_id, w)});
    }
    return out;
}

TopicLabels load_topic_labels(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot read topic label file: " + path.string());
    TopicLabels labels;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string stripped = trim(line);
        if (stripped.empty() || stripped[0] == '#') continue;
        if (line_no == 1 && to_lower(stripped) == "topic_id,label") continue;
        auto fields = split_csv_line(stripped);
        if (fields.size() != 2) {
            throw DataError("topic label row " + std::to_string(line_no) + ": expected 2 fields");
        }
        try {
            labels[static_cast<std::uint32_t>(std::stoul(trim(fields[0])))] = trim(fields[1]);
        } catch (const std::exception&) {
            throw DataError("topic label row " + std::to_string(line_no) + ": bad topic id");
        }
    }
    return labels;
}

void write_top_words_tsv(const LdaModel& model, const Vocabulary& vocab, std::size_t n,
                         const TopicLabels& labels, const std::filesystem::path& path) {
    std::ostringstream out;
    out << "topic_id\tlabel";
    for (std::size_t i = 1; i <= n; ++i) out << "\tword_" << i;
    out << "\n";
    for (std::uint32_t k = 0; k < model.config.num_topics; ++k) {
        auto it = labels.find(k);
        out << k << "\t" << (it == labels.end() ? "" : it->second);
        for (const WordWeight& ww : top_words(model, vocab, k, n)) {
            out << "\t" << ww.word;
        }
        out << "\n";
    }
    write_file(path, out.str());
}

void wordcloud_export(const LdaModel& model, const Vocabulary& vocab, std::size_t n,
                      const std::filesystem::path& path) {
    std::ostringstream out;
    out << "word,topic_id,weight\n";
    for (std::uint32_t k = 0; k < model.config.num_topics; ++k) {
        for (const WordWeight& ww : top_words(model, vocab, k, n)) {
            out << csv_escape(ww.word) << "," << k << "," << format_double(ww.weight, 9) << "\n";
        }
    }
    write_file(path, out.str());
}

// ---- stratification ----

const std::vector<AgeBin>& default_age_bins() {
    static const std::vector<AgeBin> bins = [] {
        std::vector<AgeBin> b;
        for (int lo = 10; lo < 90; lo += 10) {
            bool last = lo == 80;
            b.push_back({lo, lo + 10, last,
                         std::to_string(lo) + "-" + std::to_string(last ? 90 : lo + 9)});
        }
        return b;
    }();
    return bins;
}

namespace {

int age_bin_index(int age, const std::vector<AgeBin>& bins) {
    for (std::size_t i = 0; i < bins.size(); ++i) {
        const AgeBin& bin = bins[i];
        if (age >= bin.lower && (age < bin.upper || (bin.upper_inclusive && age == bin.upper))) {
            return static_cast<int>(i);
        }
    }
    return -1;
}

struct GroupAccumulator {
    std::vector<double> sum;
    std::size_t units = 0;
    // per-patient mode: patient -> (sum, count)
    std::unordered_map<std::string, std::pair<std::vector<double>, std::size_t>> per_patient;
};

}  // namespace

StratifyResult stratify(const DenseMatrix& theta, std::span<const std::string> unit_ids,
                        std::span<const DocumentUnit> units, const PatientTable& patients,
                        const StratifyOptions& options) {
    if (theta.rows != unit_ids.size()) {
        throw DataError("theta rows do not match unit ids");
    }
    std::unordered_map<std::string, const DocumentUnit*> unit_index;
    for (const DocumentUnit& u : units) unit_index.emplace(u.unit_id, &u);

    // fixed group order for deterministic reports
    std::vector<std::string> group_order;
    if (options.axis == StratifyAxis::sex) {
        group_order = {to_string(Sex::female), to_string(Sex::male), kUnknownSexGroup};
    } else {
        for (const AgeBin& bin : options.age_bins) group_order.push_back(bin.label);
        group_order.push_back(kOutOfRangeGroup);
    }
    std::unordered_map<std::string, GroupAccumulator> accumulators;
    for (const std::string& g : group_order) {
        accumulators[g].sum.assign(theta.cols, 0.0);
    }

    StratifyResult result;
    std::size_t resolved = 0;
    for (std::size_t row = 0; row < theta.rows; ++row) {
        auto unit_it = unit_index.find(unit_ids[row]);
        if (unit_it == unit_index.end()) {
            ++result.unresolved_units;
            continue;
        }
        const PatientRecord* patient = patients.find(unit_it->second->patient_id);
        if (!patient) {
            ++result.unresolved_units;
            continue;
        }
        std::string group;
        if (options.axis == StratifyAxis::sex) {
            group = patient->sex == Sex::unknown ? kUnknownSexGroup : to_string(patient->sex);
        } else {
            int idx = age_bin_index(age_of(*patient, options.reference_year), options.age_bins);
            group = idx < 0 ? kOutOfRangeGroup : options.age_bins[static_cast<std::size_t>(idx)].label;
        }
        GroupAccumulator& acc = accumulators.at(group);
        ++acc.units;
        ++resolved;
        if (options.per_patient) {
            auto& slot = acc.per_patient[patient->patient_id];
            if (slot.first.empty()) slot.first.assign(theta.cols, 0.0);
            for (std::size_t k = 0; k < theta.cols; ++k) slot.first[k] += theta.at(row, k);
            ++slot.second;
        } else {
            for (std::size_t k = 0; k < theta.cols; ++k) acc.sum[k] += theta.at(row, k);
        }
    }
    if (resolved == 0) {
        throw DataError("no unit could be resolved to a patient; check units/demographics");
    }
    if (result.unresolved_units > 0) {
        std::cerr << "warning: " << result.unresolved_units
                  << " unit(s) excluded from stratification (missing unit or patient)\n";
    }

    for (const std::string& label : group_order) {
        GroupAccumulator& acc = accumulators.at(label);
        if (acc.units == 0) {
            result.empty_groups.push_back(label);
            continue;
        }
        GroupTopicDistribution group;
        group.group = label;
        group.unit_count = acc.units;
        group.mean_theta.assign(theta.cols, 0.0);
        if (options.per_patient) {
            for (const auto& [patient_id, slot] : acc.per_patient) {
                (void)patient_id;
                for (std::size_t k = 0; k < theta.cols; ++k) {
                    group.mean_theta[k] +=
                        slot.first[k] / static_cast<double>(slot.second);
                }
            }
            for (double& x : group.mean_theta) {
                x /= static_cast<double>(acc.per_patient.size());
            }
        } else {
            for (std::size_t k = 0; k < theta.cols; ++k) {
                group.mean_theta[k] = acc.sum[k] / static_cast<double>(acc.units);
            }
        }
        result.groups.push_back(std::move(group));
    }
    return result;
}

void heatmap_export(const std::vector<GroupTopicDistribution>& groups,
                    const TopicLabels& labels, const std::filesystem::path& path) {
    std::vector<const GroupTopicDistribution*> exported;
    for (const GroupTopicDistribution& g : groups) {
        if (g.group == kOutOfRangeGroup || g.group == kUnknownSexGroup) continue;
        exported.push_back(&g);
    }
    if (exported.empty()) throw DataError("no groups to export");
    const std::size_t k_count = exported.front()->mean_theta.size();
    for (const auto* g : exported) {
        if (g->mean_theta.size() != k_count) {
            throw InternalError("heatmap groups disagree on topic count");
        }
    }

    std::ostringstream out;
    out << "topic";
    for (const auto* g : exported) out << "\t" << g->group;
    out << "\n";
    for (std::size_t k = 0; k < k_count; ++k) {
        auto it = labels.find(static_cast<std::uint32_t>(k));
        if (it != labels.end()) out << it->second;
        else out << "topic_" << k;
        for (const auto* g : exported) out << "\t" << format_double(g->mean_theta[k], 6);
        out << "\n";
    }
    write_file(path, out.str());
}

}  // namespace notetopics
