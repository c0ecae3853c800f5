#pragma once

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "notefuse/core/errors.hpp"
#include "notefuse/data/records.hpp"
#include "notefuse/prep/normalize.hpp"

namespace notefuse::prep {

enum class CodeType { diagnosis, procedure, drug };

inline const char* code_type_name(CodeType t) {
    switch (t) {
        case CodeType::diagnosis: return "diagnosis";
        case CodeType::procedure: return "procedure";
        default: return "drug";
    }
}

// Many-to-one grouping of raw codes into categories. Must be total over the
// vocabulary it is applied to; drug codes are never mapped.
struct CodeMappingTable {
    CodeType code_type = CodeType::diagnosis;
    std::map<std::string, std::string> entries;

    const std::string& map(const std::string& code) const {
        auto it = entries.find(code);
        if (it == entries.end())
            throw mapping_error(std::string("unmapped ") + code_type_name(code_type) + " code: " + code);
        return it->second;
    }
};

// Two-column CSV: source_code,category
inline CodeMappingTable load_mapping_csv(const std::string& path, CodeType type) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot read mapping table: " + path);
    CodeMappingTable t;
    t.code_type = type;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos) throw io_error("malformed mapping line in " + path + ": " + line);
        t.entries[line.substr(0, comma)] = line.substr(comma + 1);
    }
    return t;
}

inline void save_mapping_csv(const std::string& path, const CodeMappingTable& table) {
    std::ofstream out(path);
    if (!out) throw io_error("cannot write mapping table: " + path);
    for (const auto& [src, cat] : table.entries) out << src << ',' << cat << '\n';
}

// Retained patients plus the deterministic per-type vocabularies
// (descending corpus frequency, lexicographic tie-break) and a provenance
// trail of the steps applied.
struct Cohort {
    std::vector<data::PatientRecord> patients;
    std::vector<std::string> vocab_diagnosis;
    std::vector<std::string> vocab_procedure;
    std::vector<std::string> vocab_drug;
    std::vector<std::string> provenance;

    const std::vector<std::string>& vocab(CodeType t) const {
        switch (t) {
            case CodeType::diagnosis: return vocab_diagnosis;
            case CodeType::procedure: return vocab_procedure;
            default: return vocab_drug;
        }
    }
};

namespace detail {

inline std::map<std::string, int64_t> count_codes(const std::vector<data::PatientRecord>& patients,
                                                  CodeType type) {
    std::map<std::string, int64_t> counts;
    for (const auto& p : patients)
        for (const auto& v : p.visits) {
            const auto& codes = type == CodeType::diagnosis ? v.diagnoses
                                : type == CodeType::procedure ? v.procedures
                                                              : v.drugs;
            for (const auto& c : codes) ++counts[c];
        }
    return counts;
}

inline std::vector<std::string> ordered_vocab(const std::map<std::string, int64_t>& counts) {
    std::vector<std::pair<std::string, int64_t>> items(counts.begin(), counts.end());
    std::sort(items.begin(), items.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    std::vector<std::string> out;
    out.reserve(items.size());
    for (auto& [code, n] : items) out.push_back(code);
    return out;
}

inline void rebuild_vocabularies(Cohort& cohort) {
    cohort.vocab_diagnosis = ordered_vocab(count_codes(cohort.patients, CodeType::diagnosis));
    cohort.vocab_procedure = ordered_vocab(count_codes(cohort.patients, CodeType::procedure));
    cohort.vocab_drug = ordered_vocab(count_codes(cohort.patients, CodeType::drug));
}

}  // namespace detail

// Keeps patients with >= 2 visits and at least one code of each type
// somewhere in the record; orders visits by timestamp.
inline Cohort build_cohort(const std::vector<data::PatientRecord>& records) {
    Cohort cohort;
    for (const auto& r : records) {
        if (r.visits.size() < 2) continue;
        bool has_dx = false, has_px = false, has_rx = false;
        for (const auto& v : r.visits) {
            has_dx = has_dx || !v.diagnoses.empty();
            has_px = has_px || !v.procedures.empty();
            has_rx = has_rx || !v.drugs.empty();
        }
        if (!has_dx || !has_px || !has_rx) continue;
        data::PatientRecord kept = r;
        std::stable_sort(kept.visits.begin(), kept.visits.end(),
                         [](const data::Visit& a, const data::Visit& b) { return a.timestamp < b.timestamp; });
        cohort.patients.push_back(std::move(kept));
    }
    detail::rebuild_vocabularies(cohort);
    cohort.provenance.push_back("build_cohort: min_visits=2, require all three code types");
    return cohort;
}

// Replaces diagnosis/procedure codes by their categories; duplicates within a
// visit collapse via set semantics. Drug codes pass through unchanged.
inline Cohort map_codes(const Cohort& cohort, const std::vector<CodeMappingTable>& tables) {
    const CodeMappingTable* dx_table = nullptr;
    const CodeMappingTable* px_table = nullptr;
    for (const auto& t : tables) {
        if (t.code_type == CodeType::diagnosis) dx_table = &t;
        if (t.code_type == CodeType::procedure) px_table = &t;
    }
    Cohort out = cohort;
    for (auto& p : out.patients)
        for (auto& v : p.visits) {
            if (dx_table) {
                std::set<std::string> mapped;
                for (const auto& c : v.diagnoses) mapped.insert(dx_table->map(c));
                v.diagnoses = std::move(mapped);
            }
            if (px_table) {
                std::set<std::string> mapped;
                for (const auto& c : v.procedures) mapped.insert(px_table->map(c));
                v.procedures = std::move(mapped);
            }
        }
    detail::rebuild_vocabularies(out);
    out.provenance.push_back("map_codes: diagnosis/procedure categories applied");
    return out;
}

// Removes every code (all three types) whose corpus occurrence count is below
// the threshold. Keep iff count >= threshold.
inline Cohort prune_infrequent(const Cohort& cohort, int64_t threshold = 5) {
    if (threshold < 0) throw input_error("prune_infrequent: negative threshold");
    Cohort out = cohort;
    for (CodeType type : {CodeType::diagnosis, CodeType::procedure, CodeType::drug}) {
        const auto counts = detail::count_codes(out.patients, type);
        for (auto& p : out.patients)
            for (auto& v : p.visits) {
                auto& codes = type == CodeType::diagnosis ? v.diagnoses
                              : type == CodeType::procedure ? v.procedures
                                                            : v.drugs;
                for (auto it = codes.begin(); it != codes.end();) {
                    if (counts.at(*it) < threshold)
                        it = codes.erase(it);
                    else
                        ++it;
                }
            }
    }
    detail::rebuild_vocabularies(out);
    out.provenance.push_back("prune_infrequent: threshold=" + std::to_string(threshold));
    return out;
}

// Applies note normalization to every visit.
inline Cohort normalize_notes(const Cohort& cohort,
                              const AbbreviationTable& abbrev = default_abbreviations()) {
    Cohort out = cohort;
    for (auto& p : out.patients)
        for (auto& v : p.visits) v.note = normalize_note_text(v.note, abbrev);
    out.provenance.push_back("normalize_notes");
    return out;
}

// Prefix expansion: for visits v1..vn, emits (v1..vi -> diagnoses(v_{i+1})).
// Pairs with an empty target are dropped; sources keep the most recent
// max_source_visits. Targets are ordered by the diagnosis vocabulary rank
// (descending corpus frequency, ties lexicographic) so teacher forcing and
// evaluation see one deterministic order.
inline std::vector<data::TrajectoryPair> build_pairs(const Cohort& cohort,
                                                     int max_source_visits = 16) {
    if (max_source_visits < 1) throw input_error("build_pairs: max_source_visits must be >= 1");
    std::unordered_map<std::string, size_t> dx_rank;
    for (size_t i = 0; i < cohort.vocab_diagnosis.size(); ++i) dx_rank[cohort.vocab_diagnosis[i]] = i;

    std::vector<data::TrajectoryPair> pairs;
    for (const auto& p : cohort.patients) {
        for (size_t i = 0; i + 1 < p.visits.size(); ++i) {
            const auto& target_visit = p.visits[i + 1];
            if (target_visit.diagnoses.empty()) continue;
            data::TrajectoryPair pair;
            pair.patient_id = p.patient_id;
            pair.pair_id = p.patient_id + "#" + std::to_string(i);
            const size_t first = (i + 1 > static_cast<size_t>(max_source_visits))
                                     ? i + 1 - static_cast<size_t>(max_source_visits)
                                     : 0;
            pair.source_visits.assign(p.visits.begin() + static_cast<std::ptrdiff_t>(first),
                                      p.visits.begin() + static_cast<std::ptrdiff_t>(i + 1));
            pair.target_codes.assign(target_visit.diagnoses.begin(), target_visit.diagnoses.end());
            std::sort(pair.target_codes.begin(), pair.target_codes.end(),
                      [&](const std::string& a, const std::string& b) {
                          return dx_rank.at(a) < dx_rank.at(b);
                      });
            pairs.push_back(std::move(pair));
        }
    }
    return pairs;
}

// Deterministic target order shared by training and decoding. The rank map is
// the diagnosis vocabulary order (descending corpus frequency, lexicographic
// tie-break).
inline std::vector<std::string> target_ordering(const std::set<std::string>& target,
                                                const std::unordered_map<std::string, size_t>& rank) {
    if (target.empty()) throw input_error("target_ordering: empty target set");
    std::vector<std::string> out(target.begin(), target.end());
    std::sort(out.begin(), out.end(), [&](const std::string& a, const std::string& b) {
        auto ia = rank.find(a), ib = rank.find(b);
        const size_t ra = ia == rank.end() ? rank.size() : ia->second;
        const size_t rb = ib == rank.end() ? rank.size() : ib->second;
        if (ra != rb) return ra < rb;
        return a < b;
    });
    return out;
}

// Per-visit count statistics for one code type: distinct codes plus
// mean +/- std codes per visit.
struct CodeStats {
    int64_t distinct = 0;
    double mean_per_visit = 0.0;
    double std_per_visit = 0.0;
};

inline CodeStats code_stats(const std::vector<data::PatientRecord>& patients, CodeType type) {
    CodeStats s;
    s.distinct = static_cast<int64_t>(detail::count_codes(patients, type).size());
    int64_t visits = 0;
    double sum = 0.0, sumsq = 0.0;
    for (const auto& p : patients)
        for (const auto& v : p.visits) {
            const auto& codes = type == CodeType::diagnosis ? v.diagnoses
                                : type == CodeType::procedure ? v.procedures
                                                              : v.drugs;
            const double n = static_cast<double>(codes.size());
            sum += n;
            sumsq += n * n;
            ++visits;
        }
    if (visits > 0) {
        s.mean_per_visit = sum / static_cast<double>(visits);
        const double var = sumsq / static_cast<double>(visits) - s.mean_per_visit * s.mean_per_visit;
        s.std_per_visit = var > 0.0 ? std::sqrt(var) : 0.0;
    }
    return s;
}

inline nlohmann::json stats_json(const std::vector<data::PatientRecord>& before,
                                 const Cohort& after) {
    nlohmann::json j;
    for (CodeType type : {CodeType::diagnosis, CodeType::procedure, CodeType::drug}) {
        const CodeStats b = code_stats(before, type);
        const CodeStats a = code_stats(after.patients, type);
        j[code_type_name(type)] = {
            {"distinct_at_loading", b.distinct},
            {"distinct_after", a.distinct},
            {"per_visit_at_loading", {{"mean", b.mean_per_visit}, {"std", b.std_per_visit}}},
            {"per_visit_after", {{"mean", a.mean_per_visit}, {"std", a.std_per_visit}}},
        };
    }
    j["patients_after"] = after.patients.size();
    j["provenance"] = after.provenance;
    return j;
}

// Vocabulary sidecar written next to the pair file; training and evaluation
// read token spaces from here.
inline nlohmann::json vocab_json(const Cohort& cohort) {
    return {{"diagnosis", cohort.vocab_diagnosis},
            {"procedure", cohort.vocab_procedure},
            {"drug", cohort.vocab_drug}};
}

struct Vocabularies {
    std::vector<std::string> diagnosis, procedure, drug;
};

inline Vocabularies vocab_from_json(const nlohmann::json& j) {
    Vocabularies v;
    v.diagnosis = j.at("diagnosis").get<std::vector<std::string>>();
    v.procedure = j.at("procedure").get<std::vector<std::string>>();
    v.drug = j.at("drug").get<std::vector<std::string>>();
    return v;
}

// The full preprocessing pipeline in contract order. Mapping is applied
// before pruning so pruning counts refer to mapped categories.
struct PipelineResult {
    Cohort cohort;
    std::vector<data::TrajectoryPair> pairs;
    nlohmann::json stats;
};

inline PipelineResult run_pipeline(const std::vector<data::PatientRecord>& records,
                                   const std::vector<CodeMappingTable>& tables, int64_t threshold = 5,
                                   int max_source_visits = 16,
                                   const AbbreviationTable& abbrev = default_abbreviations()) {
    PipelineResult result;
    Cohort cohort = build_cohort(records);
    cohort = map_codes(cohort, tables);
    cohort = prune_infrequent(cohort, threshold);
    cohort = normalize_notes(cohort, abbrev);
    result.stats = stats_json(records, cohort);
    result.pairs = build_pairs(cohort, max_source_visits);
    result.cohort = std::move(cohort);
    return result;
}

}  // namespace notefuse::prep
