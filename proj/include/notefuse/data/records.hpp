#pragma once

#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "notefuse/core/jsonl.hpp"

namespace notefuse::data {

// One hospital encounter. Code identifiers are opaque strings drawn from the
// configured vocabularies; sets keep within-visit codes unique and give a
// deterministic (lexicographic) serialization order.
struct Visit {
    int64_t timestamp = 0;  // days since cohort epoch
    std::set<std::string> diagnoses;
    std::set<std::string> procedures;
    std::set<std::string> drugs;
    std::string note;

    bool operator==(const Visit& o) const = default;
};

struct PatientRecord {
    std::string patient_id;
    std::vector<Visit> visits;

    bool operator==(const PatientRecord& o) const = default;
};

// (visit history -> next-visit diagnosis categories), the supervised example.
struct TrajectoryPair {
    std::string pair_id;
    std::string patient_id;
    std::vector<Visit> source_visits;
    std::vector<std::string> target_codes;  // ordered for teacher forcing
    int fold_id = -1;                       // -1 = unset

    bool operator==(const TrajectoryPair& o) const = default;
};

inline nlohmann::json visit_to_json(const Visit& v) {
    return {{"t", v.timestamp},
            {"dx", std::vector<std::string>(v.diagnoses.begin(), v.diagnoses.end())},
            {"px", std::vector<std::string>(v.procedures.begin(), v.procedures.end())},
            {"rx", std::vector<std::string>(v.drugs.begin(), v.drugs.end())},
            {"note", v.note}};
}

inline Visit visit_from_json(const nlohmann::json& j) {
    Visit v;
    v.timestamp = j.at("t").get<int64_t>();
    for (const auto& c : j.at("dx")) v.diagnoses.insert(c.get<std::string>());
    for (const auto& c : j.at("px")) v.procedures.insert(c.get<std::string>());
    for (const auto& c : j.at("rx")) v.drugs.insert(c.get<std::string>());
    v.note = j.at("note").get<std::string>();
    return v;
}

inline nlohmann::json record_to_json(const PatientRecord& r) {
    auto visits = nlohmann::json::array();
    for (const auto& v : r.visits) visits.push_back(visit_to_json(v));
    return {{"patient_id", r.patient_id}, {"visits", visits}};
}

inline PatientRecord record_from_json(const nlohmann::json& j) {
    PatientRecord r;
    r.patient_id = j.at("patient_id").get<std::string>();
    for (const auto& v : j.at("visits")) r.visits.push_back(visit_from_json(v));
    return r;
}

inline nlohmann::json pair_to_json(const TrajectoryPair& p) {
    auto src = nlohmann::json::array();
    for (const auto& v : p.source_visits) src.push_back(visit_to_json(v));
    nlohmann::json j = {{"pair_id", p.pair_id},
                        {"patient_id", p.patient_id},
                        {"source", src},
                        {"target", p.target_codes}};
    if (p.fold_id >= 0) j["fold"] = p.fold_id;
    return j;
}

inline TrajectoryPair pair_from_json(const nlohmann::json& j) {
    TrajectoryPair p;
    p.pair_id = j.at("pair_id").get<std::string>();
    p.patient_id = j.at("patient_id").get<std::string>();
    for (const auto& v : j.at("source")) p.source_visits.push_back(visit_from_json(v));
    p.target_codes = j.at("target").get<std::vector<std::string>>();
    p.fold_id = j.value("fold", -1);
    return p;
}

inline void write_records_jsonl(const std::string& path, const std::vector<PatientRecord>& records) {
    core::JsonlWriter out(path);
    for (const auto& r : records) out.write(record_to_json(r));
}

inline std::vector<PatientRecord> read_records_jsonl(const std::string& path) {
    std::vector<PatientRecord> out;
    core::for_each_jsonl(path, [&](const nlohmann::json& j) { out.push_back(record_from_json(j)); });
    return out;
}

inline void write_pairs_jsonl(const std::string& path, const std::vector<TrajectoryPair>& pairs) {
    core::JsonlWriter out(path);
    for (const auto& p : pairs) out.write(pair_to_json(p));
}

inline std::vector<TrajectoryPair> read_pairs_jsonl(const std::string& path) {
    std::vector<TrajectoryPair> out;
    core::for_each_jsonl(path, [&](const nlohmann::json& j) { out.push_back(pair_from_json(j)); });
    return out;
}

}  // namespace notefuse::data
