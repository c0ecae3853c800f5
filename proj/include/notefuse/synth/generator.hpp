#pragma once

#include <algorithm>
#include <cstdio>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "notefuse/core/errors.hpp"
#include "notefuse/core/rng.hpp"
#include "notefuse/data/records.hpp"

namespace notefuse::synth {

struct CountParams {
    double mean = 1.0;
    double std = 1.0;
};

// Configuration for the synthetic EHR generator. Defaults follow the
// published per-visit code statistics; the latent machinery adds a hidden
// per-visit condition whose evidence can be routed into the note text or the
// code stream, which is what makes note-fusion ablations testable.
struct GeneratorConfig {
    uint64_t seed = 7;
    int n_patients = 1000;

    int vocab_diagnosis = 762;
    int vocab_procedure = 470;
    int vocab_drug = 1609;

    CountParams diagnosis_counts{13.18, 8.58};
    CountParams procedure_counts{2.99, 2.77};
    CountParams drug_counts{24.12, 28.19};

    // visit-count distribution: P(v) ~ v^-shape for v in [1, max_visits]
    double visit_shape = 2.2;
    int max_visits = 12;

    int note_template_count = 8;

    // probability that the latent condition driving the next visit is
    // mentioned only in the note; with the complement it surfaces as an extra
    // diagnosis code instead
    double latent_signal_strength = 1.0;

    int latent_classes = 6;
    int bundle_codes_per_class = 6;  // consecutive raw diagnosis codes per class
    double latent_stay_prob = 0.8;
    double transition_noise = 0.1;  // per-bundle-code drop probability
    double chronic_frac = 0.5;      // share of filler codes drawn from patient history

    // popularity skew for general code sampling
    double popularity_exponent = 0.8;

    void validate() const {
        if (n_patients < 0) throw config_error("generator: n_patients must be >= 0");
        if (vocab_diagnosis <= 0 || vocab_procedure <= 0 || vocab_drug <= 0)
            throw config_error("generator: vocabulary sizes must be positive");
        for (const auto* cp : {&diagnosis_counts, &procedure_counts, &drug_counts})
            if (cp->mean <= 0.0) throw config_error("generator: per-visit count means must be positive");
        if (latent_signal_strength < 0.0 || latent_signal_strength > 1.0)
            throw config_error("generator: latent_signal_strength must be in [0,1]");
        if (visit_shape <= 0.0) throw config_error("generator: visit_shape must be positive");
        if (max_visits < 1) throw config_error("generator: max_visits must be >= 1");
        if (latent_classes < 1) throw config_error("generator: latent_classes must be >= 1");
        if (bundle_codes_per_class < 1)
            throw config_error("generator: bundle_codes_per_class must be >= 1");
        if (latent_stay_prob < 0.0 || latent_stay_prob > 1.0)
            throw config_error("generator: latent_stay_prob must be in [0,1]");
        if (transition_noise < 0.0 || transition_noise >= 1.0)
            throw config_error("generator: transition_noise must be in [0,1)");
        if (reserved_diagnosis_codes() + 8 > vocab_diagnosis)
            throw config_error("generator: diagnosis vocabulary too small for latent layout");
    }

    int bundle_region_size() const { return latent_classes * bundle_codes_per_class; }
    // marker codes are spaced three apart so a 3-to-1 category grouping keeps
    // them distinguishable
    int reserved_diagnosis_codes() const { return bundle_region_size() + 3 * latent_classes; }
};

inline GeneratorConfig generator_config_from_json(const nlohmann::json& j) {
    GeneratorConfig c;
    c.seed = j.value("seed", c.seed);
    c.n_patients = j.value("n_patients", c.n_patients);
    if (j.contains("vocab_sizes")) {
        const auto& v = j.at("vocab_sizes");
        c.vocab_diagnosis = v.value("diagnosis", c.vocab_diagnosis);
        c.vocab_procedure = v.value("procedure", c.vocab_procedure);
        c.vocab_drug = v.value("drug", c.vocab_drug);
    }
    auto counts = [&](const char* key, CountParams& cp) {
        if (j.contains("per_visit_count_params") && j.at("per_visit_count_params").contains(key)) {
            const auto& p = j.at("per_visit_count_params").at(key);
            cp.mean = p.value("mean", cp.mean);
            cp.std = p.value("std", cp.std);
        }
    };
    counts("diagnosis", c.diagnosis_counts);
    counts("procedure", c.procedure_counts);
    counts("drug", c.drug_counts);
    if (j.contains("visit_count_distribution")) {
        const auto& v = j.at("visit_count_distribution");
        c.visit_shape = v.value("shape", c.visit_shape);
        c.max_visits = v.value("max_visits", c.max_visits);
    }
    c.note_template_count = j.value("note_template_count", c.note_template_count);
    c.latent_signal_strength = j.value("latent_signal_strength", c.latent_signal_strength);
    c.latent_classes = j.value("latent_classes", c.latent_classes);
    c.bundle_codes_per_class = j.value("bundle_codes_per_class", c.bundle_codes_per_class);
    c.latent_stay_prob = j.value("latent_stay_prob", c.latent_stay_prob);
    c.transition_noise = j.value("transition_noise", c.transition_noise);
    c.chronic_frac = j.value("chronic_frac", c.chronic_frac);
    c.popularity_exponent = j.value("popularity_exponent", c.popularity_exponent);
    return c;
}

inline nlohmann::json generator_config_to_json(const GeneratorConfig& c) {
    return {{"seed", c.seed},
            {"n_patients", c.n_patients},
            {"vocab_sizes",
             {{"diagnosis", c.vocab_diagnosis}, {"procedure", c.vocab_procedure}, {"drug", c.vocab_drug}}},
            {"per_visit_count_params",
             {{"diagnosis", {{"mean", c.diagnosis_counts.mean}, {"std", c.diagnosis_counts.std}}},
              {"procedure", {{"mean", c.procedure_counts.mean}, {"std", c.procedure_counts.std}}},
              {"drug", {{"mean", c.drug_counts.mean}, {"std", c.drug_counts.std}}}}},
            {"visit_count_distribution", {{"shape", c.visit_shape}, {"max_visits", c.max_visits}}},
            {"note_template_count", c.note_template_count},
            {"latent_signal_strength", c.latent_signal_strength},
            {"latent_classes", c.latent_classes},
            {"bundle_codes_per_class", c.bundle_codes_per_class},
            {"latent_stay_prob", c.latent_stay_prob},
            {"transition_noise", c.transition_noise},
            {"chronic_frac", c.chronic_frac},
            {"popularity_exponent", c.popularity_exponent}};
}

// ---------------------------------------------------------------------------
// code id helpers
// ---------------------------------------------------------------------------

namespace detail {

inline std::string code_id(char prefix, int index, int vocab_size) {
    int width = 1;
    for (int v = vocab_size - 1; v >= 10; v /= 10) ++width;
    width = std::max(width, 3);
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%c%0*d", prefix, width, index);
    return buf;
}

}  // namespace detail

inline std::string diagnosis_code(const GeneratorConfig& c, int index) {
    return detail::code_id('d', index, c.vocab_diagnosis);
}
inline std::string procedure_code(const GeneratorConfig& c, int index) {
    return detail::code_id('p', index, c.vocab_procedure);
}
inline std::string drug_code(const GeneratorConfig& c, int index) {
    return detail::code_id('m', index, c.vocab_drug);
}

// Raw diagnosis codes deterministically tied to a latent class.
inline std::vector<std::string> bundle_codes(const GeneratorConfig& c, int latent_class) {
    std::vector<std::string> out;
    for (int i = 0; i < c.bundle_codes_per_class; ++i)
        out.push_back(diagnosis_code(c, latent_class * c.bundle_codes_per_class + i));
    return out;
}

inline std::string marker_code(const GeneratorConfig& c, int latent_class) {
    return diagnosis_code(c, c.bundle_region_size() + 3 * latent_class);
}

inline const std::vector<std::string>& marker_words() {
    static const std::vector<std::string> words = {
        "kestrelward", "marrowfen",   "glintcough", "duskspell",  "emberpox",  "lunarash",
        "thornfever",  "mistgripe",   "sablewheeze", "fernblight", "hollowmure", "cinderpall"};
    return words;
}

inline std::string marker_word(int latent_class) {
    const auto& words = marker_words();
    if (latent_class < static_cast<int>(words.size())) return words[static_cast<size_t>(latent_class)];
    return "latentclass" + std::to_string(latent_class);
}

// ---------------------------------------------------------------------------
// note text
// ---------------------------------------------------------------------------

struct NoteResult {
    std::string text;
    bool marker_in_note = false;
};

// Raw note text with deliberately messy surface forms (abbreviation variants,
// accents, mixed case) so the normalization stage has real work to do. The
// latent marker phrase is included with probability latent_signal_strength.
inline NoteResult generate_note(const GeneratorConfig& config, const data::Visit& visit,
                                int latent_state, core::Rng& rng) {
    static const char* kHourForms[] = {"hr(s)", "hrs", "hr", "hours"};
    static const char* kAccentWords[] = {"Sjögren", "café", "søvn", "måling", "étude", "prøve"};
    static const char* kTemplates[] = {
        "Pt seen for routine follow up.",
        "Patient resting comfortably, vitals stable.",
        "No acute distress noted on exam.",
        "Reviewed medication list w/ patient.",
        "Discussed care plan, pt agreeable.",
        "Mild fatigue reported since last visit.",
        "Labs pending, will follow results.",
        "Patient ambulating without assistance.",
        "Appetite fair, sleep quality improving.",
        "Family present at bedside during rounds.",
        "Wound site clean, dry and intact.",
        "Breathing unlabored on room air.",
    };
    const int template_count =
        std::min<int>(std::max(1, config.note_template_count), static_cast<int>(std::size(kTemplates)));

    NoteResult result;
    std::string text = "Day " + std::to_string(visit.timestamp) + " of care. ";
    text += kTemplates[rng.below(static_cast<uint64_t>(template_count))];
    text += " Observed for 2 ";
    text += kHourForms[rng.below(std::size(kHourForms))];
    text += " after intake.";
    if (rng.bernoulli(0.5)) {
        text += " Noted ";
        text += kAccentWords[rng.below(std::size(kAccentWords))];
        text += " screening results.";
    }
    result.marker_in_note = rng.bernoulli(config.latent_signal_strength);
    if (result.marker_in_note) {
        text += " Assessment consistent with " + marker_word(latent_state) + " pattern.";
    }
    result.text = std::move(text);
    return result;
}

// ---------------------------------------------------------------------------
// cohort generation
// ---------------------------------------------------------------------------

// Latent trail for one patient, serialized only into the debug sidecar.
struct PatientDebug {
    std::string patient_id;
    std::vector<int> latent_states;      // state at each visit
    std::vector<bool> marker_in_note;    // where the state evidence went
};

struct CohortDebug {
    std::vector<PatientDebug> patients;
};

namespace detail {

// Weighted sampling without replacement (repeated draw with removal).
// `weights` is indexed alongside `pool`; both are consumed.
inline void sample_without_replacement(std::vector<int>& pool, std::vector<double>& weights, int k,
                                       core::Rng& rng, std::vector<int>& out) {
    for (int i = 0; i < k && !pool.empty(); ++i) {
        const size_t at = rng.weighted(weights);
        out.push_back(pool[at]);
        pool[at] = pool.back();
        pool.pop_back();
        weights[at] = weights.back();
        weights.pop_back();
    }
}

inline std::vector<double> popularity_weights(int n, double exponent) {
    std::vector<double> w(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) w[static_cast<size_t>(i)] = 1.0 / std::pow(i + 2.0, exponent);
    return w;
}

inline int sample_visit_count(const GeneratorConfig& c, core::Rng& rng) {
    std::vector<double> w(static_cast<size_t>(c.max_visits));
    for (int v = 1; v <= c.max_visits; ++v)
        w[static_cast<size_t>(v - 1)] = std::pow(static_cast<double>(v), -c.visit_shape);
    return static_cast<int>(rng.weighted(w)) + 1;
}

}  // namespace detail

// Target diagnosis set for the visit after `history`, driven by the latent
// state: bundle codes survive independently with probability
// 1 - transition_noise, the rest mixes patient history with popular codes.
inline std::set<std::string> next_visit_diagnoses(const GeneratorConfig& config, int latent_state,
                                                  const std::vector<data::Visit>& history,
                                                  core::Rng& rng) {
    std::set<std::string> out;
    for (const auto& code : bundle_codes(config, latent_state))
        if (!rng.bernoulli(config.transition_noise)) out.insert(code);

    int k = rng.neg_binomial(config.diagnosis_counts.mean, config.diagnosis_counts.std);
    k = std::max(k, 1);
    const int remaining = k - static_cast<int>(out.size());
    if (remaining > 0) {
        std::set<std::string> past;
        for (const auto& v : history)
            for (const auto& c : v.diagnoses) past.insert(c);

        std::vector<int> general_pool;
        const int reserved = config.reserved_diagnosis_codes();
        for (int i = reserved; i < config.vocab_diagnosis; ++i) general_pool.push_back(i);
        std::vector<double> general_w =
            detail::popularity_weights(static_cast<int>(general_pool.size()), config.popularity_exponent);

        std::vector<std::string> chronic_pool(past.begin(), past.end());
        for (int i = 0; i < remaining; ++i) {
            if (!chronic_pool.empty() && rng.bernoulli(config.chronic_frac)) {
                const size_t at = rng.below(chronic_pool.size());
                out.insert(chronic_pool[at]);
                chronic_pool[at] = chronic_pool.back();
                chronic_pool.pop_back();
            } else if (!general_pool.empty()) {
                std::vector<int> pick;
                detail::sample_without_replacement(general_pool, general_w, 1, rng, pick);
                if (!pick.empty()) out.insert(diagnosis_code(config, pick[0]));
            }
        }
    }
    if (out.empty()) out.insert(diagnosis_code(config, config.reserved_diagnosis_codes()));
    return out;
}

// Full synthetic cohort. The same seed always produces byte-identical records
// because every patient derives an independent substream from the master seed
// and all draws are made by the pinned Rng.
inline std::vector<data::PatientRecord> generate_cohort(const GeneratorConfig& config,
                                                        CohortDebug* debug = nullptr,
                                                        int patient_index_offset = 0) {
    config.validate();
    std::vector<data::PatientRecord> cohort;
    cohort.reserve(static_cast<size_t>(config.n_patients));
    if (debug) debug->patients.clear();

    for (int pi = 0; pi < config.n_patients; ++pi) {
        const int global_index = patient_index_offset + pi;
        core::Rng rng(core::derive_seed(config.seed, "patient", static_cast<uint64_t>(global_index)));
        data::PatientRecord rec;
        {
            char buf[32];
            std::snprintf(buf, sizeof(buf), "pt%07d", global_index);
            rec.patient_id = buf;
        }
        PatientDebug dbg;
        dbg.patient_id = rec.patient_id;

        const int n_visits = detail::sample_visit_count(config, rng);
        int64_t day = static_cast<int64_t>(rng.below(365));
        int state = static_cast<int>(rng.below(static_cast<uint64_t>(config.latent_classes)));

        for (int vi = 0; vi < n_visits; ++vi) {
            data::Visit visit;
            visit.timestamp = day;

            if (vi == 0) {
                // initial visit carries no bundle: history-free popular draw
                int k = std::max(1, rng.neg_binomial(config.diagnosis_counts.mean,
                                                     config.diagnosis_counts.std));
                std::vector<int> pool;
                for (int i = config.reserved_diagnosis_codes(); i < config.vocab_diagnosis; ++i)
                    pool.push_back(i);
                std::vector<double> w = detail::popularity_weights(static_cast<int>(pool.size()),
                                                                   config.popularity_exponent);
                std::vector<int> picks;
                detail::sample_without_replacement(pool, w, k, rng, picks);
                for (int idx : picks) visit.diagnoses.insert(diagnosis_code(config, idx));
            } else {
                // diagnoses realize the bundle of the previous visit's state
                visit.diagnoses = next_visit_diagnoses(config, state, rec.visits, rng);
                // advance the latent chain
                if (!rng.bernoulli(config.latent_stay_prob) && config.latent_classes > 1) {
                    const int hop =
                        1 + static_cast<int>(rng.below(static_cast<uint64_t>(config.latent_classes - 1)));
                    state = (state + hop) % config.latent_classes;
                }
            }

            {  // procedures
                const int k = rng.neg_binomial(config.procedure_counts.mean, config.procedure_counts.std);
                std::vector<int> pool;
                for (int i = 0; i < config.vocab_procedure; ++i) pool.push_back(i);
                std::vector<double> w =
                    detail::popularity_weights(config.vocab_procedure, config.popularity_exponent);
                std::vector<int> picks;
                detail::sample_without_replacement(pool, w, k, rng, picks);
                for (int idx : picks) visit.procedures.insert(procedure_code(config, idx));
            }
            {  // drugs
                const int k = rng.neg_binomial(config.drug_counts.mean, config.drug_counts.std);
                std::vector<int> pool;
                for (int i = 0; i < config.vocab_drug; ++i) pool.push_back(i);
                std::vector<double> w =
                    detail::popularity_weights(config.vocab_drug, config.popularity_exponent);
                std::vector<int> picks;
                detail::sample_without_replacement(pool, w, k, rng, picks);
                for (int idx : picks) visit.drugs.insert(drug_code(config, idx));
            }

            // the note (or a marker code) reveals the state driving the NEXT visit
            const NoteResult note = generate_note(config, visit, state, rng);
            visit.note = note.text;
            if (!note.marker_in_note) visit.diagnoses.insert(marker_code(config, state));

            dbg.latent_states.push_back(state);
            dbg.marker_in_note.push_back(note.marker_in_note);
            rec.visits.push_back(std::move(visit));
            day += 1 + static_cast<int64_t>(rng.below(365));
        }

        if (debug) debug->patients.push_back(std::move(dbg));
        cohort.push_back(std::move(rec));
    }
    return cohort;
}

inline void write_debug_sidecar(const std::string& path, const CohortDebug& debug) {
    core::JsonlWriter out(path);
    for (const auto& p : debug.patients) {
        out.write({{"patient_id", p.patient_id},
                   {"latent_states", p.latent_states},
                   {"marker_in_note", std::vector<int>(p.marker_in_note.begin(), p.marker_in_note.end())}});
    }
}

inline CohortDebug read_debug_sidecar(const std::string& path) {
    CohortDebug debug;
    core::for_each_jsonl(path, [&](const nlohmann::json& j) {
        PatientDebug p;
        p.patient_id = j.at("patient_id").get<std::string>();
        p.latent_states = j.at("latent_states").get<std::vector<int>>();
        for (int b : j.at("marker_in_note").get<std::vector<int>>()) p.marker_in_note.push_back(b != 0);
        debug.patients.push_back(std::move(p));
    });
    return debug;
}

// ---------------------------------------------------------------------------
// generator-internal reference predictor
// ---------------------------------------------------------------------------

// Ranks raw diagnosis codes by approximate inclusion probability for the
// visit following `source`. With `latent_state >= 0` the true state is used;
// otherwise the posterior is inferred from the bundle evidence in the last
// source visit (uniform when there is none). Used to verify that the note
// channel carries real signal beyond the code stream.
inline std::vector<std::string> oracle_rank(const GeneratorConfig& config,
                                            const std::vector<data::Visit>& source, int latent_state,
                                            int k) {
    std::vector<double> posterior(static_cast<size_t>(config.latent_classes),
                                  1.0 / config.latent_classes);
    if (latent_state >= 0) {
        std::fill(posterior.begin(), posterior.end(), 0.0);
        posterior[static_cast<size_t>(latent_state)] = 1.0;
    } else if (source.size() >= 2) {
        // The last visit's diagnoses contain the bundle of the previous
        // state; the chain then either stayed or hopped uniformly.
        const auto& last = source.back();
        int prev_state = -1;
        for (int c = 0; c < config.latent_classes; ++c) {
            int present = 0;
            for (const auto& code : bundle_codes(config, c))
                if (last.diagnoses.count(code)) ++present;
            if (present > config.bundle_codes_per_class / 2) prev_state = c;
        }
        if (prev_state >= 0 && config.latent_classes > 1) {
            for (int c = 0; c < config.latent_classes; ++c)
                posterior[static_cast<size_t>(c)] =
                    c == prev_state ? config.latent_stay_prob
                                    : (1.0 - config.latent_stay_prob) / (config.latent_classes - 1);
        }
    }

    std::map<std::string, double> score;
    for (int c = 0; c < config.latent_classes; ++c) {
        const double q = posterior[static_cast<size_t>(c)] * (1.0 - config.transition_noise);
        for (const auto& code : bundle_codes(config, c)) score[code] += q;
    }

    const double expected_bundle = (1.0 - config.transition_noise) * config.bundle_codes_per_class;
    const double expected_filler = std::max(0.0, config.diagnosis_counts.mean - expected_bundle);

    std::set<std::string> past;
    for (const auto& v : source)
        for (const auto& c : v.diagnoses) past.insert(c);
    if (!past.empty()) {
        const double per_past =
            std::min(1.0, config.chronic_frac * expected_filler / static_cast<double>(past.size()));
        for (const auto& code : past) score[code] += per_past;
    }

    const int reserved = config.reserved_diagnosis_codes();
    const int general_count = config.vocab_diagnosis - reserved;
    std::vector<double> w = detail::popularity_weights(general_count, config.popularity_exponent);
    double wsum = 0.0;
    for (double x : w) wsum += x;
    for (int i = 0; i < general_count; ++i)
        score[diagnosis_code(config, reserved + i)] +=
            (1.0 - config.chronic_frac) * expected_filler * w[static_cast<size_t>(i)] / wsum;

    std::vector<std::pair<std::string, double>> ranked(score.begin(), score.end());
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    std::vector<std::string> out;
    for (int i = 0; i < k && i < static_cast<int>(ranked.size()); ++i)
        out.push_back(ranked[static_cast<size_t>(i)].first);
    return out;
}

}  // namespace notefuse::synth
