#include <catch2/catch_amalgamated.hpp>

#include "notefuse/prep/normalize.hpp"
#include "notefuse/prep/pipeline.hpp"
#include "notefuse/synth/generator.hpp"

using namespace notefuse;
using namespace notefuse::prep;
using notefuse::data::PatientRecord;
using notefuse::data::Visit;

namespace bruteforce {

// Independent reference for the preprocessing pipeline: plain maps and loops,
// no shared code with prep::. Deliberately naive.
struct Ref {
    std::vector<PatientRecord> patients;
};

Ref filter(const std::vector<PatientRecord>& records) {
    Ref out;
    for (auto r : records) {
        if (r.visits.size() < 2) continue;
        int dx = 0, px = 0, rx = 0;
        for (const auto& v : r.visits) {
            dx += static_cast<int>(v.diagnoses.size());
            px += static_cast<int>(v.procedures.size());
            rx += static_cast<int>(v.drugs.size());
        }
        if (dx == 0 || px == 0 || rx == 0) continue;
        std::sort(r.visits.begin(), r.visits.end(),
                  [](const Visit& a, const Visit& b) { return a.timestamp < b.timestamp; });
        out.patients.push_back(r);
    }
    return out;
}

void apply_map(Ref& ref, const std::map<std::string, std::string>& dx_map,
               const std::map<std::string, std::string>& px_map) {
    for (auto& p : ref.patients)
        for (auto& v : p.visits) {
            std::set<std::string> d2, p2;
            for (const auto& c : v.diagnoses) d2.insert(dx_map.at(c));
            for (const auto& c : v.procedures) p2.insert(px_map.at(c));
            v.diagnoses = d2;
            v.procedures = p2;
        }
}

void prune(Ref& ref, int threshold) {
    for (int type = 0; type < 3; ++type) {
        std::map<std::string, int> counts;
        for (const auto& p : ref.patients)
            for (const auto& v : p.visits) {
                const auto& cs = type == 0 ? v.diagnoses : type == 1 ? v.procedures : v.drugs;
                for (const auto& c : cs) counts[c]++;
            }
        for (auto& p : ref.patients)
            for (auto& v : p.visits) {
                auto& cs = type == 0 ? v.diagnoses : type == 1 ? v.procedures : v.drugs;
                std::set<std::string> kept;
                for (const auto& c : cs)
                    if (counts[c] >= threshold) kept.insert(c);
                cs = kept;
            }
    }
}

std::vector<std::string> vocab(const Ref& ref, int type) {
    std::map<std::string, int> counts;
    for (const auto& p : ref.patients)
        for (const auto& v : p.visits) {
            const auto& cs = type == 0 ? v.diagnoses : type == 1 ? v.procedures : v.drugs;
            for (const auto& c : cs) counts[c]++;
        }
    std::vector<std::pair<std::string, int>> items(counts.begin(), counts.end());
    std::sort(items.begin(), items.end(), [](const auto& a, const auto& b) {
        return a.second != b.second ? a.second > b.second : a.first < b.first;
    });
    std::vector<std::string> out;
    for (auto& [c, n] : items) out.push_back(c);
    return out;
}

// (patient, prefix length) pair listing with empty targets dropped
std::vector<std::tuple<std::string, size_t, std::set<std::string>>> pairs(const Ref& ref,
                                                                          size_t max_src) {
    std::vector<std::tuple<std::string, size_t, std::set<std::string>>> out;
    for (const auto& p : ref.patients)
        for (size_t i = 1; i < p.visits.size(); ++i) {
            if (p.visits[i].diagnoses.empty()) continue;
            out.emplace_back(p.patient_id, std::min(i, max_src), p.visits[i].diagnoses);
        }
    return out;
}

}  // namespace bruteforce

namespace {

std::vector<PatientRecord> small_cohort(int n, uint64_t seed, double signal = 1.0) {
    synth::GeneratorConfig cfg;
    cfg.seed = seed;
    cfg.n_patients = n;
    cfg.vocab_diagnosis = 120;
    cfg.vocab_procedure = 40;
    cfg.vocab_drug = 60;
    cfg.diagnosis_counts = {5.0, 3.0};
    cfg.procedure_counts = {1.8, 1.5};
    cfg.drug_counts = {2.5, 2.0};
    cfg.latent_signal_strength = signal;
    return synth::generate_cohort(cfg);
}

std::vector<CodeMappingTable> grouped_tables(const std::vector<PatientRecord>& records, int group) {
    std::set<std::string> dx, px;
    for (const auto& r : records)
        for (const auto& v : r.visits) {
            dx.insert(v.diagnoses.begin(), v.diagnoses.end());
            px.insert(v.procedures.begin(), v.procedures.end());
        }
    CodeMappingTable dx_table, px_table;
    dx_table.code_type = CodeType::diagnosis;
    px_table.code_type = CodeType::procedure;
    int i = 0;
    for (const auto& c : dx) dx_table.entries[c] = "c" + std::to_string(i++ / group);
    i = 0;
    for (const auto& c : px) px_table.entries[c] = "g" + std::to_string(i++ / group);
    return {dx_table, px_table};
}

}  // namespace

// ---------------------------------------------------------------------------
// normalization
// ---------------------------------------------------------------------------

TEST_CASE("normalize: published string examples") {
    REQUIRE(normalize_note_text("Pt stable for 2 hr(s)") == "pt stable for 2 hours");
    REQUIRE(normalize_note_text("Sjögren, æther") == "sjogren, aether");
    REQUIRE(normalize_note_text("") == "");
}

TEST_CASE("normalize: 50-case table") {
    const std::pair<const char*, const char*> cases[] = {
        {"HR", "hours"},
        {"hr", "hours"},
        {"hrs", "hours"},
        {"hr(s)", "hours"},
        {"2 hr(s).", "2 hours."},
        {"HOURS", "hours"},
        {"chr", "chr"},              // no boundary at the left
        {"hrx", "hrx"},              // no boundary at the right
        {"for 3 hrs, then", "for 3 hours, then"},
        {"min", "minutes"},
        {"mins", "minutes"},
        {"min(s)", "minutes"},
        {"admin", "admin"},
        {"yr", "years"},
        {"yrs", "years"},
        {"5 yr(s)", "5 years"},
        {"wk", "weeks"},
        {"wks", "weeks"},
        {"mo", "months"},
        {"mos", "months"},
        {"BP 120", "blood pressure 120"},
        {"hx of falls", "history of falls"},
        {"sx improving", "symptoms improving"},
        {"fx of the wrist", "fracture of the wrist"},
        {"c/o pain", "complains of pain"},
        {"w/ food", "with  food"},
        {"w/o issue", "without issue"},
        {"SOB on exertion", "shortness of breath on exertion"},
        {"afib stable", "atrial fibrillation stable"},
        {"Ålborg", "aalborg"},
        {"søster", "soester"},
        {"Æble", "aeble"},
        {"blåbær", "blaabaer"},
        {"Müller", "muller"},
        {"café", "cafe"},
        {"naïve", "naive"},
        {"Çelik", "celik"},
        {"señor", "senor"},
        {"Łukasz", "lukasz"},
        {"Dvořák", "dvorak"},
        {"straße", "strasse"},
        {"Þórður", "thordur"},
        {"crème brûlée", "creme brulee"},
        {"Õnne", "onne"},
        {"ÿ", "y"},
        {"Œdème", "oedeme"},
        {"MiXeD CaSe TeXt", "mixed case text"},
        {"  spaced   out  ", "  spaced   out  "},
        {"digits 123 stay", "digits 123 stay"},
        {"!?;:,.", "!?;:,."},
    };
    for (const auto& [input, expected] : cases) {
        INFO("input: " << input);
        REQUIRE(normalize_note_text(input) == expected);
    }
}

TEST_CASE("normalize: idempotent on fuzzed strings") {
    core::Rng rng(20250802);
    const std::string pieces[] = {
        "hr(s)", "hrs",  "hr",    "min",   "BP",    "c/o",  "w/",    "Sjögren", "æ",    "ø",
        "å",     "Å",    "ß",     "œ",     "é",     "ü",    "ñ",     "Ž",       "pt",   "stable",
        "2",     "120",  " ",     ", ",    ". ",    "-",    "(",     ")",       "/",    "x",
        "Day",   "care", "hello", "WORLD", "\xff",  "\xc3", "\xe2",  "å",  "q",    "..."};
    for (int i = 0; i < 1000; ++i) {
        std::string s;
        const int n = rng.range(0, 20);
        for (int j = 0; j < n; ++j) s += pieces[rng.below(std::size(pieces))];
        const std::string once = normalize_note_text(s);
        const std::string twice = normalize_note_text(once);
        INFO("input bytes: " << s);
        REQUIRE(once == twice);
    }
}

TEST_CASE("normalize: generator notes are covered and idempotent") {
    auto records = small_cohort(40, 11);
    for (const auto& r : records)
        for (const auto& v : r.visits) {
            const std::string once = normalize_note_text(v.note);
            REQUIRE(normalize_note_text(once) == once);
            REQUIRE(once.find("hr(s)") == std::string::npos);
        }
}

TEST_CASE("abbreviation table loads from resource format") {
    const auto path = std::filesystem::temp_directory_path() / "nf_abbrev.txt";
    core::write_text_file(path.string(), "# comment\nqd=once daily\nbid=twice daily\n");
    auto table = load_abbreviations(path.string());
    REQUIRE(normalize_note_text("take QD", table) == "take once daily");
    std::filesystem::remove(path);
}

// ---------------------------------------------------------------------------
// cohort pipeline
// ---------------------------------------------------------------------------

TEST_CASE("build_cohort filters and orders") {
    PatientRecord single;
    single.patient_id = "s1";
    single.visits.resize(1);
    single.visits[0].diagnoses = {"d1"};
    single.visits[0].procedures = {"p1"};
    single.visits[0].drugs = {"m1"};

    PatientRecord no_drugs;
    no_drugs.patient_id = "s2";
    no_drugs.visits.resize(3);
    for (auto& v : no_drugs.visits) {
        v.diagnoses = {"d1"};
        v.procedures = {"p1"};
    }

    PatientRecord ok;
    ok.patient_id = "s3";
    ok.visits.resize(2);
    ok.visits[0].timestamp = 50;
    ok.visits[1].timestamp = 10;
    for (auto& v : ok.visits) {
        v.diagnoses = {"d1"};
        v.procedures = {"p1"};
        v.drugs = {"m1"};
    }

    const auto cohort = build_cohort({single, no_drugs, ok});
    REQUIRE(cohort.patients.size() == 1);
    REQUIRE(cohort.patients[0].patient_id == "s3");
    REQUIRE(cohort.patients[0].visits[0].timestamp == 10);  // sorted by time
    REQUIRE(cohort.patients[0].visits[1].timestamp == 50);
}

TEST_CASE("build_cohort equals brute-force filter on synthetic records") {
    auto records = small_cohort(100, 21);
    const auto cohort = build_cohort(records);
    const auto ref = bruteforce::filter(records);
    REQUIRE(cohort.patients.size() == ref.patients.size());
    for (size_t i = 0; i < ref.patients.size(); ++i) REQUIRE(cohort.patients[i] == ref.patients[i]);
}

TEST_CASE("map_codes collapses categories and reports unmapped codes") {
    PatientRecord p;
    p.patient_id = "x";
    p.visits.resize(2);
    for (auto& v : p.visits) {
        v.diagnoses = {"d12", "d13"};
        v.procedures = {"p1"};
        v.drugs = {"m1"};
    }
    auto cohort = build_cohort({p});

    CodeMappingTable dx{CodeType::diagnosis, {{"d12", "c5"}, {"d13", "c5"}}};
    CodeMappingTable px{CodeType::procedure, {{"p1", "g1"}}};
    const auto mapped = map_codes(cohort, {dx, px});
    REQUIRE(mapped.patients[0].visits[0].diagnoses == std::set<std::string>{"c5"});
    REQUIRE(mapped.patients[0].visits[0].drugs == std::set<std::string>{"m1"});

    // identity mapping leaves the cohort unchanged
    CodeMappingTable id_dx{CodeType::diagnosis, {{"d12", "d12"}, {"d13", "d13"}}};
    CodeMappingTable id_px{CodeType::procedure, {{"p1", "p1"}}};
    const auto same = map_codes(cohort, {id_dx, id_px});
    REQUIRE(same.patients == cohort.patients);

    CodeMappingTable incomplete{CodeType::diagnosis, {{"d12", "c5"}}};
    REQUIRE_THROWS_WITH(map_codes(cohort, {incomplete, px}),
                        Catch::Matchers::ContainsSubstring("d13"));
}

TEST_CASE("map_codes shrinks distinct diagnosis count by the grouping factor") {
    auto records = small_cohort(120, 31);
    auto cohort = build_cohort(records);
    const auto tables = grouped_tables(records, 3);
    const auto mapped = map_codes(cohort, tables);

    std::set<std::string> before, after;
    for (const auto& p : cohort.patients)
        for (const auto& v : p.visits) before.insert(v.diagnoses.begin(), v.diagnoses.end());
    for (const auto& p : mapped.patients)
        for (const auto& v : p.visits) after.insert(v.diagnoses.begin(), v.diagnoses.end());
    REQUIRE(after.size() <= before.size() / 2);
    REQUIRE(after.size() >= before.size() / 4);

    // vocabulary matches a brute-force recount
    auto ref = bruteforce::filter(records);
    bruteforce::apply_map(ref, tables[0].entries, tables[1].entries);
    REQUIRE(mapped.vocab_diagnosis == bruteforce::vocab(ref, 0));
}

TEST_CASE("prune_infrequent boundary: 4 removed, 5 kept, 0 keeps everything") {
    std::vector<PatientRecord> records;
    // code "keep" appears in 5 visits, "drop" in 4
    for (int i = 0; i < 5; ++i) {
        PatientRecord p;
        p.patient_id = "b" + std::to_string(i);
        p.visits.resize(2);
        for (auto& v : p.visits) {
            v.procedures = {"p0"};
            v.drugs = {"m0"};
        }
        p.visits[0].diagnoses = {"keep"};
        p.visits[1].diagnoses = i < 4 ? std::set<std::string>{"drop", "keep2"}
                                      : std::set<std::string>{"keep2"};
        records.push_back(p);
    }
    auto cohort = build_cohort(records);
    const auto pruned = prune_infrequent(cohort, 5);
    for (const auto& p : pruned.patients)
        for (const auto& v : p.visits) REQUIRE(v.diagnoses.count("drop") == 0);
    bool saw_keep = false, saw_keep2 = false;
    for (const auto& p : pruned.patients)
        for (const auto& v : p.visits) {
            saw_keep = saw_keep || v.diagnoses.count("keep");
            saw_keep2 = saw_keep2 || v.diagnoses.count("keep2");
        }
    REQUIRE(saw_keep);
    REQUIRE(saw_keep2);

    const auto untouched = prune_infrequent(cohort, 0);
    REQUIRE(untouched.patients == cohort.patients);
}

TEST_CASE("prune_infrequent equals brute-force frequency filter") {
    auto records = small_cohort(80, 41);
    auto cohort = build_cohort(records);
    const auto pruned = prune_infrequent(cohort, 5);

    auto ref = bruteforce::filter(records);
    bruteforce::prune(ref, 5);
    REQUIRE(pruned.vocab_diagnosis == bruteforce::vocab(ref, 0));
    REQUIRE(pruned.vocab_procedure == bruteforce::vocab(ref, 1));
    REQUIRE(pruned.vocab_drug == bruteforce::vocab(ref, 2));

    // invariant: no surviving code occurs fewer than threshold times
    std::map<std::string, int> counts;
    for (const auto& p : pruned.patients)
        for (const auto& v : p.visits)
            for (const auto& c : v.diagnoses) counts[c]++;
    for (const auto& [code, n] : counts) REQUIRE(n >= 5);
}

TEST_CASE("build_pairs: counts, truncation and empty-target drops") {
    PatientRecord two;
    two.patient_id = "t2";
    two.visits.resize(2);
    for (size_t i = 0; i < 2; ++i) {
        two.visits[i].timestamp = static_cast<int64_t>(i);
        two.visits[i].diagnoses = {"d1"};
        two.visits[i].procedures = {"p1"};
        two.visits[i].drugs = {"m1"};
    }
    auto cohort = build_cohort({two});
    REQUIRE(build_pairs(cohort).size() == 1);

    PatientRecord five = two;
    five.patient_id = "t5";
    five.visits.resize(5);
    for (size_t i = 0; i < 5; ++i) {
        five.visits[i].timestamp = static_cast<int64_t>(i);
        five.visits[i].diagnoses = {"d1"};
        five.visits[i].procedures = {"p1"};
        five.visits[i].drugs = {"m1"};
    }
    auto cohort5 = build_cohort({five});
    REQUIRE(build_pairs(cohort5).size() == 4);

    // visit 3 (index 2) has no diagnoses: the pair targeting it is dropped
    five.visits[2].diagnoses.clear();
    auto cohort_gap = build_cohort({five});
    const auto pairs = build_pairs(cohort_gap);
    REQUIRE(pairs.size() == 3);
    for (const auto& p : pairs) REQUIRE_FALSE(p.target_codes.empty());

    // truncation keeps the most recent source visits
    const auto truncated = build_pairs(cohort5, 2);
    REQUIRE(truncated.back().source_visits.size() == 2);
    REQUIRE(truncated.back().source_visits[1].timestamp == 3);
}

TEST_CASE("full pipeline equals brute-force reference on 200 patients") {
    auto records = small_cohort(200, 51);
    const auto tables = grouped_tables(records, 3);
    const auto result = run_pipeline(records, tables, 5, 16);

    auto ref = bruteforce::filter(records);
    bruteforce::apply_map(ref, tables[0].entries, tables[1].entries);
    bruteforce::prune(ref, 5);

    REQUIRE(result.cohort.patients.size() == ref.patients.size());
    for (size_t i = 0; i < ref.patients.size(); ++i) {
        REQUIRE(result.cohort.patients[i].patient_id == ref.patients[i].patient_id);
        for (size_t vi = 0; vi < ref.patients[i].visits.size(); ++vi) {
            REQUIRE(result.cohort.patients[i].visits[vi].diagnoses ==
                    ref.patients[i].visits[vi].diagnoses);
            REQUIRE(result.cohort.patients[i].visits[vi].procedures ==
                    ref.patients[i].visits[vi].procedures);
            REQUIRE(result.cohort.patients[i].visits[vi].drugs == ref.patients[i].visits[vi].drugs);
        }
    }
    REQUIRE(result.cohort.vocab_diagnosis == bruteforce::vocab(ref, 0));

    const auto ref_pairs = bruteforce::pairs(ref, 16);
    REQUIRE(result.pairs.size() == ref_pairs.size());
    for (size_t i = 0; i < ref_pairs.size(); ++i) {
        REQUIRE(result.pairs[i].patient_id == std::get<0>(ref_pairs[i]));
        REQUIRE(result.pairs[i].source_visits.size() == std::get<1>(ref_pairs[i]));
        const std::set<std::string> target(result.pairs[i].target_codes.begin(),
                                           result.pairs[i].target_codes.end());
        REQUIRE(target == std::get<2>(ref_pairs[i]));
    }

    // every pair's target codes live in the diagnosis vocabulary
    const std::set<std::string> vocab(result.cohort.vocab_diagnosis.begin(),
                                      result.cohort.vocab_diagnosis.end());
    for (const auto& p : result.pairs)
        for (const auto& c : p.target_codes) REQUIRE(vocab.count(c) == 1);
}

TEST_CASE("vocabulary order is deterministic across runs") {
    auto records = small_cohort(60, 61);
    const auto a = build_cohort(records);
    const auto b = build_cohort(records);
    REQUIRE(a.vocab_diagnosis == b.vocab_diagnosis);
    REQUIRE(a.vocab_drug == b.vocab_drug);
    // descending frequency with lexicographic ties
    auto counts = prep::detail::count_codes(a.patients, CodeType::diagnosis);
    for (size_t i = 0; i + 1 < a.vocab_diagnosis.size(); ++i) {
        const auto& x = a.vocab_diagnosis[i];
        const auto& y = a.vocab_diagnosis[i + 1];
        REQUIRE((counts[x] > counts[y] || (counts[x] == counts[y] && x < y)));
    }
}

TEST_CASE("target_ordering follows frequency rank with lexicographic ties") {
    std::unordered_map<std::string, size_t> rank = {{"common", 0}, {"rare", 5}};
    REQUIRE(target_ordering({"rare", "common"}, rank) ==
            std::vector<std::string>{"common", "rare"});
    // equal-frequency (both unranked) -> lexicographic
    REQUIRE(target_ordering({"c2", "c10"}, {}) == std::vector<std::string>{"c10", "c2"});
    REQUIRE_THROWS_AS(target_ordering({}, rank), input_error);
}

TEST_CASE("mapping table csv round trip") {
    CodeMappingTable t{CodeType::diagnosis, {{"d1", "c0"}, {"d2", "c0"}, {"d3", "c1"}}};
    const auto path = std::filesystem::temp_directory_path() / "nf_map.csv";
    save_mapping_csv(path.string(), t);
    const auto back = load_mapping_csv(path.string(), CodeType::diagnosis);
    REQUIRE(back.entries == t.entries);
    std::filesystem::remove(path);
}

TEST_CASE("stats json mirrors distinct counts and per-visit moments") {
    auto records = small_cohort(150, 71);
    const auto tables = grouped_tables(records, 3);
    const auto result = run_pipeline(records, tables, 5, 16);
    const auto& j = result.stats;
    REQUIRE(j.at("diagnosis").at("distinct_at_loading").get<int>() > 0);
    REQUIRE(j.at("diagnosis").at("distinct_after").get<int>() > 0);
    REQUIRE(j.at("drug").at("per_visit_at_loading").at("mean").get<double>() > 0.0);
    // drugs are unmapped: distinct count can only shrink via pruning
    REQUIRE(j.at("drug").at("distinct_after").get<int>() <=
            j.at("drug").at("distinct_at_loading").get<int>());
}
