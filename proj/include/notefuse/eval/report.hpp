#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "notefuse/core/jsonl.hpp"
#include "notefuse/eval/plot.hpp"
#include "notefuse/eval/stats.hpp"

namespace notefuse::eval {

// Per-(model, fold, K) metric rows plus the aggregation used for display:
// mean, sample std and a 95% t-interval over folds.
struct MetricReport {
    struct Entry {
        std::string model;
        int fold = 0;
        int k = 0;
        double map = 0.0;
        double mar = 0.0;
    };

    std::vector<std::string> models;  // display order
    std::vector<int> k_list;
    std::vector<Entry> entries;
    double ci_level = 0.95;

    void add(const std::string& model, int fold, int k, double map, double mar) {
        entries.push_back({model, fold, k, map, mar});
        if (std::find(models.begin(), models.end(), model) == models.end()) models.push_back(model);
        if (std::find(k_list.begin(), k_list.end(), k) == k_list.end()) k_list.push_back(k);
    }

    std::vector<double> fold_values(const std::string& model, int k, bool map_metric) const {
        std::map<int, double> by_fold;  // deterministic fold order
        for (const auto& e : entries)
            if (e.model == model && e.k == k) by_fold[e.fold] = map_metric ? e.map : e.mar;
        std::vector<double> out;
        for (const auto& [f, v] : by_fold) out.push_back(v);
        return out;
    }

    struct Aggregate {
        double mean = 0.0;
        double std = 0.0;  // 0 when only one fold
        double ci_low = 0.0;
        double ci_high = 0.0;
        int n = 0;
    };

    Aggregate aggregate(const std::string& model, int k, bool map_metric) const {
        const auto values = fold_values(model, k, map_metric);
        if (values.empty()) throw input_error("MetricReport: no entries for " + model);
        Aggregate a;
        a.n = static_cast<int>(values.size());
        if (values.size() == 1) {
            a.mean = a.ci_low = a.ci_high = values[0];
            a.std = 0.0;
        } else {
            const Interval iv = confidence_interval(values, ci_level);
            a.mean = iv.mean;
            a.std = iv.std;
            a.ci_low = iv.low;
            a.ci_high = iv.high;
        }
        return a;
    }
};

// mean(std-in-last-decimal) cell: 0.425 +/- 0.005 -> "0.425(5)".
inline std::string format_mean_std(double mean, double std, int decimals = 3) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", decimals, mean);
    const long scaled = std::lround(std * std::pow(10.0, decimals));
    return std::string(buf) + "(" + std::to_string(scaled) + ")";
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

}  // namespace detail

// Wide table mirroring the report layout: rows = models, columns = (MAR, MAP)
// per K, cells formatted as mean(std-in-last-decimal).
inline std::string render_table_csv(const MetricReport& report, int decimals = 3) {
    std::ostringstream out;
    out << "model";
    for (int k : report.k_list) out << ",mar@" << k << ",map@" << k;
    out << "\n";
    for (const auto& model : report.models) {
        out << model;
        for (int k : report.k_list) {
            const auto mar = report.aggregate(model, k, false);
            const auto map = report.aggregate(model, k, true);
            out << "," << format_mean_std(mar.mean, mar.std, decimals) << ","
                << format_mean_std(map.mean, map.std, decimals);
        }
        out << "\n";
    }
    return out.str();
}

inline std::string render_table_text(const MetricReport& report, int decimals = 3) {
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> header = {"model"};
    for (int k : report.k_list) {
        header.push_back("MAR@" + std::to_string(k));
        header.push_back("MAP@" + std::to_string(k));
    }
    rows.push_back(header);
    for (const auto& model : report.models) {
        std::vector<std::string> row = {model};
        for (int k : report.k_list) {
            const auto mar = report.aggregate(model, k, false);
            const auto map = report.aggregate(model, k, true);
            row.push_back(format_mean_std(mar.mean, mar.std, decimals));
            row.push_back(format_mean_std(map.mean, map.std, decimals));
        }
        rows.push_back(row);
    }
    std::vector<size_t> widths(rows[0].size(), 0);
    for (const auto& r : rows)
        for (size_t i = 0; i < r.size(); ++i) widths[i] = std::max(widths[i], r[i].size());
    std::ostringstream out;
    for (size_t ri = 0; ri < rows.size(); ++ri) {
        for (size_t i = 0; i < rows[ri].size(); ++i) {
            out << rows[ri][i] << std::string(widths[i] - rows[ri][i].size() + 2, ' ');
        }
        out << "\n";
        if (ri == 0) {
            size_t total = 0;
            for (size_t wimth : widths) total += wimth + 2;
            out << std::string(total, '-') << "\n";
        }
    }
    return out.str();
}

// Parsed view of the CSV table: formatted cells, keyed by model.
struct ParsedTable {
    std::vector<int> k_list;
    std::vector<std::string> models;
    std::map<std::string, std::vector<std::string>> cells;  // model -> row cells in column order

    bool operator==(const ParsedTable& o) const {
        return k_list == o.k_list && models == o.models && cells == o.cells;
    }
};

inline ParsedTable parse_table_csv(const std::string& csv) {
    std::istringstream in(csv);
    std::string line;
    ParsedTable t;
    bool first = true;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto cols = detail::split_csv_line(line);
        if (first) {
            first = false;
            for (size_t i = 1; i < cols.size(); i += 2) {
                const auto at = cols[i].find('@');
                if (at == std::string::npos) throw io_error("parse_table_csv: malformed header");
                t.k_list.push_back(std::stoi(cols[i].substr(at + 1)));
            }
        } else {
            t.models.push_back(cols[0]);
            t.cells[cols[0]] = std::vector<std::string>(cols.begin() + 1, cols.end());
        }
    }
    return t;
}

inline ParsedTable table_view(const MetricReport& report, int decimals = 3) {
    return parse_table_csv(render_table_csv(report, decimals));
}

inline nlohmann::json report_to_json(const MetricReport& report) {
    nlohmann::json j;
    j["k_list"] = report.k_list;
    j["models"] = report.models;
    j["ci_level"] = report.ci_level;
    auto entries = nlohmann::json::array();
    for (const auto& e : report.entries)
        entries.push_back(
            {{"model", e.model}, {"fold", e.fold}, {"k", e.k}, {"map", e.map}, {"mar", e.mar}});
    j["entries"] = entries;
    nlohmann::json agg = nlohmann::json::object();
    for (const auto& model : report.models) {
        nlohmann::json per_k = nlohmann::json::object();
        for (int k : report.k_list) {
            const auto map = report.aggregate(model, k, true);
            const auto mar = report.aggregate(model, k, false);
            per_k[std::to_string(k)] = {
                {"map", {{"mean", map.mean}, {"std", map.std}, {"ci", {map.ci_low, map.ci_high}}}},
                {"mar", {{"mean", mar.mean}, {"std", mar.std}, {"ci", {mar.ci_low, mar.ci_high}}}}};
        }
        agg[model] = per_k;
    }
    j["aggregates"] = agg;
    return j;
}

inline MetricReport report_from_json(const nlohmann::json& j) {
    MetricReport r;
    r.ci_level = j.value("ci_level", 0.95);
    for (const auto& e : j.at("entries"))
        r.add(e.at("model").get<std::string>(), e.at("fold").get<int>(), e.at("k").get<int>(),
              e.at("map").get<double>(), e.at("mar").get<double>());
    // restore declared orders
    r.models = j.at("models").get<std::vector<std::string>>();
    r.k_list = j.at("k_list").get<std::vector<int>>();
    return r;
}

// Writes table5.csv / table5.txt / report.json plus the two metric-vs-K plots.
inline void emit_report(const MetricReport& report, const std::string& out_dir, int decimals = 3) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (!fs::exists(out_dir)) throw io_error("emit_report: cannot create " + out_dir);

    core::write_text_file(out_dir + "/table5.csv", render_table_csv(report, decimals));
    core::write_text_file(out_dir + "/table5.txt", render_table_text(report, decimals));
    core::write_text_file(out_dir + "/report.json", report_to_json(report).dump(2) + "\n");

    std::vector<Series> map_series, mar_series;
    for (const auto& model : report.models) {
        Series sm{model, {}, {}}, sr{model, {}, {}};
        for (int k : report.k_list) {
            sm.xs.push_back(k);
            sm.ys.push_back(report.aggregate(model, k, true).mean);
            sr.xs.push_back(k);
            sr.ys.push_back(report.aggregate(model, k, false).mean);
        }
        map_series.push_back(std::move(sm));
        mar_series.push_back(std::move(sr));
    }
    write_line_chart(out_dir + "/map_vs_k.png", "mean average precision", "k", "map", map_series);
    write_line_chart(out_dir + "/mar_vs_k.png", "mean average recall", "k", "mar", mar_series);
}

}  // namespace notefuse::eval
