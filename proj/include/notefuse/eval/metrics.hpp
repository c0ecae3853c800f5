#pragma once

#include <set>
#include <string>
#include <unordered_set>
#include <vector>

#include "notefuse/core/errors.hpp"

namespace notefuse::eval {

// One scored retrieval query: a ranked prediction against a target set.
// Predictions must arrive deduplicated; duplicates indicate an upstream bug
// and are rejected rather than silently collapsed.
struct EvalQuery {
    std::vector<std::string> prediction;  // ranked, unique
    std::set<std::string> target;         // m >= 1
};

namespace detail {

inline void validate_queries(const std::vector<EvalQuery>& queries, int k) {
    if (queries.empty()) throw input_error("metrics: empty query list");
    if (k < 1) throw input_error("metrics: K must be >= 1");
    for (const auto& q : queries) {
        if (q.target.empty()) throw input_error("metrics: query with empty target set");
        std::unordered_set<std::string> seen;
        for (const auto& c : q.prediction)
            if (!seen.insert(c).second)
                throw input_error("metrics: duplicate item in ranked prediction: " + c);
    }
}

}  // namespace detail

// Mean average precision truncated at rank K, normalized by min(m, K).
// Ranks beyond the prediction length contribute nothing.
inline double map_at_k(const std::vector<EvalQuery>& queries, int k) {
    detail::validate_queries(queries, k);
    double total = 0.0;
    for (const auto& q : queries) {
        const int m = static_cast<int>(q.target.size());
        const int upto = std::min<int>(k, static_cast<int>(q.prediction.size()));
        int hits = 0;
        double ap = 0.0;
        for (int r = 0; r < upto; ++r) {
            if (q.target.count(q.prediction[static_cast<size_t>(r)])) {
                ++hits;
                ap += static_cast<double>(hits) / static_cast<double>(r + 1);
            }
        }
        total += ap / static_cast<double>(std::min(m, k));
    }
    return total / static_cast<double>(queries.size());
}

// Mean average recall truncated at rank K, normalized by m.
inline double mar_at_k(const std::vector<EvalQuery>& queries, int k) {
    detail::validate_queries(queries, k);
    double total = 0.0;
    for (const auto& q : queries) {
        const int upto = std::min<int>(k, static_cast<int>(q.prediction.size()));
        int hits = 0;
        for (int r = 0; r < upto; ++r)
            if (q.target.count(q.prediction[static_cast<size_t>(r)])) ++hits;
        total += static_cast<double>(hits) / static_cast<double>(q.target.size());
    }
    return total / static_cast<double>(queries.size());
}

}  // namespace notefuse::eval
