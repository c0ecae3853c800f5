#pragma once

#include <cmath>
#include <vector>

#include "notefuse/core/errors.hpp"
#include "notefuse/core/tensor.hpp"

namespace notefuse::encoder {

// Attention with Linear Biases for a bidirectional encoder: additive,
// head-specific penalties on the symmetric token distance |i - j|, replacing
// learned positional embeddings entirely. Slopes follow the geometric
// construction slope(h) = 2^(-8(h+1)/n_heads).
inline std::vector<double> alibi_slopes(int n_heads) {
    if (n_heads < 1) throw input_error("alibi_slopes: n_heads must be >= 1");
    std::vector<double> slopes(static_cast<size_t>(n_heads));
    for (int h = 0; h < n_heads; ++h)
        slopes[static_cast<size_t>(h)] =
            std::pow(2.0, -8.0 * static_cast<double>(h + 1) / static_cast<double>(n_heads));
    return slopes;
}

// bias[h](i, j) = -slope(h) * |i - j|
inline std::vector<core::Tensor> alibi_bias(int n_heads, int64_t query_len, int64_t key_len) {
    if (query_len < 1 || key_len < 1) throw input_error("alibi_bias: lengths must be >= 1");
    const auto slopes = alibi_slopes(n_heads);
    std::vector<core::Tensor> bias;
    bias.reserve(static_cast<size_t>(n_heads));
    for (int h = 0; h < n_heads; ++h) {
        core::Tensor m({query_len, key_len});
        for (int64_t i = 0; i < query_len; ++i)
            for (int64_t j = 0; j < key_len; ++j)
                m(i, j) = -slopes[static_cast<size_t>(h)] * std::abs(static_cast<double>(i - j));
        bias.push_back(std::move(m));
    }
    return bias;
}

}  // namespace notefuse::encoder
