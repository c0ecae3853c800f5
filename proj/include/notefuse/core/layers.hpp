#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "notefuse/core/autograd.hpp"
#include "notefuse/core/optim.hpp"

namespace notefuse::core::layers {

// Shared transformer building blocks used by both the note encoder and the
// trajectory model. Sequences are processed one at a time ([T x hidden]
// activations), so no padding masks are threaded through.

struct Linear {
    ag::Var w, b;

    // Fan-in scaled init unless an explicit std is given.
    static Linear create(ParamStore& params, const std::string& prefix, int64_t in, int64_t out,
                         Rng& rng, double init_std = -1.0) {
        const double std = init_std > 0.0 ? init_std : 1.0 / std::sqrt(static_cast<double>(in));
        return {params.add(prefix + ".w", Tensor::randn({in, out}, rng, std)),
                params.add(prefix + ".b", Tensor::zeros({1, out}))};
    }

    static Linear from_store(const ParamStore& params, const std::string& prefix) {
        return {params.get(prefix + ".w"), params.get(prefix + ".b")};
    }

    ag::Var operator()(const ag::Var& x) const { return ag::add_rowvec(ag::matmul(x, w), b); }
};

struct LayerNorm {
    ag::Var gain, bias;

    static LayerNorm create(ParamStore& params, const std::string& prefix, int64_t dim) {
        return {params.add(prefix + ".g", Tensor::full({1, dim}, 1.0)),
                params.add(prefix + ".b", Tensor::zeros({1, dim}))};
    }

    static LayerNorm from_store(const ParamStore& params, const std::string& prefix) {
        return {params.get(prefix + ".g"), params.get(prefix + ".b")};
    }

    ag::Var operator()(const ag::Var& x) const { return ag::layer_norm(x, gain, bias); }
};

struct MultiHeadAttention {
    Linear q, k, v, out;
    int n_heads = 1;

    static MultiHeadAttention create(ParamStore& params, const std::string& prefix, int64_t hidden,
                                     int n_heads, Rng& rng) {
        MultiHeadAttention mha;
        mha.q = Linear::create(params, prefix + ".q", hidden, hidden, rng);
        mha.k = Linear::create(params, prefix + ".k", hidden, hidden, rng);
        mha.v = Linear::create(params, prefix + ".v", hidden, hidden, rng);
        mha.out = Linear::create(params, prefix + ".o", hidden, hidden, rng);
        mha.n_heads = n_heads;
        return mha;
    }

    static MultiHeadAttention from_store(const ParamStore& params, const std::string& prefix,
                                         int n_heads) {
        MultiHeadAttention mha;
        mha.q = Linear::from_store(params, prefix + ".q");
        mha.k = Linear::from_store(params, prefix + ".k");
        mha.v = Linear::from_store(params, prefix + ".v");
        mha.out = Linear::from_store(params, prefix + ".o");
        mha.n_heads = n_heads;
        return mha;
    }

    // `head_bias` (optional) holds one additive [Tq x Tk] logit bias per head
    // (distance penalties, causal masks, or their sum).
    ag::Var operator()(const ag::Var& query_input, const ag::Var& kv_input,
                       const std::vector<Tensor>* head_bias = nullptr) const {
        const int64_t hidden = q.w.cols();
        const int64_t dh = hidden / n_heads;
        const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
        ag::Var qs = q(query_input);
        ag::Var ks = k(kv_input);
        ag::Var vs = v(kv_input);
        std::vector<ag::Var> heads;
        heads.reserve(static_cast<size_t>(n_heads));
        for (int h = 0; h < n_heads; ++h) {
            ag::Var qh = ag::slice_cols(qs, h * dh, dh);
            ag::Var kh = ag::slice_cols(ks, h * dh, dh);
            ag::Var vh = ag::slice_cols(vs, h * dh, dh);
            ag::Var logits = ag::scale(ag::matmul(qh, kh, false, true), scale);
            if (head_bias) logits = ag::add_const(logits, (*head_bias)[static_cast<size_t>(h)]);
            heads.push_back(ag::matmul(ag::softmax_rows(logits), vh));
        }
        return out(ag::concat_cols(heads));
    }
};

struct FeedForward {
    Linear in, out;

    static FeedForward create(ParamStore& params, const std::string& prefix, int64_t hidden,
                              int64_t ff_dim, Rng& rng) {
        return {Linear::create(params, prefix + ".in", hidden, ff_dim, rng),
                Linear::create(params, prefix + ".out", ff_dim, hidden, rng)};
    }

    static FeedForward from_store(const ParamStore& params, const std::string& prefix) {
        return {Linear::from_store(params, prefix + ".in"), Linear::from_store(params, prefix + ".out")};
    }

    ag::Var operator()(const ag::Var& x) const { return out(ag::gelu(in(x))); }
};

// Additive causal mask: position i may attend to j <= i only.
inline Tensor causal_mask(int64_t t) {
    Tensor m({t, t});
    for (int64_t i = 0; i < t; ++i)
        for (int64_t j = i + 1; j < t; ++j) m(i, j) = -1e30;
    return m;
}

// Fixed sinusoidal position table [t x dim].
inline Tensor sinusoidal_positions(int64_t t, int64_t dim) {
    Tensor p({t, dim});
    for (int64_t pos = 0; pos < t; ++pos)
        for (int64_t i = 0; i < dim; ++i) {
            const double angle =
                static_cast<double>(pos) /
                std::pow(10000.0, 2.0 * static_cast<double>(i / 2) / static_cast<double>(dim));
            p(pos, i) = (i % 2 == 0) ? std::sin(angle) : std::cos(angle);
        }
    return p;
}

}  // namespace notefuse::core::layers
