#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "notefuse/core/checkpoint.hpp"
#include "notefuse/core/layers.hpp"
#include "notefuse/encoder/alibi.hpp"
#include "notefuse/encoder/tokenizer.hpp"

namespace notefuse::encoder {

struct EncoderConfig {
    int n_layers = 4;
    int n_heads = 4;
    int hidden_dim = 128;
    int ff_dim = 256;
    int max_pretrain_len = 128;  // training length only; inference extrapolates
    int vocab_size = 512;
    double mask_prob = 0.30;
    uint64_t seed = 1;
    bool cls_pooling = false;  // mean pooling over tokens by default

    void validate() const {
        if (n_layers < 1 || n_heads < 1 || hidden_dim < 1 || ff_dim < 1)
            throw config_error("encoder: dimensions must be positive");
        if (hidden_dim % n_heads != 0)
            throw config_error("encoder: hidden_dim must be divisible by n_heads");
        if (mask_prob <= 0.0 || mask_prob >= 1.0)
            throw config_error("encoder: mask_prob must be in (0,1)");
        if (vocab_size <= Tokenizer::kNumSpecials)
            throw config_error("encoder: vocab_size must exceed special tokens");
        if (max_pretrain_len < 1) throw config_error("encoder: max_pretrain_len must be >= 1");
    }
};

inline nlohmann::json encoder_config_to_json(const EncoderConfig& c) {
    return {{"n_layers", c.n_layers},   {"n_heads", c.n_heads},
            {"hidden_dim", c.hidden_dim}, {"ff_dim", c.ff_dim},
            {"max_pretrain_len", c.max_pretrain_len}, {"vocab_size", c.vocab_size},
            {"mask_prob", c.mask_prob}, {"seed", c.seed},
            {"cls_pooling", c.cls_pooling}};
}

inline EncoderConfig encoder_config_from_json(const nlohmann::json& j) {
    EncoderConfig c;
    c.n_layers = j.value("n_layers", c.n_layers);
    c.n_heads = j.value("n_heads", c.n_heads);
    c.hidden_dim = j.value("hidden_dim", c.hidden_dim);
    c.ff_dim = j.value("ff_dim", c.ff_dim);
    c.max_pretrain_len = j.value("max_pretrain_len", c.max_pretrain_len);
    c.vocab_size = j.value("vocab_size", c.vocab_size);
    c.mask_prob = j.value("mask_prob", c.mask_prob);
    c.seed = j.value("seed", c.seed);
    c.cls_pooling = j.value("cls_pooling", c.cls_pooling);
    return c;
}

// Token representations after the embedding and after each encoder block:
// n_layers + 1 arrays of [sequence_length x hidden_dim].
struct LayerStack {
    std::vector<core::Tensor> layers;

    bool all_finite() const {
        for (const auto& t : layers)
            if (!t.all_finite()) return false;
        return true;
    }
};

// Bidirectional pre-norm transformer encoder with ALiBi distance penalties
// and no positional parameters of any kind.
class NoteEncoder {
public:
    explicit NoteEncoder(const EncoderConfig& config) : cfg_(config) {
        cfg_.validate();
        core::Rng rng(core::derive_seed(cfg_.seed, "encoder-init"));
        tok_emb_ = params_.add("enc.tok_emb",
                               core::Tensor::randn({cfg_.vocab_size, cfg_.hidden_dim}, rng, 0.1));
        for (int l = 0; l < cfg_.n_layers; ++l) {
            const std::string p = "enc.l" + std::to_string(l);
            blocks_.push_back(Block{
                core::layers::LayerNorm::create(params_, p + ".ln1", cfg_.hidden_dim),
                core::layers::MultiHeadAttention::create(params_, p + ".attn", cfg_.hidden_dim,
                                                         cfg_.n_heads, rng),
                core::layers::LayerNorm::create(params_, p + ".ln2", cfg_.hidden_dim),
                core::layers::FeedForward::create(params_, p + ".ff", cfg_.hidden_dim, cfg_.ff_dim, rng),
            });
        }
        final_ln_ = core::layers::LayerNorm::create(params_, "enc.final_ln", cfg_.hidden_dim);
        mlm_head_ = core::layers::Linear::create(params_, "enc.mlm", cfg_.hidden_dim, cfg_.vocab_size,
                                                 rng);
    }

    const EncoderConfig& config() const { return cfg_; }
    core::ParamStore& params() { return params_; }
    const core::ParamStore& params() const { return params_; }

    // Full differentiable forward: embedding plus every block output.
    std::vector<core::ag::Var> forward_stack(const std::vector<int>& tokens) const {
        if (tokens.empty()) throw input_error("encoder: empty token sequence");
        for (int t : tokens)
            if (t < 0 || t >= cfg_.vocab_size)
                throw input_error("encoder: token id out of vocabulary: " + std::to_string(t));
        const auto bias = alibi_bias(cfg_.n_heads, static_cast<int64_t>(tokens.size()),
                                     static_cast<int64_t>(tokens.size()));
        std::vector<core::ag::Var> stack;
        stack.reserve(static_cast<size_t>(cfg_.n_layers) + 1);
        core::ag::Var x = core::ag::gather_rows(tok_emb_, tokens);
        stack.push_back(x);
        for (const auto& block : blocks_) {
            x = core::ag::add(x, block.attn(block.ln1(x), block.ln1(x), &bias));
            x = core::ag::add(x, block.ff(block.ln2(x)));
            stack.push_back(x);
        }
        return stack;
    }

    core::ag::Var mlm_logits_from_stack(const std::vector<core::ag::Var>& stack) const {
        return mlm_head_(final_ln_(stack.back()));
    }

    // Inference-only stack of per-layer token representations.
    LayerStack encode(const std::vector<int>& tokens) const {
        core::ag::NoGradGuard guard;
        const auto stack = forward_stack(tokens);
        LayerStack out;
        for (const auto& v : stack) out.layers.push_back(v.val());
        return out;
    }

    // Pools token representations of the last k blocks into one vector per
    // layer: mean over tokens by default, the [cls] position alternatively.
    core::Tensor extract_last_k_layers(const LayerStack& stack, int k = 6) const {
        if (k < 1) throw config_error("extract_last_k_layers: k must be >= 1");
        if (k > cfg_.n_layers)
            throw config_error("extract_last_k_layers: k exceeds encoder layer count");
        core::Tensor out({k, cfg_.hidden_dim});
        for (int i = 0; i < k; ++i) {
            const core::Tensor& layer = stack.layers[stack.layers.size() - static_cast<size_t>(k - i)];
            if (cfg_.cls_pooling) {
                for (int64_t c = 0; c < cfg_.hidden_dim; ++c) out(i, c) = layer(0, c);
            } else {
                for (int64_t r = 0; r < layer.rows(); ++r)
                    for (int64_t c = 0; c < cfg_.hidden_dim; ++c) out(i, c) += layer(r, c);
                for (int64_t c = 0; c < cfg_.hidden_dim; ++c)
                    out(i, c) /= static_cast<double>(layer.rows());
            }
        }
        return out;
    }

    void save(const std::string& path, int64_t step, double loss,
              const nlohmann::json& extra = nlohmann::json::object()) const {
        core::CheckpointHeader hdr;
        hdr.kind = "note-encoder";
        hdr.config = encoder_config_to_json(cfg_);
        hdr.step = step;
        hdr.loss = loss;
        hdr.extra = extra;
        core::save_checkpoint(path, hdr, params_);
    }

    static NoteEncoder load(const std::string& path, nlohmann::json* extra_out = nullptr) {
        core::ParamStore loaded;
        const auto hdr = core::load_checkpoint(path, loaded);
        if (hdr.kind != "note-encoder")
            throw io_error("checkpoint kind mismatch: expected note-encoder, got " + hdr.kind);
        NoteEncoder enc(encoder_config_from_json(hdr.config));
        enc.copy_params_from(loaded);
        if (extra_out) *extra_out = hdr.extra;
        return enc;
    }

    void copy_params_from(const core::ParamStore& other) {
        for (const auto& [name, var] : params_.items()) {
            const auto src = other.get(name);
            if (!src.val().same_shape(var.val()))
                throw io_error("parameter shape mismatch on load: " + name);
            var.node->val = src.val();
        }
    }

private:
    struct Block {
        core::layers::LayerNorm ln1;
        core::layers::MultiHeadAttention attn;
        core::layers::LayerNorm ln2;
        core::layers::FeedForward ff;
    };

    EncoderConfig cfg_;
    core::ParamStore params_;
    core::ag::Var tok_emb_;
    std::vector<Block> blocks_;
    core::layers::LayerNorm final_ln_;
    core::layers::Linear mlm_head_;
};

}  // namespace notefuse::encoder
