#pragma once

#include <optional>
#include <string>
#include <vector>

#include "notefuse/core/optim.hpp"
#include "notefuse/encoder/model.hpp"

namespace notefuse::encoder {

// Masked-language-model pretraining. Positions are selected independently
// with probability mask_prob; selected positions follow the 80/10/10
// mask/random/keep replacement convention, and the loss is the mean
// cross entropy over selected positions only.

struct MaskedSequence {
    std::vector<int> corrupted;
    std::vector<int> targets;        // original ids (valid where weight = 1)
    std::vector<double> weights;     // 1 at supervised positions
    int supervised = 0;
};

inline MaskedSequence apply_mlm_mask(const std::vector<int>& tokens, double mask_prob,
                                     int vocab_size, core::Rng& rng) {
    MaskedSequence out;
    out.corrupted = tokens;
    out.targets.assign(tokens.size(), 0);
    out.weights.assign(tokens.size(), 0.0);
    for (size_t i = 0; i < tokens.size(); ++i) {
        if (!rng.bernoulli(mask_prob)) continue;
        out.targets[i] = tokens[i];
        out.weights[i] = 1.0;
        ++out.supervised;
        const double u = rng.uniform();
        if (u < 0.8) {
            out.corrupted[i] = Tokenizer::kMask;
        } else if (u < 0.9) {
            out.corrupted[i] = Tokenizer::kNumSpecials +
                               static_cast<int>(rng.below(
                                   static_cast<uint64_t>(vocab_size - Tokenizer::kNumSpecials)));
        }  // else keep the original token
    }
    return out;
}

// One optimizer step over a batch of token sequences. Returns the batch loss,
// or nullopt when masking selected nothing anywhere (after one resample per
// sequence) and the batch was skipped.
inline std::optional<double> mlm_pretrain_step(NoteEncoder& model,
                                               const std::vector<std::vector<int>>& batch,
                                               core::AdamW& opt, double lr, core::Rng& rng) {
    if (batch.empty()) throw input_error("mlm_pretrain_step: empty batch");
    double total = 0.0;
    int used = 0;
    for (const auto& tokens : batch) {
        MaskedSequence masked = apply_mlm_mask(tokens, model.config().mask_prob,
                                               model.config().vocab_size, rng);
        if (masked.supervised == 0)
            masked = apply_mlm_mask(tokens, model.config().mask_prob, model.config().vocab_size, rng);
        if (masked.supervised == 0) continue;  // resample once, then skip
        const auto stack = model.forward_stack(masked.corrupted);
        const auto loss =
            core::ag::cross_entropy_rows(model.mlm_logits_from_stack(stack), masked.targets,
                                         masked.weights, 0.0);
        core::ag::backward(loss, 1.0 / static_cast<double>(batch.size()));
        total += loss.val()(0, 0);
        ++used;
    }
    if (used == 0) {
        model.params().zero_grads();
        return std::nullopt;
    }
    opt.step(lr);
    return total / static_cast<double>(used);
}

// Held-out per-token MLM loss under a fixed masking stream.
inline double mlm_eval_loss(const NoteEncoder& model, const std::vector<std::vector<int>>& sequences,
                            uint64_t mask_seed) {
    core::ag::NoGradGuard guard;
    core::Rng rng(core::derive_seed(mask_seed, "mlm-eval"));
    double total = 0.0;
    int64_t positions = 0;
    for (const auto& tokens : sequences) {
        MaskedSequence masked =
            apply_mlm_mask(tokens, model.config().mask_prob, model.config().vocab_size, rng);
        if (masked.supervised == 0) continue;
        const auto stack = model.forward_stack(masked.corrupted);
        const auto loss = core::ag::cross_entropy_rows(model.mlm_logits_from_stack(stack),
                                                       masked.targets, masked.weights, 0.0);
        total += loss.val()(0, 0) * masked.supervised;
        positions += masked.supervised;
    }
    if (positions == 0) throw input_error("mlm_eval_loss: no supervised positions");
    return total / static_cast<double>(positions);
}

// Packs tokenized notes into fixed-length training sequences, cycling through
// the corpus in shuffled order with [sep] between notes.
inline std::vector<std::vector<int>> pack_sequences(const std::vector<std::vector<int>>& note_tokens,
                                                    int seq_len, int count, core::Rng& rng) {
    std::vector<std::vector<int>> out;
    if (note_tokens.empty()) return out;
    std::vector<size_t> order(note_tokens.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    rng.shuffle(order);
    size_t at = 0;
    for (int s = 0; s < count; ++s) {
        std::vector<int> seq;
        while (static_cast<int>(seq.size()) < seq_len) {
            const auto& note = note_tokens[order[at]];
            seq.insert(seq.end(), note.begin(), note.end());
            seq.push_back(Tokenizer::kSep);
            at = (at + 1) % order.size();
            if (at == 0) rng.shuffle(order);
        }
        seq.resize(static_cast<size_t>(seq_len));
        out.push_back(std::move(seq));
    }
    return out;
}

struct PretrainConfig {
    int64_t steps = 300;
    int batch_size = 8;
    int seq_len = 64;
    core::WarmupCosineSchedule schedule{.warmup_steps = 30, .decay_steps = 270,
                                        .peak_lr = 1e-3, .final_lr = 1e-5};
    double beta2 = 0.98;  // pretraining default
    double weight_decay = 1e-5;
};

inline nlohmann::json pretrain_config_to_json(const PretrainConfig& c) {
    return {{"steps", c.steps},
            {"batch_size", c.batch_size},
            {"seq_len", c.seq_len},
            {"warmup_steps", c.schedule.warmup_steps},
            {"decay_steps", c.schedule.decay_steps},
            {"peak_lr", c.schedule.peak_lr},
            {"final_lr", c.schedule.final_lr},
            {"beta2", c.beta2},
            {"weight_decay", c.weight_decay}};
}

inline PretrainConfig pretrain_config_from_json(const nlohmann::json& j) {
    PretrainConfig c;
    c.steps = j.value("steps", c.steps);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.seq_len = j.value("seq_len", c.seq_len);
    c.schedule.warmup_steps = j.value("warmup_steps", c.schedule.warmup_steps);
    c.schedule.decay_steps = j.value("decay_steps", c.schedule.decay_steps);
    c.schedule.peak_lr = j.value("peak_lr", c.schedule.peak_lr);
    c.schedule.final_lr = j.value("final_lr", c.schedule.final_lr);
    c.beta2 = j.value("beta2", c.beta2);
    c.weight_decay = j.value("weight_decay", c.weight_decay);
    return c;
}

// Full pretraining loop over a normalized, one-note-per-line corpus.
// Returns the final batch loss.
inline double pretrain(NoteEncoder& model, const Tokenizer& tokenizer,
                       const std::vector<std::string>& corpus_lines, const PretrainConfig& cfg,
                       uint64_t seed) {
    std::vector<std::vector<int>> note_tokens;
    note_tokens.reserve(corpus_lines.size());
    for (const auto& line : corpus_lines) {
        auto toks = tokenizer.encode(line);
        if (!toks.empty()) note_tokens.push_back(std::move(toks));
    }
    if (note_tokens.empty()) throw input_error("pretrain: empty corpus");

    core::Rng pack_rng(core::derive_seed(seed, "mlm-pack"));
    core::Rng mask_rng(core::derive_seed(seed, "mlm-mask"));
    core::AdamW opt(model.params(),
                    {.lr = cfg.schedule.peak_lr, .beta1 = 0.9, .beta2 = cfg.beta2,
                     .eps = 1e-8, .weight_decay = cfg.weight_decay});
    double last = 0.0;
    for (int64_t step = 0; step < cfg.steps; ++step) {
        const auto batch = pack_sequences(note_tokens, cfg.seq_len, cfg.batch_size, pack_rng);
        const auto loss = mlm_pretrain_step(model, batch, opt, cfg.schedule.lr_at(step), mask_rng);
        if (loss) last = *loss;
    }
    return last;
}

}  // namespace notefuse::encoder
