#pragma once

#include <algorithm>
#include <array>
#include <string>
#include <vector>

#include "notefuse/core/optim.hpp"
#include "notefuse/encoder/model.hpp"

namespace notefuse::encoder {

// Three-way natural-language-inference head over the pretrained encoder:
// [cls] premise [sep] hypothesis, pooled and classified. Fine-tuning runs the
// classifier head at a higher learning rate than the backbone.

enum class NliLabel { entailment = 0, contradiction = 1, neutral = 2 };

inline const char* nli_label_name(NliLabel l) {
    switch (l) {
        case NliLabel::entailment: return "entailment";
        case NliLabel::contradiction: return "contradiction";
        default: return "neutral";
    }
}

inline NliLabel nli_label_from_name(const std::string& name) {
    if (name == "entailment") return NliLabel::entailment;
    if (name == "contradiction") return NliLabel::contradiction;
    if (name == "neutral") return NliLabel::neutral;
    throw input_error("unknown nli label: " + name);
}

struct NliExample {
    std::string premise;
    std::string hypothesis;
    NliLabel label = NliLabel::neutral;
};

struct NliHead {
    core::ParamStore params;
    core::layers::Linear proj;

    explicit NliHead(int hidden_dim, uint64_t seed = 11) {
        core::Rng rng(core::derive_seed(seed, "nli-head"));
        proj = core::layers::Linear::create(params, "nli.head", hidden_dim, 3, rng);
    }
};

inline std::vector<int> nli_tokens(const Tokenizer& tok, const std::string& premise,
                                   const std::string& hypothesis) {
    std::vector<int> ids = {Tokenizer::kCls};
    const auto p = tok.encode(premise);
    const auto h = tok.encode(hypothesis);
    ids.insert(ids.end(), p.begin(), p.end());
    ids.push_back(Tokenizer::kSep);
    ids.insert(ids.end(), h.begin(), h.end());
    return ids;
}

inline core::ag::Var nli_logits(const NoteEncoder& model, const NliHead& head,
                                const std::vector<int>& tokens) {
    const auto stack = model.forward_stack(tokens);
    core::ag::Var pooled = model.config().cls_pooling ? core::ag::slice_rows(stack.back(), 0, 1)
                                                      : core::ag::mean_rows(stack.back());
    return head.proj(pooled);
}

struct NliResult {
    NliLabel label = NliLabel::neutral;
    std::array<double, 3> scores{};  // softmax, sums to 1
};

inline NliResult nli_classify(const NoteEncoder& model, const NliHead& head, const Tokenizer& tok,
                              const std::string& premise, const std::string& hypothesis) {
    core::ag::NoGradGuard guard;
    const auto logits = nli_logits(model, head, nli_tokens(tok, premise, hypothesis));
    const auto probs = core::ag::softmax_rows(logits);
    NliResult out;
    int best = 0;
    for (int i = 0; i < 3; ++i) {
        out.scores[static_cast<size_t>(i)] = probs.val()(0, i);
        if (probs.val()(0, i) > probs.val()(0, best)) best = i;
    }
    out.label = static_cast<NliLabel>(best);
    return out;
}

// Fine-tuning defaults: backbone 2e-5, head 2e-4, batch 64, gradient-norm
// clip 1.0, early stopping patience 10 epochs on validation loss.
struct NliFinetuneConfig {
    double backbone_lr = 2e-5;
    double head_lr = 2e-4;
    double weight_decay = 1e-6;
    double beta1 = 0.9;
    double beta2 = 0.98;
    double eps = 1e-6;
    int batch_size = 64;
    double max_grad_norm = 1.0;
    int warmup_epochs = 5;
    int total_epochs = 40;
    int patience = 10;
    uint64_t seed = 11;
};

struct NliFinetuneResult {
    int best_epoch = -1;
    double best_val_loss = 0.0;
    double val_accuracy = 0.0;
};

inline double nli_epoch_loss(const NoteEncoder& model, const NliHead& head, const Tokenizer& tok,
                             const std::vector<NliExample>& examples) {
    core::ag::NoGradGuard guard;
    double total = 0.0;
    for (const auto& ex : examples) {
        const auto logits = nli_logits(model, head, nli_tokens(tok, ex.premise, ex.hypothesis));
        const auto loss = core::ag::cross_entropy_rows(logits, {static_cast<int>(ex.label)}, {1.0});
        total += loss.val()(0, 0);
    }
    return total / static_cast<double>(examples.size());
}

inline NliFinetuneResult nli_finetune(NoteEncoder& model, NliHead& head, const Tokenizer& tok,
                                      std::vector<NliExample> train, std::vector<NliExample> val,
                                      const NliFinetuneConfig& cfg) {
    if (train.empty() || val.empty()) throw input_error("nli_finetune: empty split");
    core::AdamW opt({{&model.params(), 1.0}, {&head.params, cfg.head_lr / cfg.backbone_lr}},
                    {.lr = cfg.backbone_lr, .beta1 = cfg.beta1, .beta2 = cfg.beta2, .eps = cfg.eps,
                     .weight_decay = cfg.weight_decay});
    core::Rng rng(core::derive_seed(cfg.seed, "nli-train"));

    NliFinetuneResult result;
    double best = 1e300;
    int since_best = 0;
    for (int epoch = 0; epoch < cfg.total_epochs; ++epoch) {
        rng.shuffle(train);
        const double warm =
            cfg.warmup_epochs > 0 ? std::min(1.0, (epoch + 1.0) / cfg.warmup_epochs) : 1.0;
        for (size_t at = 0; at < train.size(); at += static_cast<size_t>(cfg.batch_size)) {
            const size_t end = std::min(train.size(), at + static_cast<size_t>(cfg.batch_size));
            for (size_t i = at; i < end; ++i) {
                const auto& ex = train[i];
                const auto logits =
                    nli_logits(model, head, nli_tokens(tok, ex.premise, ex.hypothesis));
                const auto loss =
                    core::ag::cross_entropy_rows(logits, {static_cast<int>(ex.label)}, {1.0});
                core::ag::backward(loss, 1.0 / static_cast<double>(end - at));
            }
            model.params().clip_grad_norm(cfg.max_grad_norm);
            head.params.clip_grad_norm(cfg.max_grad_norm);
            opt.step(cfg.backbone_lr * warm);
        }
        const double val_loss = nli_epoch_loss(model, head, tok, val);
        if (val_loss < best) {
            best = val_loss;
            result.best_epoch = epoch;
            result.best_val_loss = val_loss;
            since_best = 0;
        } else if (++since_best >= cfg.patience) {
            break;
        }
    }

    int correct = 0;
    for (const auto& ex : val)
        if (nli_classify(model, head, tok, ex.premise, ex.hypothesis).label == ex.label) ++correct;
    result.val_accuracy = static_cast<double>(correct) / static_cast<double>(val.size());
    return result;
}

// Synthetic premise/hypothesis pairs for exercising the fine-tune loop:
// identity implies entailment, an inserted negation implies contradiction,
// an unrelated sentence is neutral.
inline std::vector<NliExample> synthetic_nli_pairs(int count, uint64_t seed) {
    static const char* kSubjects[] = {"patient", "wound", "breathing", "appetite", "gait"};
    static const char* kStates[] = {"stable", "improving", "unchanged", "clear", "strong"};
    core::Rng rng(core::derive_seed(seed, "nli-synth"));
    std::vector<NliExample> out;
    for (int i = 0; i < count; ++i) {
        const std::string subject = kSubjects[rng.below(std::size(kSubjects))];
        const std::string state = kStates[rng.below(std::size(kStates))];
        const std::string premise = subject + " is " + state;
        NliExample ex;
        ex.premise = premise;
        switch (i % 3) {
            case 0:
                ex.hypothesis = premise;
                ex.label = NliLabel::entailment;
                break;
            case 1:
                ex.hypothesis = subject + " is not " + state;
                ex.label = NliLabel::contradiction;
                break;
            default: {
                const std::string other = kSubjects[rng.below(std::size(kSubjects))];
                ex.hypothesis = other + " was reviewed today";
                ex.label = NliLabel::neutral;
                break;
            }
        }
        out.push_back(std::move(ex));
    }
    return out;
}

}  // namespace notefuse::encoder
