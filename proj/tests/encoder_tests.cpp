#include <catch2/catch_amalgamated.hpp>

#include "notefuse/encoder/alibi.hpp"
#include "notefuse/encoder/mlm.hpp"
#include "notefuse/encoder/model.hpp"
#include "notefuse/encoder/nli.hpp"
#include "notefuse/encoder/tokenizer.hpp"

using namespace notefuse;
using namespace notefuse::encoder;

namespace {

EncoderConfig tiny_config() {
    EncoderConfig cfg;
    cfg.n_layers = 2;
    cfg.n_heads = 2;
    cfg.hidden_dim = 32;
    cfg.ff_dim = 64;
    cfg.vocab_size = 64;
    cfg.max_pretrain_len = 32;
    cfg.seed = 5;
    return cfg;
}

}  // namespace

TEST_CASE("alibi slopes: geometric sequence, hand values for 8 heads") {
    const auto slopes = alibi_slopes(8);
    REQUIRE(slopes[0] == Catch::Approx(0.5).margin(1e-15));       // 2^-1
    REQUIRE(slopes[7] == Catch::Approx(1.0 / 256.0).margin(1e-15));  // 2^-8
    for (size_t h = 1; h < slopes.size(); ++h) REQUIRE(slopes[h] < slopes[h - 1]);

    const auto bias = alibi_bias(8, 6, 6);
    // h=0, |i-j|=1 -> -1/2
    REQUIRE(bias[0](2, 3) == Catch::Approx(-0.5).margin(1e-15));
    // h=7, |i-j|=4 -> -4 * 2^-8
    REQUIRE(bias[7](0, 4) == Catch::Approx(-0.015625).margin(1e-15));
    for (const auto& m : bias) {
        for (int64_t i = 0; i < 6; ++i) {
            REQUIRE(m(i, i) == 0.0);
            for (int64_t j = 0; j < 6; ++j) {
                REQUIRE(m(i, j) == m(j, i));
                REQUIRE(m(i, j) <= 0.0);
            }
        }
    }
    REQUIRE_THROWS_AS(alibi_bias(0, 4, 4), input_error);
}

TEST_CASE("encoder: shapes, length-1 input, extrapolated lengths stay finite") {
    NoteEncoder model(tiny_config());

    const auto single = model.encode({7});
    REQUIRE(single.layers.size() == 3);  // embedding + 2 blocks
    for (const auto& l : single.layers) {
        REQUIRE(l.rows() == 1);
        REQUIRE(l.cols() == 32);
    }
    REQUIRE(single.all_finite());

    std::vector<int> tokens;
    core::Rng rng(3);
    for (int i = 0; i < 128; ++i)
        tokens.push_back(Tokenizer::kNumSpecials +
                         static_cast<int>(rng.below(64 - Tokenizer::kNumSpecials)));
    REQUIRE(model.encode(tokens).all_finite());
    std::vector<int> longer = tokens;
    longer.insert(longer.end(), tokens.begin(), tokens.end());  // 256 > pretrain length
    REQUIRE(model.encode(longer).all_finite());

    // no absolute positions exist: identical inputs give identical outputs
    const auto a = model.encode(tokens);
    const auto b = model.encode(tokens);
    for (size_t l = 0; l < a.layers.size(); ++l) REQUIRE(a.layers[l].vec() == b.layers[l].vec());

    REQUIRE_THROWS_AS(model.encode({64}), input_error);  // out of vocabulary
    REQUIRE_THROWS_AS(model.encode({}), input_error);
}

TEST_CASE("extract_last_k_layers: pooling contract") {
    NoteEncoder model(tiny_config());
    std::vector<int> tokens = {6, 9, 12, 9};
    const auto stack = model.encode(tokens);

    const auto one = model.extract_last_k_layers(stack, 1);
    REQUIRE(one.rows() == 1);
    REQUIRE(one.cols() == 32);
    // k=1 is the final layer's pooled vector
    for (int64_t c = 0; c < 32; ++c) {
        double mean = 0.0;
        for (int64_t r = 0; r < 4; ++r) mean += stack.layers.back()(r, c);
        mean /= 4.0;
        REQUIRE(one(0, c) == Catch::Approx(mean).margin(1e-12));
    }

    // brute-force mean over the token axis for every extracted layer
    const auto two = model.extract_last_k_layers(stack, 2);
    for (int k = 0; k < 2; ++k) {
        const auto& layer = stack.layers[stack.layers.size() - static_cast<size_t>(2 - k)];
        for (int64_t c = 0; c < 32; ++c) {
            double mean = 0.0;
            for (int64_t r = 0; r < layer.rows(); ++r) mean += layer(r, c);
            mean /= static_cast<double>(layer.rows());
            REQUIRE(two(k, c) == Catch::Approx(mean).margin(1e-12));
        }
    }

    // a note of identical repeated tokens pools to any single token's vector
    const auto rep = model.encode({9, 9, 9, 9, 9});
    const auto pooled = model.extract_last_k_layers(rep, 2);
    for (int64_t c = 0; c < 32; ++c)
        REQUIRE(pooled(1, c) == Catch::Approx(rep.layers.back()(0, c)).margin(1e-9));

    REQUIRE_THROWS_AS(model.extract_last_k_layers(stack, 3), config_error);
}

TEST_CASE("mlm masking selects ~30% of positions with 80/10/10 replacement") {
    core::Rng rng(17);
    int64_t selected = 0, total = 0, masked = 0, kept = 0, randomized = 0;
    std::vector<int> tokens(100, 30);
    for (int rep = 0; rep < 100; ++rep) {
        const auto m = apply_mlm_mask(tokens, 0.30, 64, rng);
        total += static_cast<int64_t>(tokens.size());
        selected += m.supervised;
        for (size_t i = 0; i < tokens.size(); ++i) {
            if (m.weights[i] == 0.0) continue;
            if (m.corrupted[i] == Tokenizer::kMask)
                ++masked;
            else if (m.corrupted[i] == tokens[i])
                ++kept;
            else
                ++randomized;
        }
    }
    const double frac = static_cast<double>(selected) / static_cast<double>(total);
    REQUIRE(frac > 0.28);
    REQUIRE(frac < 0.32);
    const double mask_share = static_cast<double>(masked) / static_cast<double>(selected);
    REQUIRE(mask_share > 0.77);
    REQUIRE(mask_share < 0.83);
    REQUIRE(kept > 0);
    REQUIRE(randomized > 0);
}

TEST_CASE("mlm: untrained loss near ln(vocab)") {
    EncoderConfig cfg = tiny_config();
    NoteEncoder model(cfg);
    core::Rng rng(23);
    std::vector<std::vector<int>> batch;
    for (int b = 0; b < 8; ++b) {
        std::vector<int> seq;
        for (int i = 0; i < 24; ++i)
            seq.push_back(Tokenizer::kNumSpecials +
                          static_cast<int>(rng.below(cfg.vocab_size - Tokenizer::kNumSpecials)));
        batch.push_back(std::move(seq));
    }
    core::AdamW opt(model.params(), {.lr = 0.0});
    const auto loss = mlm_pretrain_step(model, batch, opt, 0.0, rng);
    REQUIRE(loss.has_value());
    const double expected = std::log(static_cast<double>(cfg.vocab_size));
    REQUIRE(*loss > expected * 0.85);
    REQUIRE(*loss < expected * 1.15);
}

TEST_CASE("mlm: memorizes a single repeated batch") {
    EncoderConfig cfg = tiny_config();
    cfg.vocab_size = 48;
    NoteEncoder model(cfg);
    core::Rng data_rng(31);
    std::vector<std::vector<int>> batch;
    for (int b = 0; b < 4; ++b) {
        std::vector<int> seq;
        for (int i = 0; i < 12; ++i)
            seq.push_back(Tokenizer::kNumSpecials +
                          static_cast<int>(data_rng.below(cfg.vocab_size - Tokenizer::kNumSpecials)));
        batch.push_back(std::move(seq));
    }
    core::AdamW opt(model.params(), {.lr = 3e-3, .beta2 = 0.98, .weight_decay = 0.0});
    core::Rng mask_rng(37);
    double last = 1e9;
    for (int step = 0; step < 300; ++step) {
        const auto loss = mlm_pretrain_step(model, batch, opt, 3e-3, mask_rng);
        if (loss) last = *loss;
    }
    REQUIRE(last < 0.2);
}

TEST_CASE("mlm gradients match central finite differences (2-layer, 2-head, dim 8)") {
    EncoderConfig cfg;
    cfg.n_layers = 2;
    cfg.n_heads = 2;
    cfg.hidden_dim = 8;
    cfg.ff_dim = 16;
    cfg.vocab_size = 20;
    cfg.seed = 9;
    NoteEncoder model(cfg);

    const std::vector<int> corrupted = {Tokenizer::kMask, 7, 9, Tokenizer::kMask, 11, 6};
    const std::vector<int> targets = {8, 0, 0, 13, 0, 0};
    const std::vector<double> weights = {1, 0, 0, 1, 0, 0};

    auto loss_fn = [&]() {
        const auto stack = model.forward_stack(corrupted);
        return core::ag::cross_entropy_rows(model.mlm_logits_from_stack(stack), targets, weights, 0.0);
    };

    auto loss = loss_fn();
    core::ag::backward(loss);

    double worst = 0.0;
    for (const auto& [name, v] : model.params().items()) {
        core::Tensor analytic = v.node->grad;
        if (analytic.size() == 0) analytic = core::Tensor(v.val().shape());
        for (int64_t i = 0; i < v.val().size(); ++i) {
            const double orig = v.node->val(i);
            const double h = 1e-5 * std::max(1.0, std::abs(orig));
            v.node->val(i) = orig + h;
            const double fp = loss_fn().val()(0, 0);
            v.node->val(i) = orig - h;
            const double fm = loss_fn().val()(0, 0);
            v.node->val(i) = orig;
            const double fd = (fp - fm) / (2.0 * h);
            const double err =
                std::abs(analytic(i) - fd) / std::max({1e-4, std::abs(analytic(i)), std::abs(fd)});
            worst = std::max(worst, err);
        }
    }
    INFO("worst relative gradient error: " << worst);
    REQUIRE(worst <= 1e-3);
}

TEST_CASE("mlm pretraining is deterministic per seed") {
    auto run = [](uint64_t seed) {
        EncoderConfig cfg = tiny_config();
        cfg.seed = seed;
        NoteEncoder model(cfg);
        std::vector<std::string> corpus;
        core::Rng rng(41);
        for (int i = 0; i < 50; ++i) {
            std::string line = "patient note";
            for (int j = 0; j < 8; ++j) line += " w" + std::to_string(rng.below(30));
            corpus.push_back(line);
        }
        const Tokenizer tok = Tokenizer::train(corpus, cfg.vocab_size);
        PretrainConfig pc;
        pc.steps = 20;
        pc.batch_size = 2;
        pc.seq_len = 16;
        std::vector<double> losses;
        std::vector<std::vector<int>> note_tokens;
        for (const auto& line : corpus) note_tokens.push_back(tok.encode(line));
        core::Rng pack_rng(core::derive_seed(seed, "mlm-pack"));
        core::Rng mask_rng(core::derive_seed(seed, "mlm-mask"));
        core::AdamW opt(model.params(), {.lr = 1e-3, .beta2 = pc.beta2});
        for (int step = 0; step < pc.steps; ++step) {
            const auto batch = pack_sequences(note_tokens, pc.seq_len, pc.batch_size, pack_rng);
            const auto loss = mlm_pretrain_step(model, batch, opt, 1e-3, mask_rng);
            losses.push_back(loss.value_or(-1.0));
        }
        return losses;
    };
    const auto a = run(77), b = run(77);
    REQUIRE(a.size() == b.size());
    for (size_t i = 0; i < a.size(); ++i)
        REQUIRE(std::abs(a[i] - b[i]) < 5e-7);  // identical to 6 decimal places
}

TEST_CASE("tokenizer: frequency vocabulary with stable ordering") {
    const std::vector<std::string> corpus = {"alpha beta beta", "beta gamma alpha", "delta"};
    const Tokenizer tok = Tokenizer::train(corpus, 8);  // 5 specials + 3 words
    const auto ids = tok.encode("beta alpha gamma delta zzz");
    REQUIRE(ids[0] == Tokenizer::kNumSpecials);      // most frequent word
    REQUIRE(ids[1] == Tokenizer::kNumSpecials + 1);  // alpha (tie broken lexicographically)
    REQUIRE(ids[2] == Tokenizer::kNumSpecials + 2);
    REQUIRE(ids[3] == Tokenizer::kUnk);  // delta fell outside the size budget
    REQUIRE(ids[4] == Tokenizer::kUnk);

    const Tokenizer back = Tokenizer::from_json(tok.to_json());
    REQUIRE(back.encode("beta alpha") == tok.encode("beta alpha"));
}

TEST_CASE("nli: score normalization, determinism, and learnable entailment") {
    EncoderConfig cfg = tiny_config();
    cfg.vocab_size = 96;
    NoteEncoder model(cfg);

    const auto pairs = synthetic_nli_pairs(120, 3);
    std::vector<std::string> corpus;
    for (const auto& ex : pairs) {
        corpus.push_back(ex.premise);
        corpus.push_back(ex.hypothesis);
    }
    const Tokenizer tok = Tokenizer::train(corpus, cfg.vocab_size);
    NliHead head(cfg.hidden_dim);

    // normalization + determinism before any training
    const auto r1 = nli_classify(model, head, tok, "patient is stable", "patient is stable");
    const auto r2 = nli_classify(model, head, tok, "patient is stable", "patient is stable");
    REQUIRE(r1.scores[0] + r1.scores[1] + r1.scores[2] == Catch::Approx(1.0).margin(1e-6));
    for (double s : r1.scores) REQUIRE(s >= 0.0);
    REQUIRE(r1.label == r2.label);
    REQUIRE(r1.scores == r2.scores);

    // fine-tune with the head at a higher learning rate than the backbone
    std::vector<NliExample> train(pairs.begin(), pairs.begin() + 90);
    std::vector<NliExample> val(pairs.begin() + 90, pairs.end());
    NliFinetuneConfig fc;
    fc.backbone_lr = 5e-4;
    fc.head_lr = 5e-3;
    fc.batch_size = 16;
    fc.total_epochs = 12;
    fc.warmup_epochs = 2;
    fc.patience = 12;
    const auto result = nli_finetune(model, head, tok, train, val, fc);
    REQUIRE(result.best_epoch >= 0);

    const auto same = nli_classify(model, head, tok, "wound is clear", "wound is clear");
    REQUIRE(same.label == NliLabel::entailment);
    REQUIRE(result.val_accuracy > 0.6);
}
