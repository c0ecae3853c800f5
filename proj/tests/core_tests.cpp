#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>

#include "notefuse/core/autograd.hpp"
#include "notefuse/core/checkpoint.hpp"
#include "notefuse/core/digest.hpp"
#include "notefuse/core/optim.hpp"
#include "notefuse/core/rng.hpp"
#include "notefuse/core/tensor.hpp"

using namespace notefuse::core;

namespace {

// Central finite differences of a scalar function against the analytic grads
// of every parameter in the store.
double max_rel_grad_error(ParamStore& params, const std::function<ag::Var()>& loss_fn) {
    ag::Var loss = loss_fn();
    ag::backward(loss);
    double worst = 0.0;
    for (const auto& [name, v] : params.items()) {
        Tensor analytic = v.node->grad;
        if (analytic.size() == 0) analytic = Tensor(v.val().shape());
        for (int64_t i = 0; i < v.val().size(); ++i) {
            const double orig = v.node->val(i);
            const double h = 1e-5 * std::max(1.0, std::abs(orig));
            v.node->val(i) = orig + h;
            const double fp = loss_fn().val()(0, 0);
            v.node->val(i) = orig - h;
            const double fm = loss_fn().val()(0, 0);
            v.node->val(i) = orig;
            const double fd = (fp - fm) / (2.0 * h);
            const double a = analytic(i);
            const double err = std::abs(a - fd) / std::max({1e-6, std::abs(a), std::abs(fd)});
            worst = std::max(worst, err);
        }
    }
    params.zero_grads();
    return worst;
}

}  // namespace

TEST_CASE("rng determinism and substreams") {
    Rng a(42), b(42);
    for (int i = 0; i < 100; ++i) REQUIRE(a.next_u64() == b.next_u64());

    Rng c(43);
    bool diff = false;
    Rng a2(42);
    for (int i = 0; i < 10; ++i) diff = diff || (a2.next_u64() != c.next_u64());
    REQUIRE(diff);

    REQUIRE(derive_seed(7, "patient", 0) != derive_seed(7, "patient", 1));
    REQUIRE(derive_seed(7, "patient", 0) != derive_seed(7, "visit", 0));
    REQUIRE(derive_seed(7, "patient", 3) == derive_seed(7, "patient", 3));
}

TEST_CASE("rng distribution moments") {
    Rng rng(123);
    double sum = 0.0, sq = 0.0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        double x = rng.normal(2.0, 3.0);
        sum += x;
        sq += x * x;
    }
    const double mean = sum / n;
    const double var = sq / n - mean * mean;
    REQUIRE(std::abs(mean - 2.0) < 0.05);
    REQUIRE(std::abs(var - 9.0) < 0.2);

    // negative binomial moment matching
    double s1 = 0.0, s2 = 0.0;
    for (int i = 0; i < n; ++i) {
        double k = rng.neg_binomial(13.18, 8.58);
        s1 += k;
        s2 += k * k;
    }
    const double m = s1 / n;
    const double v = s2 / n - m * m;
    REQUIRE(std::abs(m - 13.18) < 0.25);
    REQUIRE(std::abs(std::sqrt(v) - 8.58) < 0.3);
}

TEST_CASE("tensor matmul against Eigen transposes") {
    Rng rng(1);
    Tensor a = Tensor::randn({3, 4}, rng);
    Tensor b = Tensor::randn({4, 5}, rng);
    Tensor c = matmul(a, b);
    for (int64_t i = 0; i < 3; ++i)
        for (int64_t j = 0; j < 5; ++j) {
            double s = 0.0;
            for (int64_t k = 0; k < 4; ++k) s += a(i, k) * b(k, j);
            REQUIRE(c(i, j) == Catch::Approx(s).margin(1e-12));
        }

    Tensor at = Tensor::randn({4, 3}, rng);
    Tensor c2 = matmul(at, b, true, false);
    REQUIRE(c2.rows() == 3);
    REQUIRE(c2.cols() == 5);
}

TEST_CASE("autograd matmul/add/gelu gradients match finite differences") {
    Rng rng(7);
    ParamStore params;
    auto w1 = params.add("w1", Tensor::randn({4, 6}, rng, 0.5));
    auto b1 = params.add("b1", Tensor::randn({1, 6}, rng, 0.5));
    auto w2 = params.add("w2", Tensor::randn({6, 3}, rng, 0.5));
    Tensor x = Tensor::randn({5, 4}, rng);
    std::vector<int> targets = {0, 2, 1, 0, 2};
    std::vector<double> weights = {1, 1, 0, 1, 1};

    auto loss_fn = [&]() {
        auto xv = ag::constant(x);
        auto h = ag::gelu(ag::add_rowvec(ag::matmul(xv, w1), b1));
        auto logits = ag::matmul(h, w2);
        return ag::cross_entropy_rows(logits, targets, weights, 0.1);
    };
    REQUIRE(max_rel_grad_error(params, loss_fn) < 1e-4);
}

TEST_CASE("autograd layernorm/softmax/attention-style gradients") {
    Rng rng(11);
    ParamStore params;
    auto gain = params.add("g", Tensor::full({1, 6}, 1.0));
    auto bias = params.add("b", Tensor::zeros({1, 6}));
    auto wq = params.add("wq", Tensor::randn({6, 6}, rng, 0.4));
    auto wk = params.add("wk", Tensor::randn({6, 6}, rng, 0.4));
    auto wv = params.add("wv", Tensor::randn({6, 6}, rng, 0.4));
    Tensor x = Tensor::randn({4, 6}, rng);
    Tensor alibi({4, 4});
    for (int64_t i = 0; i < 4; ++i)
        for (int64_t j = 0; j < 4; ++j) alibi(i, j) = -0.25 * std::abs(double(i - j));
    std::vector<int> targets = {1, 0, 3, 2};
    std::vector<double> weights = {1, 1, 1, 1};

    auto loss_fn = [&]() {
        auto xv = ag::layer_norm(ag::constant(x), gain, bias);
        auto q = ag::matmul(xv, wq);
        auto k = ag::matmul(xv, wk);
        auto v = ag::matmul(xv, wv);
        auto scores = ag::add_const(ag::scale(ag::matmul(q, k, false, true), 1.0 / std::sqrt(6.0)), alibi);
        auto attn = ag::softmax_rows(scores);
        auto ctx = ag::matmul(attn, v);
        return ag::cross_entropy_rows(ctx, targets, weights, 0.0);
    };
    REQUIRE(max_rel_grad_error(params, loss_fn) < 1e-4);
}

TEST_CASE("autograd gather/concat/mean/tanh/sigmoid/hadamard/bce gradients") {
    Rng rng(13);
    ParamStore params;
    auto table = params.add("emb", Tensor::randn({7, 4}, rng, 0.5));
    auto w = params.add("w", Tensor::randn({4, 4}, rng, 0.5));
    std::vector<int> ids = {2, 5, 0, 2};
    Tensor target({1, 4});
    target(0, 1) = 1.0;
    target(0, 3) = 1.0;

    auto loss_fn = [&]() {
        auto e = ag::gather_rows(table, ids);
        auto h = ag::tanh_op(ag::matmul(e, w));
        auto s = ag::sigmoid_op(ag::slice_rows(h, 1, 2));
        auto m = ag::hadamard(ag::mean_rows(s), ag::mean_rows(e));
        auto joined = ag::concat_cols({m, ag::mean_rows(h)});
        auto logits = ag::slice_cols(joined, 2, 4);
        return ag::bce_logits(logits, target);
    };
    REQUIRE(max_rel_grad_error(params, loss_fn) < 1e-4);
}

TEST_CASE("adamw reduces a quadratic") {
    ParamStore params;
    auto w = params.add("w", Tensor::full({1, 8}, 4.0));
    AdamW opt(params, {.lr = 0.1});
    for (int step = 0; step < 400; ++step) {
        // loss = sum w^2 -> grad = 2w
        Tensor g({1, 8});
        for (int64_t i = 0; i < 8; ++i) g(i) = 2.0 * w.val()(i);
        w.node->accumulate(g);
        opt.step();
    }
    for (int64_t i = 0; i < 8; ++i) REQUIRE(std::abs(w.val()(i)) < 1e-2);
}

TEST_CASE("adadelta reduces a quadratic") {
    ParamStore params;
    auto w = params.add("w", Tensor::full({1, 4}, 2.0));
    Adadelta opt(params, {});
    for (int step = 0; step < 2000; ++step) {
        Tensor g({1, 4});
        for (int64_t i = 0; i < 4; ++i) g(i) = 2.0 * w.val()(i);
        w.node->accumulate(g);
        opt.step();
    }
    for (int64_t i = 0; i < 4; ++i) REQUIRE(std::abs(w.val()(i)) < 0.2);
}

TEST_CASE("warmup cosine schedule is continuous at the junction") {
    WarmupCosineSchedule s{.warmup_steps = 100, .decay_steps = 400, .peak_lr = 5e-4, .final_lr = 1e-5};
    REQUIRE(s.lr_at(99) == Catch::Approx(5e-4));
    REQUIRE(s.lr_at(100) == Catch::Approx(5e-4).epsilon(1e-6));
    REQUIRE(s.lr_at(500) == Catch::Approx(1e-5).margin(1e-12));
    // monotone decay after warmup
    for (int64_t t = 100; t < 499; ++t) REQUIRE(s.lr_at(t) >= s.lr_at(t + 1));
}

TEST_CASE("checkpoint round trip preserves parameters and header") {
    Rng rng(5);
    ParamStore params;
    params.add("enc/w", Tensor::randn({3, 4}, rng));
    params.add("enc/b", Tensor::randn({1, 4}, rng));

    CheckpointHeader hdr;
    hdr.kind = "test";
    hdr.config = {{"hidden", 4}};
    hdr.step = 17;
    hdr.loss = 0.25;
    const std::string path = (std::filesystem::temp_directory_path() / "nf_ckpt_test.bin").string();
    save_checkpoint(path, hdr, params);

    ParamStore loaded;
    CheckpointHeader got = load_checkpoint(path, loaded);
    REQUIRE(got.kind == "test");
    REQUIRE(got.step == 17);
    REQUIRE(got.config.at("hidden").get<int>() == 4);
    REQUIRE(loaded.items().size() == 2);
    for (size_t i = 0; i < 2; ++i) {
        const auto& a = params.items()[i].second.val();
        const auto& b = loaded.items()[i].second.val();
        REQUIRE(a.vec() == b.vec());
    }
    std::filesystem::remove(path);
}

TEST_CASE("sha256 known vectors") {
    REQUIRE(sha256_string("") ==
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    REQUIRE(sha256_string("abc") ==
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("no-grad guard detaches graphs") {
    Rng rng(3);
    ParamStore params;
    auto w = params.add("w", Tensor::randn({2, 2}, rng));
    ag::NoGradGuard guard;
    auto y = ag::matmul(ag::constant(Tensor::randn({2, 2}, rng)), w);
    REQUIRE_FALSE(y.node->requires_grad);
    REQUIRE(y.node->parents.empty());
}
