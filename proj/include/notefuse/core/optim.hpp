#pragma once

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "notefuse/core/autograd.hpp"

namespace notefuse::core {

// Ordered, named collection of trainable parameters. Iteration order is the
// insertion order, which fixes optimizer update order and checkpoint layout.
class ParamStore {
public:
    ag::Var add(const std::string& name, Tensor init) {
        if (index_.count(name)) throw state_error("ParamStore: duplicate parameter " + name);
        items_.emplace_back(name, ag::leaf(std::move(init)));
        index_[name] = items_.size() - 1;
        return items_.back().second;
    }

    ag::Var get(const std::string& name) const {
        auto it = index_.find(name);
        if (it == index_.end()) throw state_error("ParamStore: unknown parameter " + name);
        return items_[it->second].second;
    }

    bool has(const std::string& name) const { return index_.count(name) != 0; }

    const std::vector<std::pair<std::string, ag::Var>>& items() const { return items_; }

    int64_t parameter_count() const {
        int64_t n = 0;
        for (const auto& [name, v] : items_) n += v.val().size();
        return n;
    }

    void zero_grads() {
        for (auto& [name, v] : items_) v.node->zero_grad();
    }

    double grad_norm() const {
        double sq = 0.0;
        for (const auto& [name, v] : items_) {
            const Tensor& g = v.node->grad;
            for (int64_t i = 0; i < g.size(); ++i) sq += g(i) * g(i);
        }
        return std::sqrt(sq);
    }

    void clip_grad_norm(double max_norm) {
        const double norm = grad_norm();
        if (norm <= max_norm || norm == 0.0) return;
        const double s = max_norm / norm;
        for (auto& [name, v] : items_) {
            Tensor& g = v.node->grad;
            for (int64_t i = 0; i < g.size(); ++i) g(i) *= s;
        }
    }

private:
    std::vector<std::pair<std::string, ag::Var>> items_;
    std::map<std::string, size_t> index_;
};

// ---------------------------------------------------------------------------
// learning-rate schedules
// ---------------------------------------------------------------------------

// Linear warmup from 0 to peak over warmup_steps, then cosine annealing to
// final_lr over decay_steps. Continuous at the junction.
struct WarmupCosineSchedule {
    int64_t warmup_steps = 0;
    int64_t decay_steps = 0;
    double peak_lr = 1e-3;
    double final_lr = 1e-5;

    double lr_at(int64_t step) const {
        if (warmup_steps > 0 && step < warmup_steps)
            return peak_lr * static_cast<double>(step + 1) / static_cast<double>(warmup_steps);
        if (decay_steps <= 0) return peak_lr;
        const int64_t t = std::min(step - warmup_steps, decay_steps);
        const double cosine = 0.5 * (1.0 + std::cos(3.14159265358979323846 * static_cast<double>(t) /
                                                    static_cast<double>(decay_steps)));
        return final_lr + (peak_lr - final_lr) * cosine;
    }
};

// Transformer warmup/decay schedule: lr = factor * d^-0.5 * min(s^-0.5, s * w^-1.5).
struct NoamSchedule {
    int hidden_dim = 256;
    int64_t warmup_steps = 400;
    double factor = 1.0;

    double lr_at(int64_t step) const {
        const double s = static_cast<double>(step + 1);
        const double w = static_cast<double>(warmup_steps);
        return factor * std::pow(static_cast<double>(hidden_dim), -0.5) *
               std::min(1.0 / std::sqrt(s), s * std::pow(w, -1.5));
    }
};

// ---------------------------------------------------------------------------
// optimizers
// ---------------------------------------------------------------------------

struct AdamWConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;
};

// Adam with decoupled weight decay. One instance may drive several stores
// with per-store learning-rate scales (used for backbone-vs-head fine-tuning).
class AdamW {
public:
    struct Group {
        ParamStore* store;
        double lr_scale;
    };

    AdamW(std::vector<Group> groups, AdamWConfig cfg) : groups_(std::move(groups)), cfg_(cfg) {
        for (auto& g : groups_) {
            State st;
            for (const auto& [name, v] : g.store->items()) {
                st.m.emplace_back(v.val().shape());
                st.v.emplace_back(v.val().shape());
            }
            states_.push_back(std::move(st));
        }
    }

    AdamW(ParamStore& store, AdamWConfig cfg) : AdamW({Group{&store, 1.0}}, cfg) {}

    void step(double lr_override = -1.0) {
        ++t_;
        const double base_lr = lr_override >= 0.0 ? lr_override : cfg_.lr;
        const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
        const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
        for (size_t gi = 0; gi < groups_.size(); ++gi) {
            const double lr = base_lr * groups_[gi].lr_scale;
            auto& st = states_[gi];
            const auto& items = groups_[gi].store->items();
            for (size_t pi = 0; pi < items.size(); ++pi) {
                Tensor& w = items[pi].second.node->val;
                Tensor& g = items[pi].second.node->grad;
                if (g.size() == 0) continue;
                Tensor& m = st.m[pi];
                Tensor& v = st.v[pi];
                for (int64_t i = 0; i < w.size(); ++i) {
                    m(i) = cfg_.beta1 * m(i) + (1.0 - cfg_.beta1) * g(i);
                    v(i) = cfg_.beta2 * v(i) + (1.0 - cfg_.beta2) * g(i) * g(i);
                    const double mhat = m(i) / bc1;
                    const double vhat = v(i) / bc2;
                    w(i) -= lr * (mhat / (std::sqrt(vhat) + cfg_.eps) + cfg_.weight_decay * w(i));
                }
            }
        }
        for (auto& g : groups_) g.store->zero_grads();
    }

    int64_t steps_taken() const { return t_; }

private:
    struct State {
        std::vector<Tensor> m, v;
    };
    std::vector<Group> groups_;
    AdamWConfig cfg_;
    std::vector<State> states_;
    int64_t t_ = 0;
};

struct AdadeltaConfig {
    double rho = 0.95;
    double eps = 1e-6;
    double lr = 1.0;
};

class Adadelta {
public:
    Adadelta(ParamStore& store, AdadeltaConfig cfg = {}) : store_(&store), cfg_(cfg) {
        for (const auto& [name, v] : store.items()) {
            acc_g_.emplace_back(v.val().shape());
            acc_dx_.emplace_back(v.val().shape());
        }
    }

    void step() {
        const auto& items = store_->items();
        for (size_t pi = 0; pi < items.size(); ++pi) {
            Tensor& w = items[pi].second.node->val;
            Tensor& g = items[pi].second.node->grad;
            if (g.size() == 0) continue;
            Tensor& eg = acc_g_[pi];
            Tensor& ed = acc_dx_[pi];
            for (int64_t i = 0; i < w.size(); ++i) {
                eg(i) = cfg_.rho * eg(i) + (1.0 - cfg_.rho) * g(i) * g(i);
                const double dx =
                    -std::sqrt(ed(i) + cfg_.eps) / std::sqrt(eg(i) + cfg_.eps) * g(i);
                ed(i) = cfg_.rho * ed(i) + (1.0 - cfg_.rho) * dx * dx;
                w(i) += cfg_.lr * dx;
            }
        }
        store_->zero_grads();
    }

private:
    ParamStore* store_;
    AdadeltaConfig cfg_;
    std::vector<Tensor> acc_g_, acc_dx_;
};

}  // namespace notefuse::core
