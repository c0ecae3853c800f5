#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <unordered_set>
#include <vector>

#include "notefuse/core/tensor.hpp"

namespace notefuse::core::ag {

// Reverse-mode autodiff over Tensors. Graphs are built per sequence and
// released when the loss Var goes out of scope; parameter nodes persist and
// accumulate gradients across sequences until the optimizer clears them.

struct Node;
using NodePtr = std::shared_ptr<Node>;

struct Node {
    Tensor val;
    Tensor grad;  // lazily allocated on first accumulation
    bool requires_grad = false;
    std::vector<NodePtr> parents;
    std::function<void(Node&)> backward_fn;

    void accumulate(const Tensor& g) {
        if (grad.size() == 0) grad = Tensor(val.shape());
        add_inplace(grad, g);
    }
    void zero_grad() {
        if (grad.size() != 0) std::fill(grad.vec().begin(), grad.vec().end(), 0.0);
    }
};

struct Var {
    NodePtr node;

    Var() = default;
    explicit Var(NodePtr n) : node(std::move(n)) {}

    const Tensor& val() const { return node->val; }
    Tensor& val_mut() { return node->val; }
    const Tensor& grad() const { return node->grad; }
    bool defined() const { return static_cast<bool>(node); }
    int64_t rows() const { return node->val.rows(); }
    int64_t cols() const { return node->val.cols(); }
};

// When set, ops produce detached constants: no parents, no backward closures.
// Used for inference paths (note encoding, greedy decode).
inline bool& no_grad_flag() {
    thread_local bool flag = false;
    return flag;
}

struct NoGradGuard {
    bool prev;
    NoGradGuard() : prev(no_grad_flag()) { no_grad_flag() = true; }
    ~NoGradGuard() { no_grad_flag() = prev; }
};

inline Var constant(Tensor t) {
    auto n = std::make_shared<Node>();
    n->val = std::move(t);
    return Var(n);
}

inline Var leaf(Tensor t) {  // trainable parameter
    auto n = std::make_shared<Node>();
    n->val = std::move(t);
    n->requires_grad = true;
    return Var(n);
}

namespace detail {

inline Var make(Tensor val, std::vector<Var> parents, std::function<void(Node&)> back) {
    auto n = std::make_shared<Node>();
    n->val = std::move(val);
    if (!no_grad_flag()) {
        bool req = false;
        for (const auto& p : parents) req = req || p.node->requires_grad;
        if (req) {
            n->requires_grad = true;
            n->parents.reserve(parents.size());
            for (auto& p : parents) n->parents.push_back(p.node);
            n->backward_fn = std::move(back);
        }
    }
    return Var(n);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// ops
// ---------------------------------------------------------------------------

inline Var matmul(const Var& a, const Var& b, bool ta = false, bool tb = false) {
    Tensor out = core::matmul(a.val(), b.val(), ta, tb);
    auto an = a.node, bn = b.node;
    return detail::make(std::move(out), {a, b}, [an, bn, ta, tb](Node& n) {
        const Tensor& g = n.grad;
        if (an->requires_grad) {
            // dA for C = op(A) op(B)
            Tensor da = ta ? core::matmul(bn->val, g, tb, true) : core::matmul(g, bn->val, false, !tb);
            an->accumulate(da);
        }
        if (bn->requires_grad) {
            Tensor db = tb ? core::matmul(g, an->val, true, ta) : core::matmul(an->val, g, !ta, false);
            bn->accumulate(db);
        }
    });
}

inline Var add(const Var& a, const Var& b) {
    if (!a.val().same_shape(b.val())) throw input_error("ag::add: shape mismatch");
    Tensor out = a.val();
    add_inplace(out, b.val());
    auto an = a.node, bn = b.node;
    return detail::make(std::move(out), {a, b}, [an, bn](Node& n) {
        if (an->requires_grad) an->accumulate(n.grad);
        if (bn->requires_grad) bn->accumulate(n.grad);
    });
}

// a[m x n] + row[1 x n] broadcast over rows.
inline Var add_rowvec(const Var& a, const Var& row) {
    if (a.cols() != row.cols() || row.rows() != 1) throw input_error("ag::add_rowvec: shape mismatch");
    Tensor out = a.val();
    for (int64_t r = 0; r < out.rows(); ++r)
        for (int64_t c = 0; c < out.cols(); ++c) out(r, c) += row.val()(0, c);
    auto an = a.node, rn = row.node;
    return detail::make(std::move(out), {a, row}, [an, rn](Node& n) {
        if (an->requires_grad) an->accumulate(n.grad);
        if (rn->requires_grad) {
            Tensor gr({1, n.grad.cols()});
            for (int64_t r = 0; r < n.grad.rows(); ++r)
                for (int64_t c = 0; c < n.grad.cols(); ++c) gr(0, c) += n.grad(r, c);
            rn->accumulate(gr);
        }
    });
}

inline Var scale(const Var& a, double s) {
    Tensor out = a.val();
    for (auto& v : out.vec()) v *= s;
    auto an = a.node;
    return detail::make(std::move(out), {a}, [an, s](Node& n) {
        if (!an->requires_grad) return;
        Tensor g = n.grad;
        for (auto& v : g.vec()) v *= s;
        an->accumulate(g);
    });
}

inline Var add_const(const Var& a, const Tensor& c) {
    if (!a.val().same_shape(c)) throw input_error("ag::add_const: shape mismatch");
    Tensor out = a.val();
    add_inplace(out, c);
    auto an = a.node;
    return detail::make(std::move(out), {a}, [an](Node& n) {
        if (an->requires_grad) an->accumulate(n.grad);
    });
}

inline Var hadamard(const Var& a, const Var& b) {
    if (!a.val().same_shape(b.val())) throw input_error("ag::hadamard: shape mismatch");
    Tensor out = a.val();
    for (int64_t i = 0; i < out.size(); ++i) out(i) *= b.val()(i);
    auto an = a.node, bn = b.node;
    return detail::make(std::move(out), {a, b}, [an, bn](Node& n) {
        if (an->requires_grad) {
            Tensor g = n.grad;
            for (int64_t i = 0; i < g.size(); ++i) g(i) *= bn->val(i);
            an->accumulate(g);
        }
        if (bn->requires_grad) {
            Tensor g = n.grad;
            for (int64_t i = 0; i < g.size(); ++i) g(i) *= an->val(i);
            bn->accumulate(g);
        }
    });
}

// Exact Gaussian GeLU: x * Phi(x).
inline double gelu_scalar(double x) { return 0.5 * x * (1.0 + std::erf(x * 0.7071067811865475)); }

inline Var gelu(const Var& a) {
    Tensor out = a.val();
    for (auto& v : out.vec()) v = gelu_scalar(v);
    auto an = a.node;
    return detail::make(std::move(out), {a}, [an](Node& n) {
        if (!an->requires_grad) return;
        Tensor g = n.grad;
        for (int64_t i = 0; i < g.size(); ++i) {
            const double x = an->val(i);
            const double phi = 0.5 * (1.0 + std::erf(x * 0.7071067811865475));
            const double pdf = std::exp(-0.5 * x * x) * 0.3989422804014327;
            g(i) *= phi + x * pdf;
        }
        an->accumulate(g);
    });
}

inline Var tanh_op(const Var& a) {
    Tensor out = a.val();
    for (auto& v : out.vec()) v = std::tanh(v);
    auto an = a.node;
    Tensor saved = out;
    return detail::make(std::move(out), {a}, [an, saved](Node& n) {
        if (!an->requires_grad) return;
        Tensor g = n.grad;
        for (int64_t i = 0; i < g.size(); ++i) g(i) *= 1.0 - saved(i) * saved(i);
        an->accumulate(g);
    });
}

inline Var sigmoid_op(const Var& a) {
    Tensor out = a.val();
    for (auto& v : out.vec()) v = 1.0 / (1.0 + std::exp(-v));
    auto an = a.node;
    Tensor saved = out;
    return detail::make(std::move(out), {a}, [an, saved](Node& n) {
        if (!an->requires_grad) return;
        Tensor g = n.grad;
        for (int64_t i = 0; i < g.size(); ++i) g(i) *= saved(i) * (1.0 - saved(i));
        an->accumulate(g);
    });
}

// Row-wise layer norm with learned gain/bias (both [1 x n]).
inline Var layer_norm(const Var& x, const Var& gain, const Var& bias, double eps = 1e-5) {
    const int64_t m = x.rows(), n = x.cols();
    if (gain.cols() != n || bias.cols() != n) throw input_error("ag::layer_norm: parameter width mismatch");
    Tensor out({m, n});
    Tensor xhat({m, n});
    Tensor inv_std({m, 1});
    for (int64_t r = 0; r < m; ++r) {
        double mean = 0.0;
        for (int64_t c = 0; c < n; ++c) mean += x.val()(r, c);
        mean /= static_cast<double>(n);
        double var = 0.0;
        for (int64_t c = 0; c < n; ++c) {
            double d = x.val()(r, c) - mean;
            var += d * d;
        }
        var /= static_cast<double>(n);
        const double is = 1.0 / std::sqrt(var + eps);
        inv_std(r, 0) = is;
        for (int64_t c = 0; c < n; ++c) {
            xhat(r, c) = (x.val()(r, c) - mean) * is;
            out(r, c) = gain.val()(0, c) * xhat(r, c) + bias.val()(0, c);
        }
    }
    auto xn = x.node, gn = gain.node, bn = bias.node;
    return detail::make(std::move(out), {x, gain, bias}, [xn, gn, bn, xhat, inv_std, m, n](Node& nd) {
        const Tensor& g = nd.grad;
        if (gn->requires_grad) {
            Tensor gg({1, n});
            for (int64_t r = 0; r < m; ++r)
                for (int64_t c = 0; c < n; ++c) gg(0, c) += g(r, c) * xhat(r, c);
            gn->accumulate(gg);
        }
        if (bn->requires_grad) {
            Tensor gb({1, n});
            for (int64_t r = 0; r < m; ++r)
                for (int64_t c = 0; c < n; ++c) gb(0, c) += g(r, c);
            bn->accumulate(gb);
        }
        if (xn->requires_grad) {
            Tensor gx({m, n});
            for (int64_t r = 0; r < m; ++r) {
                double mean_dxhat = 0.0, mean_dxhat_xhat = 0.0;
                for (int64_t c = 0; c < n; ++c) {
                    const double dxh = g(r, c) * gn->val(0, c);
                    mean_dxhat += dxh;
                    mean_dxhat_xhat += dxh * xhat(r, c);
                }
                mean_dxhat /= static_cast<double>(n);
                mean_dxhat_xhat /= static_cast<double>(n);
                for (int64_t c = 0; c < n; ++c) {
                    const double dxh = g(r, c) * gn->val(0, c);
                    gx(r, c) = inv_std(r, 0) * (dxh - mean_dxhat - xhat(r, c) * mean_dxhat_xhat);
                }
            }
            xn->accumulate(gx);
        }
    });
}

inline Var softmax_rows(const Var& x) {
    const int64_t m = x.rows(), n = x.cols();
    Tensor out({m, n});
    for (int64_t r = 0; r < m; ++r) {
        double mx = -1e300;
        for (int64_t c = 0; c < n; ++c) mx = std::max(mx, x.val()(r, c));
        double sum = 0.0;
        for (int64_t c = 0; c < n; ++c) {
            out(r, c) = std::exp(x.val()(r, c) - mx);
            sum += out(r, c);
        }
        for (int64_t c = 0; c < n; ++c) out(r, c) /= sum;
    }
    auto xn = x.node;
    Tensor saved = out;
    return detail::make(std::move(out), {x}, [xn, saved, m, n](Node& nd) {
        if (!xn->requires_grad) return;
        Tensor gx({m, n});
        for (int64_t r = 0; r < m; ++r) {
            double dot = 0.0;
            for (int64_t c = 0; c < n; ++c) dot += nd.grad(r, c) * saved(r, c);
            for (int64_t c = 0; c < n; ++c) gx(r, c) = saved(r, c) * (nd.grad(r, c) - dot);
        }
        xn->accumulate(gx);
    });
}

// Embedding lookup: rows of table gathered by id.
inline Var gather_rows(const Var& table, const std::vector<int>& ids) {
    const int64_t n = table.cols();
    Tensor out({static_cast<int64_t>(ids.size()), n});
    for (size_t i = 0; i < ids.size(); ++i) {
        if (ids[i] < 0 || ids[i] >= table.rows()) throw input_error("ag::gather_rows: id out of range");
        for (int64_t c = 0; c < n; ++c) out(static_cast<int64_t>(i), c) = table.val()(ids[i], c);
    }
    auto tn = table.node;
    return detail::make(std::move(out), {table}, [tn, ids, n](Node& nd) {
        if (!tn->requires_grad) return;
        if (tn->grad.size() == 0) tn->grad = Tensor(tn->val.shape());
        for (size_t i = 0; i < ids.size(); ++i)
            for (int64_t c = 0; c < n; ++c) tn->grad(ids[i], c) += nd.grad(static_cast<int64_t>(i), c);
    });
}

inline Var slice_rows(const Var& a, int64_t r0, int64_t nrows) {
    if (r0 < 0 || r0 + nrows > a.rows()) throw input_error("ag::slice_rows: out of range");
    const int64_t n = a.cols();
    Tensor out({nrows, n});
    for (int64_t r = 0; r < nrows; ++r)
        for (int64_t c = 0; c < n; ++c) out(r, c) = a.val()(r0 + r, c);
    auto an = a.node;
    return detail::make(std::move(out), {a}, [an, r0, nrows, n](Node& nd) {
        if (!an->requires_grad) return;
        if (an->grad.size() == 0) an->grad = Tensor(an->val.shape());
        for (int64_t r = 0; r < nrows; ++r)
            for (int64_t c = 0; c < n; ++c) an->grad(r0 + r, c) += nd.grad(r, c);
    });
}

inline Var slice_cols(const Var& a, int64_t c0, int64_t ncols) {
    if (c0 < 0 || c0 + ncols > a.cols()) throw input_error("ag::slice_cols: out of range");
    const int64_t m = a.rows();
    Tensor out({m, ncols});
    for (int64_t r = 0; r < m; ++r)
        for (int64_t c = 0; c < ncols; ++c) out(r, c) = a.val()(r, c0 + c);
    auto an = a.node;
    return detail::make(std::move(out), {a}, [an, c0, ncols, m](Node& nd) {
        if (!an->requires_grad) return;
        if (an->grad.size() == 0) an->grad = Tensor(an->val.shape());
        for (int64_t r = 0; r < m; ++r)
            for (int64_t c = 0; c < ncols; ++c) an->grad(r, c0 + c) += nd.grad(r, c);
    });
}

inline Var concat_rows(const std::vector<Var>& parts) {
    if (parts.empty()) throw input_error("ag::concat_rows: empty input");
    const int64_t n = parts[0].cols();
    int64_t m = 0;
    for (const auto& p : parts) {
        if (p.cols() != n) throw input_error("ag::concat_rows: column mismatch");
        m += p.rows();
    }
    Tensor out({m, n});
    int64_t r0 = 0;
    for (const auto& p : parts) {
        for (int64_t r = 0; r < p.rows(); ++r)
            for (int64_t c = 0; c < n; ++c) out(r0 + r, c) = p.val()(r, c);
        r0 += p.rows();
    }
    std::vector<NodePtr> nodes;
    for (const auto& p : parts) nodes.push_back(p.node);
    return detail::make(std::move(out), parts, [nodes, n](Node& nd) {
        int64_t r0 = 0;
        for (const auto& pn : nodes) {
            const int64_t pr = pn->val.rows();
            if (pn->requires_grad) {
                Tensor g({pr, n});
                for (int64_t r = 0; r < pr; ++r)
                    for (int64_t c = 0; c < n; ++c) g(r, c) = nd.grad(r0 + r, c);
                pn->accumulate(g);
            }
            r0 += pr;
        }
    });
}

inline Var concat_cols(const std::vector<Var>& parts) {
    if (parts.empty()) throw input_error("ag::concat_cols: empty input");
    const int64_t m = parts[0].rows();
    int64_t n = 0;
    for (const auto& p : parts) {
        if (p.rows() != m) throw input_error("ag::concat_cols: row mismatch");
        n += p.cols();
    }
    Tensor out({m, n});
    int64_t c0 = 0;
    for (const auto& p : parts) {
        for (int64_t r = 0; r < m; ++r)
            for (int64_t c = 0; c < p.cols(); ++c) out(r, c0 + c) = p.val()(r, c);
        c0 += p.cols();
    }
    std::vector<NodePtr> nodes;
    for (const auto& p : parts) nodes.push_back(p.node);
    return detail::make(std::move(out), parts, [nodes, m](Node& nd) {
        int64_t c0 = 0;
        for (const auto& pn : nodes) {
            const int64_t pc = pn->val.cols();
            if (pn->requires_grad) {
                Tensor g({m, pc});
                for (int64_t r = 0; r < m; ++r)
                    for (int64_t c = 0; c < pc; ++c) g(r, c) = nd.grad(r, c0 + c);
                pn->accumulate(g);
            }
            c0 += pc;
        }
    });
}

inline Var mean_rows(const Var& a) {  // [m x n] -> [1 x n]
    const int64_t m = a.rows(), n = a.cols();
    if (m == 0) throw input_error("ag::mean_rows: empty input");
    Tensor out({1, n});
    for (int64_t r = 0; r < m; ++r)
        for (int64_t c = 0; c < n; ++c) out(0, c) += a.val()(r, c);
    for (int64_t c = 0; c < n; ++c) out(0, c) /= static_cast<double>(m);
    auto an = a.node;
    return detail::make(std::move(out), {a}, [an, m, n](Node& nd) {
        if (!an->requires_grad) return;
        Tensor g({m, n});
        for (int64_t r = 0; r < m; ++r)
            for (int64_t c = 0; c < n; ++c) g(r, c) = nd.grad(0, c) / static_cast<double>(m);
        an->accumulate(g);
    });
}

inline Var dropout(const Var& a, double p, Rng& rng) {
    if (p <= 0.0) return a;
    if (p >= 1.0) throw input_error("ag::dropout: p must be < 1");
    Tensor mask(a.val().shape());
    const double keep = 1.0 - p;
    for (int64_t i = 0; i < mask.size(); ++i) mask(i) = rng.bernoulli(keep) ? 1.0 / keep : 0.0;
    Tensor out = a.val();
    for (int64_t i = 0; i < out.size(); ++i) out(i) *= mask(i);
    auto an = a.node;
    return detail::make(std::move(out), {a}, [an, mask](Node& nd) {
        if (!an->requires_grad) return;
        Tensor g = nd.grad;
        for (int64_t i = 0; i < g.size(); ++i) g(i) *= mask(i);
        an->accumulate(g);
    });
}

// Label-smoothed cross entropy over rows of logits, averaged over rows with
// weight > 0. Smoothing mass is spread uniformly over the whole vocabulary.
inline Var cross_entropy_rows(const Var& logits, const std::vector<int>& targets,
                              const std::vector<double>& row_weights, double label_smoothing = 0.0) {
    const int64_t m = logits.rows(), n = logits.cols();
    if (static_cast<int64_t>(targets.size()) != m || static_cast<int64_t>(row_weights.size()) != m)
        throw input_error("ag::cross_entropy_rows: row count mismatch");
    double wsum = 0.0;
    for (double w : row_weights) wsum += w;
    if (wsum <= 0.0) throw input_error("ag::cross_entropy_rows: no supervised rows");

    Tensor probs({m, n});
    double loss = 0.0;
    const double ls = label_smoothing;
    for (int64_t r = 0; r < m; ++r) {
        double mx = -1e300;
        for (int64_t c = 0; c < n; ++c) mx = std::max(mx, logits.val()(r, c));
        double sum = 0.0;
        for (int64_t c = 0; c < n; ++c) sum += std::exp(logits.val()(r, c) - mx);
        const double logz = mx + std::log(sum);
        if (row_weights[r] == 0.0) continue;
        const int t = targets[static_cast<size_t>(r)];
        if (t < 0 || t >= n) throw input_error("ag::cross_entropy_rows: target out of range");
        double row_loss = 0.0;
        for (int64_t c = 0; c < n; ++c) {
            const double logp = logits.val()(r, c) - logz;
            probs(r, c) = std::exp(logp);
            const double y = ls / static_cast<double>(n) + (c == t ? 1.0 - ls : 0.0);
            row_loss -= y * logp;
        }
        loss += row_weights[static_cast<size_t>(r)] * row_loss;
    }
    loss /= wsum;

    auto ln = logits.node;
    return detail::make(Tensor::from({1, 1}, {loss}), {logits},
                        [ln, probs, targets, row_weights, wsum, ls, m, n](Node& nd) {
                            if (!ln->requires_grad) return;
                            const double gscale = nd.grad(0, 0) / wsum;
                            Tensor g({m, n});
                            for (int64_t r = 0; r < m; ++r) {
                                const double w = row_weights[static_cast<size_t>(r)];
                                if (w == 0.0) continue;
                                const int t = targets[static_cast<size_t>(r)];
                                for (int64_t c = 0; c < n; ++c) {
                                    const double y =
                                        ls / static_cast<double>(n) + (c == t ? 1.0 - ls : 0.0);
                                    g(r, c) = gscale * w * (probs(r, c) - y);
                                }
                            }
                            ln->accumulate(g);
                        });
}

// Mean element-wise sigmoid binary cross entropy against a multi-hot target.
inline Var bce_logits(const Var& logits, const Tensor& targets) {
    if (!logits.val().same_shape(targets)) throw input_error("ag::bce_logits: shape mismatch");
    const int64_t n = logits.val().size();
    double loss = 0.0;
    for (int64_t i = 0; i < n; ++i) {
        const double z = logits.val()(i);
        const double t = targets(i);
        // stable: max(z,0) - z*t + log(1+exp(-|z|))
        loss += std::max(z, 0.0) - z * t + std::log1p(std::exp(-std::abs(z)));
    }
    loss /= static_cast<double>(n);
    auto ln = logits.node;
    return detail::make(Tensor::from({1, 1}, {loss}), {logits}, [ln, targets, n](Node& nd) {
        if (!ln->requires_grad) return;
        const double gscale = nd.grad(0, 0) / static_cast<double>(n);
        Tensor g(ln->val.shape());
        for (int64_t i = 0; i < n; ++i) {
            const double s = 1.0 / (1.0 + std::exp(-ln->val(i)));
            g(i) = gscale * (s - targets(i));
        }
        ln->accumulate(g);
    });
}

inline Var add_scalars(const std::vector<Var>& xs) {
    if (xs.empty()) throw input_error("ag::add_scalars: empty input");
    double total = 0.0;
    for (const auto& x : xs) total += x.val()(0, 0);
    std::vector<NodePtr> nodes;
    for (const auto& x : xs) nodes.push_back(x.node);
    return detail::make(Tensor::from({1, 1}, {total}), xs, [nodes](Node& nd) {
        for (const auto& xn : nodes)
            if (xn->requires_grad) xn->accumulate(nd.grad);
    });
}

// ---------------------------------------------------------------------------
// backward driver
// ---------------------------------------------------------------------------

inline void backward(const Var& root, double seed_grad = 1.0) {
    if (root.val().size() != 1) throw input_error("ag::backward: root must be scalar");
    if (!root.node->requires_grad) return;

    // Iterative post-order DFS.
    std::vector<Node*> order;
    std::unordered_set<Node*> visited;
    std::vector<std::pair<Node*, size_t>> stack;
    stack.emplace_back(root.node.get(), 0);
    visited.insert(root.node.get());
    while (!stack.empty()) {
        auto& [node, idx] = stack.back();
        if (idx < node->parents.size()) {
            Node* p = node->parents[idx++].get();
            if (p->requires_grad && !visited.count(p)) {
                visited.insert(p);
                stack.emplace_back(p, 0);
            }
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    root.node->accumulate(Tensor::from({1, 1}, {seed_grad}));
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* n = *it;
        if (n->backward_fn && n->grad.size() != 0) n->backward_fn(*n);
    }
}

}  // namespace notefuse::core::ag
