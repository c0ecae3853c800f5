#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <vector>

#include "notefuse/core/errors.hpp"
#include "notefuse/core/rng.hpp"

namespace notefuse::core {

// Dense row-major float64 tensor. Rank 1 or 2 in practice; higher-rank data
// (visit x layer x dim stacks) is kept as vectors of matrices by the callers.
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(std::vector<int64_t> shape) : shape_(std::move(shape)) {
        data_.assign(static_cast<size_t>(count(shape_)), 0.0);
    }

    Tensor(std::initializer_list<int64_t> shape) : Tensor(std::vector<int64_t>(shape)) {}

    static Tensor zeros(std::initializer_list<int64_t> shape) { return Tensor(shape); }

    static Tensor full(std::initializer_list<int64_t> shape, double v) {
        Tensor t(shape);
        std::fill(t.data_.begin(), t.data_.end(), v);
        return t;
    }

    static Tensor from(std::vector<int64_t> shape, std::vector<double> values) {
        Tensor t;
        t.shape_ = std::move(shape);
        if (static_cast<int64_t>(values.size()) != count(t.shape_))
            throw input_error("Tensor::from: value count does not match shape");
        t.data_ = std::move(values);
        return t;
    }

    static Tensor randn(std::vector<int64_t> shape, Rng& rng, double std = 1.0) {
        Tensor t(std::move(shape));
        for (auto& v : t.data_) v = rng.normal(0.0, std);
        return t;
    }

    const std::vector<int64_t>& shape() const { return shape_; }
    int64_t ndim() const { return static_cast<int64_t>(shape_.size()); }
    int64_t size() const { return static_cast<int64_t>(data_.size()); }
    int64_t rows() const { return shape_.empty() ? 0 : shape_[0]; }
    int64_t cols() const { return shape_.size() < 2 ? (shape_.empty() ? 0 : 1) : shape_[1]; }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::vector<double>& vec() { return data_; }
    const std::vector<double>& vec() const { return data_; }

    double& operator()(int64_t i) { return data_[static_cast<size_t>(i)]; }
    double operator()(int64_t i) const { return data_[static_cast<size_t>(i)]; }
    double& operator()(int64_t r, int64_t c) { return data_[static_cast<size_t>(r * cols() + c)]; }
    double operator()(int64_t r, int64_t c) const { return data_[static_cast<size_t>(r * cols() + c)]; }

    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

    bool all_finite() const {
        for (double v : data_)
            if (!std::isfinite(v)) return false;
        return true;
    }

    using EigenMap = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
    using ConstEigenMap =
        Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

    EigenMap mat() { return EigenMap(data_.data(), rows(), cols()); }
    ConstEigenMap mat() const { return ConstEigenMap(data_.data(), rows(), cols()); }

private:
    static int64_t count(const std::vector<int64_t>& shape) {
        int64_t n = 1;
        for (int64_t d : shape) {
            if (d < 0) throw input_error("Tensor: negative dimension");
            n *= d;
        }
        return shape.empty() ? 0 : n;
    }

    std::vector<int64_t> shape_;
    std::vector<double> data_;
};

// C = op(A) * op(B) with optional transposes.
inline Tensor matmul(const Tensor& a, const Tensor& b, bool ta = false, bool tb = false) {
    const int64_t am = ta ? a.cols() : a.rows();
    const int64_t ak = ta ? a.rows() : a.cols();
    const int64_t bk = tb ? b.cols() : b.rows();
    const int64_t bn = tb ? b.rows() : b.cols();
    if (ak != bk) throw input_error("matmul: inner dimensions disagree");
    Tensor c({am, bn});
    auto cm = c.mat();
    if (!ta && !tb)
        cm.noalias() = a.mat() * b.mat();
    else if (ta && !tb)
        cm.noalias() = a.mat().transpose() * b.mat();
    else if (!ta && tb)
        cm.noalias() = a.mat() * b.mat().transpose();
    else
        cm.noalias() = a.mat().transpose() * b.mat().transpose();
    return c;
}

inline void add_inplace(Tensor& dst, const Tensor& src, double scale = 1.0) {
    if (!dst.same_shape(src)) throw input_error("add_inplace: shape mismatch");
    const double* s = src.data();
    double* d = dst.data();
    for (int64_t i = 0; i < dst.size(); ++i) d[i] += scale * s[i];
}

}  // namespace notefuse::core
