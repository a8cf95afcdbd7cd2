#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

#include "gestgan/common.hpp"

namespace gestgan {

// Dense row-major tensor of 64-bit floats. Rank is arbitrary but nearly all
// of the library works with rank-1/2; rank-2 accessors are provided.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<std::size_t> shape)
        : shape_(std::move(shape)), data_(numel_of(shape_), 0.0) {}
    Tensor(std::vector<std::size_t> shape, std::vector<double> data)
        : shape_(std::move(shape)), data_(std::move(data)) {
        require(data_.size() == numel_of(shape_), "Tensor: shape/data size mismatch");
    }

    static Tensor scalar(double v) { return Tensor({1}, {v}); }
    static Tensor vec(std::size_t n) { return Tensor({n}); }
    static Tensor matrix(std::size_t r, std::size_t c) { return Tensor({r, c}); }
    static Tensor full(std::vector<std::size_t> shape, double v) {
        Tensor t(std::move(shape));
        for (double& x : t.data_) x = v;
        return t;
    }

    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    std::size_t rows() const { require(rank() == 2, "Tensor: rows() needs rank 2"); return shape_[0]; }
    std::size_t cols() const { require(rank() == 2, "Tensor: cols() needs rank 2"); return shape_[1]; }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }
    double& at(std::size_t i, std::size_t j) { return data_[i * shape_[1] + j]; }
    double at(std::size_t i, std::size_t j) const { return data_[i * shape_[1] + j]; }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::span<const double> span() const { return {data_.data(), data_.size()}; }
    std::span<double> span() { return {data_.data(), data_.size()}; }

    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }
    bool is_scalar() const { return size() == 1; }
    double item() const { require(is_scalar(), "Tensor: item() needs a scalar"); return data_[0]; }

    bool finite() const { return all_finite(span()); }

    Tensor reshaped(std::vector<std::size_t> shape) const {
        require(numel_of(shape) == size(), "Tensor: reshape changes element count");
        return Tensor(std::move(shape), data_);
    }

    static std::size_t numel_of(const std::vector<std::size_t>& shape) {
        std::size_t n = shape.empty() ? 0 : 1;
        for (std::size_t e : shape) n *= e;
        return n;
    }

private:
    std::vector<std::size_t> shape_;
    std::vector<double> data_;
};

// Elementwise and matrix helpers, routed through the active kernel backend.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
void add_inplace(Tensor& a, const Tensor& b);
void axpy_inplace(double alpha, const Tensor& x, Tensor& y);  // y += alpha*x
void scale_inplace(Tensor& a, double s);

Tensor matmul(const Tensor& a, const Tensor& b);     // a @ b
Tensor matmul_nt(const Tensor& a, const Tensor& b);  // a @ b^T
Tensor matmul_tn(const Tensor& a, const Tensor& b);  // a^T @ b
Tensor transpose(const Tensor& a);

// Reductions stay scalar (fixed summation order regardless of backend).
double sum(const Tensor& a);
double dot(const Tensor& a, const Tensor& b);
double max_abs(const Tensor& a);
double max_abs_diff(const Tensor& a, const Tensor& b);

}  // namespace gestgan
