#include "gestgan/tensor.hpp"

#include <cmath>

#include "gestgan/kernels.hpp"

namespace gestgan {

namespace {
void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    require(a.same_shape(b), std::string(op) + ": shape mismatch");
}
}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "add");
    Tensor out(a.shape());
    kern::active().add(a.data(), b.data(), out.data(), a.size());
    return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "sub");
    Tensor out(a.shape());
    kern::active().sub(a.data(), b.data(), out.data(), a.size());
    return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "mul");
    Tensor out(a.shape());
    kern::active().mul(a.data(), b.data(), out.data(), a.size());
    return out;
}

Tensor scale(const Tensor& a, double s) {
    Tensor out(a.shape());
    kern::active().scale(a.data(), s, out.data(), a.size());
    return out;
}

void add_inplace(Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "add_inplace");
    kern::active().add(a.data(), b.data(), a.data(), a.size());
}

void axpy_inplace(double alpha, const Tensor& x, Tensor& y) {
    check_same_shape(x, y, "axpy_inplace");
    kern::active().axpy(alpha, x.data(), y.data(), x.size());
}

void scale_inplace(Tensor& a, double s) {
    kern::active().scale(a.data(), s, a.data(), a.size());
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    require(a.rank() == 2 && b.rank() == 2 && a.cols() == b.rows(), "matmul: incompatible shapes");
    Tensor out = Tensor::matrix(a.rows(), b.cols());
    kern::active().matmul(a.data(), b.data(), out.data(), a.rows(), a.cols(), b.cols());
    return out;
}

Tensor transpose(const Tensor& a) {
    require(a.rank() == 2, "transpose: rank 2 required");
    Tensor out = Tensor::matrix(a.cols(), a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t j = 0; j < a.cols(); ++j) {
            out.at(j, i) = a.at(i, j);
        }
    }
    return out;
}

// nt/tn go through an explicit transpose copy so the compute path is the
// single nn kernel (keeps the backend equivalence surface minimal).
Tensor matmul_nt(const Tensor& a, const Tensor& b) { return matmul(a, transpose(b)); }
Tensor matmul_tn(const Tensor& a, const Tensor& b) { return matmul(transpose(a), b); }

double sum(const Tensor& a) {
    double acc = 0.0;
    for (double v : a.span()) acc += v;
    return acc;
}

double dot(const Tensor& a, const Tensor& b) {
    require(a.size() == b.size(), "dot: size mismatch");
    double acc = 0.0;
    const double* pa = a.data();
    const double* pb = b.data();
    for (std::size_t i = 0; i < a.size(); ++i) acc += pa[i] * pb[i];
    return acc;
}

double max_abs(const Tensor& a) {
    double m = 0.0;
    for (double v : a.span()) m = std::max(m, std::abs(v));
    return m;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
    require(a.size() == b.size(), "max_abs_diff: size mismatch");
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

}  // namespace gestgan
