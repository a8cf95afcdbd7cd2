#include <cstring>
#include <vector>

#include "doctest.h"
#include "gestgan/kernels.hpp"
#include "gestgan/rng.hpp"
#include "gestgan/tensor.hpp"

using namespace gestgan;

namespace {

std::vector<double> random_vec(Rng& rng, std::size_t n) {
    std::vector<double> v(n);
    for (double& x : v) x = rng.normal();
    return v;
}

// Reference matmul: plain triple loop in the contract order (i, k, j).
std::vector<double> naive_matmul(const std::vector<double>& a, const std::vector<double>& b,
                                 std::size_t m, std::size_t k, std::size_t n) {
    std::vector<double> c(m * n, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
            const double av = a[i * k + p];
            for (std::size_t j = 0; j < n; ++j) {
                c[i * n + j] = c[i * n + j] + av * b[p * n + j];
            }
        }
    }
    return c;
}

bool bitwise_equal(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) return false;
    return std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

struct Dims {
    std::size_t m, k, n;
};

}  // namespace

TEST_CASE("scalar backend is always supported and matches the naive reference") {
    Rng rng(1234);
    for (auto [m, k, n] : std::vector<Dims>{
             {1, 1, 1}, {3, 5, 7}, {4, 8, 8}, {5, 9, 13}, {16, 16, 16}, {17, 31, 19}}) {
        auto a = random_vec(rng, m * k);
        auto b = random_vec(rng, k * n);
        std::vector<double> c(m * n);
        kern::scalar_table.matmul(a.data(), b.data(), c.data(), m, k, n);
        CHECK(bitwise_equal(c, naive_matmul(a, b, m, k, n)));
    }
}

TEST_CASE("every supported backend is bitwise identical to the scalar reference") {
    Rng rng(99);
    const auto backends = kern::supported_backends();
    CHECK(!backends.empty());

    for (kern::Backend be : backends) {
        CAPTURE(kern::backend_name(be));
        REQUIRE(kern::select_backend(be));
        const kern::KernelTable& t = kern::active();

        // Elementwise ops at sizes that exercise vector bodies and remainders.
        for (std::size_t n : {1u, 2u, 3u, 4u, 5u, 7u, 8u, 9u, 15u, 16u, 17u, 64u, 100u, 1023u}) {
            auto a = random_vec(rng, n);
            auto b = random_vec(rng, n);
            std::vector<double> got(n), want(n);

            t.add(a.data(), b.data(), got.data(), n);
            kern::scalar_table.add(a.data(), b.data(), want.data(), n);
            CHECK(bitwise_equal(got, want));

            t.sub(a.data(), b.data(), got.data(), n);
            kern::scalar_table.sub(a.data(), b.data(), want.data(), n);
            CHECK(bitwise_equal(got, want));

            t.mul(a.data(), b.data(), got.data(), n);
            kern::scalar_table.mul(a.data(), b.data(), want.data(), n);
            CHECK(bitwise_equal(got, want));

            t.scale(a.data(), 0.7071, got.data(), n);
            kern::scalar_table.scale(a.data(), 0.7071, want.data(), n);
            CHECK(bitwise_equal(got, want));

            got = b;
            want = b;
            t.axpy(-1.375, a.data(), got.data(), n);
            kern::scalar_table.axpy(-1.375, a.data(), want.data(), n);
            CHECK(bitwise_equal(got, want));
        }

        // Matmul across shapes covering full tiles and ragged edges.
        for (auto [m, k, n] : std::vector<Dims>{{1, 1, 1},
                                                {2, 3, 4},
                                                {4, 4, 8},
                                                {4, 7, 8},
                                                {5, 8, 9},
                                                {7, 13, 11},
                                                {8, 16, 24},
                                                {33, 17, 29}}) {
            auto a = random_vec(rng, m * k);
            auto b = random_vec(rng, k * n);
            std::vector<double> got(m * n), want(m * n);
            t.matmul(a.data(), b.data(), got.data(), m, k, n);
            kern::scalar_table.matmul(a.data(), b.data(), want.data(), m, k, n);
            CHECK(bitwise_equal(got, want));
        }
    }
    kern::select_backend(backends.front());
}

TEST_CASE("tensor layer routes through the active backend and validates shapes") {
    Tensor a({2, 3}, {1, 2, 3, 4, 5, 6});
    Tensor b({3, 2}, {1, 0, 0, 1, 1, 1});
    Tensor c = matmul(a, b);
    CHECK(c.rows() == 2);
    CHECK(c.cols() == 2);
    CHECK(c.at(0, 0) == doctest::Approx(4.0));
    CHECK(c.at(0, 1) == doctest::Approx(5.0));
    CHECK(c.at(1, 0) == doctest::Approx(10.0));
    CHECK(c.at(1, 1) == doctest::Approx(11.0));

    // nt/tn agree with transpose-then-multiply bitwise (they ARE that).
    Tensor bt = transpose(b);
    CHECK(max_abs_diff(matmul_nt(a, bt), c) == 0.0);
    CHECK(max_abs_diff(matmul_tn(transpose(a), b), c) == 0.0);

    CHECK_THROWS_AS(matmul(a, a), std::invalid_argument);
    CHECK_THROWS_AS(add(a, b), std::invalid_argument);
}

TEST_CASE("reductions are fixed-order and backend independent") {
    Rng rng(7);
    Tensor x({257});
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = rng.normal();
    const auto backends = kern::supported_backends();
    const double s0 = [&] {
        kern::select_backend(kern::Backend::scalar);
        return sum(x);
    }();
    for (kern::Backend be : backends) {
        REQUIRE(kern::select_backend(be));
        CHECK(sum(x) == s0);  // bitwise: reductions never dispatch
    }
    kern::select_backend(backends.front());
}
