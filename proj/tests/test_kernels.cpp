#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "dermadiff/kernels.hpp"
#include "dermadiff/sparse.hpp"

using namespace dermadiff;

namespace {

sparse::CsrMatrix random_matrix(int n, int bandwidth, unsigned seed) {
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> vals(-1.0, 1.0);
    std::vector<std::vector<int>> adj(n);
    for (int i = 0; i < n; ++i)
        for (int j = std::max(0, i - bandwidth); j <= std::min(n - 1, i + bandwidth); ++j)
            adj[i].push_back(j);
    auto m = sparse::pattern_from_adjacency(adj);
    for (auto& v : m.val) v = vals(rng);
    return m;
}

std::vector<double> random_vector(int n, unsigned seed) {
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> vals(-1.0, 1.0);
    std::vector<double> x(n);
    for (auto& v : x) v = vals(rng);
    return x;
}

} // namespace

TEST_CASE("parallel kernels match the serial reference bitwise") {
    const int n = 10000;
    const auto a = random_matrix(n, 3, 1);
    const auto x = random_vector(n, 2);
    const auto b = random_vector(n, 3);

    std::vector<double> ys, yp, rs, rp;
    kernels::serial::spmv(a, x, ys);
    kernels::par::spmv(a, x, yp);
    CHECK(ys == yp);

    kernels::serial::residual(a, x, b, rs);
    kernels::par::residual(a, x, b, rp);
    CHECK(rs == rp);

    auto as = b, ap = b;
    kernels::serial::axpy(0.37, x, as);
    kernels::par::axpy(0.37, x, ap);
    CHECK(as == ap);

    CHECK(kernels::serial::dot(x, b) == kernels::par::dot(x, b));
    CHECK(kernels::serial::norm_inf(x) == kernels::par::norm_inf(x));
}

TEST_CASE("reductions are bitwise identical across thread counts") {
    const int n = 50000;
    const auto x = random_vector(n, 11);
    const auto y = random_vector(n, 12);

    kernels::set_threads(1);
    const double d1 = kernels::dot(x, y);
    const double n1 = kernels::norm2(x);
    kernels::set_threads(2);
    const double d2 = kernels::dot(x, y);
    const double n2 = kernels::norm2(x);
    kernels::set_threads(4);
    const double d4 = kernels::dot(x, y);
    kernels::set_threads(0);
    const double d0 = kernels::dot(x, y);

    CHECK(d1 == d2);
    CHECK(d2 == d4);
    CHECK(d4 == d0);
    CHECK(n1 == n2);
    kernels::set_threads(0);
}

TEST_CASE("blocked dot agrees with plain accumulation") {
    const auto x = random_vector(9999, 21);
    const auto y = random_vector(9999, 22);
    double plain = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) plain += x[i] * y[i];
    CHECK(kernels::dot(x, y) == doctest::Approx(plain).epsilon(1e-13));
}

TEST_CASE("spmv matches a dense reference on a small matrix") {
    const int n = 40;
    const auto a = random_matrix(n, 5, 31);
    const auto x = random_vector(n, 32);
    std::vector<double> y;
    kernels::spmv(a, x, y);
    for (int i = 0; i < n; ++i) {
        double expect = 0.0;
        for (int j = 0; j < n; ++j) expect += a.get(i, j) * x[j];
        CHECK(y[i] == doctest::Approx(expect).epsilon(1e-12));
    }
}

TEST_CASE("sparse transpose and products behave") {
    const auto a = random_matrix(30, 2, 41);
    const auto at = sparse::transpose(a);
    for (int i = 0; i < a.n; ++i)
        for (int k = a.row_ptr[i]; k < a.row_ptr[i + 1]; ++k)
            CHECK(at.get(a.col[k], i) == a.val[k]);

    const auto ata = sparse::multiply(at, a);
    // Spot check a few entries against the dense computation.
    for (int i : {0, 7, 15, 29})
        for (int j : {0, 3, 15, 29}) {
            double expect = 0.0;
            for (int k = 0; k < a.n; ++k) expect += at.get(i, k) * a.get(k, j);
            CHECK(ata.get(i, j) == doctest::Approx(expect).epsilon(1e-12));
        }
}
