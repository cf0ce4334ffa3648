#include "dermadiff/kernels.hpp"

#include <algorithm>
#include <cmath>

#include <omp.h>

namespace dermadiff::kernels {

namespace {

int g_threads = 0;

// Fixed reduction block: partial sums are formed per block and combined in
// block order, so the result does not depend on the thread count.
constexpr int kBlock = 4096;

bool parallel_enabled() { return g_threads != 1; }

int effective_threads() {
    return g_threads > 0 ? g_threads : omp_get_max_threads();
}

} // namespace

void set_threads(int n) { g_threads = n < 0 ? 0 : n; }
int threads() { return effective_threads(); }

namespace serial {

void spmv(const sparse::CsrMatrix& a, const std::vector<double>& x, std::vector<double>& y) {
    y.resize(a.n);
    for (int i = 0; i < a.n; ++i) {
        double s = 0.0;
        for (int k = a.row_ptr[i]; k < a.row_ptr[i + 1]; ++k) s += a.val[k] * x[a.col[k]];
        y[i] = s;
    }
}

void residual(const sparse::CsrMatrix& a, const std::vector<double>& x,
              const std::vector<double>& b, std::vector<double>& r) {
    r.resize(a.n);
    for (int i = 0; i < a.n; ++i) {
        double s = b[i];
        for (int k = a.row_ptr[i]; k < a.row_ptr[i + 1]; ++k) s -= a.val[k] * x[a.col[k]];
        r[i] = s;
    }
}

void axpy(double alpha, const std::vector<double>& x, std::vector<double>& y) {
    const int n = static_cast<int>(y.size());
    for (int i = 0; i < n; ++i) y[i] += alpha * x[i];
}

double dot(const std::vector<double>& x, const std::vector<double>& y) {
    const int n = static_cast<int>(x.size());
    const int nblocks = (n + kBlock - 1) / kBlock;
    double total = 0.0;
    for (int blk = 0; blk < nblocks; ++blk) {
        const int lo = blk * kBlock, hi = std::min(n, lo + kBlock);
        double s = 0.0;
        for (int i = lo; i < hi; ++i) s += x[i] * y[i];
        total += s;
    }
    return total;
}

double norm_inf(const std::vector<double>& x) {
    double m = 0.0;
    for (double v : x) m = std::max(m, std::abs(v));
    return m;
}

} // namespace serial

namespace par {

void spmv(const sparse::CsrMatrix& a, const std::vector<double>& x, std::vector<double>& y) {
    y.resize(a.n);
#pragma omp parallel for schedule(static) num_threads(effective_threads())
    for (int i = 0; i < a.n; ++i) {
        double s = 0.0;
        for (int k = a.row_ptr[i]; k < a.row_ptr[i + 1]; ++k) s += a.val[k] * x[a.col[k]];
        y[i] = s;
    }
}

void residual(const sparse::CsrMatrix& a, const std::vector<double>& x,
              const std::vector<double>& b, std::vector<double>& r) {
    r.resize(a.n);
#pragma omp parallel for schedule(static) num_threads(effective_threads())
    for (int i = 0; i < a.n; ++i) {
        double s = b[i];
        for (int k = a.row_ptr[i]; k < a.row_ptr[i + 1]; ++k) s -= a.val[k] * x[a.col[k]];
        r[i] = s;
    }
}

void axpy(double alpha, const std::vector<double>& x, std::vector<double>& y) {
    const int n = static_cast<int>(y.size());
#pragma omp parallel for schedule(static) num_threads(effective_threads())
    for (int i = 0; i < n; ++i) y[i] += alpha * x[i];
}

double dot(const std::vector<double>& x, const std::vector<double>& y) {
    const int n = static_cast<int>(x.size());
    const int nblocks = (n + kBlock - 1) / kBlock;
    std::vector<double> partial(nblocks);
#pragma omp parallel for schedule(static) num_threads(effective_threads())
    for (int blk = 0; blk < nblocks; ++blk) {
        const int lo = blk * kBlock, hi = std::min(n, lo + kBlock);
        double s = 0.0;
        for (int i = lo; i < hi; ++i) s += x[i] * y[i];
        partial[blk] = s;
    }
    double total = 0.0;
    for (double p : partial) total += p;
    return total;
}

double norm_inf(const std::vector<double>& x) {
    const int n = static_cast<int>(x.size());
    double m = 0.0;
#pragma omp parallel for schedule(static) reduction(max : m) num_threads(effective_threads())
    for (int i = 0; i < n; ++i) m = std::max(m, std::abs(x[i]));
    return m;
}

} // namespace par

void spmv(const sparse::CsrMatrix& a, const std::vector<double>& x, std::vector<double>& y) {
    parallel_enabled() ? par::spmv(a, x, y) : serial::spmv(a, x, y);
}

void residual(const sparse::CsrMatrix& a, const std::vector<double>& x,
              const std::vector<double>& b, std::vector<double>& r) {
    parallel_enabled() ? par::residual(a, x, b, r) : serial::residual(a, x, b, r);
}

void axpy(double alpha, const std::vector<double>& x, std::vector<double>& y) {
    parallel_enabled() ? par::axpy(alpha, x, y) : serial::axpy(alpha, x, y);
}

double dot(const std::vector<double>& x, const std::vector<double>& y) {
    return parallel_enabled() ? par::dot(x, y) : serial::dot(x, y);
}

double norm2(const std::vector<double>& x) { return std::sqrt(dot(x, x)); }

double norm_inf(const std::vector<double>& x) {
    return parallel_enabled() ? par::norm_inf(x) : serial::norm_inf(x);
}

} // namespace dermadiff::kernels
