#ifndef DERMADIFF_KERNELS_HPP
#define DERMADIFF_KERNELS_HPP

#include <vector>

#include "dermadiff/sparse.hpp"

namespace dermadiff::kernels {

// Data-parallel linear-algebra kernels. Each has a serial reference
// implementation (kernels::serial) and an OpenMP variant; the dispatching
// wrappers pick one based on the configured thread count. Results are
// bit-identical between the two and across thread counts: per-row kernels
// write disjoint outputs, and reductions accumulate fixed-size blocks that
// are combined in index order.

void set_threads(int n); // 0 = library default
int threads();

namespace serial {
void spmv(const sparse::CsrMatrix& a, const std::vector<double>& x, std::vector<double>& y);
void residual(const sparse::CsrMatrix& a, const std::vector<double>& x,
              const std::vector<double>& b, std::vector<double>& r);
void axpy(double alpha, const std::vector<double>& x, std::vector<double>& y);
double dot(const std::vector<double>& x, const std::vector<double>& y);
double norm_inf(const std::vector<double>& x);
} // namespace serial

namespace par {
void spmv(const sparse::CsrMatrix& a, const std::vector<double>& x, std::vector<double>& y);
void residual(const sparse::CsrMatrix& a, const std::vector<double>& x,
              const std::vector<double>& b, std::vector<double>& r);
void axpy(double alpha, const std::vector<double>& x, std::vector<double>& y);
double dot(const std::vector<double>& x, const std::vector<double>& y);
double norm_inf(const std::vector<double>& x);
} // namespace par

void spmv(const sparse::CsrMatrix& a, const std::vector<double>& x, std::vector<double>& y);
void residual(const sparse::CsrMatrix& a, const std::vector<double>& x,
              const std::vector<double>& b, std::vector<double>& r);
void axpy(double alpha, const std::vector<double>& x, std::vector<double>& y);
double dot(const std::vector<double>& x, const std::vector<double>& y);
double norm2(const std::vector<double>& x);
double norm_inf(const std::vector<double>& x);

} // namespace dermadiff::kernels

#endif
