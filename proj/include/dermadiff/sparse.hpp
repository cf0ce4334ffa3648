#ifndef DERMADIFF_SPARSE_HPP
#define DERMADIFF_SPARSE_HPP

#include <vector>

namespace dermadiff::sparse {

/// Square CSR matrix with sorted column indices per row.
struct CsrMatrix {
    int n = 0;
    std::vector<int> row_ptr; // size n+1
    std::vector<int> col;     // size nnz
    std::vector<double> val;  // size nnz

    int nnz() const { return static_cast<int>(col.size()); }

    /// Index of entry (i,j) in val, or -1 if outside the pattern.
    int find(int i, int j) const;
    double get(int i, int j) const;
    /// Reference into an existing pattern slot; throws if absent.
    double& at(int i, int j);

    void set_zero() { std::fill(val.begin(), val.end(), 0.0); }
};

/// CSR pattern from per-row sorted adjacency (diagonal must be included by
/// the caller if wanted).
CsrMatrix pattern_from_adjacency(const std::vector<std::vector<int>>& adj);

CsrMatrix transpose(const CsrMatrix& a);

/// General sparse product C = A * B (both CSR, n_a x m, m x n_b).
/// Row counts are taken from row_ptr; n holds the row count.
CsrMatrix multiply(const CsrMatrix& a, const CsrMatrix& b);

/// Galerkin triple product P^T A P.
CsrMatrix rap(const CsrMatrix& a, const CsrMatrix& p);

/// Dense Cholesky factorization for the small coarsest-level solve.
class DenseCholesky {
public:
    void factor(const CsrMatrix& a); // throws solver_error if not SPD
    void solve(const std::vector<double>& b, std::vector<double>& x) const;
    int size() const { return n_; }

private:
    int n_ = 0;
    std::vector<double> l_; // row-major lower triangle
};

} // namespace dermadiff::sparse

#endif
