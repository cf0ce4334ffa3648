#include "dermadiff/sparse.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "dermadiff/errors.hpp"

namespace dermadiff::sparse {

int CsrMatrix::find(int i, int j) const {
    const int begin = row_ptr[i], end = row_ptr[i + 1];
    auto it = std::lower_bound(col.begin() + begin, col.begin() + end, j);
    if (it != col.begin() + end && *it == j)
        return static_cast<int>(it - col.begin());
    return -1;
}

double CsrMatrix::get(int i, int j) const {
    const int k = find(i, j);
    return k < 0 ? 0.0 : val[k];
}

double& CsrMatrix::at(int i, int j) {
    const int k = find(i, j);
    if (k < 0) throw std::logic_error("CsrMatrix::at outside pattern");
    return val[k];
}

CsrMatrix pattern_from_adjacency(const std::vector<std::vector<int>>& adj) {
    CsrMatrix m;
    m.n = static_cast<int>(adj.size());
    m.row_ptr.resize(m.n + 1, 0);
    for (int i = 0; i < m.n; ++i) m.row_ptr[i + 1] = m.row_ptr[i] + static_cast<int>(adj[i].size());
    m.col.reserve(m.row_ptr[m.n]);
    for (const auto& row : adj) m.col.insert(m.col.end(), row.begin(), row.end());
    m.val.assign(m.col.size(), 0.0);
    return m;
}

CsrMatrix transpose(const CsrMatrix& a) {
    int ncols = 0;
    for (int c : a.col) ncols = std::max(ncols, c + 1);
    CsrMatrix t;
    t.n = ncols;
    t.row_ptr.assign(ncols + 1, 0);
    for (int c : a.col) t.row_ptr[c + 1]++;
    for (int i = 0; i < ncols; ++i) t.row_ptr[i + 1] += t.row_ptr[i];
    t.col.resize(a.col.size());
    t.val.resize(a.col.size());
    std::vector<int> next(t.row_ptr.begin(), t.row_ptr.end() - 1);
    for (int i = 0; i < a.n; ++i)
        for (int k = a.row_ptr[i]; k < a.row_ptr[i + 1]; ++k) {
            const int pos = next[a.col[k]]++;
            t.col[pos] = i;
            t.val[pos] = a.val[k];
        }
    return t;
}

CsrMatrix multiply(const CsrMatrix& a, const CsrMatrix& b) {
    int ncols_b = 0;
    for (int c : b.col) ncols_b = std::max(ncols_b, c + 1);
    CsrMatrix c;
    c.n = a.n;
    c.row_ptr.assign(a.n + 1, 0);

    std::vector<double> acc(ncols_b, 0.0);
    std::vector<int> marker(ncols_b, -1);
    std::vector<int> cols;
    for (int i = 0; i < a.n; ++i) {
        cols.clear();
        for (int ka = a.row_ptr[i]; ka < a.row_ptr[i + 1]; ++ka) {
            const int j = a.col[ka];
            const double v = a.val[ka];
            for (int kb = b.row_ptr[j]; kb < b.row_ptr[j + 1]; ++kb) {
                const int jj = b.col[kb];
                if (marker[jj] != i) {
                    marker[jj] = i;
                    acc[jj] = 0.0;
                    cols.push_back(jj);
                }
                acc[jj] += v * b.val[kb];
            }
        }
        std::sort(cols.begin(), cols.end());
        for (int jj : cols) {
            c.col.push_back(jj);
            c.val.push_back(acc[jj]);
        }
        c.row_ptr[i + 1] = static_cast<int>(c.col.size());
    }
    return c;
}

CsrMatrix rap(const CsrMatrix& a, const CsrMatrix& p) {
    return multiply(multiply(transpose(p), a), p);
}

void DenseCholesky::factor(const CsrMatrix& a) {
    n_ = a.n;
    l_.assign(static_cast<std::size_t>(n_) * n_, 0.0);
    for (int i = 0; i < n_; ++i)
        for (int k = a.row_ptr[i]; k < a.row_ptr[i + 1]; ++k)
            if (a.col[k] <= i) l_[static_cast<std::size_t>(i) * n_ + a.col[k]] = a.val[k];

    for (int j = 0; j < n_; ++j) {
        double d = l_[static_cast<std::size_t>(j) * n_ + j];
        for (int k = 0; k < j; ++k) {
            const double v = l_[static_cast<std::size_t>(j) * n_ + k];
            d -= v * v;
        }
        if (!(d > 0.0) || !std::isfinite(d))
            throw solver_error("coarse-level matrix is not positive definite");
        const double dj = std::sqrt(d);
        l_[static_cast<std::size_t>(j) * n_ + j] = dj;
        for (int i = j + 1; i < n_; ++i) {
            double s = l_[static_cast<std::size_t>(i) * n_ + j];
            const double* ri = &l_[static_cast<std::size_t>(i) * n_];
            const double* rj = &l_[static_cast<std::size_t>(j) * n_];
            for (int k = 0; k < j; ++k) s -= ri[k] * rj[k];
            l_[static_cast<std::size_t>(i) * n_ + j] = s / dj;
        }
    }
}

void DenseCholesky::solve(const std::vector<double>& b, std::vector<double>& x) const {
    x = b;
    for (int i = 0; i < n_; ++i) {
        double s = x[i];
        const double* ri = &l_[static_cast<std::size_t>(i) * n_];
        for (int k = 0; k < i; ++k) s -= ri[k] * x[k];
        x[i] = s / ri[i];
    }
    for (int i = n_ - 1; i >= 0; --i) {
        double s = x[i];
        for (int k = i + 1; k < n_; ++k) s -= l_[static_cast<std::size_t>(k) * n_ + i] * x[k];
        x[i] = s / l_[static_cast<std::size_t>(i) * n_ + i];
    }
}

} // namespace dermadiff::sparse
