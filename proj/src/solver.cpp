#include "dermadiff/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "dermadiff/errors.hpp"
#include "dermadiff/kernels.hpp"

namespace dermadiff::solver {

using assembly::FieldState;
using assembly::SystemMatrices;
using sparse::CsrMatrix;

Cycle cycle_from_string(const std::string& s) {
    if (s == "V" || s == "v") return Cycle::V;
    if (s == "W" || s == "w") return Cycle::W;
    throw config_error("unknown multigrid cycle '" + s + "' (V or W)");
}

Smoother smoother_from_string(const std::string& s) {
    if (s == "gauss_seidel") return Smoother::gauss_seidel;
    if (s == "ilu0") return Smoother::ilu0;
    if (s == "line_gauss_seidel") return Smoother::line_gauss_seidel;
    throw config_error("unknown smoother '" + s +
                       "' (gauss_seidel, ilu0 or line_gauss_seidel)");
}

Coarsening coarsening_from_string(const std::string& s) {
    if (s == "geometric") return Coarsening::geometric;
    if (s == "galerkin") return Coarsening::galerkin;
    throw config_error("unknown coarsening '" + s + "' (geometric or galerkin)");
}

const char* to_string(Cycle c) { return c == Cycle::V ? "V" : "W"; }
const char* to_string(Smoother s) {
    switch (s) {
        case Smoother::gauss_seidel: return "gauss_seidel";
        case Smoother::ilu0: return "ilu0";
        case Smoother::line_gauss_seidel: return "line_gauss_seidel";
    }
    return "?";
}
const char* to_string(Coarsening c) {
    return c == Coarsening::geometric ? "geometric" : "galerkin";
}

void SolverConfig::validate() const {
    if (!(tolerance > 0.0) || !(tolerance < 1.0))
        throw config_error("solver tolerance must lie in (0, 1)");
    if (max_cycles < 1) throw config_error("max_cycles must be at least 1");
    if (pre_sweeps < 1 || post_sweeps < 1)
        throw config_error("smoother sweep counts must be at least 1");
}

void gauss_seidel_sweep(const CsrMatrix& a, std::vector<double>& x,
                        const std::vector<double>& b) {
    for (int i = 0; i < a.n; ++i) {
        double s = b[i];
        double diag = 0.0;
        for (int k = a.row_ptr[i]; k < a.row_ptr[i + 1]; ++k) {
            if (a.col[k] == i)
                diag = a.val[k];
            else
                s -= a.val[k] * x[a.col[k]];
        }
        if (diag == 0.0) throw solver_error("Gauss-Seidel: zero diagonal in row " +
                                            std::to_string(i));
        x[i] = s / diag;
    }
}

void gauss_seidel_sweep_backward(const CsrMatrix& a, std::vector<double>& x,
                                 const std::vector<double>& b) {
    for (int i = a.n - 1; i >= 0; --i) {
        double s = b[i];
        double diag = 0.0;
        for (int k = a.row_ptr[i]; k < a.row_ptr[i + 1]; ++k) {
            if (a.col[k] == i)
                diag = a.val[k];
            else
                s -= a.val[k] * x[a.col[k]];
        }
        if (diag == 0.0) throw solver_error("Gauss-Seidel: zero diagonal in row " +
                                            std::to_string(i));
        x[i] = s / diag;
    }
}

void Ilu0::factor(const CsrMatrix& a) {
    lu_ = a;
    const int n = a.n;
    diag_.assign(n, -1);
    for (int i = 0; i < n; ++i) {
        const int d = lu_.find(i, i);
        if (d < 0) throw solver_error("ILU(0): missing diagonal in row " + std::to_string(i));
        diag_[i] = d;
    }

    std::vector<int> pos_of_col(n, -1);
    for (int i = 0; i < n; ++i) {
        for (int k = lu_.row_ptr[i]; k < lu_.row_ptr[i + 1]; ++k) pos_of_col[lu_.col[k]] = k;

        for (int k = lu_.row_ptr[i]; k < lu_.row_ptr[i + 1] && lu_.col[k] < i; ++k) {
            const int kk = lu_.col[k];
            const double pivot = lu_.val[diag_[kk]];
            if (pivot == 0.0)
                throw solver_error("ILU(0): zero pivot in row " + std::to_string(kk));
            const double mult = lu_.val[k] / pivot;
            lu_.val[k] = mult;
            for (int kj = diag_[kk] + 1; kj < lu_.row_ptr[kk + 1]; ++kj) {
                const int p = pos_of_col[lu_.col[kj]];
                if (p >= 0) lu_.val[p] -= mult * lu_.val[kj];
            }
        }
        if (lu_.val[diag_[i]] == 0.0)
            throw solver_error("ILU(0): zero pivot in row " + std::to_string(i));

        for (int k = lu_.row_ptr[i]; k < lu_.row_ptr[i + 1]; ++k) pos_of_col[lu_.col[k]] = -1;
    }
}

void Ilu0::apply(const std::vector<double>& r, std::vector<double>& z) const {
    const int n = lu_.n;
    z.resize(n);
    for (int i = 0; i < n; ++i) {
        double s = r[i];
        for (int k = lu_.row_ptr[i]; k < diag_[i]; ++k) s -= lu_.val[k] * z[lu_.col[k]];
        z[i] = s;
    }
    for (int i = n - 1; i >= 0; --i) {
        double s = z[i];
        for (int k = diag_[i] + 1; k < lu_.row_ptr[i + 1]; ++k) s -= lu_.val[k] * z[lu_.col[k]];
        z[i] = s / lu_.val[diag_[i]];
    }
}

CsrMatrix Ilu0::lower() const {
    CsrMatrix l;
    l.n = lu_.n;
    l.row_ptr.assign(lu_.n + 1, 0);
    for (int i = 0; i < lu_.n; ++i) {
        for (int k = lu_.row_ptr[i]; k < lu_.row_ptr[i + 1]; ++k) {
            if (lu_.col[k] < i) {
                l.col.push_back(lu_.col[k]);
                l.val.push_back(lu_.val[k]);
            }
        }
        l.col.push_back(i);
        l.val.push_back(1.0);
        l.row_ptr[i + 1] = static_cast<int>(l.col.size());
    }
    return l;
}

CsrMatrix Ilu0::upper() const {
    CsrMatrix u;
    u.n = lu_.n;
    u.row_ptr.assign(lu_.n + 1, 0);
    for (int i = 0; i < lu_.n; ++i) {
        for (int k = diag_[i]; k < lu_.row_ptr[i + 1]; ++k) {
            u.col.push_back(lu_.col[k]);
            u.val.push_back(lu_.val[k]);
        }
        u.row_ptr[i + 1] = static_cast<int>(u.col.size());
    }
    return u;
}

Ilu0 ilu0_factor(const CsrMatrix& a) {
    Ilu0 f;
    f.factor(a);
    return f;
}

namespace {

MultigridHierarchy::Level::LineSet build_lines(const geometry::Mesh& mesh) {
    MultigridHierarchy::Level::LineSet set;
    const int n = mesh.vertex_count();
    if (static_cast<int>(mesh.row_of.size()) != n)
        throw solver_error("mesh carries no row structure for the line smoother");
    std::vector<std::pair<long long, int>> keyed(n);
    for (int i = 0; i < n; ++i) keyed[i] = {mesh.row_of[i], i};
    std::stable_sort(keyed.begin(), keyed.end(), [&](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first < b.first;
        return mesh.vertices[a.second].x < mesh.vertices[b.second].x;
    });
    set.order.resize(n);
    set.pos.resize(n);
    set.line_start.push_back(0);
    for (int k = 0; k < n; ++k) {
        set.order[k] = keyed[k].second;
        set.pos[keyed[k].second] = k;
        if (k + 1 == n || keyed[k + 1].first != keyed[k].first)
            set.line_start.push_back(k + 1);
    }
    return set;
}

CsrMatrix build_prolongation(const geometry::Mesh& fine, int coarse_n) {
    std::vector<std::vector<int>> rows(fine.vertex_count());
    CsrMatrix p;
    p.n = fine.vertex_count();
    p.row_ptr.assign(p.n + 1, 0);
    for (int i = 0; i < p.n; ++i) {
        const auto& par = fine.lineage[i];
        if (par.p0 < 0 || par.p0 >= coarse_n || par.p1 >= coarse_n)
            throw solver_error("refinement lineage is inconsistent with the coarse level");
        if (par.p0 == par.p1) {
            p.col.push_back(par.p0);
            p.val.push_back(1.0);
        } else {
            p.col.push_back(std::min(par.p0, par.p1));
            p.val.push_back(0.5);
            p.col.push_back(std::max(par.p0, par.p1));
            p.val.push_back(0.5);
        }
        p.row_ptr[i + 1] = static_cast<int>(p.col.size());
    }
    return p;
}

void eliminate_matrix(CsrMatrix& s, const std::vector<std::uint8_t>& mask) {
    for (int i = 0; i < s.n; ++i) {
        if (mask[i]) {
            for (int k = s.row_ptr[i]; k < s.row_ptr[i + 1]; ++k)
                s.val[k] = (s.col[k] == i) ? 1.0 : 0.0;
        } else {
            for (int k = s.row_ptr[i]; k < s.row_ptr[i + 1]; ++k)
                if (mask[s.col[k]]) s.val[k] = 0.0;
        }
    }
}

CsrMatrix combined_raw(const SystemMatrices& sys, double alpha, double beta) {
    CsrMatrix s = sys.stiffness;
    if (beta != 1.0)
        for (double& v : s.val) v *= beta;
    if (alpha != 0.0)
        for (int i = 0; i < s.n; ++i) s.val[s.find(i, i)] += alpha * sys.lumped_mass[i];
    return s;
}

} // namespace

namespace {

// Copy values of `src` into the pattern of `dst_pattern` (zero fill).
CsrMatrix into_pattern(const CsrMatrix& pattern, const CsrMatrix& src) {
    CsrMatrix out = pattern;
    out.set_zero();
    for (int i = 0; i < src.n; ++i)
        for (int k = src.row_ptr[i]; k < src.row_ptr[i + 1]; ++k)
            out.at(i, src.col[k]) = src.val[k];
    return out;
}

} // namespace

MultigridHierarchy build_hierarchy(geometry::Mesh base, int refinements,
                                   const chem::LayerParams& params,
                                   const std::vector<ConstraintSpec>& constraints,
                                   const SolverConfig& config) {
    config.validate();
    if (refinements < 0) throw config_error("refinement level must be non-negative");
    if (base.vertex_count() > 2000)
        throw solver_error("coarsest level has " + std::to_string(base.vertex_count()) +
                           " unknowns; the direct coarse solve is limited to 2000");

    MultigridHierarchy hier;
    hier.config = config;
    hier.levels.resize(refinements + 1);
    hier.levels[0].mesh = std::move(base);
    for (int l = 1; l <= refinements; ++l)
        hier.levels[l].mesh = geometry::refine(hier.levels[l - 1].mesh);

    for (int l = 0; l <= refinements; ++l) {
        auto& lev = hier.levels[l];
        lev.boxes = geometry::build_dual_boxes(lev.mesh);
        lev.sys = assembly::assemble(lev.mesh, lev.boxes, params);
        for (const auto& c : constraints)
            assembly::constrain_boundary(lev.sys, lev.mesh, c.tag, c.value);
        if (config.smoother == Smoother::line_gauss_seidel) lev.lines = build_lines(lev.mesh);
        if (l > 0)
            lev.prolongation = build_prolongation(lev.mesh, hier.levels[l - 1].mesh.vertex_count());
    }
    if (config.coarsening == Coarsening::galerkin && refinements > 0) {
        // Coarsen A and the lumped mass once; per-tau operators combine them.
        CsrMatrix a_fine = hier.levels[refinements].sys.stiffness;
        CsrMatrix m_fine;
        m_fine.n = a_fine.n;
        m_fine.row_ptr.resize(a_fine.n + 1);
        for (int i = 0; i <= a_fine.n; ++i) m_fine.row_ptr[i] = i;
        m_fine.col.resize(a_fine.n);
        m_fine.val = hier.levels[refinements].sys.lumped_mass;
        for (int i = 0; i < a_fine.n; ++i) m_fine.col[i] = i;
        for (int l = refinements; l > 0; --l) {
            const auto& p = hier.levels[l].prolongation;
            CsrMatrix a_coarse = sparse::rap(a_fine, p);
            CsrMatrix m_coarse = into_pattern(a_coarse, sparse::rap(m_fine, p));
            hier.levels[l - 1].galerkin_a = a_coarse;
            hier.levels[l - 1].galerkin_m = m_coarse;
            a_fine = std::move(a_coarse);
            m_fine = hier.levels[l - 1].galerkin_m;
        }
    }
    return hier;
}

MgSolver::MgSolver(const MultigridHierarchy& hier, double alpha, double beta)
    : hier_(&hier), alpha_(alpha), beta_(beta) {
    const int nl = hier.level_count();
    s_.resize(nl);
    s_[nl - 1] = combined_raw(hier.levels[nl - 1].sys, alpha, beta);
    if (hier.config.coarsening == Coarsening::geometric) {
        for (int l = 0; l < nl - 1; ++l) s_[l] = combined_raw(hier.levels[l].sys, alpha, beta);
    } else {
        for (int l = 0; l < nl - 1; ++l) {
            const auto& ga = hier.levels[l].galerkin_a;
            const auto& gm = hier.levels[l].galerkin_m;
            s_[l] = ga;
            for (int k = 0; k < s_[l].nnz(); ++k)
                s_[l].val[k] = alpha * gm.val[k] + beta * ga.val[k];
        }
    }
    for (int l = 0; l < nl; ++l) eliminate_matrix(s_[l], hier.levels[l].sys.dirichlet);

    if (hier.config.smoother == Smoother::ilu0) {
        ilu_.resize(nl);
        for (int l = 1; l < nl; ++l) ilu_[l].factor(s_[l]);
    }
    if (hier.config.smoother == Smoother::line_gauss_seidel) {
        line_factors_.resize(nl);
        for (int l = 1; l < nl; ++l) {
            const auto& lines = hier.levels[l].lines;
            const auto& m = s_[l];
            const int n = m.n;
            auto& f = line_factors_[l];
            f.w.assign(n, 0.0);
            f.dprime.assign(n, 0.0);
            f.super.assign(n, 0.0);
            // Gather the row tridiagonals; every same-line coupling must be
            // to the previous or next vertex along the row.
            std::vector<double> sub(n, 0.0);
            std::vector<int> line_of(n, 0);
            for (std::size_t ln = 0; ln + 1 < lines.line_start.size(); ++ln)
                for (int k = lines.line_start[ln]; k < lines.line_start[ln + 1]; ++k)
                    line_of[lines.order[k]] = static_cast<int>(ln);
            for (int i = 0; i < n; ++i) {
                const int p = lines.pos[i];
                for (int k = m.row_ptr[i]; k < m.row_ptr[i + 1]; ++k) {
                    const int j = m.col[k];
                    if (j == i) {
                        f.dprime[p] = m.val[k];
                    } else if (line_of[j] == line_of[i]) {
                        if (lines.pos[j] == p - 1)
                            sub[p] = m.val[k];
                        else if (lines.pos[j] == p + 1)
                            f.super[p] = m.val[k];
                        else if (m.val[k] != 0.0)
                            throw solver_error("line smoother: row coupling is not tridiagonal");
                    }
                }
            }
            for (std::size_t ln = 0; ln + 1 < lines.line_start.size(); ++ln) {
                for (int k = lines.line_start[ln] + 1; k < lines.line_start[ln + 1]; ++k) {
                    if (f.dprime[k - 1] == 0.0)
                        throw solver_error("line smoother: zero pivot in a row system");
                    f.w[k] = sub[k] / f.dprime[k - 1];
                    f.dprime[k] -= f.w[k] * f.super[k - 1];
                }
                if (f.dprime[lines.line_start[ln + 1] - 1] == 0.0)
                    throw solver_error("line smoother: zero pivot in a row system");
            }
        }
    }
    coarse_.factor(s_[0]);
    work_.resize(nl);
}

void MgSolver::line_sweep(int level, std::vector<double>& x, const std::vector<double>& b,
                          bool forward) const {
    const auto& lines = hier_->levels[level].lines;
    const auto& m = s_[level];
    const auto& f = line_factors_[level];
    auto& rhs = work_[level].z;
    rhs.resize(x.size());

    const int nlines = static_cast<int>(lines.line_start.size()) - 1;
    for (int step = 0; step < nlines; ++step) {
        const int ln = forward ? step : nlines - 1 - step;
        const int lo = lines.line_start[ln], hi = lines.line_start[ln + 1];
        // Off-line residual as the line right-hand side.
        for (int k = lo; k < hi; ++k) {
            const int i = lines.order[k];
            double r = b[i];
            for (int kk = m.row_ptr[i]; kk < m.row_ptr[i + 1]; ++kk) {
                const int j = m.col[kk];
                if (j == i) continue;
                const int pj = lines.pos[j];
                if (pj >= lo && pj < hi) continue; // in-line, handled by the solve
                r -= m.val[kk] * x[j];
            }
            rhs[k] = r;
        }
        // Thomas solve with the prefactored coefficients.
        for (int k = lo + 1; k < hi; ++k) rhs[k] -= f.w[k] * rhs[k - 1];
        x[lines.order[hi - 1]] = rhs[hi - 1] / f.dprime[hi - 1];
        for (int k = hi - 2; k >= lo; --k)
            x[lines.order[k]] = (rhs[k] - f.super[k] * x[lines.order[k + 1]]) / f.dprime[k];
    }
}

// Pre-smoothing sweeps run forward, post-smoothing sweeps backward, so the
// whole cycle stays symmetric.
void MgSolver::smooth(int level, std::vector<double>& x, const std::vector<double>& b,
                      bool forward) const {
    if (hier_->config.smoother == Smoother::gauss_seidel) {
        if (forward)
            gauss_seidel_sweep(s_[level], x, b);
        else
            gauss_seidel_sweep_backward(s_[level], x, b);
    } else if (hier_->config.smoother == Smoother::line_gauss_seidel) {
        line_sweep(level, x, b, forward);
    } else {
        auto& w = work_[level];
        kernels::residual(s_[level], x, b, w.r);
        ilu_[level].apply(w.r, w.z);
        kernels::axpy(1.0, w.z, x);
    }
}

void MgSolver::cycle(int level, std::vector<double>& x, const std::vector<double>& b) const {
    if (level == 0) {
        coarse_.solve(b, x);
        return;
    }
    const auto& cfg = hier_->config;
    for (int s = 0; s < cfg.pre_sweeps; ++s) smooth(level, x, b, true);

    auto& w = work_[level];
    kernels::residual(s_[level], x, b, w.r);

    // Restrict r to the coarse level: rc = P^T r, zeroed at constrained rows
    // so corrections vanish where values are prescribed.
    const CsrMatrix& p = hier_->levels[level].prolongation;
    const int nc = hier_->levels[level - 1].mesh.vertex_count();
    w.rc.assign(nc, 0.0);
    for (int i = 0; i < p.n; ++i)
        for (int k = p.row_ptr[i]; k < p.row_ptr[i + 1]; ++k) w.rc[p.col[k]] += p.val[k] * w.r[i];
    const auto& cmask = hier_->levels[level - 1].sys.dirichlet;
    for (int i = 0; i < nc; ++i)
        if (cmask[i]) w.rc[i] = 0.0;

    w.e.assign(nc, 0.0);
    const int gamma = cfg.cycle == Cycle::V ? 1 : 2;
    for (int g = 0; g < gamma; ++g) cycle(level - 1, w.e, w.rc);

    // Prolongate and correct.
    for (int i = 0; i < p.n; ++i) {
        double corr = 0.0;
        for (int k = p.row_ptr[i]; k < p.row_ptr[i + 1]; ++k) corr += p.val[k] * w.e[p.col[k]];
        x[i] += corr;
    }

    for (int s = 0; s < cfg.post_sweeps; ++s) smooth(level, x, b, false);
}

SolveStats MgSolver::solve(const std::vector<double>& b, std::vector<double>& x,
                           double conservation_bound) const {
    const int top = hier_->level_count() - 1;
    const auto& sys = hier_->levels[top].sys;
    x.resize(b.size());
    for (int i = 0; i < sys.size(); ++i)
        if (sys.dirichlet[i]) x[i] = b[i];

    SolveStats stats;
    // The residual is judged in the Jacobi-scaled backward-error sense,
    // ||r|| / (||b|| + ||S||*||x||) with all norms diagonally equilibrated.
    // Per-layer K*D and box areas spread the row scales over many orders of
    // magnitude, so the plain ||r||/||b|| bottoms out on roundoff long before
    // tight tolerances; the backward error stays attainable.
    const auto& m = s_[top];
    const int n = m.n;
    std::vector<double> dinv_sqrt(n);
    for (int i = 0; i < n; ++i) dinv_sqrt[i] = 1.0 / std::sqrt(m.get(i, i));
    double snorm = 0.0; // inf-norm of the equilibrated matrix
    for (int i = 0; i < n; ++i) {
        double row = 0.0;
        for (int k = m.row_ptr[i]; k < m.row_ptr[i + 1]; ++k)
            row += std::abs(m.val[k]) * dinv_sqrt[i] * dinv_sqrt[m.col[k]];
        snorm = std::max(snorm, row);
    }
    auto scaled_norm = [&](const std::vector<double>& v, bool inverse) {
        std::vector<double>& tmp = work_[top].z;
        tmp.resize(v.size());
        for (int i = 0; i < n; ++i)
            tmp[i] = inverse ? v[i] * dinv_sqrt[i] : v[i] / dinv_sqrt[i];
        return kernels::norm2(tmp);
    };

    const double bnorm = scaled_norm(b, true);
    if (bnorm == 0.0) {
        std::fill(x.begin(), x.end(), 0.0);
        stats.history.push_back(0.0);
        return stats;
    }

    auto& w = work_[top];
    auto backward_error = [&]() {
        kernels::residual(s_[top], x, b, w.r);
        const double xnorm = scaled_norm(x, false);
        return scaled_norm(w.r, true) / (bnorm + snorm * xnorm);
    };
    const auto& dirichlet = sys.dirichlet;
    auto mass_check_passed = [&]() {
        if (conservation_bound <= 0.0) return true;
        // Attainable floor of the summed residual: roundoff of the row dots.
        double sum = 0.0, fp_floor = 0.0;
        for (int i = 0; i < n; ++i) {
            if (dirichlet[i]) continue;
            sum += w.r[i];
            double gross = std::abs(b[i]);
            for (int k = m.row_ptr[i]; k < m.row_ptr[i + 1]; ++k)
                gross += std::abs(m.val[k] * x[m.col[k]]);
            fp_floor += gross;
        }
        const double eps = std::numeric_limits<double>::epsilon();
        return std::abs(sum) <= std::max(conservation_bound, 8.0 * eps * fp_floor);
    };

    double rel = backward_error();
    stats.history.push_back(rel);
    const auto& cfg = hier_->config;
    while (rel > cfg.tolerance || !mass_check_passed()) {
        if (stats.cycles >= cfg.max_cycles)
            throw solver_error("multigrid failed to reach tolerance " +
                                   std::to_string(cfg.tolerance) + " within " +
                                   std::to_string(cfg.max_cycles) + " cycles",
                               stats.history);
        cycle(top, x, b);
        ++stats.cycles;
        rel = backward_error();
        stats.history.push_back(rel);
    }
    stats.rel_residual = rel;
    return stats;
}

void TimeController::validate() const {
    if (!(tau_min > 0.0) || !(tau_min <= tau_init) || !(tau_init <= tau_max))
        throw config_error("time controller requires 0 < tau_min <= tau_init <= tau_max");
    if (!(safety > 0.0) || safety > 1.0)
        throw config_error("controller safety factor must lie in (0, 1]");
    if (!(target_error > 0.0)) throw config_error("controller target_error must be positive");
    if (error_floor < 0.0) throw config_error("controller error_floor must be >= 0");
    if (t_end < 0.0) throw config_error("t_end must be non-negative");
    if (fixed_tau < 0.0) throw config_error("fixed_tau must be non-negative");
}

namespace {

std::shared_ptr<const MgSolver> solver_for_tau(std::shared_ptr<const MgSolver>& slot,
                                               const MultigridHierarchy& hier, double tau) {
    if (!slot || slot->beta() != tau) slot = std::make_shared<MgSolver>(hier, 1.0, tau);
    return slot;
}

} // namespace

StepResult advance(FieldState& state, TimeStepper& stepper, const MultigridHierarchy& hier,
                   const TimeController& controller) {
    controller.validate();
    const auto& sys = hier.finest().sys;
    const auto sink = sys.dirichlet_list();

    // Residual mass-source bound per accepted solve: tolerance relative to
    // the initial mass, so the audit closes at the solver tolerance over the
    // whole run. Only the half-step solves feed the mass ledger.
    if (stepper.mass_scale == 0.0) {
        double mass = 0.0;
        for (int i = 0; i < sys.size(); ++i)
            mass += sys.lumped_mass[i] * std::abs(state.u[i]);
        stepper.mass_scale = mass;
    }
    const double cons_bound = hier.config.tolerance * stepper.mass_scale;

    const double growth_cap = 5.0;
    double tau = stepper.tau > 0.0 ? stepper.tau : controller.tau_init;
    tau = std::clamp(tau, controller.tau_min, controller.tau_max);
    const double remaining = controller.t_end - state.t;
    if (remaining > 0.0) tau = std::min(tau, remaining);

    StepResult result;

    if (controller.fixed_tau > 0.0) {
        // Plain implicit Euler without error control.
        auto solv = solver_for_tau(stepper.full, hier, tau);
        auto step = assembly::step_system(sys, tau, state.u);
        std::vector<double> u_new = state.u;
        const auto stats = solv->solve(step.rhs, u_new, cons_bound);
        result.cycles = stats.cycles;
        result.max_rel_residual = stats.rel_residual;
        result.released_increment =
            tau * assembly::dirichlet_residual_flux(sys, u_new, sink);
        state.u = std::move(u_new);
        state.t += tau;
        result.tau_used = tau;
        stepper.tau = tau;
        return result;
    }

    while (true) {
        auto solver_full = solver_for_tau(stepper.full, hier, tau);
        auto solver_half = solver_for_tau(stepper.half, hier, 0.5 * tau);

        std::vector<double> u_full = state.u;
        {
            // The full step only feeds the error estimate; no mass bound.
            auto step = assembly::step_system(sys, tau, state.u);
            const auto stats = solver_full->solve(step.rhs, u_full);
            result.cycles += stats.cycles;
            result.max_rel_residual = std::max(result.max_rel_residual, stats.rel_residual);
        }
        std::vector<double> u_mid = state.u;
        {
            auto step = assembly::step_system(sys, 0.5 * tau, state.u);
            const auto stats = solver_half->solve(step.rhs, u_mid, cons_bound);
            result.cycles += stats.cycles;
            result.max_rel_residual = std::max(result.max_rel_residual, stats.rel_residual);
        }
        // Warm start the second half step with a linear extrapolation.
        std::vector<double> u_half(u_mid.size());
        for (std::size_t i = 0; i < u_mid.size(); ++i)
            u_half[i] = 2.0 * u_mid[i] - state.u[i];
        {
            auto step = assembly::step_system(sys, 0.5 * tau, u_mid);
            const auto stats = solver_half->solve(step.rhs, u_half, cons_bound);
            result.cycles += stats.cycles;
            result.max_rel_residual = std::max(result.max_rel_residual, stats.rel_residual);
        }

        double diff = 0.0;
        for (std::size_t i = 0; i < u_half.size(); ++i)
            diff = std::max(diff, std::abs(u_half[i] - u_full[i]));
        const double scale = std::max({kernels::norm_inf(u_half), controller.error_floor,
                                       1e-300});
        const double eps = diff / scale;
        result.error_estimate = eps;

        const bool at_floor = tau <= controller.tau_min * (1.0 + 1e-12);
        if (eps <= controller.target_error || at_floor) {
            result.forced_at_tau_min = at_floor && eps > controller.target_error;
            result.released_increment =
                0.5 * tau * (assembly::dirichlet_residual_flux(sys, u_mid, sink) +
                             assembly::dirichlet_residual_flux(sys, u_half, sink));
            state.u = std::move(u_half);
            state.t += tau;
            result.tau_used = tau;

            double next;
            if (eps == 0.0) {
                next = growth_cap * tau;
            } else {
                next = controller.safety * tau * std::sqrt(controller.target_error / eps);
                next = std::min(next, growth_cap * tau);
            }
            stepper.tau = std::clamp(next, controller.tau_min, controller.tau_max);
            return result;
        }
        ++result.rejections;
        tau = std::max(0.5 * tau, controller.tau_min);
    }
}

} // namespace dermadiff::solver
