#include "dermadiff/assembly.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <omp.h>

#include "dermadiff/errors.hpp"

namespace dermadiff::assembly {

using geometry::Mesh;
using geometry::SkinLayer;
using geometry::Vec2;
using sparse::CsrMatrix;

namespace {

struct TriGeometry {
    Vec2 grad[3]; // hat-function gradients
    double kd = 0.0;
};

std::vector<TriGeometry> triangle_geometry(const Mesh& mesh, const chem::LayerParams& params) {
    std::vector<TriGeometry> geo(mesh.triangle_count());
    int bad = -1;
#pragma omp parallel for schedule(static)
    for (int t = 0; t < mesh.triangle_count(); ++t) {
        const auto& tr = mesh.triangles[t];
        const Vec2& a = mesh.vertices[tr.v[0]];
        const Vec2& b = mesh.vertices[tr.v[1]];
        const Vec2& c = mesh.vertices[tr.v[2]];
        const double area2 = (b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y);
        if (!(area2 > 0.0)) {
#pragma omp atomic write
            bad = t;
            continue;
        }
        geo[t].grad[0] = {(b.y - c.y) / area2, (c.x - b.x) / area2};
        geo[t].grad[1] = {(c.y - a.y) / area2, (a.x - c.x) / area2};
        geo[t].grad[2] = {(a.y - b.y) / area2, (b.x - a.x) / area2};
        geo[t].kd = params.partition(tr.layer) * params.diffusivity(tr.layer);
    }
    if (bad >= 0) throw assembly_error("degenerate triangle " + std::to_string(bad));
    return geo;
}

} // namespace

std::vector<int> SystemMatrices::dirichlet_list() const {
    std::vector<int> list;
    for (int i = 0; i < size(); ++i)
        if (dirichlet[i]) list.push_back(i);
    return list;
}

SystemMatrices assemble(const Mesh& mesh, const geometry::DualBoxes& boxes,
                        const chem::LayerParams& params) {
    params.validate();
    const int n = mesh.vertex_count();
    if (static_cast<int>(boxes.box_area.size()) != n)
        throw assembly_error("mesh and dual boxes are inconsistent");

    std::vector<std::vector<int>> adj(n);
    for (const auto& tr : mesh.triangles)
        for (int a = 0; a < 3; ++a)
            for (int b = 0; b < 3; ++b) adj[tr.v[a]].push_back(tr.v[b]);
    for (auto& row : adj) {
        std::sort(row.begin(), row.end());
        row.erase(std::unique(row.begin(), row.end()), row.end());
    }

    SystemMatrices sys;
    sys.stiffness = sparse::pattern_from_adjacency(adj);
    sys.lumped_mass.assign(n, 0.0);
    sys.dirichlet.assign(n, 0);
    sys.dirichlet_value.assign(n, 0.0);
    sys.dof_map.resize(n);
    for (int i = 0; i < n; ++i) sys.dof_map[i] = i;

    const auto geo = triangle_geometry(mesh, params);

    // Row-wise accumulation over the vertex's own sub-edges: rows are
    // independent, so the loop parallelizes without races and the
    // accumulation order is fixed.
    CsrMatrix& a = sys.stiffness;
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i) {
        for (const auto& s : boxes.sub_edges[i]) {
            const auto& tr = mesh.triangles[s.triangle];
            const auto& g = geo[s.triangle];
            for (int c = 0; c < 3; ++c) {
                const double flux = g.kd * (g.grad[c].x * s.normal.x + g.grad[c].y * s.normal.y) *
                                    s.length;
                a.val[a.find(i, tr.v[c])] -= flux;
            }
        }
        double mass = 0.0;
        for (const auto& f : boxes.fragments[i])
            mass += params.partition(mesh.triangles[f.triangle].layer) * f.area;
        sys.lumped_mass[i] = mass;
    }
    return sys;
}

void constrain_boundary(SystemMatrices& sys, const Mesh& mesh, geometry::BoundaryTag tag,
                        double value) {
    const auto verts = mesh.boundary_vertices(tag);
    if (verts.empty())
        throw config_error("mesh has no boundary edges with the requested tag");
    for (int v : verts) {
        sys.dirichlet[v] = 1;
        sys.dirichlet_value[v] = value;
    }
}

void apply_dirichlet_bottom(SystemMatrices& sys, const Mesh& mesh) {
    constrain_boundary(sys, mesh, geometry::BoundaryTag::BOT, 0.0);
}

FieldState initial_condition_finite_dose(const Mesh& mesh, const chem::LayerParams& params,
                                         double c0) {
    if (!(c0 > 0.0) || !std::isfinite(c0))
        throw config_error("initial concentration c0 must be positive");
    FieldState state;
    state.t = 0.0;
    state.u.assign(mesh.vertex_count(), 0.0);
    const double u0 = c0 / params.partition(SkinLayer::DEPOS);
    for (const auto& tr : mesh.triangles)
        if (tr.layer == SkinLayer::DEPOS)
            for (int c = 0; c < 3; ++c) state.u[tr.v[c]] = u0;
    return state;
}

sparse::CsrMatrix combined_operator(const SystemMatrices& sys, double alpha, double beta) {
    CsrMatrix s = sys.stiffness;
    const int n = s.n;
    if (beta != 1.0)
        for (double& v : s.val) v *= beta;
    if (alpha != 0.0)
        for (int i = 0; i < n; ++i) s.val[s.find(i, i)] += alpha * sys.lumped_mass[i];

    // Symmetric elimination: zero constrained rows and columns, unit diagonal.
    for (int i = 0; i < n; ++i) {
        if (sys.dirichlet[i]) {
            for (int k = s.row_ptr[i]; k < s.row_ptr[i + 1]; ++k)
                s.val[k] = (s.col[k] == i) ? 1.0 : 0.0;
        } else {
            for (int k = s.row_ptr[i]; k < s.row_ptr[i + 1]; ++k)
                if (sys.dirichlet[s.col[k]]) s.val[k] = 0.0;
        }
    }
    return s;
}

void eliminate_rhs(const SystemMatrices& sys, double alpha, double beta,
                   std::vector<double>& rhs) {
    (void)alpha; // the diagonal mass never couples a free row to a constrained column
    const CsrMatrix& a = sys.stiffness;
    const int n = a.n;
    for (int i = 0; i < n; ++i) {
        if (sys.dirichlet[i]) continue;
        for (int k = a.row_ptr[i]; k < a.row_ptr[i + 1]; ++k) {
            const int j = a.col[k];
            // M is diagonal, so constrained columns only couple through A.
            if (sys.dirichlet[j] && sys.dirichlet_value[j] != 0.0)
                rhs[i] -= beta * a.val[k] * sys.dirichlet_value[j];
        }
    }
    for (int i = 0; i < n; ++i)
        if (sys.dirichlet[i]) rhs[i] = sys.dirichlet_value[i];
}

SteppedSystem step_system(const SystemMatrices& sys, double tau,
                          const std::vector<double>& u_now) {
    if (!(tau > 0.0)) throw solver_error("time step must be positive");
    SteppedSystem out;
    out.matrix = combined_operator(sys, 1.0, tau);
    out.rhs.resize(sys.size());
    for (int i = 0; i < sys.size(); ++i) out.rhs[i] = sys.lumped_mass[i] * u_now[i];
    eliminate_rhs(sys, 1.0, tau, out.rhs);
    return out;
}

std::vector<double> assemble_box_load(const Mesh& mesh, const geometry::DualBoxes& boxes,
                                      const std::function<double(double, double)>& g) {
    std::vector<double> b(mesh.vertex_count());
    for (int i = 0; i < mesh.vertex_count(); ++i)
        b[i] = g(mesh.vertices[i].x, mesh.vertices[i].y) * boxes.box_area[i];
    return b;
}

double dirichlet_residual_flux(const SystemMatrices& sys, const std::vector<double>& u,
                               const std::vector<int>& vertices) {
    const CsrMatrix& a = sys.stiffness;
    double total = 0.0;
    for (int i : vertices) {
        double s = 0.0;
        for (int k = a.row_ptr[i]; k < a.row_ptr[i + 1]; ++k) s += a.val[k] * u[a.col[k]];
        total -= s; // A u <= 0 at the sink; outflow is positive
    }
    return total;
}

} // namespace dermadiff::assembly
