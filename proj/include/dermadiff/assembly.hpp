#ifndef DERMADIFF_ASSEMBLY_HPP
#define DERMADIFF_ASSEMBLY_HPP

#include <functional>
#include <vector>

#include "dermadiff/chem.hpp"
#include "dermadiff/geometry.hpp"
#include "dermadiff/sparse.hpp"

namespace dermadiff::assembly {

/// Stiffness and lumped mass of the K-weighted finite-volume discretization
/// of div(D grad(K u)) = d(K u)/dt. The stiffness is kept pristine
/// (no boundary elimination); constraints are tracked alongside and applied
/// when the step system is formed. dof_map is the identity vertex->row map.
struct SystemMatrices {
    sparse::CsrMatrix stiffness;          // A: symmetric positive semidefinite
    std::vector<double> lumped_mass;      // M: diagonal, K-weighted box areas
    std::vector<std::uint8_t> dirichlet;  // per-vertex constraint mask
    std::vector<double> dirichlet_value;  // prescribed values (0 for the sink)
    std::vector<int> dof_map;

    int size() const { return stiffness.n; }
    std::vector<int> dirichlet_list() const;
};

/// chemical potential per vertex plus simulation time (hours)
struct FieldState {
    std::vector<double> u;
    double t = 0.0;
};

/// Assemble A and lumped M from the dual boxes. K and D are taken from the
/// sub-edge's owning triangle, so coefficients never need averaging across
/// layer interfaces. A annihilates constants (zero row sums) and equals the
/// linear-FEM stiffness on the same mesh.
SystemMatrices assemble(const geometry::Mesh& mesh, const geometry::DualBoxes& boxes,
                        const chem::LayerParams& params);

/// Constrain all vertices on boundary edges with `tag` to `value`.
/// Throws config_error if no such boundary exists.
void constrain_boundary(SystemMatrices& sys, const geometry::Mesh& mesh,
                        geometry::BoundaryTag tag, double value);

/// The sink at the lowest interface: u = 0 on the BOT boundary.
void apply_dirichlet_bottom(SystemMatrices& sys, const geometry::Mesh& mesh);

/// Finite dose: u = c0 / K_DEPOS at every vertex supported in the DEPOS
/// layer (interface vertices included), zero elsewhere, t = 0.
FieldState initial_condition_finite_dose(const geometry::Mesh& mesh,
                                         const chem::LayerParams& params, double c0);

struct SteppedSystem {
    sparse::CsrMatrix matrix;  // alpha*M + beta*A, symmetrically eliminated
    std::vector<double> rhs;
};

/// Implicit Euler step system (M + tau*A) u(t+tau) = M u(t) with Dirichlet
/// rows reduced to identity and the right-hand side carrying the boundary
/// values.
SteppedSystem step_system(const SystemMatrices& sys, double tau,
                          const std::vector<double>& u_now);

/// alpha*M + beta*A with symmetric constraint elimination but no right-hand
/// side (used to build multigrid level operators; beta=1, alpha=0 gives the
/// steady operator).
sparse::CsrMatrix combined_operator(const SystemMatrices& sys, double alpha, double beta);

/// Eliminate constraints from an arbitrary right-hand side against the
/// pristine combined operator: rhs_free -= S[:,i]*g_i, rhs_i = g_i.
void eliminate_rhs(const SystemMatrices& sys, double alpha, double beta,
                   std::vector<double>& rhs);

/// Box-rule load vector b_i = g(x_i) * |B_i| for a scalar source g.
std::vector<double> assemble_box_load(const geometry::Mesh& mesh,
                                      const geometry::DualBoxes& boxes,
                                      const std::function<double(double, double)>& g);

/// Sum of the pristine stiffness rows over `vertices` applied to u:
/// the discretely conservative outflow functional through those vertices.
double dirichlet_residual_flux(const SystemMatrices& sys, const std::vector<double>& u,
                               const std::vector<int>& vertices);

} // namespace dermadiff::assembly

#endif
