#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <random>

#include "dermadiff/assembly.hpp"
#include "dermadiff/errors.hpp"
#include "dermadiff/kernels.hpp"
#include "support/oracles.hpp"

using namespace dermadiff;
using namespace dermadiff::assembly;
using geometry::BoundaryTag;
using geometry::SkinLayer;

namespace {

double max_abs(const sparse::CsrMatrix& a) {
    double m = 0.0;
    for (double v : a.val) m = std::max(m, std::abs(v));
    return m;
}

chem::LayerParams two_layer_params(double k_top, double d_top, double k_bot, double d_bot) {
    auto p = oracles::uniform_params(1.0);
    p.k[static_cast<int>(SkinLayer::SC)] = k_top;
    p.d[static_cast<int>(SkinLayer::SC)] = d_top;
    p.k[static_cast<int>(SkinLayer::VE)] = k_bot;
    p.d[static_cast<int>(SkinLayer::VE)] = d_bot;
    return p;
}

} // namespace

TEST_CASE("box assembly equals the FEM stiffness on a uniform strip") {
    const auto mesh = geometry::layered_strip_mesh(4.0, 4, {{SkinLayer::VE, 4.0, 4}});
    const auto boxes = geometry::build_dual_boxes(mesh);
    const auto params = oracles::uniform_params(1.0);
    const auto sys = assemble(mesh, boxes, params);

    const auto fem = oracles::fem_stiffness_dense(mesh, params);
    const double scale = max_abs(sys.stiffness);
    for (int i = 0; i < sys.size(); ++i)
        for (int j = 0; j < sys.size(); ++j)
            CHECK(std::abs(sys.stiffness.get(i, j) - fem[i][j]) <= 1e-13 * scale);
}

TEST_CASE("box assembly equals the FEM stiffness on the skin mesh") {
    // Covers the transition strip, the curved interface and layered K*D.
    const auto profile = geometry::layer_preset(geometry::Region::chest, geometry::Age::old);
    const auto mesh = geometry::generate_mesh(profile, 8);
    const auto boxes = geometry::build_dual_boxes(mesh);
    chem::LayerParams params = oracles::uniform_params(1.0);
    params.k = {1.0, 18.0, 10.7, 2.0};
    params.d = {1.1e6, 22.2, 1.0e6, 6.0e5};
    const auto sys = assemble(mesh, boxes, params);

    const auto fem = oracles::fem_stiffness_dense(mesh, params);
    const double scale = max_abs(sys.stiffness);
    for (int i = 0; i < sys.size(); ++i)
        for (int j = 0; j < sys.size(); ++j)
            CHECK(std::abs(sys.stiffness.get(i, j) - fem[i][j]) <= 1e-13 * scale);
}

TEST_CASE("stiffness annihilates constants and is symmetric") {
    const auto profile = geometry::layer_preset(geometry::Region::chest, geometry::Age::old);
    const auto mesh = geometry::refine(geometry::generate_mesh(profile, 20));
    const auto boxes = geometry::build_dual_boxes(mesh);
    chem::LayerParams params = oracles::uniform_params(1.0);
    params.k = {1.0, 18.0, 10.7, 2.0};
    params.d = {1.1e6, 22.2, 1.0e6, 6.0e5};
    const auto sys = assemble(mesh, boxes, params);
    const auto& a = sys.stiffness;
    const double scale = max_abs(a);

    for (int i = 0; i < a.n; ++i) {
        double row_sum = 0.0;
        for (int k = a.row_ptr[i]; k < a.row_ptr[i + 1]; ++k) row_sum += a.val[k];
        CHECK(std::abs(row_sum) < 1e-12 * scale);
    }
    for (int i = 0; i < a.n; ++i)
        for (int k = a.row_ptr[i]; k < a.row_ptr[i + 1]; ++k)
            CHECK(std::abs(a.val[k] - a.get(a.col[k], i)) < 1e-12 * scale);
}

TEST_CASE("structured rectangles give an M-matrix") {
    const auto mesh = geometry::layered_strip_mesh(20.0, 8, {{SkinLayer::VE, 100.0, 10}});
    const auto boxes = geometry::build_dual_boxes(mesh);
    const auto sys = assemble(mesh, boxes, oracles::uniform_params(3.0));
    const auto& a = sys.stiffness;
    for (int i = 0; i < a.n; ++i)
        for (int k = a.row_ptr[i]; k < a.row_ptr[i + 1]; ++k) {
            if (a.col[k] == i)
                CHECK(a.val[k] > 0.0);
            else
                CHECK(a.val[k] <= 1e-14);
        }
}

TEST_CASE("lumped mass carries the partition weight") {
    const auto mesh = geometry::layered_strip_mesh(8.0, 4,
                                                   {{SkinLayer::SC, 4.0, 2},
                                                    {SkinLayer::VE, 4.0, 2}});
    const auto boxes = geometry::build_dual_boxes(mesh);
    const auto params = two_layer_params(2.0, 1.0, 1.0, 1.0);
    const auto sys = assemble(mesh, boxes, params);

    for (int i = 0; i < mesh.vertex_count(); ++i) {
        bool pure_sc = true, pure_ve = true;
        for (const auto& f : boxes.fragments[i]) {
            if (mesh.triangles[f.triangle].layer != SkinLayer::SC) pure_sc = false;
            if (mesh.triangles[f.triangle].layer != SkinLayer::VE) pure_ve = false;
        }
        if (pure_sc)
            CHECK(sys.lumped_mass[i] == doctest::Approx(2.0 * boxes.box_area[i]).epsilon(1e-13));
        if (pure_ve)
            CHECK(sys.lumped_mass[i] == doctest::Approx(boxes.box_area[i]).epsilon(1e-13));
    }
}

TEST_CASE("scaling K scales both matrices and keeps the step solution") {
    const auto mesh = geometry::layered_strip_mesh(6.0, 3, {{SkinLayer::VE, 6.0, 4}});
    const auto boxes = geometry::build_dual_boxes(mesh);
    auto params = oracles::uniform_params(2.5);
    auto sys1 = assemble(mesh, boxes, params);

    const double lambda = 3.7;
    auto scaled = params;
    for (int l = 0; l < geometry::kLayerCount; ++l) scaled.k[l] *= lambda;
    auto sys2 = assemble(mesh, boxes, scaled);

    const double scale = max_abs(sys1.stiffness);
    for (int k = 0; k < sys1.stiffness.nnz(); ++k)
        CHECK(std::abs(sys2.stiffness.val[k] - lambda * sys1.stiffness.val[k]) <=
              1e-12 * scale);
    for (int i = 0; i < sys1.size(); ++i)
        CHECK(sys2.lumped_mass[i] == doctest::Approx(lambda * sys1.lumped_mass[i]));

    apply_dirichlet_bottom(sys1, mesh);
    apply_dirichlet_bottom(sys2, mesh);
    std::mt19937 rng(5);
    std::uniform_real_distribution<double> vals(0.0, 1.0);
    std::vector<double> u0(sys1.size());
    for (auto& v : u0) v = vals(rng);
    for (int i : sys1.dirichlet_list()) u0[i] = 0.0;

    const double tau = 0.8;
    const auto s1 = step_system(sys1, tau, u0);
    const auto s2 = step_system(sys2, tau, u0);
    const auto x1 = oracles::dense_solve(s1.matrix, s1.rhs);
    const auto x2 = oracles::dense_solve(s2.matrix, s2.rhs);
    for (int i = 0; i < sys1.size(); ++i)
        CHECK(x1[i] == doctest::Approx(x2[i]).epsilon(1e-11));
}

TEST_CASE("bottom Dirichlet constrains exactly the bottom row and keeps SPD") {
    const auto mesh = geometry::layered_strip_mesh(10.0, 5, {{SkinLayer::VE, 10.0, 5}});
    const auto boxes = geometry::build_dual_boxes(mesh);
    auto sys = assemble(mesh, boxes, oracles::uniform_params(1.0));
    apply_dirichlet_bottom(sys, mesh);

    const auto bot = mesh.boundary_vertices(BoundaryTag::BOT);
    CHECK(static_cast<int>(bot.size()) == 6);
    int constrained = 0;
    for (int i = 0; i < sys.size(); ++i) constrained += sys.dirichlet[i];
    CHECK(constrained == 6);
    for (int i : bot) CHECK(sys.dirichlet[i] == 1);

    // (M + tau A) after elimination factors as SPD.
    const auto s = combined_operator(sys, 1.0, 0.5);
    sparse::DenseCholesky chol;
    CHECK_NOTHROW(chol.factor(s));

    geometry::Mesh no_bot = mesh;
    for (auto& e : no_bot.boundary_edges)
        if (e.tag == BoundaryTag::BOT) e.tag = BoundaryTag::LATERAL;
    auto sys2 = assemble(no_bot, boxes, oracles::uniform_params(1.0));
    CHECK_THROWS_AS(apply_dirichlet_bottom(sys2, no_bot), config_error);
}

TEST_CASE("steady solve reproduces a linear profile through a uniform layer") {
    const double depth = 12.0;
    const auto mesh = geometry::layered_strip_mesh(6.0, 3, {{SkinLayer::VE, depth, 6}});
    const auto boxes = geometry::build_dual_boxes(mesh);
    auto sys = assemble(mesh, boxes, oracles::uniform_params(4.0));
    constrain_boundary(sys, mesh, BoundaryTag::TOP, 1.0); // test-only constraint
    constrain_boundary(sys, mesh, BoundaryTag::BOT, 0.0);

    auto s = combined_operator(sys, 0.0, 1.0);
    std::vector<double> rhs(sys.size(), 0.0);
    eliminate_rhs(sys, 0.0, 1.0, rhs);
    const auto u = oracles::dense_solve(s, rhs);
    for (int i = 0; i < mesh.vertex_count(); ++i) {
        const double expect = (mesh.vertices[i].y + depth) / depth;
        CHECK(std::abs(u[i] - expect) < 1e-10);
    }
}

TEST_CASE("steady bilayer matches the analytic profile and partition jump") {
    const double k1 = 5.0, d1 = 3.0, l1 = 4.0;  // SC on top
    const double k2 = 2.0, d2 = 11.0, l2 = 6.0; // VE below
    const auto mesh = geometry::layered_strip_mesh(
        5.0, 2, {{SkinLayer::SC, l1, 8}, {SkinLayer::VE, l2, 12}});
    const auto boxes = geometry::build_dual_boxes(mesh);
    const auto params = two_layer_params(k1, d1, k2, d2);
    auto sys = assemble(mesh, boxes, params);
    constrain_boundary(sys, mesh, BoundaryTag::TOP, 1.0);
    constrain_boundary(sys, mesh, BoundaryTag::BOT, 0.0);

    auto s = combined_operator(sys, 0.0, 1.0);
    std::vector<double> rhs(sys.size(), 0.0);
    eliminate_rhs(sys, 0.0, 1.0, rhs);
    const auto u = oracles::dense_solve(s, rhs);

    // Series-resistance flux and the interface potential.
    const double flux = 1.0 / (l1 / (k1 * d1) + l2 / (k2 * d2));
    const double u_interface = flux * l2 / (k2 * d2);
    for (int i = 0; i < mesh.vertex_count(); ++i) {
        const double y = mesh.vertices[i].y; // 0 at top, -(l1+l2) at bottom
        double expect;
        if (y >= -l1)
            expect = 1.0 + (1.0 - u_interface) * y / l1;
        else
            expect = u_interface * (y + l1 + l2) / l2;
        CHECK(std::abs(u[i] - expect) < 1e-8);
    }

    // Reconstructed concentration jumps by K1/K2 across the interface.
    for (int i = 0; i < mesh.vertex_count(); ++i)
        if (std::abs(mesh.vertices[i].y + l1) < 1e-12) {
            const double c_up = k1 * u[i], c_down = k2 * u[i];
            CHECK(c_up / c_down == doctest::Approx(k1 / k2).epsilon(1e-12));
        }
}

TEST_CASE("interior dual boxes are in discrete flux balance at steady state") {
    const auto mesh = geometry::layered_strip_mesh(
        5.0, 4, {{SkinLayer::SC, 4.0, 4}, {SkinLayer::VE, 6.0, 6}});
    const auto boxes = geometry::build_dual_boxes(mesh);
    const auto params = two_layer_params(5.0, 3.0, 2.0, 11.0);
    auto sys = assemble(mesh, boxes, params);
    constrain_boundary(sys, mesh, BoundaryTag::TOP, 1.0);
    constrain_boundary(sys, mesh, BoundaryTag::BOT, 0.0);
    auto s = combined_operator(sys, 0.0, 1.0);
    std::vector<double> rhs(sys.size(), 0.0);
    eliminate_rhs(sys, 0.0, 1.0, rhs);
    const auto u = oracles::dense_solve(s, rhs);

    // Independent flux reconstruction straight from the sub-edge geometry.
    for (int i = 0; i < mesh.vertex_count(); ++i) {
        if (sys.dirichlet[i]) continue;
        double net = 0.0;
        double gross = 0.0;
        for (const auto& sub : boxes.sub_edges[i]) {
            const auto& tr = mesh.triangles[sub.triangle];
            const auto& p0 = mesh.vertices[tr.v[0]];
            const auto& p1 = mesh.vertices[tr.v[1]];
            const auto& p2 = mesh.vertices[tr.v[2]];
            const double area2 = (p1.x - p0.x) * (p2.y - p0.y) - (p2.x - p0.x) * (p1.y - p0.y);
            const double gx = ((p1.y - p2.y) * u[tr.v[0]] + (p2.y - p0.y) * u[tr.v[1]] +
                               (p0.y - p1.y) * u[tr.v[2]]) /
                              area2;
            const double gy = ((p2.x - p1.x) * u[tr.v[0]] + (p0.x - p2.x) * u[tr.v[1]] +
                               (p1.x - p0.x) * u[tr.v[2]]) /
                              area2;
            const double kd = params.partition(tr.layer) * params.diffusivity(tr.layer);
            const double f = kd * (gx * sub.normal.x + gy * sub.normal.y) * sub.length;
            net += f;
            gross += std::abs(f);
        }
        CHECK(std::abs(net) < 1e-10 * std::max(gross, 1.0));
    }
}

TEST_CASE("finite dose initial condition") {
    const auto profile = geometry::layer_preset(geometry::Region::chest, geometry::Age::old);
    const auto mesh = geometry::generate_mesh(profile, 20);
    auto params = oracles::uniform_params(1.0);
    params.k[static_cast<int>(SkinLayer::DEPOS)] = 2.0;

    const auto state = initial_condition_finite_dose(mesh, params, 1.0);
    CHECK(state.t == 0.0);
    for (int i = 0; i < mesh.vertex_count(); ++i) {
        const double y = mesh.vertices[i].y;
        if (y > -1e-12)
            CHECK(state.u[i] == doctest::Approx(0.5)); // c0 / K_DEPOS; interface row included
        else
            CHECK(state.u[i] == 0.0);
    }
    CHECK_THROWS_AS(initial_condition_finite_dose(mesh, params, 0.0), config_error);
}

TEST_CASE("step system basics") {
    const auto mesh = geometry::layered_strip_mesh(6.0, 3, {{SkinLayer::VE, 6.0, 5}});
    const auto boxes = geometry::build_dual_boxes(mesh);
    auto sys = assemble(mesh, boxes, oracles::uniform_params(2.0));
    apply_dirichlet_bottom(sys, mesh);

    SUBCASE("zero state is a fixed point") {
        std::vector<double> zero(sys.size(), 0.0);
        const auto s = step_system(sys, 0.5, zero);
        for (double v : s.rhs) CHECK(v == 0.0);
        const auto x = oracles::dense_solve(s.matrix, s.rhs);
        for (double v : x) CHECK(std::abs(v) < 1e-14);
    }

    SUBCASE("small steps stay close to the state") {
        std::vector<double> u0(sys.size(), 0.0);
        for (int i = 0; i < sys.size(); ++i)
            if (!sys.dirichlet[i]) u0[i] = 1.0 + 0.1 * std::sin(0.7 * i);
        double prev_change = -1.0;
        for (double tau : {1e-2, 1e-3, 1e-4}) {
            const auto s = step_system(sys, tau, u0);
            const auto x = oracles::dense_solve(s.matrix, s.rhs);
            double change = 0.0;
            for (int i = 0; i < sys.size(); ++i)
                change = std::max(change, std::abs(x[i] - u0[i]));
            if (prev_change > 0.0) CHECK(change < 0.15 * prev_change);
            prev_change = change;
        }
    }

    SUBCASE("rejects non-positive tau") {
        std::vector<double> u0(sys.size(), 0.0);
        CHECK_THROWS_AS(step_system(sys, 0.0, u0), solver_error);
    }
}

TEST_CASE("one implicit Euler step damps a discrete eigenmode by 1/(1+tau*lambda)") {
    const auto mesh = geometry::layered_strip_mesh(8.0, 4, {{SkinLayer::VE, 8.0, 4}});
    const auto boxes = geometry::build_dual_boxes(mesh);
    auto sys = assemble(mesh, boxes, oracles::uniform_params(1.3));
    // Pure Neumann problem: eigenpairs of A v = lambda M v.
    const int n = sys.size();
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i)
        for (int k = sys.stiffness.row_ptr[i]; k < sys.stiffness.row_ptr[i + 1]; ++k)
            a(i, sys.stiffness.col[k]) = sys.stiffness.val[k];
    Eigen::VectorXd msqrt_inv(n);
    for (int i = 0; i < n; ++i) msqrt_inv(i) = 1.0 / std::sqrt(sys.lumped_mass[i]);
    const Eigen::MatrixXd b = msqrt_inv.asDiagonal() * a * msqrt_inv.asDiagonal();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (b + b.transpose()));
    REQUIRE(eig.info() == Eigen::Success);

    const int mode = n / 2;
    const double lambda = eig.eigenvalues()(mode);
    Eigen::VectorXd v = msqrt_inv.asDiagonal() * eig.eigenvectors().col(mode);
    std::vector<double> u0(n);
    for (int i = 0; i < n; ++i) u0[i] = v(i);

    const double tau = 0.37;
    const auto s = step_system(sys, tau, u0);
    const auto u1 = oracles::dense_solve(s.matrix, s.rhs);
    const double damp = 1.0 / (1.0 + tau * lambda);
    const double u_scale = kernels::norm_inf(u0);
    for (int i = 0; i < n; ++i)
        CHECK(std::abs(u1[i] - damp * u0[i]) <= 1e-9 * u_scale);
}

TEST_CASE("discrete maximum principle on a structured mesh") {
    const auto mesh = geometry::layered_strip_mesh(10.0, 5, {{SkinLayer::VE, 10.0, 8}});
    const auto boxes = geometry::build_dual_boxes(mesh);
    auto sys = assemble(mesh, boxes, oracles::uniform_params(2.0));
    apply_dirichlet_bottom(sys, mesh);

    std::mt19937 rng(17);
    std::uniform_real_distribution<double> vals(0.0, 2.0);
    std::vector<double> u(sys.size());
    for (auto& v : u) v = vals(rng);
    for (int i : sys.dirichlet_list()) u[i] = 0.0;
    const double u_max = *std::max_element(u.begin(), u.end());

    for (int step = 0; step < 5; ++step) {
        const auto s = step_system(sys, 0.9, u);
        u = oracles::dense_solve(s.matrix, s.rhs);
        for (double v : u) {
            CHECK(v >= -1e-12 * u_max);
            CHECK(v <= u_max * (1.0 + 1e-12));
        }
    }
}

TEST_CASE("assembly rejects inconsistent inputs") {
    const auto mesh = geometry::layered_strip_mesh(4.0, 2, {{SkinLayer::VE, 4.0, 2}});
    const auto boxes = geometry::build_dual_boxes(mesh);
    chem::LayerParams params = oracles::uniform_params(1.0);
    params.d[2] = 0.0; // unresolved diffusivity
    CHECK_THROWS_AS(assemble(mesh, boxes, params), config_error);

    const auto other = geometry::layered_strip_mesh(4.0, 3, {{SkinLayer::VE, 4.0, 2}});
    CHECK_THROWS_AS(assemble(other, boxes, oracles::uniform_params(1.0)), assembly_error);
}
