#include "dermadiff/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <set>
#include <stdexcept>

#include "dermadiff/errors.hpp"

namespace dermadiff::geometry {

namespace {

constexpr double kPi = std::numbers::pi;

double shoelace(const Vec2& a, const Vec2& b, const Vec2& c) {
    return 0.5 * ((b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y));
}

} // namespace

const char* layer_name(SkinLayer layer) {
    switch (layer) {
        case SkinLayer::DEPOS: return "depos";
        case SkinLayer::SC: return "sc";
        case SkinLayer::VE: return "ve";
        case SkinLayer::DE: return "de";
    }
    return "?";
}

Region region_from_string(const std::string& s) {
    if (s == "chest") return Region::chest;
    if (s == "abdomen") return Region::abdomen;
    if (s == "outer_forearm") return Region::outer_forearm;
    if (s == "custom") return Region::custom;
    throw config_error("unknown region '" + s + "'");
}

Age age_from_string(const std::string& s) {
    if (s == "young") return Age::young;
    if (s == "old") return Age::old;
    throw config_error("unknown age '" + s + "'");
}

const char* to_string(Region r) {
    switch (r) {
        case Region::chest: return "chest";
        case Region::abdomen: return "abdomen";
        case Region::outer_forearm: return "outer_forearm";
        case Region::custom: return "custom";
    }
    return "?";
}

const char* to_string(Age a) {
    return a == Age::young ? "young" : "old";
}

void LayerProfile::validate() const {
    auto positive = [](double v, const char* name) {
        if (!(v > 0.0) || !std::isfinite(v))
            throw config_error(std::string("profile field ") + name + " must be positive");
    };
    positive(h_depos, "h_depos");
    positive(h_sc, "h_sc");
    positive(h_ve, "h_ve");
    positive(h_de, "h_de");
    positive(papillae_period, "papillae_period");
    positive(domain_width, "domain_width");
    if (papillae_amplitude < 0.0 || !std::isfinite(papillae_amplitude))
        throw config_error("papillae_amplitude must be non-negative");
    if (!(papillae_amplitude < h_de))
        throw config_error("papillae_amplitude must be smaller than h_de");
    const double periods = domain_width / papillae_period;
    if (std::abs(periods - std::round(periods)) > 1e-9 || std::round(periods) < 1.0)
        throw config_error("domain_width must be a positive integer multiple of papillae_period");
}

LayerProfile layer_preset(Region region, Age age) {
    LayerProfile p;
    p.region = region;
    p.age = age;
    p.papillae_period = (age == Age::young) ? 150.0 : 200.0;
    p.h_depos = 50.0;
    p.papillae_amplitude = 100.0;
    switch (region) {
        case Region::chest:
            p.h_sc = 20.0;
            p.h_ve = 80.0;
            p.h_de = 1500.0;
            break;
        case Region::abdomen:
            p.h_sc = 15.0;
            p.h_ve = 75.0;
            p.h_de = 1400.0;
            break;
        case Region::outer_forearm:
            // Thicker SC than chest and abdomen; the deeper viable band
            // shifts the SC/VE crossover to roughly three times the chest
            // value for barrier-limited chemicals.
            p.h_sc = 40.0;
            p.h_ve = 110.0;
            p.h_de = 1500.0;
            break;
        case Region::custom:
            throw config_error("custom region has no preset; supply explicit thicknesses");
    }
    p.domain_width = p.papillae_period; // one period
    p.validate();
    return p;
}

double papilla_height(double x, double h, double a) {
    if (!(a > 0.0) || !std::isfinite(a))
        throw std::domain_error("papilla_height: period a must be positive and finite");
    if (h < 0.0 || !std::isfinite(h) || !std::isfinite(x))
        throw std::domain_error("papilla_height: invalid amplitude or coordinate");
    return 0.5 * h * std::sin(2.0 * kPi * x / a - 0.5 * kPi) + 0.5 * h;
}

double papilla_height_3d(double x, double y, double h, double a) {
    if (h == 0.0) {
        papilla_height(x, h, a); // validates a
        return 0.0;
    }
    const double g = papilla_height(y, h, a) / h;
    return papilla_height(x, h, a) * g;
}

double PapillaeCurve::depth(double x) const {
    if (!active) return y_valley;
    return y_valley + papilla_height(x, h, a);
}

std::size_t Mesh::edge_count() const {
    std::set<std::pair<int, int>> edges;
    for (const auto& t : triangles)
        for (int e = 0; e < 3; ++e) {
            int a = t.v[e], b = t.v[(e + 1) % 3];
            edges.insert({std::min(a, b), std::max(a, b)});
        }
    return edges.size();
}

double Mesh::triangle_area(int t) const {
    const auto& tr = triangles[t];
    return shoelace(vertices[tr.v[0]], vertices[tr.v[1]], vertices[tr.v[2]]);
}

double Mesh::total_area() const {
    double area = 0.0;
    for (int t = 0; t < triangle_count(); ++t) area += triangle_area(t);
    return area;
}

Vec2 Mesh::centroid(int t) const {
    const auto& tr = triangles[t];
    const Vec2& a = vertices[tr.v[0]];
    const Vec2& b = vertices[tr.v[1]];
    const Vec2& c = vertices[tr.v[2]];
    return {(a.x + b.x + c.x) / 3.0, (a.y + b.y + c.y) / 3.0};
}

std::vector<int> Mesh::boundary_vertices(BoundaryTag tag) const {
    std::set<int> verts;
    for (const auto& e : boundary_edges)
        if (e.tag == tag) {
            verts.insert(e.v0);
            verts.insert(e.v1);
        }
    return {verts.begin(), verts.end()};
}

void Mesh::check_conforming() const {
    std::map<std::pair<int, int>, int> edge_use;
    for (int t = 0; t < triangle_count(); ++t) {
        if (!(triangle_area(t) > 0.0))
            throw meshing_error("triangle " + std::to_string(t) +
                                " is degenerate or negatively oriented");
        const auto& tr = triangles[t];
        for (int e = 0; e < 3; ++e) {
            int a = tr.v[e], b = tr.v[(e + 1) % 3];
            edge_use[{std::min(a, b), std::max(a, b)}]++;
        }
    }
    std::set<std::pair<int, int>> boundary;
    for (const auto& e : boundary_edges)
        boundary.insert({std::min(e.v0, e.v1), std::max(e.v0, e.v1)});
    for (const auto& [edge, uses] : edge_use) {
        if (uses > 2)
            throw meshing_error("edge shared by more than two triangles");
        if (uses == 1 && !boundary.count(edge))
            throw meshing_error("untagged boundary edge (hanging node?)");
        if (uses == 2 && boundary.count(edge))
            throw meshing_error("interior edge tagged as boundary");
    }
}

// ---------------------------------------------------------------------------
// Base mesh template.
//
// Two structured blocks joined by a 2:1 transition strip:
//   fine block,  F = base_resolution * periods cells wide, 4 element rows
//                (2 DEPOS + 2 SC),
//   transition   (top of VE),
//   coarse block, F/2 cells wide, 5 element rows (2 VE + 3 DE).
// The VE/DE interface curve is the row between the VE and DE coarse rows.
// For one period at base_resolution 20 this yields 171 vertices, 460 edges
// and 290 triangles.
// ---------------------------------------------------------------------------

Mesh generate_mesh(const LayerProfile& profile, int base_resolution) {
    profile.validate();
    if (base_resolution < 4)
        throw meshing_error("base_resolution must be at least 4 segments per papillae period");
    if (base_resolution % 2 != 0)
        throw meshing_error("base_resolution must be even (dermal block uses half resolution)");
    if (base_resolution / 2 < 4)
        throw meshing_error("papillae curve would be sampled by fewer than 4 segments per "
                            "period; increase base_resolution to at least 8");

    const int periods = static_cast<int>(std::round(profile.domain_width / profile.papillae_period));
    const int F = base_resolution * periods; // fine cells across the width
    const int C = F / 2;                     // coarse cells
    const int nf = F + 1;
    const int nc = C + 1;
    const double W = profile.domain_width;

    Mesh mesh;
    mesh.curve.active = true;
    mesh.curve.h = profile.papillae_amplitude;
    mesh.curve.a = profile.papillae_period;
    mesh.curve.y_valley = -(profile.h_sc + profile.h_ve + profile.papillae_amplitude);

    const double y_bot = -(profile.h_sc + profile.h_ve + profile.h_de);

    // Row depth templates. Fine rows are flat; coarse rows grade between the
    // flat SC/VE line, the papillae curve and the flat bottom.
    auto fine_row_y = [&](int r) {
        switch (r) {
            case 0: return profile.h_depos;
            case 1: return 0.5 * profile.h_depos;
            case 2: return 0.0;
            case 3: return -0.5 * profile.h_sc;
            default: return -profile.h_sc;
        }
    };
    auto coarse_row_y = [&](int r, double x) {
        const double yc = mesh.curve.depth(x);
        switch (r) {
            case 0: return -profile.h_sc + (yc + profile.h_sc) / 3.0;
            case 1: return -profile.h_sc + 2.0 * (yc + profile.h_sc) / 3.0;
            case 2: return yc;
            case 3: return yc + (y_bot - yc) / 3.0;
            case 4: return yc + 2.0 * (y_bot - yc) / 3.0;
            default: return y_bot;
        }
    };

    // Vertices: 5 fine rows then 6 coarse rows, x fastest.
    for (int r = 0; r < 5; ++r)
        for (int j = 0; j < nf; ++j)
            mesh.vertices.push_back({W * j / F, fine_row_y(r)});
    for (int r = 0; r < 6; ++r)
        for (int k = 0; k < nc; ++k) {
            const double x = W * k / C;
            mesh.vertices.push_back({x, coarse_row_y(r, x)});
        }

    const auto fid = [&](int r, int j) { return r * nf + j; };
    const auto cid = [&](int r, int k) { return 5 * nf + r * nc + k; };

    auto add_quad = [&](int a, int b, int c, int d, SkinLayer layer) {
        // a: top-left, b: top-right, c: bottom-right, d: bottom-left.
        mesh.triangles.push_back({{a, d, c}, layer});
        mesh.triangles.push_back({{a, c, b}, layer});
    };

    const SkinLayer fine_layers[4] = {SkinLayer::DEPOS, SkinLayer::DEPOS,
                                      SkinLayer::SC, SkinLayer::SC};
    for (int r = 0; r < 4; ++r)
        for (int j = 0; j < F; ++j)
            add_quad(fid(r, j), fid(r, j + 1), fid(r + 1, j + 1), fid(r + 1, j),
                     fine_layers[r]);

    // Transition strip: three triangles per coarse cell, inside the VE band.
    for (int k = 0; k < C; ++k) {
        const int f0 = fid(4, 2 * k), f1 = fid(4, 2 * k + 1), f2 = fid(4, 2 * k + 2);
        const int c0 = cid(0, k), c1 = cid(0, k + 1);
        mesh.triangles.push_back({{f0, c0, f1}, SkinLayer::VE});
        mesh.triangles.push_back({{f1, c0, c1}, SkinLayer::VE});
        mesh.triangles.push_back({{f1, c1, f2}, SkinLayer::VE});
    }

    const SkinLayer coarse_layers[5] = {SkinLayer::VE, SkinLayer::VE,
                                        SkinLayer::DE, SkinLayer::DE, SkinLayer::DE};
    for (int r = 0; r < 5; ++r)
        for (int k = 0; k < C; ++k)
            add_quad(cid(r, k), cid(r, k + 1), cid(r + 1, k + 1), cid(r + 1, k),
                     coarse_layers[r]);

    for (int j = 0; j < F; ++j)
        mesh.boundary_edges.push_back({fid(0, j), fid(0, j + 1), BoundaryTag::TOP});
    for (int k = 0; k < C; ++k)
        mesh.boundary_edges.push_back({cid(5, k), cid(5, k + 1), BoundaryTag::BOT});
    for (int side = 0; side < 2; ++side) {
        const int jf = side == 0 ? 0 : F;
        const int kc = side == 0 ? 0 : C;
        for (int r = 0; r < 4; ++r)
            mesh.boundary_edges.push_back({fid(r, jf), fid(r + 1, jf), BoundaryTag::LATERAL});
        mesh.boundary_edges.push_back({fid(4, jf), cid(0, kc), BoundaryTag::LATERAL});
        for (int r = 0; r < 5; ++r)
            mesh.boundary_edges.push_back({cid(r, kc), cid(r + 1, kc), BoundaryTag::LATERAL});
    }

    mesh.on_curve.assign(mesh.vertices.size(), 0);
    for (int k = 0; k < nc; ++k) mesh.on_curve[cid(2, k)] = 1;

    mesh.row_of.assign(mesh.vertices.size(), 0);
    for (int r = 0; r < 5; ++r)
        for (int j = 0; j < nf; ++j) mesh.row_of[fid(r, j)] = r;
    for (int r = 0; r < 6; ++r)
        for (int k = 0; k < nc; ++k) mesh.row_of[cid(r, k)] = 5 + r;

    mesh.lineage.resize(mesh.vertices.size());
    for (int i = 0; i < mesh.vertex_count(); ++i) mesh.lineage[i] = {i, i};

    mesh.check_conforming();
    return mesh;
}

Mesh layered_strip_mesh(double width, int columns,
                        const std::vector<StripBand>& bands, double y_top) {
    if (columns < 1 || bands.empty())
        throw meshing_error("strip mesh needs at least one column and one band");

    Mesh mesh;
    std::vector<double> row_y;
    std::vector<SkinLayer> row_layer; // layer of the element row below row r
    row_y.push_back(y_top);
    double y = y_top;
    for (const auto& band : bands) {
        if (!(band.thickness > 0.0) || band.rows < 1)
            throw meshing_error("strip band thickness/rows invalid");
        for (int r = 0; r < band.rows; ++r) {
            y -= band.thickness / band.rows;
            row_y.push_back(y);
            row_layer.push_back(band.layer);
        }
    }
    const int nrow = static_cast<int>(row_y.size());
    const int nx = columns + 1;
    for (int r = 0; r < nrow; ++r)
        for (int j = 0; j < nx; ++j)
            mesh.vertices.push_back({width * j / columns, row_y[r]});

    auto id = [&](int r, int j) { return r * nx + j; };
    for (int r = 0; r + 1 < nrow; ++r)
        for (int j = 0; j < columns; ++j) {
            mesh.triangles.push_back({{id(r, j), id(r + 1, j), id(r + 1, j + 1)}, row_layer[r]});
            mesh.triangles.push_back({{id(r, j), id(r + 1, j + 1), id(r, j + 1)}, row_layer[r]});
        }

    for (int j = 0; j < columns; ++j) {
        mesh.boundary_edges.push_back({id(0, j), id(0, j + 1), BoundaryTag::TOP});
        mesh.boundary_edges.push_back({id(nrow - 1, j), id(nrow - 1, j + 1), BoundaryTag::BOT});
    }
    for (int r = 0; r + 1 < nrow; ++r) {
        mesh.boundary_edges.push_back({id(r, 0), id(r + 1, 0), BoundaryTag::LATERAL});
        mesh.boundary_edges.push_back({id(r, columns), id(r + 1, columns), BoundaryTag::LATERAL});
    }

    mesh.on_curve.assign(mesh.vertices.size(), 0);
    mesh.row_of.assign(mesh.vertices.size(), 0);
    for (int r = 0; r < nrow; ++r)
        for (int j = 0; j < nx; ++j) mesh.row_of[id(r, j)] = r;
    mesh.lineage.resize(mesh.vertices.size());
    for (int i = 0; i < mesh.vertex_count(); ++i) mesh.lineage[i] = {i, i};
    mesh.check_conforming();
    return mesh;
}

Mesh refine(const Mesh& mesh) {
    Mesh fine;
    fine.refinement_level = mesh.refinement_level + 1;
    fine.curve = mesh.curve;
    fine.vertices = mesh.vertices;
    fine.on_curve = mesh.on_curve;
    const bool rows_known = mesh.row_of.size() == mesh.vertices.size();
    fine.row_of.resize(mesh.vertices.size());
    for (int i = 0; i < mesh.vertex_count(); ++i)
        fine.row_of[i] = rows_known ? 2 * mesh.row_of[i] : 0;
    fine.lineage.resize(mesh.vertices.size());
    for (int i = 0; i < mesh.vertex_count(); ++i) fine.lineage[i] = {i, i};

    std::map<std::pair<int, int>, int> midpoint;
    auto midpoint_of = [&](int a, int b) {
        const auto key = std::make_pair(std::min(a, b), std::max(a, b));
        auto it = midpoint.find(key);
        if (it != midpoint.end()) return it->second;
        Vec2 m{0.5 * (mesh.vertices[a].x + mesh.vertices[b].x),
               0.5 * (mesh.vertices[a].y + mesh.vertices[b].y)};
        bool snap = mesh.curve.active && mesh.on_curve[a] && mesh.on_curve[b];
        if (snap) m.y = mesh.curve.depth(m.x);
        const int id = static_cast<int>(fine.vertices.size());
        fine.vertices.push_back(m);
        fine.on_curve.push_back(snap ? 1 : 0);
        fine.row_of.push_back(rows_known ? mesh.row_of[a] + mesh.row_of[b] : 0);
        fine.lineage.push_back({a, b});
        midpoint.emplace(key, id);
        return id;
    };

    fine.triangles.reserve(mesh.triangles.size() * 4);
    for (const auto& t : mesh.triangles) {
        const int a = t.v[0], b = t.v[1], c = t.v[2];
        const int ab = midpoint_of(a, b);
        const int bc = midpoint_of(b, c);
        const int ca = midpoint_of(c, a);
        fine.triangles.push_back({{a, ab, ca}, t.layer});
        fine.triangles.push_back({{ab, b, bc}, t.layer});
        fine.triangles.push_back({{ca, bc, c}, t.layer});
        fine.triangles.push_back({{ab, bc, ca}, t.layer});
    }

    fine.boundary_edges.reserve(mesh.boundary_edges.size() * 2);
    for (const auto& e : mesh.boundary_edges) {
        const int m = midpoint_of(e.v0, e.v1);
        fine.boundary_edges.push_back({e.v0, m, e.tag});
        fine.boundary_edges.push_back({m, e.v1, e.tag});
    }

    fine.check_conforming();
    return fine;
}

double DualBoxes::total_area() const {
    double area = 0.0;
    for (double a : box_area) area += a;
    return area;
}

DualBoxes build_dual_boxes(const Mesh& mesh) {
    DualBoxes boxes;
    const int n = mesh.vertex_count();
    boxes.box_area.assign(n, 0.0);
    boxes.sub_edges.resize(n);
    boxes.fragments.resize(n);

    for (int t = 0; t < mesh.triangle_count(); ++t) {
        const auto& tr = mesh.triangles[t];
        if (mesh.triangle_area(t) < 1e-12)
            throw meshing_error("degenerate triangle " + std::to_string(t) +
                                " while building dual boxes");
        const Vec2 p[3] = {mesh.vertices[tr.v[0]], mesh.vertices[tr.v[1]],
                           mesh.vertices[tr.v[2]]};
        const Vec2 bary{(p[0].x + p[1].x + p[2].x) / 3.0,
                        (p[0].y + p[1].y + p[2].y) / 3.0};
        Vec2 mid[3]; // mid[e] is the midpoint of edge (e, e+1)
        for (int e = 0; e < 3; ++e)
            mid[e] = {0.5 * (p[e].x + p[(e + 1) % 3].x),
                      0.5 * (p[e].y + p[(e + 1) % 3].y)};

        for (int c = 0; c < 3; ++c) {
            const int vid = tr.v[c];
            const Vec2& m_prev = mid[(c + 2) % 3]; // midpoint of edge (c-1, c)
            const Vec2& m_next = mid[c];           // midpoint of edge (c, c+1)
            // Fragment quad (v, m_next, bary, m_prev), positively oriented.
            const double area = shoelace(p[c], m_next, bary) + shoelace(p[c], bary, m_prev);
            boxes.box_area[vid] += area;
            boxes.fragments[vid].push_back({t, c, area});

            auto push_edge = [&](const Vec2& from, const Vec2& to, int opposite) {
                DualBoxes::SubEdge s;
                s.from = from;
                s.to = to;
                s.triangle = t;
                s.opposite_vertex = opposite;
                const double dx = to.x - from.x, dy = to.y - from.y;
                s.length = std::hypot(dx, dy);
                // Outward from the fragment of `vid`: rotate the tangent so the
                // normal points away from the corner vertex.
                Vec2 nrm{dy / s.length, -dx / s.length};
                const Vec2 to_corner{p[c].x - from.x, p[c].y - from.y};
                if (nrm.x * to_corner.x + nrm.y * to_corner.y > 0.0) {
                    nrm.x = -nrm.x;
                    nrm.y = -nrm.y;
                }
                s.normal = nrm;
                boxes.sub_edges[vid].push_back(s);
            };
            push_edge(m_next, bary, tr.v[(c + 1) % 3]);
            push_edge(m_prev, bary, tr.v[(c + 2) % 3]);
        }
    }
    return boxes;
}

} // namespace dermadiff::geometry
