#ifndef DERMADIFF_GEOMETRY_HPP
#define DERMADIFF_GEOMETRY_HPP

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace dermadiff::geometry {

// All lengths are in micrometers. The skin surface sits at y = 0 with the
// deposition layer above it (y > 0) and the tissue below (y < 0).

struct Vec2 {
    double x = 0.0;
    double y = 0.0;
};

enum class SkinLayer : std::uint8_t { DEPOS = 0, SC = 1, VE = 2, DE = 3 };
inline constexpr int kLayerCount = 4;

const char* layer_name(SkinLayer layer);

enum class Region { chest, abdomen, outer_forearm, custom };
enum class Age { young, old };

Region region_from_string(const std::string& s);
Age age_from_string(const std::string& s);
const char* to_string(Region r);
const char* to_string(Age a);

/// Geometric description of one skin configuration.
struct LayerProfile {
    Region region = Region::chest;
    Age age = Age::old;
    double h_depos = 50.0;   // deposition layer thickness
    double h_sc = 20.0;      // stratum corneum thickness
    double h_ve = 80.0;      // viable epidermis thickness above papillae tips
    double h_de = 1500.0;    // dermis band thickness
    double papillae_amplitude = 100.0; // papillae height h
    double papillae_period = 200.0;    // papillae period a
    double domain_width = 200.0;       // integer multiple of the period

    void validate() const; // throws config_error on violated invariants
};

/// Preset profiles. h_depos is always 50 um; young skin uses a = 150 um and
/// old skin a = 200 um. Thicknesses are shipped configuration defaults and
/// can be overridden field by field.
LayerProfile layer_preset(Region region, Age age);

/// Height of the dermal papillae surface above the valley floor,
/// f(x) = h/2 * sin(2*pi*x/a - pi/2) + h/2, with range [0, h] and period a.
double papilla_height(double x, double h, double a);

/// Separable 3D papillae surface f(x) * g(y) with g(y) = f(y)/h.
/// Only used as a height field; meshing and solving stay 2D.
double papilla_height_3d(double x, double y, double h, double a);

/// Analytic description of the VE/DE interface used to project refined
/// vertices back onto the curve. y(x) = y_valley + f(x).
struct PapillaeCurve {
    bool active = false;
    double h = 0.0;
    double a = 0.0;
    double y_valley = 0.0; // interface depth where f(x) = 0
    double depth(double x) const;
};

struct Triangle {
    std::array<int, 3> v{};
    SkinLayer layer = SkinLayer::DE;
};

enum class BoundaryTag : std::uint8_t { TOP = 0, BOT = 1, LATERAL = 2 };

struct BoundaryEdge {
    int v0 = 0;
    int v1 = 0;
    BoundaryTag tag = BoundaryTag::TOP;
};

/// Conforming triangulation with per-triangle layer tags and refinement
/// lineage. A finished mesh is immutable and safe to share across threads.
struct Mesh {
    std::vector<Vec2> vertices;
    std::vector<Triangle> triangles;
    std::vector<BoundaryEdge> boundary_edges;
    int refinement_level = 0;

    // Vertices lying on the VE/DE interface curve (snapped on refinement).
    std::vector<std::uint8_t> on_curve;
    PapillaeCurve curve;

    // Structural row index of each vertex (rows double on refinement).
    // Rows are chains of horizontal edges; block smoothers group by them.
    std::vector<int> row_of;

    // Refinement lineage: for level-0 vertices parent0 == parent1 == self;
    // for an edge-midpoint vertex the two parent endpoints on the coarser
    // mesh. Used to build multigrid prolongation.
    struct Parents {
        int p0 = -1;
        int p1 = -1;
    };
    std::vector<Parents> lineage;

    int vertex_count() const { return static_cast<int>(vertices.size()); }
    int triangle_count() const { return static_cast<int>(triangles.size()); }
    std::size_t edge_count() const;
    double total_area() const;
    double triangle_area(int t) const;
    Vec2 centroid(int t) const;

    /// Vertex indices on boundary edges carrying `tag`, sorted, unique.
    std::vector<int> boundary_vertices(BoundaryTag tag) const;

    void check_conforming() const; // throws meshing_error on violations
};

/// Base mesh for a skin profile. `base_resolution` is the number of fine
/// horizontal segments per papillae period (even, >= 4); the dermal blocks
/// use half that, and the papillae curve must still be sampled by at least
/// 4 segments per period. The default of 20 reproduces the documented
/// coarse mesh (171 vertices, 460 edges, 290 triangles for one period).
Mesh generate_mesh(const LayerProfile& profile, int base_resolution = 20);

/// Red (regular) refinement: every triangle splits into 4 via edge
/// midpoints; midpoints of VE/DE interface edges are snapped to the
/// analytic curve; boundary and layer tags are inherited.
Mesh refine(const Mesh& mesh);

/// One horizontal band of a test strip mesh.
struct StripBand {
    SkinLayer layer = SkinLayer::VE;
    double thickness = 1.0;
    int rows = 1;
};

/// Structured strip mesh on [0,width] x [y_top - sum(thickness), y_top],
/// bands listed top to bottom. Used by tests and oracles.
Mesh layered_strip_mesh(double width, int columns, const std::vector<StripBand>& bands,
                        double y_top = 0.0);

/// Per-vertex control volume assembled from edge-midpoint/barycenter
/// sub-edges (Donald boxes).
struct DualBoxes {
    struct SubEdge {
        Vec2 from;       // edge midpoint
        Vec2 to;         // triangle barycenter
        Vec2 normal;     // unit, outward from the owning vertex fragment
        double length = 0.0;
        int triangle = -1;
        int opposite_vertex = -1; // vertex on the other side of the sub-edge
    };
    // Fragment of box `vertex` inside one triangle: quad (v, m1, b, m2).
    struct Fragment {
        int triangle = -1;
        int corner = -1;    // local index of the vertex in the triangle
        double area = 0.0;  // shoelace area of the quad
    };
    std::vector<double> box_area;                      // per vertex
    std::vector<std::vector<SubEdge>> sub_edges;       // per vertex
    std::vector<std::vector<Fragment>> fragments;      // per vertex
    double total_area() const;
};

DualBoxes build_dual_boxes(const Mesh& mesh);

} // namespace dermadiff::geometry

#endif
