#ifndef DERMADIFF_ANALYSIS_HPP
#define DERMADIFF_ANALYSIS_HPP

#include <array>
#include <string>
#include <vector>

#include "dermadiff/assembly.hpp"
#include "dermadiff/chem.hpp"
#include "dermadiff/geometry.hpp"

namespace dermadiff::analysis {

// Masses are reported per unit domain width in ug/um^2 (the 2D section is
// one unit deep), so results are comparable across meshes.

/// Time series of per-layer masses, released mass and bottom flux.
struct MassSeries {
    std::vector<double> times;                                       // hours, increasing
    std::array<std::vector<double>, geometry::kLayerCount> layers;   // ug/um^2
    std::vector<double> released;                                    // ug/um^2
    std::vector<double> flux_bot;                                    // ug/(um^2 h)

    std::size_t size() const { return times.size(); }
    double total(std::size_t k) const;
    const std::vector<double>& layer(geometry::SkinLayer l) const {
        return layers[static_cast<int>(l)];
    }
};

struct SummaryStats {
    struct Peak {
        double m_max = 0.0;
        double t_max = 0.0; // hours
    };
    std::array<Peak, geometry::kLayerCount> peaks;
    Peak released;
    struct Intersection {
        std::string curve_a, curve_b;
        double t = 0.0; // hours
        double m = 0.0; // ug/um^2
    };
    std::vector<Intersection> intersections;
    double conservation_drift = 0.0;
};

/// Per-vertex weights w[i] such that layer mass = (1/width) * w . u, i.e. the
/// K-weighted dual-box fragment areas of each layer. Summed over layers they
/// reproduce the lumped mass matrix diagonal exactly.
std::array<std::vector<double>, geometry::kLayerCount>
layer_mass_weights(const geometry::Mesh& mesh, const geometry::DualBoxes& boxes,
                   const chem::LayerParams& params);

/// Discrete concentration integral over one layer per unit width:
/// (1/W) * sum over dual-box fragments in the layer of K * u * area.
double layer_mass(const assembly::FieldState& state, const geometry::Mesh& mesh,
                  const geometry::DualBoxes& boxes, const chem::LayerParams& params,
                  geometry::SkinLayer layer, double domain_width);

/// Outflow through the bottom sink per unit width, evaluated with the
/// Dirichlet-residual functional of the pristine stiffness rows (the
/// discretely conservative flux).
double boundary_flux(const assembly::FieldState& state, const assembly::SystemMatrices& sys,
                     const geometry::Mesh& mesh, double domain_width);

/// Cumulative trapezoidal integral of a flux series; exact on piecewise
/// linear fluxes. Throws std::domain_error on an unsorted time grid.
std::vector<double> released_mass(const std::vector<double>& times,
                                  const std::vector<double>& flux);

/// max_k |total(k) - total(0)| / total(0)
double conservation_audit(const MassSeries& series);

struct Peak {
    double m_max = 0.0;
    double t_max = 0.0;
};

/// Maximum sampled value and its time; ties resolve to the earliest time.
Peak find_mmax_tmax(const std::vector<double>& times, const std::vector<double>& values);

struct CurveIntersection {
    double t = 0.0;
    double m = 0.0;
};

/// Linearly interpolated crossings of two curves sampled on the same grid.
/// Tangential touches count once; identical curves yield no crossings.
std::vector<CurveIntersection> find_intersections(const std::vector<double>& times,
                                                  const std::vector<double>& a,
                                                  const std::vector<double>& b);

/// Characteristic diffusion time L^2 / D.
double diffusion_time_estimate(double length, double diffusivity);

} // namespace dermadiff::analysis

#endif
