#include "dermadiff/analysis.hpp"

#include <cmath>
#include <stdexcept>

namespace dermadiff::analysis {

using geometry::SkinLayer;

double MassSeries::total(std::size_t k) const {
    double t = released[k];
    for (const auto& layer : layers) t += layer[k];
    return t;
}

std::array<std::vector<double>, geometry::kLayerCount>
layer_mass_weights(const geometry::Mesh& mesh, const geometry::DualBoxes& boxes,
                   const chem::LayerParams& params) {
    std::array<std::vector<double>, geometry::kLayerCount> w;
    for (auto& v : w) v.assign(mesh.vertex_count(), 0.0);
    for (int i = 0; i < mesh.vertex_count(); ++i)
        for (const auto& f : boxes.fragments[i]) {
            const SkinLayer layer = mesh.triangles[f.triangle].layer;
            w[static_cast<int>(layer)][i] += params.partition(layer) * f.area;
        }
    return w;
}

double layer_mass(const assembly::FieldState& state, const geometry::Mesh& mesh,
                  const geometry::DualBoxes& boxes, const chem::LayerParams& params,
                  SkinLayer layer, double domain_width) {
    if (!(domain_width > 0.0)) throw std::domain_error("layer_mass: width must be positive");
    double mass = 0.0;
    for (int i = 0; i < mesh.vertex_count(); ++i) {
        if (state.u[i] == 0.0) continue;
        double warea = 0.0;
        for (const auto& f : boxes.fragments[i])
            if (mesh.triangles[f.triangle].layer == layer) warea += f.area;
        mass += params.partition(layer) * warea * state.u[i];
    }
    return mass / domain_width;
}

double boundary_flux(const assembly::FieldState& state, const assembly::SystemMatrices& sys,
                     const geometry::Mesh& mesh, double domain_width) {
    const auto bot = mesh.boundary_vertices(geometry::BoundaryTag::BOT);
    return assembly::dirichlet_residual_flux(sys, state.u, bot) / domain_width;
}

std::vector<double> released_mass(const std::vector<double>& times,
                                  const std::vector<double>& flux) {
    if (times.size() != flux.size())
        throw std::domain_error("released_mass: time and flux series differ in length");
    std::vector<double> cumulative(times.size(), 0.0);
    for (std::size_t k = 1; k < times.size(); ++k) {
        const double dt = times[k] - times[k - 1];
        if (!(dt > 0.0)) throw std::domain_error("released_mass: times must be increasing");
        cumulative[k] = cumulative[k - 1] + 0.5 * (flux[k] + flux[k - 1]) * dt;
    }
    return cumulative;
}

double conservation_audit(const MassSeries& series) {
    if (series.size() == 0) throw std::domain_error("conservation_audit: empty series");
    const double total0 = series.total(0);
    if (total0 == 0.0)
        throw std::domain_error("conservation_audit: initial total mass is zero");
    double drift = 0.0;
    for (std::size_t k = 0; k < series.size(); ++k)
        drift = std::max(drift, std::abs(series.total(k) - total0) / std::abs(total0));
    return drift;
}

Peak find_mmax_tmax(const std::vector<double>& times, const std::vector<double>& values) {
    if (times.empty() || times.size() != values.size())
        throw std::domain_error("find_mmax_tmax: empty or mismatched series");
    Peak peak{values[0], times[0]};
    for (std::size_t k = 1; k < values.size(); ++k)
        if (values[k] > peak.m_max) {
            peak.m_max = values[k];
            peak.t_max = times[k];
        }
    return peak;
}

std::vector<CurveIntersection> find_intersections(const std::vector<double>& times,
                                                  const std::vector<double>& a,
                                                  const std::vector<double>& b) {
    if (a.size() != times.size() || b.size() != times.size())
        throw std::domain_error("find_intersections: curves must share the time grid");
    std::vector<CurveIntersection> out;
    std::vector<double> diff(times.size());
    for (std::size_t k = 0; k < times.size(); ++k) diff[k] = a[k] - b[k];

    for (std::size_t k = 1; k < times.size(); ++k) {
        const double d0 = diff[k - 1], d1 = diff[k];
        if (d0 == 0.0) {
            // Sample exactly on the crossing: record once, at the sample.
            const bool entering = (k == 1) || diff[k - 2] != 0.0;
            if (entering && d1 != 0.0)
                out.push_back({times[k - 1], a[k - 1]});
            continue;
        }
        if (d1 == 0.0) continue; // handled as d0 == 0 of the next interval
        if ((d0 < 0.0) != (d1 < 0.0)) {
            const double s = d0 / (d0 - d1); // in (0,1)
            const double t = times[k - 1] + s * (times[k] - times[k - 1]);
            const double m = a[k - 1] + s * (a[k] - a[k - 1]);
            out.push_back({t, m});
        }
    }
    return out;
}

double diffusion_time_estimate(double length, double diffusivity) {
    if (!(length > 0.0) || !(diffusivity > 0.0))
        throw std::domain_error("diffusion_time_estimate: inputs must be positive");
    return length * length / diffusivity;
}

} // namespace dermadiff::analysis
