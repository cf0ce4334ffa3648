#include "dermadiff/simulation.hpp"

#include <algorithm>
#include <cmath>

#include "dermadiff/errors.hpp"

namespace dermadiff::simulation {

using analysis::MassSeries;
using geometry::SkinLayer;

namespace {

struct Sample {
    double t = 0.0;
    std::array<double, geometry::kLayerCount> mass{};
    double flux = 0.0;
    double released = 0.0;
    std::vector<double> u;
};

const char* kCurveNames[] = {"depos", "sc", "ve", "de", "released"};

void push_row(MassSeries& series, const Sample& s) {
    series.times.push_back(s.t);
    for (int l = 0; l < geometry::kLayerCount; ++l) series.layers[l].push_back(s.mass[l]);
    series.released.push_back(s.released);
    series.flux_bot.push_back(s.flux);
}

Sample lerp(const Sample& a, const Sample& b, double t) {
    const double w = (t - a.t) / (b.t - a.t);
    Sample out;
    out.t = t;
    for (int l = 0; l < geometry::kLayerCount; ++l)
        out.mass[l] = a.mass[l] + w * (b.mass[l] - a.mass[l]);
    out.flux = a.flux + w * (b.flux - a.flux);
    out.released = a.released + w * (b.released - a.released);
    out.u.resize(a.u.size());
    for (std::size_t i = 0; i < a.u.size(); ++i) out.u[i] = a.u[i] + w * (b.u[i] - a.u[i]);
    return out;
}

} // namespace

solver::MultigridHierarchy build_run_hierarchy(const RunSetup& setup) {
    auto base = geometry::generate_mesh(setup.profile, setup.base_resolution);
    return solver::build_hierarchy(std::move(base), setup.refinement_level, setup.params,
                                   {{geometry::BoundaryTag::BOT, 0.0}}, setup.solver);
}

SimulationResult run_simulation(const RunSetup& setup, const solver::MultigridHierarchy& hier,
                                const SnapshotSink& snapshot, const ProgressSink& progress) {
    setup.controller.validate();
    const auto& level = hier.levels.back();
    const auto& mesh = level.mesh;
    const auto& sys = level.sys;
    const double width = setup.profile.domain_width;

    std::vector<double> output_times = setup.controller.output_times;
    if (output_times.empty()) output_times = {0.0, setup.controller.t_end};
    std::sort(output_times.begin(), output_times.end());
    output_times.erase(std::unique(output_times.begin(), output_times.end()),
                       output_times.end());
    if (output_times.front() < 0.0 || output_times.back() > setup.controller.t_end + 1e-12)
        throw config_error("output times must lie within [0, t_end]");
    if (setup.controller.t_end == 0.0) output_times = {0.0};

    const auto weights = analysis::layer_mass_weights(mesh, level.boxes, setup.params);
    const auto sink_vertices = sys.dirichlet_list();

    auto measure = [&](const assembly::FieldState& state, double released) {
        Sample s;
        s.t = state.t;
        for (int l = 0; l < geometry::kLayerCount; ++l) {
            double m = 0.0;
            const auto& w = weights[l];
            for (int i = 0; i < mesh.vertex_count(); ++i) m += w[i] * state.u[i];
            s.mass[l] = m / width;
        }
        s.flux = assembly::dirichlet_residual_flux(sys, state.u, sink_vertices) / width;
        s.released = released;
        s.u = state.u;
        return s;
    };

    assembly::FieldState state = assembly::initial_condition_finite_dose(mesh, setup.params,
                                                                         setup.c0);
    solver::TimeController controller = setup.controller;
    if (controller.error_floor == 0.0) {
        double u0max = 0.0;
        for (double v : state.u) u0max = std::max(u0max, std::abs(v));
        controller.error_floor = 1e-3 * u0max;
    }
    SimulationResult result;
    double released = 0.0;
    Sample prev = measure(state, released);

    std::size_t next_output = 0;
    auto emit_outputs_through = [&](const Sample& cur) {
        while (next_output < output_times.size() &&
               output_times[next_output] <= cur.t * (1.0 + 1e-14) + 1e-300) {
            const double t = output_times[next_output];
            Sample s = (t <= prev.t) ? prev : (t >= cur.t ? cur : lerp(prev, cur, t));
            s.t = t;
            push_row(result.series, s);
            if (snapshot) snapshot(next_output, t, s.u);
            ++next_output;
        }
    };
    emit_outputs_through(prev); // t = 0 snapshot

    solver::TimeStepper stepper;
    stepper.tau = setup.controller.tau_init;
    const double t_end = setup.controller.t_end;

    while (t_end - state.t > t_end * 1e-12) {
        const auto step = solver::advance(state, stepper, hier, controller);
        released += step.released_increment / width;
        result.total_rejections += step.rejections;
        result.hit_tau_min = result.hit_tau_min || step.forced_at_tau_min;

        const Sample cur = measure(state, released);
        emit_outputs_through(cur);

        StepLog log{state.t, step.tau_used, step.cycles, step.max_rel_residual,
                    step.error_estimate, step.rejections};
        result.steps.push_back(log);
        if (progress) progress(log);
        prev = cur;
    }
    // Requested times within roundoff of the final accepted time.
    while (next_output < output_times.size()) {
        Sample s = prev;
        s.t = output_times[next_output];
        push_row(result.series, s);
        if (snapshot) snapshot(next_output, s.t, s.u);
        ++next_output;
    }

    // Summary statistics over the sampled series.
    const auto& series = result.series;
    for (int l = 0; l < geometry::kLayerCount; ++l) {
        const auto peak = analysis::find_mmax_tmax(series.times, series.layers[l]);
        result.stats.peaks[l] = {peak.m_max, peak.t_max};
    }
    {
        const auto peak = analysis::find_mmax_tmax(series.times, series.released);
        result.stats.released = {peak.m_max, peak.t_max};
    }
    auto curve_of = [&](int idx) -> const std::vector<double>& {
        return idx < geometry::kLayerCount ? series.layers[idx] : series.released;
    };
    for (int a = 0; a < 5; ++a)
        for (int b = a + 1; b < 5; ++b) {
            const auto crossings = analysis::find_intersections(series.times, curve_of(a),
                                                                curve_of(b));
            for (const auto& c : crossings)
                result.stats.intersections.push_back(
                    {kCurveNames[a], kCurveNames[b], c.t, c.m});
        }
    result.stats.conservation_drift = analysis::conservation_audit(series);
    return result;
}

SimulationResult run_simulation(const RunSetup& setup) {
    const auto hier = build_run_hierarchy(setup);
    return run_simulation(setup, hier);
}

} // namespace dermadiff::simulation
