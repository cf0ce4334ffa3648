#ifndef DERMADIFF_SIMULATION_HPP
#define DERMADIFF_SIMULATION_HPP

#include <functional>
#include <vector>

#include "dermadiff/analysis.hpp"
#include "dermadiff/solver.hpp"

namespace dermadiff::simulation {

/// Fully resolved inputs for one simulation run.
struct RunSetup {
    geometry::LayerProfile profile;
    chem::LayerParams params;
    double c0 = 1.0; // ug/um^3
    int refinement_level = 3;
    int base_resolution = 20;
    solver::SolverConfig solver;
    solver::TimeController controller; // carries t_end and output_times
};

struct StepLog {
    double t = 0.0;     // hours, end of the accepted step
    double tau = 0.0;   // hours
    int cycles = 0;     // multigrid cycles across the step's solves
    double resid = 0.0; // worst final relative residual
    double eps = 0.0;   // step-doubling error estimate
    int rejections = 0;
};

struct SimulationResult {
    analysis::MassSeries series; // sampled at the requested output times
    analysis::SummaryStats stats;
    std::vector<StepLog> steps;
    int total_rejections = 0;
    bool hit_tau_min = false;
};

/// Called for each requested output time with the (interpolated) field.
using SnapshotSink =
    std::function<void(std::size_t index, double t_hours, const std::vector<double>& u)>;
/// Called once per accepted step (progress reporting).
using ProgressSink = std::function<void(const StepLog&)>;

solver::MultigridHierarchy build_run_hierarchy(const RunSetup& setup);

/// Advance the finite-dose problem to t_end, recording per-layer masses,
/// bottom flux and released mass at every output time (linear interpolation
/// between accepted steps). Identical setups produce identical results.
SimulationResult run_simulation(const RunSetup& setup, const solver::MultigridHierarchy& hier,
                                const SnapshotSink& snapshot = nullptr,
                                const ProgressSink& progress = nullptr);

SimulationResult run_simulation(const RunSetup& setup);

} // namespace dermadiff::simulation

#endif
