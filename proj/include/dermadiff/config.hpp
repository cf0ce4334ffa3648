#ifndef DERMADIFF_CONFIG_HPP
#define DERMADIFF_CONFIG_HPP

#include <optional>
#include <string>
#include <vector>

#include "dermadiff/chem.hpp"
#include "dermadiff/geometry.hpp"
#include "dermadiff/solver.hpp"

namespace dermadiff::config {

struct OutputTimesSpec {
    std::vector<double> list;      // explicit times (hours); empty -> generated
    int count = 200;
    std::string spacing = "linear"; // "linear" or "log"
    double t_first = 0.0;           // first positive time for log spacing; 0 -> t_end/1000
};

struct ChemicalSpec {
    std::string name;
    bool is_inline = false;
    chem::ChemicalRecord record; // populated when is_inline
};

/// Parsed and validated run configuration with every default materialized.
struct RunConfig {
    geometry::LayerProfile profile;
    ChemicalSpec chemical;
    std::string database = "data/chemicals.csv";
    double c0 = 1.0;
    int refinement_level = 3;
    int base_resolution = 20;
    double t_end = 384.0; // hours
    OutputTimesSpec output_times;
    solver::SolverConfig solver;
    solver::TimeController controller;
    std::string output_dir = "out";
    bool emit_csv = true;
    bool emit_vtk = false;
    bool emit_summary = true;
    bool emit_matrices = false;
    int threads = 0;

    std::vector<double> resolve_output_times() const;
    void validate() const;
};

/// Parse a strict-schema JSON config: unknown keys are errors, all invariant
/// violations name the offending field.
RunConfig parse_config_file(const std::string& path);
RunConfig parse_config_text(const std::string& json_text);

/// Effective configuration with every default filled in; parsing it again
/// reproduces the same RunConfig.
std::string effective_config_json(const RunConfig& cfg);

} // namespace dermadiff::config

#endif
