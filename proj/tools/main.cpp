// Command-line front end: simulate, sweep, mesh, estimate-params.

#include <cstdio>
#include <filesystem>
#include <future>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "dermadiff/analysis.hpp"
#include "dermadiff/config.hpp"
#include "dermadiff/errors.hpp"
#include "dermadiff/io.hpp"
#include "dermadiff/kernels.hpp"
#include "dermadiff/simulation.hpp"

namespace dd = dermadiff;
using nlohmann::json;

namespace {

enum LogLevel { kQuiet = 0, kInfo = 1, kDebug = 2 };
int g_log_level = kInfo;

struct GlobalOptions {
    std::string config_path;
    std::string output_dir;  // overrides config when set
    std::string database;    // overrides config when set
    bool dump_matrices = false;
    int threads = -1;        // -1: keep config value
    std::string log_level = "info";
};

std::string slugify(const std::string& name) {
    std::string s;
    for (char c : name) {
        if (std::isalnum(static_cast<unsigned char>(c)))
            s += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        else if (!s.empty() && s.back() != '-')
            s += '-';
    }
    while (!s.empty() && s.back() == '-') s.pop_back();
    return s.empty() ? "chemical" : s;
}

void apply_overrides(dd::config::RunConfig& cfg, const GlobalOptions& opt) {
    if (!opt.output_dir.empty()) cfg.output_dir = opt.output_dir;
    if (!opt.database.empty()) cfg.database = opt.database;
    if (opt.dump_matrices) cfg.emit_matrices = true;
    if (opt.threads >= 0) cfg.threads = opt.threads;
}

dd::chem::ChemicalRecord resolve_record(const dd::config::RunConfig& cfg,
                                        const std::string& name) {
    if (cfg.chemical.is_inline && name == cfg.chemical.name) return cfg.chemical.record;
    const auto db = dd::chem::load_database(cfg.database);
    return dd::chem::find_chemical(db, name);
}

json peak_json(const dd::analysis::SummaryStats::Peak& p) {
    return json{{"m_max", p.m_max}, {"t_max_hours", p.t_max}, {"t_max_days", p.t_max / 24.0}};
}

struct RunArtifacts {
    std::vector<std::string> files;
    dd::simulation::SimulationResult result;
};

RunArtifacts execute_run(const dd::config::RunConfig& cfg, const std::string& chemical_name,
                         bool log_progress) {
    namespace fs = std::filesystem;
    const auto record = resolve_record(cfg, chemical_name);
    const auto params = dd::chem::resolve_params(record, cfg.profile);

    dd::simulation::RunSetup setup;
    setup.profile = cfg.profile;
    setup.params = params;
    setup.c0 = cfg.c0;
    setup.refinement_level = cfg.refinement_level;
    setup.base_resolution = cfg.base_resolution;
    setup.solver = cfg.solver;
    setup.controller = cfg.controller;
    setup.controller.t_end = cfg.t_end;
    setup.controller.output_times = cfg.resolve_output_times();

    const auto hier = dd::simulation::build_run_hierarchy(setup);
    const auto& fine = hier.levels.back();

    const fs::path run_dir = fs::path(cfg.output_dir) / slugify(chemical_name);
    RunArtifacts out;
    auto emit = [&](const fs::path& rel, const std::string& content) {
        const fs::path path = run_dir / rel;
        dd::io::write_text_atomic(path.string(), content);
        out.files.push_back(path.string());
    };

    dd::simulation::SnapshotSink snapshot;
    if (cfg.emit_vtk) {
        snapshot = [&](std::size_t index, double, const std::vector<double>& u) {
            char name[64];
            std::snprintf(name, sizeof(name), "snapshots/state_%04zu.vtk", index);
            emit(name, dd::io::vtk_mesh(fine.mesh, &u, &params));
        };
    }
    dd::simulation::ProgressSink progress;
    if (log_progress && g_log_level >= kInfo) {
        progress = [](const dd::simulation::StepLog& s) {
            std::fprintf(stderr, "t=%.10g tau=%.10g cycles=%d resid=%.3e eps=%.3e\n", s.t,
                         s.tau, s.cycles, s.resid, s.eps);
        };
    }

    out.result = dd::simulation::run_simulation(setup, hier, snapshot, progress);

    if (cfg.emit_csv) emit("series.csv", dd::io::series_csv(out.result.series));
    if (cfg.emit_matrices) {
        emit("A.mtx", dd::io::matrix_market(fine.sys.stiffness));
        emit("M.mtx", dd::io::matrix_market_diagonal(fine.sys.lumped_mass));
    }
    emit("effective_config.json", dd::config::effective_config_json(cfg));

    if (cfg.emit_summary) {
        const auto& stats = out.result.stats;
        json results;
        json layers;
        for (int l = 0; l < dd::geometry::kLayerCount; ++l)
            layers[dd::geometry::layer_name(static_cast<dd::geometry::SkinLayer>(l))] =
                peak_json(stats.peaks[l]);
        results["per_layer"] = layers;
        results["released"] = peak_json(stats.released);
        json crossings = json::array();
        for (const auto& c : stats.intersections)
            crossings.push_back(json{{"curves", c.curve_a + "/" + c.curve_b},
                                     {"t_hours", c.t},
                                     {"t_days", c.t / 24.0},
                                     {"mass", c.m}});
        results["intersections"] = crossings;
        results["conservation_drift"] = stats.conservation_drift;
        results["steps_accepted"] = out.result.steps.size();
        results["steps_rejected"] = out.result.total_rejections;
        results["hit_tau_min"] = out.result.hit_tau_min;

        json summary;
        summary["chemical"] = chemical_name;
        summary["effective_config"] =
            json::parse(dd::config::effective_config_json(cfg));
        summary["results"] = results;
        const std::string summary_path = (run_dir / "summary.json").string();
        json artifacts = json::array();
        for (const auto& f : out.files) artifacts.push_back(f);
        artifacts.push_back(summary_path);
        summary["artifacts"] = artifacts;
        dd::io::write_text_atomic(summary_path, summary.dump(2) + "\n");
        out.files.push_back(summary_path);
    }
    return out;
}

void print_run_summary(const std::string& chemical, const dd::simulation::SimulationResult& r) {
    std::ostringstream line;
    line.precision(5);
    line << chemical << ":";
    const char* names[] = {"depos", "sc", "ve", "de"};
    for (int l = 0; l < dd::geometry::kLayerCount; ++l)
        line << " M_max[" << names[l] << "]=" << r.stats.peaks[l].m_max << "@"
             << r.stats.peaks[l].t_max / 24.0 << "d";
    line << " released=" << r.stats.released.m_max << " drift=" << r.stats.conservation_drift;
    std::cout << line.str() << "\n";
}

int cmd_simulate(const GlobalOptions& opt) {
    if (opt.config_path.empty()) throw dd::config_error("simulate requires --config");
    auto cfg = dd::config::parse_config_file(opt.config_path);
    apply_overrides(cfg, opt);
    dd::kernels::set_threads(cfg.threads);
    const auto run = execute_run(cfg, cfg.chemical.name, true);
    print_run_summary(cfg.chemical.name, run.result);
    return 0;
}

int cmd_sweep(const GlobalOptions& opt, const std::vector<std::string>& chemicals, int jobs) {
    if (opt.config_path.empty()) throw dd::config_error("sweep requires --config");
    if (chemicals.empty())
        throw dd::config_error("sweep requires at least one chemical (--chemicals a,b,...)");
    auto cfg = dd::config::parse_config_file(opt.config_path);
    apply_overrides(cfg, opt);
    dd::kernels::set_threads(cfg.threads);

    struct Entry {
        std::string name;
        bool ok = false;
        std::string error;
        dd::simulation::SimulationResult result;
    };
    std::vector<Entry> entries(chemicals.size());
    for (std::size_t i = 0; i < chemicals.size(); ++i) entries[i].name = chemicals[i];

    auto worker = [&](std::size_t i) {
        try {
            entries[i].result = execute_run(cfg, entries[i].name, jobs <= 1).result;
            entries[i].ok = true;
        } catch (const std::exception& e) {
            entries[i].error = e.what();
        }
    };
    if (jobs <= 1) {
        for (std::size_t i = 0; i < entries.size(); ++i) worker(i);
    } else {
        std::vector<std::future<void>> futures;
        std::size_t next = 0;
        while (next < entries.size() || !futures.empty()) {
            while (next < entries.size() && static_cast<int>(futures.size()) < jobs)
                futures.push_back(std::async(std::launch::async, worker, next++));
            futures.front().wait();
            futures.erase(futures.begin());
        }
    }

    auto sorted = entries;
    std::sort(sorted.begin(), sorted.end(),
              [](const Entry& a, const Entry& b) { return a.name < b.name; });

    std::ostringstream csv;
    csv << "chemical,layer,m_max,t_max_hours\n";
    for (const auto& e : sorted) {
        if (!e.ok) continue;
        for (int l = 0; l < dd::geometry::kLayerCount; ++l)
            csv << e.name << ','
                << dd::geometry::layer_name(static_cast<dd::geometry::SkinLayer>(l)) << ','
                << dd::io::format_double(e.result.stats.peaks[l].m_max) << ','
                << dd::io::format_double(e.result.stats.peaks[l].t_max) << "\n";
    }
    const auto comparison = std::filesystem::path(cfg.output_dir) / "comparison.csv";
    dd::io::write_text_atomic(comparison.string(), csv.str());

    int failures = 0;
    for (const auto& e : sorted) {
        if (e.ok) {
            print_run_summary(e.name, e.result);
        } else {
            ++failures;
            std::cerr << "error: " << e.name << ": " << e.error << "\n";
        }
    }
    return failures == 0 ? 0 : 3;
}

int cmd_mesh(const GlobalOptions& opt, const std::string& region, const std::string& age,
             int level, int base_resolution) {
    dd::geometry::LayerProfile profile;
    int effective_level = level;
    int effective_base = base_resolution;
    std::string out_dir = opt.output_dir.empty() ? "out" : opt.output_dir;
    if (!opt.config_path.empty()) {
        auto cfg = dd::config::parse_config_file(opt.config_path);
        apply_overrides(cfg, opt);
        profile = cfg.profile;
        if (effective_level < 0) effective_level = cfg.refinement_level;
        if (effective_base <= 0) effective_base = cfg.base_resolution;
        out_dir = cfg.output_dir;
    } else {
        profile = dd::geometry::layer_preset(dd::geometry::region_from_string(region),
                                             dd::geometry::age_from_string(age));
    }
    if (effective_level < 0) effective_level = 0;
    if (effective_base <= 0) effective_base = 20;

    auto mesh = dd::geometry::generate_mesh(profile, effective_base);
    for (int l = 0; l < effective_level; ++l) mesh = dd::geometry::refine(mesh);

    const auto path = std::filesystem::path(out_dir) /
                      ("mesh_level" + std::to_string(effective_level) + ".vtk");
    dd::io::write_text_atomic(path.string(), dd::io::vtk_mesh(mesh));
    std::cout << "vertices " << mesh.vertex_count() << ", edges " << mesh.edge_count()
              << ", triangles " << mesh.triangle_count() << "\n";
    std::cout << "wrote " << path.string() << "\n";
    return 0;
}

int cmd_estimate_params(const GlobalOptions& opt, const std::string& chemical,
                        const std::string& region, const std::string& age) {
    dd::geometry::LayerProfile profile;
    std::string database = opt.database.empty() ? "data/chemicals.csv" : opt.database;
    std::string name = chemical;
    dd::chem::ChemicalRecord record;
    bool have_record = false;

    if (!opt.config_path.empty()) {
        auto cfg = dd::config::parse_config_file(opt.config_path);
        apply_overrides(cfg, opt);
        profile = cfg.profile;
        database = cfg.database;
        if (name.empty()) name = cfg.chemical.name;
        if (cfg.chemical.is_inline && name == cfg.chemical.name) {
            record = cfg.chemical.record;
            have_record = true;
        }
    } else {
        profile = dd::geometry::layer_preset(dd::geometry::region_from_string(region),
                                             dd::geometry::age_from_string(age));
    }
    if (name.empty()) throw dd::config_error("estimate-params requires --chemical");
    if (!have_record) {
        const auto db = dd::chem::load_database(database);
        record = dd::chem::find_chemical(db, name);
    }
    const auto params = dd::chem::resolve_params(record, profile);

    std::printf("%-10s %-16s %s\n", "field", "value", "provenance");
    const char* names[] = {"depos", "sc", "ve", "de"};
    for (int l = 0; l < dd::geometry::kLayerCount; ++l)
        std::printf("k_%-8s %-16.8g %s\n", names[l], params.k[l],
                    dd::chem::to_string(params.k_provenance[l]));
    for (int l = 0; l < dd::geometry::kLayerCount; ++l)
        std::printf("d_%-8s %-16.8g %s\n", names[l], params.d[l],
                    dd::chem::to_string(params.d_provenance[l]));
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Finite-dose transdermal diffusion simulator"};
    app.require_subcommand(1);

    GlobalOptions opt;
    app.add_option("--config", opt.config_path, "JSON run configuration");
    app.add_option("--output-dir", opt.output_dir, "override the configured output directory");
    app.add_option("--database", opt.database, "override the chemical database path");
    app.add_flag("--dump-matrices", opt.dump_matrices, "emit MatrixMarket dumps of A and M");
    app.add_option("--threads", opt.threads, "worker threads for the parallel kernels (0=auto)");
    app.add_option("--log-level", opt.log_level, "quiet, info or debug")
        ->check(CLI::IsMember({"quiet", "info", "debug"}));

    auto* simulate = app.add_subcommand("simulate", "run one finite-dose simulation");
    simulate->fallthrough();

    std::vector<std::string> sweep_chemicals;
    int sweep_jobs = 1;
    auto* sweep = app.add_subcommand("sweep", "run independent simulations per chemical");
    sweep->fallthrough();
    sweep->add_option("--chemicals", sweep_chemicals, "chemical names from the database")
        ->delimiter(',');
    sweep->add_option("--jobs", sweep_jobs, "concurrent runs");

    std::string mesh_region = "chest", mesh_age = "old";
    int mesh_level = -1, mesh_base = 0;
    auto* mesh = app.add_subcommand("mesh", "generate a skin mesh and write it as VTK");
    mesh->fallthrough();
    mesh->add_option("--region", mesh_region, "chest, abdomen or outer_forearm");
    mesh->add_option("--age", mesh_age, "young or old");
    mesh->add_option("--level", mesh_level, "refinement level");
    mesh->add_option("--base-resolution", mesh_base, "fine segments per papillae period");

    std::string est_chemical, est_region = "chest", est_age = "old";
    auto* estimate = app.add_subcommand("estimate-params",
                                        "resolve per-layer K/D with provenance");
    estimate->fallthrough();
    estimate->add_option("--chemical", est_chemical, "chemical name");
    estimate->add_option("--region", est_region, "chest, abdomen or outer_forearm");
    estimate->add_option("--age", est_age, "young or old");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    g_log_level = opt.log_level == "quiet" ? kQuiet : (opt.log_level == "debug" ? kDebug : kInfo);

    try {
        if (simulate->parsed()) return cmd_simulate(opt);
        if (sweep->parsed()) return cmd_sweep(opt, sweep_chemicals, sweep_jobs);
        if (mesh->parsed()) return cmd_mesh(opt, mesh_region, mesh_age, mesh_level, mesh_base);
        if (estimate->parsed())
            return cmd_estimate_params(opt, est_chemical, est_region, est_age);
    } catch (const dd::solver_error& e) {
        std::cerr << "solver error: " << e.what() << "\n";
        return 3;
    } catch (const dd::io_error& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return 4;
    } catch (const dd::config_error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
