#include "dermadiff/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "dermadiff/errors.hpp"

namespace dermadiff::config {

using nlohmann::json;

namespace {

void check_keys(const json& obj, const std::string& where,
                const std::set<std::string>& allowed) {
    for (auto it = obj.begin(); it != obj.end(); ++it)
        if (!allowed.count(it.key()))
            throw config_error("unknown config key '" + where + it.key() + "'");
}

double get_num(const json& obj, const char* key, double fallback) {
    if (!obj.contains(key)) return fallback;
    if (!obj[key].is_number()) throw config_error(std::string("config key '") + key +
                                                  "' must be a number");
    return obj[key].get<double>();
}

int get_int(const json& obj, const char* key, int fallback) {
    if (!obj.contains(key)) return fallback;
    if (!obj[key].is_number_integer())
        throw config_error(std::string("config key '") + key + "' must be an integer");
    return obj[key].get<int>();
}

std::string get_str(const json& obj, const char* key, const std::string& fallback) {
    if (!obj.contains(key)) return fallback;
    if (!obj[key].is_string())
        throw config_error(std::string("config key '") + key + "' must be a string");
    return obj[key].get<std::string>();
}

std::optional<double> get_opt(const json& obj, const char* key) {
    if (!obj.contains(key) || obj[key].is_null()) return std::nullopt;
    if (!obj[key].is_number()) throw config_error(std::string("config key '") + key +
                                                  "' must be a number");
    return obj[key].get<double>();
}

geometry::LayerProfile parse_profile(const json& j) {
    check_keys(j, "profile.",
               {"region", "age", "h_depos_um", "h_sc_um", "h_ve_um", "h_de_um",
                "papillae_amplitude_um", "papillae_period_um", "domain_width_um"});
    const auto region = geometry::region_from_string(get_str(j, "region", "chest"));
    const auto age = geometry::age_from_string(get_str(j, "age", "old"));

    geometry::LayerProfile p;
    if (region == geometry::Region::custom) {
        p.region = region;
        p.age = age;
        p.papillae_period = (age == geometry::Age::young) ? 150.0 : 200.0;
        for (const char* req : {"h_depos_um", "h_sc_um", "h_ve_um", "h_de_um"})
            if (!j.contains(req))
                throw config_error(std::string("custom profile requires '") + req + "'");
    } else {
        p = geometry::layer_preset(region, age);
    }
    p.h_depos = get_num(j, "h_depos_um", p.h_depos);
    p.h_sc = get_num(j, "h_sc_um", p.h_sc);
    p.h_ve = get_num(j, "h_ve_um", p.h_ve);
    p.h_de = get_num(j, "h_de_um", p.h_de);
    p.papillae_amplitude = get_num(j, "papillae_amplitude_um", p.papillae_amplitude);
    p.papillae_period = get_num(j, "papillae_period_um", p.papillae_period);
    // Default width: one papillae period.
    p.domain_width = get_num(j, "domain_width_um", p.papillae_period);
    p.validate();
    return p;
}

ChemicalSpec parse_chemical(const json& j) {
    check_keys(j, "chemical.",
               {"name", "mw_da", "log_kow", "t_lag_h", "k_depos", "k_sc", "k_ve", "k_de",
                "d_depos_um2_h", "d_sc_um2_h", "d_ve_um2_h", "d_de_um2_h"});
    ChemicalSpec spec;
    spec.name = get_str(j, "name", "");
    if (spec.name.empty()) throw config_error("chemical.name is required");
    if (j.contains("mw_da")) {
        spec.is_inline = true;
        auto& rec = spec.record;
        rec.chemical.name = spec.name;
        rec.chemical.mw = get_num(j, "mw_da", 0.0);
        rec.chemical.log_kow = get_opt(j, "log_kow");
        rec.chemical.t_lag = get_opt(j, "t_lag_h");
        rec.k[0] = get_opt(j, "k_depos");
        rec.k[1] = get_opt(j, "k_sc");
        rec.k[2] = get_opt(j, "k_ve");
        rec.k[3] = get_opt(j, "k_de");
        rec.d[0] = get_opt(j, "d_depos_um2_h");
        rec.d[1] = get_opt(j, "d_sc_um2_h");
        rec.d[2] = get_opt(j, "d_ve_um2_h");
        rec.d[3] = get_opt(j, "d_de_um2_h");
        rec.chemical.validate();
    } else {
        for (const char* key : {"log_kow", "t_lag_h", "k_depos", "k_sc", "k_ve", "k_de",
                                "d_depos_um2_h", "d_sc_um2_h", "d_ve_um2_h", "d_de_um2_h"})
            if (j.contains(key))
                throw config_error("chemical overrides require 'mw_da' (inline record)");
    }
    return spec;
}

OutputTimesSpec parse_output_times(const json& j) {
    check_keys(j, "output_times.", {"list_hours", "count", "spacing", "t_first_hours"});
    OutputTimesSpec spec;
    if (j.contains("list_hours")) {
        if (!j["list_hours"].is_array())
            throw config_error("output_times.list_hours must be an array");
        for (const auto& v : j["list_hours"]) {
            if (!v.is_number()) throw config_error("output_times.list_hours entries must be numbers");
            spec.list.push_back(v.get<double>());
        }
        if (spec.list.empty()) throw config_error("output_times.list_hours must not be empty");
        for (const char* other : {"count", "spacing", "t_first_hours"})
            if (j.contains(other))
                throw config_error("output_times accepts either list_hours or count/spacing");
    } else {
        spec.count = get_int(j, "count", spec.count);
        spec.spacing = get_str(j, "spacing", spec.spacing);
        spec.t_first = get_num(j, "t_first_hours", spec.t_first);
        if (spec.count < 2) throw config_error("output_times.count must be at least 2");
        if (spec.spacing != "linear" && spec.spacing != "log")
            throw config_error("output_times.spacing must be 'linear' or 'log'");
        if (spec.t_first < 0.0) throw config_error("output_times.t_first_hours must be >= 0");
    }
    return spec;
}

solver::SolverConfig parse_solver(const json& j) {
    check_keys(j, "solver.",
               {"cycle", "smoother", "pre_sweeps", "post_sweeps", "tolerance", "max_cycles",
                "coarsening"});
    solver::SolverConfig cfg;
    cfg.cycle = solver::cycle_from_string(get_str(j, "cycle", "V"));
    cfg.smoother = solver::smoother_from_string(get_str(j, "smoother", "ilu0"));
    cfg.pre_sweeps = get_int(j, "pre_sweeps", cfg.pre_sweeps);
    cfg.post_sweeps = get_int(j, "post_sweeps", cfg.post_sweeps);
    cfg.tolerance = get_num(j, "tolerance", cfg.tolerance);
    cfg.max_cycles = get_int(j, "max_cycles", cfg.max_cycles);
    cfg.coarsening = solver::coarsening_from_string(get_str(j, "coarsening", "galerkin"));
    cfg.validate();
    return cfg;
}

solver::TimeController parse_controller(const json& j) {
    check_keys(j, "controller.",
               {"tau_init_hours", "tau_min_hours", "tau_max_hours", "safety", "target_error",
                "fixed_tau_hours"});
    solver::TimeController ctl;
    ctl.tau_init = get_num(j, "tau_init_hours", ctl.tau_init);
    ctl.tau_min = get_num(j, "tau_min_hours", ctl.tau_min);
    ctl.tau_max = get_num(j, "tau_max_hours", ctl.tau_max);
    ctl.safety = get_num(j, "safety", ctl.safety);
    ctl.target_error = get_num(j, "target_error", ctl.target_error);
    ctl.fixed_tau = get_num(j, "fixed_tau_hours", ctl.fixed_tau);
    return ctl;
}

} // namespace

std::vector<double> RunConfig::resolve_output_times() const {
    if (t_end == 0.0) return {0.0};
    if (!output_times.list.empty()) {
        auto times = output_times.list;
        for (double t : times)
            if (t < 0.0 || t > t_end)
                throw config_error("output time outside [0, t_end]");
        std::sort(times.begin(), times.end());
        return times;
    }
    std::vector<double> times;
    const int count = output_times.count;
    if (output_times.spacing == "linear") {
        for (int i = 0; i < count; ++i) times.push_back(t_end * i / (count - 1));
    } else {
        const double first = output_times.t_first > 0.0 ? output_times.t_first : t_end / 1000.0;
        if (first >= t_end) throw config_error("output_times.t_first_hours must be below t_end");
        times.push_back(0.0);
        const double ratio = std::pow(t_end / first, 1.0 / (count - 2));
        double t = first;
        for (int i = 1; i < count; ++i) {
            times.push_back(std::min(t, t_end));
            t *= ratio;
        }
        times.back() = t_end;
    }
    return times;
}

void RunConfig::validate() const {
    profile.validate();
    if (!(c0 > 0.0) || !std::isfinite(c0)) throw config_error("c0_ug_um3 must be positive");
    if (refinement_level < 0 || refinement_level > 6)
        throw config_error("refinement_level must lie in [0, 6]");
    if (base_resolution < 4) throw config_error("base_resolution must be at least 4");
    if (t_end < 0.0 || !std::isfinite(t_end)) throw config_error("t_end_hours must be >= 0");
    if (threads < 0) throw config_error("threads must be >= 0");
    solver.validate();
    auto ctl = controller;
    ctl.t_end = std::max(t_end, ctl.tau_min); // t_end = 0 runs never step
    ctl.validate();
    if (chemical.name.empty()) throw config_error("chemical.name is required");
}

RunConfig parse_config_text(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw config_error(std::string("config is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw config_error("config root must be a JSON object");
    check_keys(j, "",
               {"profile", "chemical", "database", "c0_ug_um3", "refinement_level",
                "base_resolution", "t_end_hours", "output_times", "solver", "controller",
                "output_dir", "emit", "threads"});

    RunConfig cfg;
    if (j.contains("profile")) cfg.profile = parse_profile(j["profile"]);
    if (!j.contains("chemical")) throw config_error("config requires a 'chemical' section");
    cfg.chemical = parse_chemical(j["chemical"]);
    cfg.database = get_str(j, "database", cfg.database);
    cfg.c0 = get_num(j, "c0_ug_um3", cfg.c0);
    cfg.refinement_level = get_int(j, "refinement_level", cfg.refinement_level);
    cfg.base_resolution = get_int(j, "base_resolution", cfg.base_resolution);
    cfg.t_end = get_num(j, "t_end_hours", cfg.t_end);
    if (j.contains("output_times")) cfg.output_times = parse_output_times(j["output_times"]);
    if (j.contains("solver")) cfg.solver = parse_solver(j["solver"]);
    if (j.contains("controller")) cfg.controller = parse_controller(j["controller"]);
    cfg.output_dir = get_str(j, "output_dir", cfg.output_dir);
    if (j.contains("emit")) {
        if (!j["emit"].is_array()) throw config_error("emit must be an array");
        cfg.emit_csv = cfg.emit_vtk = cfg.emit_summary = cfg.emit_matrices = false;
        for (const auto& e : j["emit"]) {
            const std::string name = e.get<std::string>();
            if (name == "csv")
                cfg.emit_csv = true;
            else if (name == "vtk")
                cfg.emit_vtk = true;
            else if (name == "summary")
                cfg.emit_summary = true;
            else if (name == "matrices")
                cfg.emit_matrices = true;
            else
                throw config_error("unknown emit target '" + name + "'");
        }
    }
    cfg.threads = get_int(j, "threads", cfg.threads);
    cfg.controller.t_end = cfg.t_end;
    cfg.validate();
    return cfg;
}

RunConfig parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open config file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str());
}

std::string effective_config_json(const RunConfig& cfg) {
    json j;
    json prof;
    prof["region"] = geometry::to_string(cfg.profile.region);
    prof["age"] = geometry::to_string(cfg.profile.age);
    prof["h_depos_um"] = cfg.profile.h_depos;
    prof["h_sc_um"] = cfg.profile.h_sc;
    prof["h_ve_um"] = cfg.profile.h_ve;
    prof["h_de_um"] = cfg.profile.h_de;
    prof["papillae_amplitude_um"] = cfg.profile.papillae_amplitude;
    prof["papillae_period_um"] = cfg.profile.papillae_period;
    prof["domain_width_um"] = cfg.profile.domain_width;
    j["profile"] = prof;

    json chem_j;
    chem_j["name"] = cfg.chemical.name;
    if (cfg.chemical.is_inline) {
        const auto& rec = cfg.chemical.record;
        chem_j["mw_da"] = rec.chemical.mw;
        if (rec.chemical.log_kow) chem_j["log_kow"] = *rec.chemical.log_kow;
        if (rec.chemical.t_lag) chem_j["t_lag_h"] = *rec.chemical.t_lag;
        const char* kkeys[] = {"k_depos", "k_sc", "k_ve", "k_de"};
        const char* dkeys[] = {"d_depos_um2_h", "d_sc_um2_h", "d_ve_um2_h", "d_de_um2_h"};
        for (int l = 0; l < geometry::kLayerCount; ++l) {
            if (rec.k[l]) chem_j[kkeys[l]] = *rec.k[l];
            if (rec.d[l]) chem_j[dkeys[l]] = *rec.d[l];
        }
    }
    j["chemical"] = chem_j;

    j["database"] = cfg.database;
    j["c0_ug_um3"] = cfg.c0;
    j["refinement_level"] = cfg.refinement_level;
    j["base_resolution"] = cfg.base_resolution;
    j["t_end_hours"] = cfg.t_end;

    json times;
    if (!cfg.output_times.list.empty()) {
        times["list_hours"] = cfg.output_times.list;
    } else {
        times["count"] = cfg.output_times.count;
        times["spacing"] = cfg.output_times.spacing;
        if (cfg.output_times.spacing == "log" && cfg.output_times.t_first > 0.0)
            times["t_first_hours"] = cfg.output_times.t_first;
    }
    j["output_times"] = times;

    json sol;
    sol["cycle"] = solver::to_string(cfg.solver.cycle);
    sol["smoother"] = solver::to_string(cfg.solver.smoother);
    sol["pre_sweeps"] = cfg.solver.pre_sweeps;
    sol["post_sweeps"] = cfg.solver.post_sweeps;
    sol["tolerance"] = cfg.solver.tolerance;
    sol["max_cycles"] = cfg.solver.max_cycles;
    sol["coarsening"] = solver::to_string(cfg.solver.coarsening);
    j["solver"] = sol;

    json ctl;
    ctl["tau_init_hours"] = cfg.controller.tau_init;
    ctl["tau_min_hours"] = cfg.controller.tau_min;
    ctl["tau_max_hours"] = cfg.controller.tau_max;
    ctl["safety"] = cfg.controller.safety;
    ctl["target_error"] = cfg.controller.target_error;
    ctl["fixed_tau_hours"] = cfg.controller.fixed_tau;
    j["controller"] = ctl;

    j["output_dir"] = cfg.output_dir;
    json emit = json::array();
    if (cfg.emit_csv) emit.push_back("csv");
    if (cfg.emit_vtk) emit.push_back("vtk");
    if (cfg.emit_summary) emit.push_back("summary");
    if (cfg.emit_matrices) emit.push_back("matrices");
    j["emit"] = emit;
    j["threads"] = cfg.threads;
    return j.dump(2) + "\n";
}

} // namespace dermadiff::config
