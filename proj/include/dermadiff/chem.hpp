#ifndef DERMADIFF_CHEM_HPP
#define DERMADIFF_CHEM_HPP

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "dermadiff/geometry.hpp"

namespace dermadiff::chem {

// Canonical internal units: length um, time hours, mass ug. Diffusivities
// are um^2/h; the free-diffusion formula yields cm^2/s and is converted.

struct Chemical {
    std::string name;
    double mw = 0.0;                    // Da
    std::optional<double> log_kow;
    std::optional<double> t_lag;        // hours

    void validate() const;
};

enum class Provenance { database, estimated_dfree, estimated_dsc, defaulted };
const char* to_string(Provenance p);

/// Complete per-layer partition/diffusion set with per-field provenance.
struct LayerParams {
    // Indexed by SkinLayer.
    std::array<double, geometry::kLayerCount> k{1.0, 1.0, 1.0, 1.0};
    std::array<double, geometry::kLayerCount> d{0.0, 0.0, 0.0, 0.0}; // um^2/h
    std::array<Provenance, geometry::kLayerCount> k_provenance{};
    std::array<Provenance, geometry::kLayerCount> d_provenance{};

    double partition(geometry::SkinLayer l) const { return k[static_cast<int>(l)]; }
    double diffusivity(geometry::SkinLayer l) const { return d[static_cast<int>(l)]; }
    void validate() const; // all K > 0, all D > 0, finite
};

/// Database row: raw optional fields exactly as stored in the CSV.
struct ChemicalRecord {
    Chemical chemical;
    std::array<std::optional<double>, geometry::kLayerCount> k;
    std::array<std::optional<double>, geometry::kLayerCount> d; // um^2/h
};

/// Free diffusion coefficient from molecular weight,
/// 10^(-4.15 - 0.6555*log10(mw)), in cm^2/s. Strictly decreasing in mw.
double d_free(double mw);

/// SC diffusivity from SC thickness and lag time, h_sc^2 / (6 t_lag), um^2/h.
double d_sc_from_lag(double h_sc, double t_lag);

/// cm^2/s -> um^2/h (factor 3.6e11).
double convert_diffusivity(double d_cm2_s);

/// Parse the chemical database CSV (see file header in data/chemicals.csv).
/// Throws config_error naming the offending row on malformed input,
/// duplicate names, or missing molecular weight.
std::vector<ChemicalRecord> load_database(const std::string& path);

/// Serialize records back to CSV (used for round-trip tests and tooling).
void save_database(const std::string& path, const std::vector<ChemicalRecord>& records);

/// Find a record by exact name; throws config_error if absent.
const ChemicalRecord& find_chemical(const std::vector<ChemicalRecord>& db,
                                    const std::string& name);

/// Fill missing fields: D_VE/D_DE from d_free(mw), D_SC from the lag time,
/// D_DEPOS defaults to the D_VE estimate, missing K to 1. Idempotent on
/// complete records. Throws config_error naming the field when D_SC cannot
/// be resolved.
LayerParams resolve_params(const ChemicalRecord& record, const geometry::LayerProfile& profile);

} // namespace dermadiff::chem

#endif
