#include "dermadiff/chem.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "dermadiff/errors.hpp"

namespace dermadiff::chem {

using geometry::SkinLayer;

namespace {

constexpr const char* kHeader =
    "name,mw,log_kow,t_lag_h,k_depos,k_sc,k_ve,k_de,d_depos,d_sc,d_ve,d_de";

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

std::optional<double> parse_cell(const std::string& cell, int row, const char* field) {
    std::string s = cell;
    s.erase(0, s.find_first_not_of(" \t\r"));
    s.erase(s.find_last_not_of(" \t\r") + 1);
    if (s.empty()) return std::nullopt;
    try {
        std::size_t pos = 0;
        const double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw config_error("chemical database row " + std::to_string(row) +
                           ": cannot parse field '" + field + "' value '" + cell + "'");
    }
}

std::string format_cell(const std::optional<double>& v) {
    if (!v) return "";
    char buf[64];
    // Shortest representation that parses back to the same double.
    for (int prec = 15; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof(buf), "%.*g", prec, *v);
        if (std::stod(buf) == *v) break;
    }
    return buf;
}

} // namespace

void Chemical::validate() const {
    if (name.empty()) throw config_error("chemical name must not be empty");
    if (!(mw > 0.0) || !std::isfinite(mw))
        throw config_error("chemical '" + name + "': molecular weight must be positive");
    if (t_lag && !(*t_lag > 0.0))
        throw config_error("chemical '" + name + "': lag time must be positive");
}

const char* to_string(Provenance p) {
    switch (p) {
        case Provenance::database: return "database";
        case Provenance::estimated_dfree: return "estimated_dfree";
        case Provenance::estimated_dsc: return "estimated_dsc";
        case Provenance::defaulted: return "default";
    }
    return "?";
}

void LayerParams::validate() const {
    for (int l = 0; l < geometry::kLayerCount; ++l) {
        if (!(k[l] > 0.0) || !std::isfinite(k[l]))
            throw config_error(std::string("partition coefficient for layer ") +
                               geometry::layer_name(static_cast<SkinLayer>(l)) +
                               " must be positive");
        if (!(d[l] > 0.0) || !std::isfinite(d[l]))
            throw config_error(std::string("diffusivity for layer ") +
                               geometry::layer_name(static_cast<SkinLayer>(l)) +
                               " must be positive");
    }
}

double d_free(double mw) {
    if (!(mw > 0.0) || !std::isfinite(mw))
        throw std::domain_error("d_free: molecular weight must be positive");
    return std::pow(10.0, -4.15 - 0.6555 * std::log10(mw));
}

double d_sc_from_lag(double h_sc, double t_lag) {
    if (!(h_sc > 0.0) || !(t_lag > 0.0))
        throw std::domain_error("d_sc: SC thickness and lag time must be positive");
    return h_sc * h_sc / (6.0 * t_lag);
}

double convert_diffusivity(double d_cm2_s) {
    if (d_cm2_s < 0.0 || !std::isfinite(d_cm2_s))
        throw std::domain_error("convert_diffusivity: value must be non-negative");
    return d_cm2_s * 3.6e11; // 1 cm^2 = 1e8 um^2, 1 h = 3600 s
}

std::vector<ChemicalRecord> load_database(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open chemical database '" + path + "'");

    std::string line;
    if (!std::getline(in, line)) throw config_error("chemical database is empty: " + path);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != kHeader)
        throw config_error("chemical database header mismatch; expected '" +
                           std::string(kHeader) + "'");

    std::vector<ChemicalRecord> records;
    std::set<std::string> seen;
    int row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto cells = split_csv(line);
        if (cells.size() != 12)
            throw config_error("chemical database row " + std::to_string(row) +
                               ": expected 12 columns, got " + std::to_string(cells.size()));
        ChemicalRecord rec;
        rec.chemical.name = cells[0];
        const auto mw = parse_cell(cells[1], row, "mw");
        if (!mw)
            throw config_error("chemical database row " + std::to_string(row) +
                               ": molecular weight is mandatory");
        rec.chemical.mw = *mw;
        rec.chemical.log_kow = parse_cell(cells[2], row, "log_kow");
        rec.chemical.t_lag = parse_cell(cells[3], row, "t_lag_h");
        const char* knames[] = {"k_depos", "k_sc", "k_ve", "k_de"};
        const char* dnames[] = {"d_depos", "d_sc", "d_ve", "d_de"};
        for (int l = 0; l < geometry::kLayerCount; ++l) {
            rec.k[l] = parse_cell(cells[4 + l], row, knames[l]);
            rec.d[l] = parse_cell(cells[8 + l], row, dnames[l]);
        }
        rec.chemical.validate();
        if (!seen.insert(rec.chemical.name).second)
            throw config_error("chemical database row " + std::to_string(row) +
                               ": duplicate chemical '" + rec.chemical.name + "'");
        records.push_back(std::move(rec));
    }
    return records;
}

void save_database(const std::string& path, const std::vector<ChemicalRecord>& records) {
    std::ofstream out(path);
    if (!out) throw io_error("cannot write chemical database '" + path + "'");
    out << kHeader << "\n";
    for (const auto& rec : records) {
        out << rec.chemical.name << ',' << format_cell(rec.chemical.mw) << ','
            << format_cell(rec.chemical.log_kow) << ',' << format_cell(rec.chemical.t_lag);
        for (int l = 0; l < geometry::kLayerCount; ++l) out << ',' << format_cell(rec.k[l]);
        for (int l = 0; l < geometry::kLayerCount; ++l) out << ',' << format_cell(rec.d[l]);
        out << "\n";
    }
}

const ChemicalRecord& find_chemical(const std::vector<ChemicalRecord>& db,
                                    const std::string& name) {
    for (const auto& rec : db)
        if (rec.chemical.name == name) return rec;
    throw config_error("unknown chemical '" + name + "'");
}

LayerParams resolve_params(const ChemicalRecord& record, const geometry::LayerProfile& profile) {
    record.chemical.validate();
    profile.validate();

    LayerParams out;
    for (int l = 0; l < geometry::kLayerCount; ++l) {
        if (record.k[l]) {
            out.k[l] = *record.k[l];
            out.k_provenance[l] = Provenance::database;
        } else {
            out.k[l] = 1.0;
            out.k_provenance[l] = Provenance::defaulted;
        }
    }

    const double dfree = convert_diffusivity(d_free(record.chemical.mw));
    auto fill_dfree = [&](SkinLayer layer) {
        const int l = static_cast<int>(layer);
        if (record.d[l]) {
            out.d[l] = *record.d[l];
            out.d_provenance[l] = Provenance::database;
        } else {
            out.d[l] = dfree;
            out.d_provenance[l] = Provenance::estimated_dfree;
        }
    };
    fill_dfree(SkinLayer::VE);
    fill_dfree(SkinLayer::DE);
    // Thin well-mixed patch: reuse the free-diffusion estimate.
    fill_dfree(SkinLayer::DEPOS);

    const int sc = static_cast<int>(SkinLayer::SC);
    if (record.d[sc]) {
        out.d[sc] = *record.d[sc];
        out.d_provenance[sc] = Provenance::database;
    } else if (record.chemical.t_lag) {
        out.d[sc] = d_sc_from_lag(profile.h_sc, *record.chemical.t_lag);
        out.d_provenance[sc] = Provenance::estimated_dsc;
    } else {
        throw config_error("chemical '" + record.chemical.name +
                           "': d_sc cannot be resolved (no database value and no t_lag_h)");
    }

    out.validate();
    return out;
}

} // namespace dermadiff::chem
