#include "dermadiff/io.hpp"

#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "dermadiff/errors.hpp"

namespace dermadiff::io {

std::string format_double(double v) {
    char buf[64];
    // %.17g always round-trips; try shorter forms first.
    for (int prec = 15; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof(buf), "%.*g", prec, v);
        double back = 0.0;
        std::sscanf(buf, "%lf", &back);
        if (back == v) return buf;
    }
    return buf;
}

void write_text_atomic(const std::string& path, const std::string& content) {
    namespace fs = std::filesystem;
    const fs::path target(path);
    if (target.has_parent_path()) {
        std::error_code ec;
        fs::create_directories(target.parent_path(), ec);
    }
    const fs::path tmp = target.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw io_error("cannot open '" + tmp.string() + "' for writing");
        out << content;
        if (!out) throw io_error("failed writing '" + tmp.string() + "'");
    }
    std::error_code ec;
    fs::rename(tmp, target, ec);
    if (ec) throw io_error("failed to move '" + tmp.string() + "' into place: " + ec.message());
}

std::string vtk_mesh(const geometry::Mesh& mesh, const std::vector<double>* u,
                     const chem::LayerParams* params) {
    std::ostringstream out;
    out << "# vtk DataFile Version 3.0\n";
    out << "skin mesh level " << mesh.refinement_level << "\n";
    out << "ASCII\nDATASET UNSTRUCTURED_GRID\n";
    out << "POINTS " << mesh.vertex_count() << " double\n";
    for (const auto& v : mesh.vertices)
        out << format_double(v.x) << ' ' << format_double(v.y) << " 0\n";
    const int nt = mesh.triangle_count();
    out << "CELLS " << nt << ' ' << 4 * nt << "\n";
    for (const auto& t : mesh.triangles)
        out << "3 " << t.v[0] << ' ' << t.v[1] << ' ' << t.v[2] << "\n";
    out << "CELL_TYPES " << nt << "\n";
    for (int t = 0; t < nt; ++t) out << "5\n";

    out << "CELL_DATA " << nt << "\n";
    out << "SCALARS layer int 1\nLOOKUP_TABLE default\n";
    for (const auto& t : mesh.triangles) out << static_cast<int>(t.layer) << "\n";
    if (u && params) {
        out << "SCALARS concentration double 1\nLOOKUP_TABLE default\n";
        for (const auto& t : mesh.triangles) {
            const double mean = ((*u)[t.v[0]] + (*u)[t.v[1]] + (*u)[t.v[2]]) / 3.0;
            out << format_double(params->partition(t.layer) * mean) << "\n";
        }
    }
    if (u) {
        out << "POINT_DATA " << mesh.vertex_count() << "\n";
        out << "SCALARS u double 1\nLOOKUP_TABLE default\n";
        for (double v : *u) out << format_double(v) << "\n";
    }
    return out.str();
}

std::string series_csv(const analysis::MassSeries& series) {
    std::ostringstream out;
    out << "t_hours,m_depos,m_sc,m_ve,m_de,m_released,m_total,flux_bot\n";
    for (std::size_t k = 0; k < series.size(); ++k) {
        out << format_double(series.times[k]);
        for (int l = 0; l < geometry::kLayerCount; ++l)
            out << ',' << format_double(series.layers[l][k]);
        out << ',' << format_double(series.released[k]);
        out << ',' << format_double(series.total(k));
        out << ',' << format_double(series.flux_bot[k]);
        out << "\n";
    }
    return out.str();
}

std::string matrix_market(const sparse::CsrMatrix& a) {
    std::ostringstream out;
    out << "%%MatrixMarket matrix coordinate real general\n";
    out << a.n << ' ' << a.n << ' ' << a.nnz() << "\n";
    for (int i = 0; i < a.n; ++i)
        for (int k = a.row_ptr[i]; k < a.row_ptr[i + 1]; ++k)
            out << (i + 1) << ' ' << (a.col[k] + 1) << ' ' << format_double(a.val[k]) << "\n";
    return out.str();
}

std::string matrix_market_diagonal(const std::vector<double>& d) {
    std::ostringstream out;
    const int n = static_cast<int>(d.size());
    out << "%%MatrixMarket matrix coordinate real general\n";
    out << n << ' ' << n << ' ' << n << "\n";
    for (int i = 0; i < n; ++i) out << (i + 1) << ' ' << (i + 1) << ' ' << format_double(d[i]) << "\n";
    return out.str();
}

} // namespace dermadiff::io
