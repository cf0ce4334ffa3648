#ifndef DERMADIFF_IO_HPP
#define DERMADIFF_IO_HPP

#include <string>
#include <vector>

#include "dermadiff/analysis.hpp"
#include "dermadiff/chem.hpp"
#include "dermadiff/geometry.hpp"
#include "dermadiff/sparse.hpp"

namespace dermadiff::io {

/// Write via a temporary file in the same directory plus rename.
void write_text_atomic(const std::string& path, const std::string& content);

/// Legacy ASCII VTK unstructured grid with an integer cell field "layer".
/// Optionally adds point data u (chemical potential) and cell data
/// concentration c = K*u averaged per triangle.
std::string vtk_mesh(const geometry::Mesh& mesh, const std::vector<double>* u = nullptr,
                     const chem::LayerParams* params = nullptr);

/// Mass series CSV, one row per output time. Header:
/// t_hours,m_depos,m_sc,m_ve,m_de,m_released,m_total,flux_bot
std::string series_csv(const analysis::MassSeries& series);

/// MatrixMarket coordinate format (general real).
std::string matrix_market(const sparse::CsrMatrix& a);
std::string matrix_market_diagonal(const std::vector<double>& d);

std::string format_double(double v); // shortest text that round-trips

} // namespace dermadiff::io

#endif
