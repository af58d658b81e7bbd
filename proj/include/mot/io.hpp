// Plain-text file I/O: dense CSV matrices (no header), single-column
// marginals, 0/1 mask grids, and solver trace CSVs. All parsing and
// formatting is locale-independent; doubles are written with 17 significant
// digits so values round-trip through text exactly.
#pragma once

#include <filesystem>
#include <span>
#include <string>

#include "mot/marginal.hpp"
#include "mot/solvers.hpp"
#include "mot/support_mask.hpp"
#include "mot/types.hpp"

namespace mot {

std::string format_double(double value);

Matrix read_matrix_csv(const std::filesystem::path& path);
void write_matrix_csv(const std::filesystem::path& path, const Matrix& m);

Vector read_vector_csv(const std::filesystem::path& path);
void write_vector_csv(const std::filesystem::path& path, const Vector& v);

Marginal read_marginal_csv(const std::filesystem::path& path);

// Text grid, one row per line, each cell a single 0 or 1 character
// (whitespace and commas between cells are tolerated when reading).
SupportMask read_mask(const std::filesystem::path& path);
void write_mask(const std::filesystem::path& path, const SupportMask& mask);

// Header `iter,elapsed_sec,cost,grad_norm,step_size`; unset optionals are
// written as empty cells.
void write_trace_csv(const std::filesystem::path& path,
                     std::span<const TracePoint> trace);

}  // namespace mot
