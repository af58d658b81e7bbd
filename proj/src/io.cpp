#include "mot/io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <system_error>
#include <vector>

#include "mot/errors.hpp"

namespace mot {
namespace {

std::string location(const std::filesystem::path& path, std::size_t line) {
  return path.string() + ":" + std::to_string(line);
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string() + " for reading");
  return in;
}

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  return out;
}

double parse_double(std::string_view cell, const std::filesystem::path& path,
                    std::size_t line) {
  // Trim surrounding whitespace; from_chars itself accepts no leading blanks.
  while (!cell.empty() && (cell.front() == ' ' || cell.front() == '\t'))
    cell.remove_prefix(1);
  while (!cell.empty() &&
         (cell.back() == ' ' || cell.back() == '\t' || cell.back() == '\r'))
    cell.remove_suffix(1);
  double value = 0.0;
  const auto [ptr, ec] =
      std::from_chars(cell.data(), cell.data() + cell.size(), value);
  if (ec != std::errc{} || ptr != cell.data() + cell.size())
    throw ValidationError("bad number '" + std::string(cell) + "' at " +
                          location(path, line));
  return value;
}

std::vector<std::vector<double>> read_rows(const std::filesystem::path& path) {
  std::ifstream in = open_input(path);
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view rest = line;
    if (!rest.empty() && rest.back() == '\r') rest.remove_suffix(1);
    if (rest.empty()) continue;
    std::vector<double> row;
    while (true) {
      const std::size_t comma = rest.find(',');
      row.push_back(parse_double(rest.substr(0, comma), path, line_no));
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ValidationError("no data in " + path.string());
  return rows;
}

void write_cell(std::ostream& out, double value) { out << format_double(value); }

}  // namespace

std::string format_double(double value) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value,
                                       std::chars_format::general, 17);
  if (ec != std::errc{}) throw Error("double formatting failed");
  return std::string(buf, ptr);
}

Matrix read_matrix_csv(const std::filesystem::path& path) {
  const auto rows = read_rows(path);
  const std::size_t cols = rows.front().size();
  Matrix m(static_cast<Index>(rows.size()), static_cast<Index>(cols));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != cols)
      throw ValidationError("ragged row in " + path.string() + ": row " +
                            std::to_string(i + 1) + " has " +
                            std::to_string(rows[i].size()) + " cells, expected " +
                            std::to_string(cols));
    for (std::size_t j = 0; j < cols; ++j)
      m(static_cast<Index>(i), static_cast<Index>(j)) = rows[i][j];
  }
  return m;
}

void write_matrix_csv(const std::filesystem::path& path, const Matrix& m) {
  std::ofstream out = open_output(path);
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      if (j > 0) out << ',';
      write_cell(out, m(i, j));
    }
    out << '\n';
  }
  if (!out) throw Error("write failed for " + path.string());
}

Vector read_vector_csv(const std::filesystem::path& path) {
  const auto rows = read_rows(path);
  Vector v(static_cast<Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != 1)
      throw ValidationError("expected a single column in " + path.string() +
                            ", row " + std::to_string(i + 1) + " has " +
                            std::to_string(rows[i].size()) + " cells");
    v(static_cast<Index>(i)) = rows[i][0];
  }
  return v;
}

void write_vector_csv(const std::filesystem::path& path, const Vector& v) {
  std::ofstream out = open_output(path);
  for (Index i = 0; i < v.size(); ++i) {
    write_cell(out, v(i));
    out << '\n';
  }
  if (!out) throw Error("write failed for " + path.string());
}

Marginal read_marginal_csv(const std::filesystem::path& path) {
  return Marginal(read_vector_csv(path));
}

SupportMask read_mask(const std::filesystem::path& path) {
  std::ifstream in = open_input(path);
  std::vector<std::vector<bool>> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::vector<bool> row;
    for (char c : line) {
      if (c == '0')
        row.push_back(false);
      else if (c == '1')
        row.push_back(true);
      else if (c == ' ' || c == '\t' || c == ',' || c == '\r')
        continue;
      else
        throw ValidationError(std::string("bad mask character '") + c +
                              "' at " + location(path, line_no));
    }
    if (!row.empty()) rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ValidationError("no mask rows in " + path.string());
  const std::size_t cols = rows.front().size();
  BoolArray allowed(static_cast<Index>(rows.size()), static_cast<Index>(cols));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != cols)
      throw ValidationError("ragged mask row in " + path.string() + ": row " +
                            std::to_string(i + 1));
    for (std::size_t j = 0; j < cols; ++j)
      allowed(static_cast<Index>(i), static_cast<Index>(j)) = rows[i][j];
  }
  return SupportMask(std::move(allowed));
}

void write_mask(const std::filesystem::path& path, const SupportMask& mask) {
  std::ofstream out = open_output(path);
  const BoolArray& allowed = mask.array();
  for (Index i = 0; i < allowed.rows(); ++i) {
    for (Index j = 0; j < allowed.cols(); ++j) out << (allowed(i, j) ? '1' : '0');
    out << '\n';
  }
  if (!out) throw Error("write failed for " + path.string());
}

void write_trace_csv(const std::filesystem::path& path,
                     std::span<const TracePoint> trace) {
  std::ofstream out = open_output(path);
  out << "iter,elapsed_sec,cost,grad_norm,step_size\n";
  for (const TracePoint& p : trace) {
    out << p.iter << ',' << format_double(p.elapsed_sec) << ','
        << format_double(p.cost) << ',';
    if (p.grad_norm) out << format_double(*p.grad_norm);
    out << ',';
    if (p.step_size) out << format_double(*p.step_size);
    out << '\n';
  }
  if (!out) throw Error("write failed for " + path.string());
}

}  // namespace mot
