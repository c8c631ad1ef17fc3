#include "covgraph/csv.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <vector>

namespace covgraph::csv {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

Error parse_error(std::size_t line, std::size_t col, const std::string& msg) {
  return Error(ErrorKind::Parse, "core_model",
               "line " + std::to_string(line) + ", column " + std::to_string(col) + ": " + msg);
}

double parse_cell(std::string_view cell, std::size_t line, std::size_t col) {
  cell = trim(cell);
  if (cell.empty()) throw parse_error(line, col, "empty cell");
  // from_chars rejects a leading '+'
  if (cell.front() == '+') cell.remove_prefix(1);
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
  if (ec != std::errc() || ptr != cell.data() + cell.size())
    throw parse_error(line, col, "non-numeric cell '" + std::string(cell) + "'");
  return value;
}

}  // namespace

Matrix parse_matrix(std::string_view text, const ReadOptions& opts) {
  std::vector<std::vector<double>> rows;
  std::size_t line_no = 0;
  bool header_skipped = !opts.skip_header;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    line = trim(line);
    if (line.empty() || line.front() == '#') continue;
    if (!header_skipped) {
      header_skipped = true;
      continue;
    }
    std::vector<double> row;
    std::size_t col = 1;
    while (true) {
      const auto comma = line.find(',');
      row.push_back(parse_cell(line.substr(0, comma), line_no, col));
      if (comma == std::string_view::npos) break;
      line.remove_prefix(comma + 1);
      ++col;
    }
    if (!rows.empty() && row.size() != rows.front().size())
      throw parse_error(line_no, row.size(),
                        "ragged row: expected " + std::to_string(rows.front().size()) + " columns, got " +
                            std::to_string(row.size()));
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw Error(ErrorKind::Parse, "core_model", "no numeric rows");
  Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j) m(Eigen::Index(i), Eigen::Index(j)) = rows[i][j];
  return m;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::InvalidInput, "core_model", "cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Matrix read_matrix(const std::filesystem::path& path, const ReadOptions& opts) {
  try {
    return parse_matrix(read_file(path), opts);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::Parse) throw;
    throw Error(ErrorKind::Parse, "core_model", path.string() + ": " + e.what());
  }
}

std::string format_matrix(const Matrix& m, bool with_schema_tag) {
  std::string out;
  if (with_schema_tag) {
    out += kSchemaTag;
    out += '\n';
  }
  char buf[64];
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) out += ',';
      auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), m(i, j));
      out.append(buf, ptr);
    }
    out += '\n';
  }
  return out;
}

void write_file_atomic(const std::filesystem::path& path, std::string_view content) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::InvalidInput, "core_model", "cannot write '" + tmp.string() + "'");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) throw Error(ErrorKind::InvalidInput, "core_model", "short write to '" + tmp.string() + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw Error(ErrorKind::InvalidInput, "core_model", "cannot rename onto '" + path.string() + "': " + ec.message());
  }
}

void write_matrix(const std::filesystem::path& path, const Matrix& m, bool with_schema_tag) {
  write_file_atomic(path, format_matrix(m, with_schema_tag));
}

}  // namespace covgraph::csv
