#pragma once

// Plain comma-separated numeric matrices: one row per line, no header.
// Lines starting with '#' are comments (used for the schema tag).

#include <filesystem>
#include <string>
#include <string_view>

#include "covgraph/core.hpp"

namespace covgraph::csv {

inline constexpr std::string_view kSchemaTag = "# covgraph-csv v1";

struct ReadOptions {
  bool skip_header = false;  // drop the first non-comment line
};

Matrix parse_matrix(std::string_view text, const ReadOptions& opts = {});
Matrix read_matrix(const std::filesystem::path& path, const ReadOptions& opts = {});

/// Round-trip exact (max_digits10) formatting.
std::string format_matrix(const Matrix& m, bool with_schema_tag = true);
void write_matrix(const std::filesystem::path& path, const Matrix& m, bool with_schema_tag = true);

/// Writes to "<path>.tmp" and renames over path.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

std::string read_file(const std::filesystem::path& path);

}  // namespace covgraph::csv
