#pragma once

#include <iosfwd>

namespace covgraph::cli {

inline constexpr const char* kEdgesSchema = "covgraph-edges v1";
inline constexpr const char* kReportSchema = "covgraph-report v1";

/// Exit codes: 0 success, 1 runtime error (one JSON object on err), 2 usage error.
int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int dispatch(int argc, const char* const* argv);

}  // namespace covgraph::cli
