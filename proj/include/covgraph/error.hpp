#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace covgraph {

enum class ErrorKind {
  InvalidInput,
  DimensionMismatch,
  NotPositiveDefinite,
  SingularSystem,
  Precondition,
  NumericalFailure,
  Parse,
  SingularSubmatrix,
  CeilingExceeded,
  AllSolvesFailed,
};

std::string_view to_string(ErrorKind kind);

/// Every failure raised by the library. Carries the owning module so the
/// CLI can report "module: message" without string parsing.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, std::string module, const std::string& what)
      : std::runtime_error(what), kind_(kind), module_(std::move(module)) {}

  ErrorKind kind() const noexcept { return kind_; }
  const std::string& module() const noexcept { return module_; }

 private:
  ErrorKind kind_;
  std::string module_;
};

/// Raised by the deconvolution quadrature; keeps the best error estimate reached.
class NumericalFailure : public Error {
 public:
  NumericalFailure(const std::string& what, double achieved_error)
      : Error(ErrorKind::NumericalFailure, "deconv", what), achieved_error_(achieved_error) {}
  double achieved_error() const noexcept { return achieved_error_; }

 private:
  double achieved_error_;
};

}  // namespace covgraph
