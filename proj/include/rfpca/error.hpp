#ifndef RFPCA_ERROR_HPP
#define RFPCA_ERROR_HPP

#include <cstddef>
#include <stdexcept>
#include <string>

namespace rfpca {

enum class ErrorKind {
  Domain,
  DimensionMismatch,
  NotPositiveDefinite,
  InsufficientData,
  DegenerateData,
  SingularScatter,
  UnsupportedModel,
  Io,
  Format,
};

/// Base exception for every failure raised by the library.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

  /// True for failures caused by the numerics rather than by bad input.
  bool is_numerical() const noexcept {
    return kind_ == ErrorKind::NotPositiveDefinite ||
           kind_ == ErrorKind::DegenerateData ||
           kind_ == ErrorKind::SingularScatter;
  }

 private:
  ErrorKind kind_;
};

/// Cholesky factorization failed; `pivot()` is the zero-based index of the
/// first non-positive pivot.
class NotPositiveDefinite : public Error {
 public:
  NotPositiveDefinite(std::ptrdiff_t pivot, const std::string& context)
      : Error(ErrorKind::NotPositiveDefinite,
              context + ": matrix is not positive definite (pivot " +
                  std::to_string(pivot) + ")"),
        pivot_(pivot) {}

  std::ptrdiff_t pivot() const noexcept { return pivot_; }

 private:
  std::ptrdiff_t pivot_;
};

/// Malformed input file; `line()` is one-based, 0 when not line-specific.
class FormatError : public Error {
 public:
  FormatError(const std::string& path, std::size_t line, const std::string& msg)
      : Error(ErrorKind::Format,
              path + (line ? ":" + std::to_string(line) : std::string()) + ": " + msg),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace rfpca

#endif  // RFPCA_ERROR_HPP
