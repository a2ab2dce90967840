#pragma once

#include <stdexcept>
#include <string>

namespace varlab {

/// Base class for everything thrown by this library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Bad input: violated precondition, malformed config or fixture.
/// The CLI maps this to exit code 2.
struct ValidationError : Error {
  explicit ValidationError(const std::string& what, std::string field = {},
                           int line = 0)
      : Error(what), field(std::move(field)), line(line) {}
  std::string field;
  int line;  // 1-based config line, 0 if not applicable
};

/// An operator failed the certificate required by the experiment kind.
/// The CLI maps this to exit code 3.
struct CertificateError : Error {
  explicit CertificateError(const std::string& what, std::string certificate)
      : Error(what), certificate(std::move(certificate)) {}
  std::string certificate;
};

/// A truncated sum or integral has a non-negligible tail. Exit code 3.
struct TailError : Error {
  using Error::Error;
};

/// Overflow or iterative non-convergence.
struct NumericError : Error {
  using Error::Error;
};

}  // namespace varlab
