#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace cfdecomp {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input text. row() is 1-based and counts the header as row 1.
class ParseError : public Error {
 public:
  ParseError(const std::string& message, std::size_t row)
      : Error("row " + std::to_string(row) + ": " + message), row_(row) {}
  std::size_t row() const { return row_; }

 private:
  std::size_t row_;
};

// Well-formed input that violates a documented precondition or invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Estimation failed (singular system, degenerate sample, no convergence).
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace cfdecomp
