#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace infoprobe {

/// Base class for every error raised by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed CoNLL-U input. Carries the 1-based line number.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& detail, const std::string& source = "")
      : Error((source.empty() ? "line " : source + ":") + std::to_string(line) + ": " + detail),
        line_(line),
        detail_(detail) {}
  std::size_t line() const noexcept { return line_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  std::size_t line_;
  std::string detail_;
};

/// Bad magic, unsupported version, truncated payload, malformed .vec body.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Embeddings do not line up with the corpus they are loaded against.
class AlignmentError : public Error {
 public:
  using Error::Error;
};

class HashMismatchError : public AlignmentError {
 public:
  using AlignmentError::AlignmentError;
};

class CountMismatchError : public AlignmentError {
 public:
  using AlignmentError::AlignmentError;
};

/// Well-formed input that violates a semantic constraint (NaN, bad head index, ...).
class DataError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Bad arguments or configuration (empty counts, empty vocab, invalid ranges).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class SearchFailure : public Error {
 public:
  using Error::Error;
};

}  // namespace infoprobe
