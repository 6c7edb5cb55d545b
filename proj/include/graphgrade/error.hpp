#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace graphgrade {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// Malformed input. `line` is 1-based when the source is line oriented, 0 otherwise.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line = 0) : Error(what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Dangling reference or duplicate identity inside a loaded artifact.
class IntegrityError : public Error {
 public:
  using Error::Error;
};

/// Transport or protocol failure talking to an LLM or embedding service.
class ClientError : public Error {
 public:
  using Error::Error;
};

}  // namespace graphgrade
