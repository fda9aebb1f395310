#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace dpgraph {

// Bad input data: unreadable files, malformed records, graphs that cannot be
// measured. The CLI maps these to exit code 2.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public DataError {
 public:
  ParseError(const std::string& source, std::size_t line, const std::string& what)
      : DataError(source + ":" + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// Precondition violations on library calls use std::invalid_argument;
// privacy-parameter combinations that cannot meet the claimed budget use
// InfeasibleParams so callers can tell the two apart.
class InfeasibleParams : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace dpgraph
