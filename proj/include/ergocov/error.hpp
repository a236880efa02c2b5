#pragma once

#include <stdexcept>
#include <string>

namespace ergocov {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// All target samples coincide, or fewer than two samples were supplied.
class DegenerateDomain : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& source, std::size_t line, const std::string& what)
      : Error(source + ":" + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class EmptyInput : public Error {
 public:
  using Error::Error;
};

class InvalidSchedule : public Error {
 public:
  using Error::Error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Objective or gradient became non-finite and could not be recovered.
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace ergocov
