#pragma once

#include <stdexcept>
#include <string>

namespace distla {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Shape, tag or argument violation detected before any work is done.
class UsageError : public Error {
public:
  using Error::Error;
};

/// Communication failure: timeout, peer disconnect, aborted world.
class TransportError : public Error {
public:
  using Error::Error;
};

class SingularMatrixError : public Error {
public:
  using Error::Error;
};

class ConvergenceError : public Error {
public:
  using Error::Error;
};

/// Malformed numeric table.  Line numbers are 1-based physical file lines.
class ParseError : public Error {
public:
  ParseError(const std::string& what, int line, int column = 0)
      : Error(what), line_(line), column_(column) {}
  int line() const { return line_; }
  int column() const { return column_; }

private:
  int line_;
  int column_;
};

} // namespace distla
