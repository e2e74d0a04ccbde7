#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace pfgsynth {

/// Base class of every error raised by the library. The CLI maps any Error
/// to exit status 1.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class MalformedModel : public Error {
public:
  using Error::Error;
};

class IncompleteAssignment : public Error {
public:
  using Error::Error;
};

/// State space exceeds the enumeration cap.
class TooLarge : public Error {
public:
  using Error::Error;
};

class LoadError : public Error {
public:
  using Error::Error;
};

class QueryError : public Error {
public:
  using Error::Error;
};

class ParamError : public Error {
public:
  using Error::Error;
};

/// A learned factor whose potentials are all zero.
class DegenerateFactor : public Error {
public:
  using Error::Error;
};

/// Gibbs full conditional with no positive entry.
class ZeroSupport : public Error {
public:
  using Error::Error;
};

class CiTestError : public Error {
public:
  using Error::Error;
};

class ParseError : public Error {
public:
  ParseError(std::size_t line, const std::string& what);
  std::size_t line() const { return line_; }

private:
  std::size_t line_;
};

} // namespace pfgsynth
