#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace maxcoord {

/// Base class of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidQuaternion : public Error {
 public:
  using Error::Error;
};

/// Raised when |omega| reaches 2/dt; the discrete quaternion update has no
/// unit-norm solution at that step size.
class AngularVelocityOverflow : public Error {
 public:
  using Error::Error;
};

class DegenerateAxis : public Error {
 public:
  using Error::Error;
};

/// Inconsistent mechanism description (dangling references, bad parameters).
class ModelError : public Error {
 public:
  using Error::Error;
};

class SingularSystem : public Error {
 public:
  SingularSystem(int node, const std::string& what)
      : Error(what), node_(node) {}
  [[nodiscard]] int node() const { return node_; }

 private:
  int node_;
};

class InfeasiblePoint : public Error {
 public:
  using Error::Error;
};

class LineSearchFailure : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(std::size_t line, std::string field, const std::string& what)
      : Error(what), line_(line), field_(std::move(field)) {}
  [[nodiscard]] std::size_t line() const { return line_; }
  [[nodiscard]] const std::string& field() const { return field_; }

 private:
  std::size_t line_;
  std::string field_;
};

class IoError : public Error {
 public:
  IoError(std::string path, const std::string& what)
      : Error(what), path_(std::move(path)) {}
  [[nodiscard]] const std::string& path() const { return path_; }

 private:
  std::string path_;
};

}  // namespace maxcoord
