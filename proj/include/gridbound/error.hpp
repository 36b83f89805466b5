#pragma once

#include <stdexcept>
#include <string>

namespace gridbound {

/// Base class for every domain error raised by the library. The CLI maps
/// these to exit code 1.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Malformed input files or shapes that do not line up.
class InputError : public Error {
 public:
  explicit InputError(const std::string& what) : Error(what) {}
};

/// A numerical argument outside its admissible range.
class RangeError : public Error {
 public:
  explicit RangeError(const std::string& what) : Error(what) {}
};

/// Network topology problems (e.g. islanded buses).
class TopologyError : public Error {
 public:
  explicit TopologyError(const std::string& what) : Error(what) {}
};

/// A dispatch problem that could not be solved to optimality.
class SolveError : public Error {
 public:
  explicit SolveError(const std::string& what) : Error(what) {}
};

}  // namespace gridbound
