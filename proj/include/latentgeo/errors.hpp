#pragma once

#include <stdexcept>
#include <string>

namespace latentgeo {

class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Shape/dimension mismatches; message names the op and both shapes.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// File and stream failures; message carries the path and byte offset when known.
class IoError : public Error {
 public:
  using Error::Error;
};

// Invalid configuration or arguments.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Training produced NaN/Inf; aborts the run.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

}  // namespace latentgeo
