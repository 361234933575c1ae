#pragma once

#include <stdexcept>
#include <string>

namespace spikelab {

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid geometric request (point outside the tubular neighbourhood, bad curve, ...).
class GeometryError : public Error {
 public:
  using Error::Error;
};

/// Mesh generation refused or failed.
class MeshError : public Error {
 public:
  using Error::Error;
};

/// A numerical solve did not reach its tolerance or a precondition failed.
class SolverError : public Error {
 public:
  using Error::Error;
};

/// Experiment configuration rejected during validation.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace spikelab
