#pragma once

#include <stdexcept>
#include <string>

namespace dhn {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Instance or config document does not match the schema.
class SchemaError : public Error {
 public:
  using Error::Error;
};

/// Network topology violates a structural invariant.
class GraphError : public Error {
 public:
  using Error::Error;
};

class UnknownNode : public Error {
 public:
  using Error::Error;
};

class DegenerateVelocity : public Error {
 public:
  using Error::Error;
};

class DiscriminantViolation : public Error {
 public:
  using Error::Error;
};

class PoleEncountered : public Error {
 public:
  using Error::Error;
};

class NoRealRoot : public Error {
 public:
  using Error::Error;
};

/// Propagation failed at grid index `k`.
class PropagationError : public Error {
 public:
  PropagationError(const std::string& what, int k) : Error(what), k_(k) {}
  int index() const { return k_; }

 private:
  int k_;
};

class AssemblyError : public Error {
 public:
  using Error::Error;
};

class CoarsenBelowReference : public Error {
 public:
  using Error::Error;
};

class SolveFailed : public Error {
 public:
  SolveFailed(const std::string& what, int outer, int inner)
      : Error(what), outer_(outer), inner_(inner) {}
  int outer() const { return outer_; }
  int inner() const { return inner_; }

 private:
  int outer_;
  int inner_;
};

}  // namespace dhn
