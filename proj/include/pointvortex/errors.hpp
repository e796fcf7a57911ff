#pragma once

#include <stdexcept>
#include <string>

namespace pv {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An argument lies outside the domain of the operation (r <= 0, point outside the disc, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Invalid state or violated precondition (sizes, empty subsets, bad options).
class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// Two vortices closer than the configured distance floor: the state has already collapsed.
class SingularConfiguration : public Error {
 public:
  using Error::Error;
};

class NeutralCluster : public Error {
 public:
  using Error::Error;
};

class SizeLimit : public Error {
 public:
  using Error::Error;
};

/// The record did not terminate by collapse.
class NoCollapse : public Error {
 public:
  using Error::Error;
};

class BracketFailure : public Error {
 public:
  using Error::Error;
};

/// Two closed forms that must agree did not.
class Inconsistency : public Error {
 public:
  using Error::Error;
};

class SignError : public Error {
 public:
  using Error::Error;
};

/// The requested orientation produces an expanding, not a collapsing, self-similar solution.
class ExpandingSolution : public Error {
 public:
  using Error::Error;
};

class InsufficientSamples : public Error {
 public:
  using Error::Error;
};

/// Intensities violate the non-neutral sub-clusters hypothesis (A0 = 0).
class DegenerateIntensities : public Error {
 public:
  using Error::Error;
};

/// Malformed or out-of-contract scenario input.
class SchemaError : public Error {
 public:
  using Error::Error;
};

}  // namespace pv
