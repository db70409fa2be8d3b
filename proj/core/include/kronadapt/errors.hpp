// Copyright (c) 2026 The kronadapt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace kronadapt {

/// Base class for every error thrown by this library.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Operand shapes do not conform (matvec, matmul, unvec, forward pass, ...).
class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

/// Materializing a Kronecker product would exceed the element budget.
class SizeOverflow : public Error {
 public:
  using Error::Error;
};

/// Kronecker factor shape does not divide the host layer dimensions.
class InvalidFactorization : public Error {
 public:
  explicit InvalidFactorization(const std::string& what, std::string layer = "")
      : Error(what), layer_(std::move(layer)) {}
  const std::string& layer() const noexcept { return layer_; }

 private:
  std::string layer_;
};

/// Low-rank adapter rank exceeds min(d, h).
class InvalidRank : public Error {
 public:
  using Error::Error;
};

/// Relative module change is undefined for an all-zero baseline.
class ZeroBaseNorm : public Error {
 public:
  using Error::Error;
};

/// Cosine similarity is undefined for a zero-norm vector.
class ZeroNorm : public Error {
 public:
  using Error::Error;
};

class EmptySet : public Error {
 public:
  using Error::Error;
};

/// Paired scoring requires equally sized sets.
class LengthMismatch : public Error {
 public:
  using Error::Error;
};

/// A forward pass produced NaN or Inf.
class NonFinite : public Error {
 public:
  using Error::Error;
};

/// Training loss left the finite/bounded regime.
class DivergenceDetected : public Error {
 public:
  using Error::Error;
};

/// A file failed to parse or violated its schema.
class ParseError : public Error {
 public:
  using Error::Error;
};

class DuplicateLayer : public Error {
 public:
  using Error::Error;
};

class NonPositiveDim : public Error {
 public:
  using Error::Error;
};

class SchemaVersionMismatch : public Error {
 public:
  using Error::Error;
};

}  // namespace kronadapt
