//
// Project Aromma - Copyright 2026 The Aromma Authors.
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace aromma {

class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Tensor rank/extent violations (matmul inner dims, bias widths, ...).
class ShapeError : public Error {
public:
  using Error::Error;
};

// SMILES grammar violations, with the byte offset of the offending token.
class ParseError : public Error {
public:
  enum class Kind { UnbalancedBracket, UnpairedRingBond, UnknownSymbol };

  ParseError(Kind kind, std::size_t pos, const std::string& what)
      : Error(what + " at position " + std::to_string(pos)), kind_(kind), pos_(pos) {}

  Kind kind() const { return kind_; }
  std::size_t pos() const { return pos_; }

private:
  Kind kind_;
  std::size_t pos_;
};

// Malformed input files (CSV/TSV schema, column counts, non-numeric cells).
class FormatError : public Error {
public:
  explicit FormatError(const std::string& what, long row = -1)
      : Error(row >= 0 ? what + " (row " + std::to_string(row) + ")" : what), row_(row) {}

  long row() const { return row_; }

private:
  long row_ = -1;
};

// Dataset/teacher/fold level contract violations: empty datasets, missing
// teacher rows, fold count mismatches, unknown label names.
class DataError : public Error {
public:
  using Error::Error;
};

// Invalid or contradictory run configuration.
class ConfigError : public Error {
public:
  using Error::Error;
};

// Runtime numeric contract violations: all-masked softmax rows, non-scalar
// losses, non-finite values surfaced by debug checks.
class NumericError : public Error {
public:
  using Error::Error;
};

}  // namespace aromma
