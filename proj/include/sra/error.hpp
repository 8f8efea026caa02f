#pragma once

#include <stdexcept>
#include <string>

namespace sra {

// Base class for everything this library throws on purpose. The CLI maps
// subclasses onto exit codes (usage=1, data/format=2, numeric=3).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tensor shapes do not line up for the requested operation.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// A configuration value or argument is out of its legal range.
class ParameterError : public Error {
 public:
  using Error::Error;
};

// An operation that needs at least one element got none.
class EmptyInputError : public Error {
 public:
  using Error::Error;
};

// Token id outside [0, V).
class VocabularyError : public Error {
 public:
  using Error::Error;
};

// Class label outside [0, K).
class LabelError : public Error {
 public:
  using Error::Error;
};

// A file does not match its declared format (bad magic, wrong column
// count, inconsistent dimensions, ...). Messages carry line numbers
// where applicable.
class FormatError : public Error {
 public:
  using Error::Error;
};

// The teacher oracle has no record for a requested sentence.
class CoverageError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// NaN/Inf where finite values are required, or a diverged run.
class NumericError : public Error {
 public:
  using Error::Error;
};

// A vector whose norm is below the 1e-12 floor of the cosine loss.
class DegenerateVectorError : public NumericError {
 public:
  using NumericError::NumericError;
};

}  // namespace sra
