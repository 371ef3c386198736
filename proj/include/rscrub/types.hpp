#ifndef RSCRUB_TYPES_HPP
#define RSCRUB_TYPES_HPP

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace rscrub {

template <typename Scalar> using MatrixX_t = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar> using VectorX_t = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Matrix = MatrixX_t<double>;
using Vector = VectorX_t<double>;
using Index = Eigen::Index;

// Sorted, duplicate-free row indices.
using IndexSet = std::vector<Index>;

using Flags = std::vector<bool>;

// A matrix with optional observation and column labels. Rows are observations.
struct DenseMatrix {
  Matrix values;
  std::vector<std::string> row_labels;
  std::vector<std::string> col_labels;

  Index rows() const { return values.rows(); }
  Index cols() const { return values.cols(); }
};

// ---------------------------------------------------------------------------
// Errors. Everything thrown by the library derives from Error.

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Violated precondition on an argument (shape, range, config value).
class PreconditionError : public Error {
 public:
  using Error::Error;
};

// Input is numerically degenerate for the requested operation (zero scale,
// singular covariance, all observations outlying, ...).
class DegenerateError : public Error {
 public:
  using Error::Error;
};

// Malformed input file. Line and column are 1-based; 0 means "not applicable".
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line = 0, std::size_t column = 0)
      : Error(what), line_(line), column_(column) {}
  std::size_t line() const { return line_; }
  std::size_t column() const { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

class EmptyFileError : public ParseError {
 public:
  explicit EmptyFileError(const std::string& path) : ParseError("empty file: " + path) {}
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Requested feature needs input that was not provided (e.g. spatial maps).
class UnsupportedError : public Error {
 public:
  using Error::Error;
};

// Error raised inside a named pipeline stage; what() is prefixed with the stage.
class StageError : public Error {
 public:
  StageError(std::string stage, const std::string& what)
      : Error(stage + ": " + what), stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

}  // namespace rscrub

#endif  // RSCRUB_TYPES_HPP
