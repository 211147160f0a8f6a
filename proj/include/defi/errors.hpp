#pragma once
// Error taxonomy.  Two families map onto the CLI exit codes: bad inputs
// (ValidationError, exit 2) and numerical breakdown of an otherwise valid
// problem (NumericError, exit 3).
#include <stdexcept>
#include <string>

namespace defi {

class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& what)
      : std::runtime_error(what), kind_(std::move(kind)) {}
  // Stable machine-readable tag, e.g. "csv-parse" or "no-crossing".
  const std::string& kind() const { return kind_; }

 private:
  std::string kind_;
};

struct ValidationError : Error {
  using Error::Error;
  explicit ValidationError(const std::string& what) : Error("validation", what) {}
};

struct NumericError : Error {
  using Error::Error;
  explicit NumericError(const std::string& what) : Error("numeric", what) {}
};

// --- validation ---

struct CsvParseError : ValidationError {
  CsvParseError(const std::string& what, long row, const std::string& column)
      : ValidationError("csv-parse", what + " (data row " + std::to_string(row) +
                                         ", column \"" + column + "\")") {}
};

struct MissingColumnError : ValidationError {
  explicit MissingColumnError(const std::string& name)
      : ValidationError("missing-column", "column \"" + name + "\" not found in header") {}
};

struct DegenerateColumnError : ValidationError {
  explicit DegenerateColumnError(long index)
      : ValidationError("degenerate-column",
                        "column " + std::to_string(index) +
                            " has zero empirical variance and cannot be standardized") {}
};

// --- numeric ---

struct RankError : NumericError {
  RankError(long rank, long cols)
      : NumericError("rank-deficient", "design is rank deficient (numerical rank " +
                                           std::to_string(rank) + " of " +
                                           std::to_string(cols) + " columns)") {}
};

struct DegenerateResidualError : NumericError {
  explicit DegenerateResidualError(const std::string& what)
      : NumericError("degenerate-residual", what) {}
};

struct ConvergenceError : NumericError {
  explicit ConvergenceError(const std::string& what) : NumericError("no-convergence", what) {}
};

struct SeparationError : NumericError {
  explicit SeparationError(const std::string& what) : NumericError("separation", what) {}
};

struct SingularHessianError : NumericError {
  explicit SingularHessianError(const std::string& what)
      : NumericError("singular-hessian", what) {}
};

struct NoCrossingError : NumericError {
  explicit NoCrossingError(const std::string& what) : NumericError("no-crossing", what) {}
};

}  // namespace defi
