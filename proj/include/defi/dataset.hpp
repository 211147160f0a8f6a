#pragma once
#include <Eigen/Dense>
#include <string>
#include <utility>
#include <vector>

namespace defi {

// A conditional-independence testing problem: response y, exposure x, and a
// matrix of conditioning covariates z (possibly with zero columns).
struct Dataset {
  Eigen::VectorXd y;
  Eigen::VectorXd x;
  Eigen::MatrixXd z;
  std::string y_name = "y";
  std::string x_name = "x";
  std::vector<std::string> z_names;  // empty, or one name per z column

  Dataset() = default;
  Dataset(Eigen::VectorXd y_in, Eigen::VectorXd x_in, Eigen::MatrixXd z_in);

  long n() const { return y.size(); }
  long p() const { return z.cols(); }

  // Throws ValidationError on size mismatch, empty data, or non-finite values.
  void validate() const;
};

// Reads a comma-separated file with a header row.  `response` and `exposure`
// name the y and x columns; every other column becomes part of z in file
// order.  All cells must parse as finite doubles.
Dataset load_dataset(const std::string& path, const std::string& response,
                     const std::string& exposure);

// Inverse of load_dataset: header then rows, doubles printed with %.17g so a
// write/read round trip reproduces every value bit for bit.
void write_dataset_csv(const Dataset& ds, const std::string& path);

// Rescales each column to root-mean-square 1 (scale_j = sqrt(n)/||col_j||)
// and returns (scaled matrix, scales).  Columns are not centered.  A column
// whose *centered* variance is numerically zero (constant column) cannot
// carry signal and raises DegenerateColumnError naming its index.
std::pair<Eigen::MatrixXd, Eigen::VectorXd> standardize_columns(const Eigen::MatrixXd& m);

// Rescales columns to root-mean-square 1 like standardize_columns but keeps
// numerically zero columns as-is (scale 1) instead of erroring.  Used for
// internally constructed designs (weighted or projected) where a zeroed
// column is legitimate and the lasso solver simply skips it.
std::pair<Eigen::MatrixXd, Eigen::VectorXd> scale_columns_allow_zero(const Eigen::MatrixXd& m);

// %.17g serialization used for all CSV output.
std::string format_double(double v);

}  // namespace defi
