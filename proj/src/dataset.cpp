#include "defi/dataset.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "defi/errors.hpp"

namespace defi {

Dataset::Dataset(Eigen::VectorXd y_in, Eigen::VectorXd x_in, Eigen::MatrixXd z_in)
    : y(std::move(y_in)), x(std::move(x_in)), z(std::move(z_in)) {
  validate();
}

void Dataset::validate() const {
  const long rows = y.size();
  if (rows < 1) throw ValidationError("dataset has no rows");
  if (x.size() != rows)
    throw ValidationError("y and x have different lengths (" + std::to_string(rows) +
                          " vs " + std::to_string(x.size()) + ")");
  if (z.cols() > 0 && z.rows() != rows)
    throw ValidationError("z has " + std::to_string(z.rows()) + " rows but y has " +
                          std::to_string(rows));
  if (!z_names.empty() && static_cast<long>(z_names.size()) != z.cols())
    throw ValidationError("z_names size does not match z column count");
  if (!y.allFinite() || !x.allFinite() || !z.allFinite())
    throw ValidationError("dataset contains non-finite values");
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_cell(const std::string& cell, long row, const std::string& column) {
  double v = 0.0;
  const char* begin = cell.data();
  const char* end = begin + cell.size();
  auto [ptr, ec] = std::from_chars(begin, end, v);
  if (ec != std::errc{} || ptr != end)
    throw CsvParseError("cell \"" + cell + "\" is not a number", row, column);
  if (!std::isfinite(v))
    throw CsvParseError("cell \"" + cell + "\" is not finite", row, column);
  return v;
}

}  // namespace

Dataset load_dataset(const std::string& path, const std::string& response,
                     const std::string& exposure) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("empty file: " + path);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const std::vector<std::string> header = split_csv_line(line);
  const long ncol = static_cast<long>(header.size());
  if (ncol < 2) throw ValidationError("header must contain at least two columns");

  long y_idx = -1, x_idx = -1;
  for (long j = 0; j < ncol; ++j) {
    if (header[j] == response) y_idx = j;
    if (header[j] == exposure) x_idx = j;
  }
  if (y_idx < 0) throw MissingColumnError(response);
  if (x_idx < 0) throw MissingColumnError(exposure);
  if (y_idx == x_idx)
    throw ValidationError("response and exposure refer to the same column \"" + response +
                          "\"");

  std::vector<std::vector<double>> rows;
  long data_row = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    ++data_row;
    const std::vector<std::string> cells = split_csv_line(line);
    if (static_cast<long>(cells.size()) != ncol)
      throw CsvParseError("expected " + std::to_string(ncol) + " cells, found " +
                              std::to_string(cells.size()),
                          data_row, header.front());
    std::vector<double> parsed(ncol);
    for (long j = 0; j < ncol; ++j) parsed[j] = parse_cell(cells[j], data_row, header[j]);
    rows.push_back(std::move(parsed));
  }
  const long n = static_cast<long>(rows.size());
  if (n < 1) throw ValidationError("file has a header but no data rows: " + path);

  Dataset ds;
  ds.y.resize(n);
  ds.x.resize(n);
  ds.z.resize(n, ncol - 2);
  ds.y_name = response;
  ds.x_name = exposure;
  for (long j = 0; j < ncol; ++j)
    if (j != y_idx && j != x_idx) ds.z_names.push_back(header[j]);
  for (long i = 0; i < n; ++i) {
    ds.y[i] = rows[i][y_idx];
    ds.x[i] = rows[i][x_idx];
    long k = 0;
    for (long j = 0; j < ncol; ++j)
      if (j != y_idx && j != x_idx) ds.z(i, k++) = rows[i][j];
  }
  ds.validate();
  return ds;
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_dataset_csv(const Dataset& ds, const std::string& path) {
  ds.validate();
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot open file for writing: " + path);
  out << ds.y_name << ',' << ds.x_name;
  for (long j = 0; j < ds.p(); ++j) {
    out << ',';
    out << (static_cast<long>(ds.z_names.size()) == ds.p() ? ds.z_names[j]
                                                           : "z" + std::to_string(j + 1));
  }
  out << '\n';
  for (long i = 0; i < ds.n(); ++i) {
    out << format_double(ds.y[i]) << ',' << format_double(ds.x[i]);
    for (long j = 0; j < ds.p(); ++j) out << ',' << format_double(ds.z(i, j));
    out << '\n';
  }
  if (!out) throw ValidationError("write failed: " + path);
}

std::pair<Eigen::MatrixXd, Eigen::VectorXd> standardize_columns(const Eigen::MatrixXd& m) {
  const long n = m.rows();
  const long p = m.cols();
  if (n < 1) throw ValidationError("standardize_columns requires at least one row");
  Eigen::MatrixXd scaled(n, p);
  Eigen::VectorXd scales(p);
  for (long j = 0; j < p; ++j) {
    const double mean = m.col(j).mean();
    const double ms = m.col(j).squaredNorm() / n;   // mean square, scaling target
    const double var = ms - mean * mean;            // centered variance, degeneracy check
    if (!(var > 1e-20 * std::max(ms, 1e-300))) throw DegenerateColumnError(j);
    const double scale = 1.0 / std::sqrt(ms);
    scales[j] = scale;
    scaled.col(j) = m.col(j) * scale;
  }
  return {std::move(scaled), std::move(scales)};
}

std::pair<Eigen::MatrixXd, Eigen::VectorXd> scale_columns_allow_zero(const Eigen::MatrixXd& m) {
  const long n = m.rows();
  if (n < 1) throw ValidationError("scale_columns_allow_zero requires at least one row");
  Eigen::MatrixXd out(n, m.cols());
  Eigen::VectorXd scales = Eigen::VectorXd::Ones(m.cols());
  const double sqrt_n = std::sqrt(static_cast<double>(n));
  for (long j = 0; j < m.cols(); ++j) {
    const double norm = m.col(j).norm();
    if (norm > 1e-10 * sqrt_n) {
      scales[j] = sqrt_n / norm;
      out.col(j) = m.col(j) * scales[j];
    } else {
      out.col(j) = m.col(j);
    }
  }
  return {std::move(out), std::move(scales)};
}

}  // namespace defi
