// Command-line front end: conditional-independence tests, confidence
// intervals, and the Monte Carlo harness.  All results are printed as
// single-line JSON on stdout; failures produce a one-line error object on
// stderr and a nonzero exit code (2 for bad input, 3 for numeric trouble).

#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "defi/ci.hpp"
#include "defi/dataset.hpp"
#include "defi/def_test.hpp"
#include "defi/errors.hpp"
#include "defi/family.hpp"
#include "defi/glm.hpp"
#include "defi/ols.hpp"
#include "defi/sim.hpp"
#include "defi/sqrt_lasso.hpp"
#include "defi/test_result.hpp"

namespace {

// Schema for every JSON document the CLI can emit.  The same text is shipped
// in schema/defi_output.schema.json; a test pins the two together.
constexpr const char* kOutputSchema = R"schema({
  "$schema": "http://json-schema.org/draft-07/schema#",
  "title": "defi CLI output",
  "version": "1",
  "oneOf": [
    {"$ref": "#/definitions/test_result"},
    {"$ref": "#/definitions/interval"},
    {"$ref": "#/definitions/simulate_summary"},
    {"$ref": "#/definitions/error"}
  ],
  "definitions": {
    "test_result": {
      "type": "object",
      "required": ["method", "statistic", "p_value", "n", "p", "diagnostics"],
      "properties": {
        "method": {"type": "string"},
        "statistic": {"type": "number"},
        "p_value": {"type": "number", "minimum": 0, "maximum": 1},
        "n": {"type": "integer"},
        "p": {"type": "integer"},
        "diagnostics": {"type": "object", "additionalProperties": {"type": "number"}}
      }
    },
    "interval": {
      "type": "object",
      "required": ["lower", "upper", "alpha", "evaluations", "bracket_expansions", "disconnected_flag"],
      "properties": {
        "lower": {"type": "number"},
        "upper": {"type": "number"},
        "alpha": {"type": "number"},
        "evaluations": {"type": "integer"},
        "bracket_expansions": {"type": "integer"},
        "disconnected_flag": {"type": "boolean"},
        "diagnostics": {"type": "object", "additionalProperties": {"type": "number"}}
      }
    },
    "simulate_summary": {
      "type": "object",
      "required": ["scenario", "method", "replicates", "rejection_rate_05", "coverage", "ks_vs_uniform", "seed", "failures"],
      "properties": {
        "scenario": {"type": "string"},
        "method": {"type": "string"},
        "replicates": {"type": "integer"},
        "rejection_rate_05": {"type": "number"},
        "coverage": {"type": ["number", "null"]},
        "ks_vs_uniform": {"type": "number"},
        "seed": {"type": "integer"},
        "failures": {"type": "integer"}
      }
    },
    "error": {
      "type": "object",
      "required": ["error"],
      "properties": {
        "error": {
          "type": "object",
          "required": ["kind", "message"],
          "properties": {"kind": {"type": "string"}, "message": {"type": "string"}}
        }
      }
    }
  }
}
)schema";

std::string json_escape(const std::string& s) {
  std::string out;
  out.reserve(s.size() + 8);
  for (char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\r': out += "\\r"; break;
      case '\t': out += "\\t"; break;
      default:
        if (static_cast<unsigned char>(c) < 0x20) {
          char buf[8];
          std::snprintf(buf, sizeof(buf), "\\u%04x", c);
          out += buf;
        } else {
          out += c;
        }
    }
  }
  return out;
}

// All numbers go out with 17 significant digits so reruns are diff-clean.
std::string json_number(double v) {
  if (std::isnan(v)) return "null";
  if (std::isinf(v)) return v > 0 ? "1e308" : "-1e308";
  return defi::format_double(v);
}

std::string json_diagnostics(const std::map<std::string, double>& m) {
  std::string out = "{";
  bool first = true;
  for (const auto& [key, value] : m) {
    if (!first) out += ",";
    first = false;
    out += "\"" + json_escape(key) + "\":" + json_number(value);
  }
  return out + "}";
}

void print_test_result(const defi::TestResult& r, std::size_t n,
                       std::size_t p) {
  std::cout << "{\"method\":\"" << json_escape(r.method) << "\""
            << ",\"statistic\":" << json_number(r.statistic)
            << ",\"p_value\":" << json_number(r.p_value) << ",\"n\":" << n
            << ",\"p\":" << p
            << ",\"diagnostics\":" << json_diagnostics(r.diagnostics) << "}\n";
}

void print_interval(const defi::Interval& iv) {
  std::cout << "{\"lower\":" << json_number(iv.lower)
            << ",\"upper\":" << json_number(iv.upper)
            << ",\"alpha\":" << json_number(iv.alpha)
            << ",\"evaluations\":" << iv.evaluations
            << ",\"bracket_expansions\":" << iv.bracket_expansions
            << ",\"disconnected_flag\":"
            << (iv.disconnected_flag ? "true" : "false")
            << ",\"diagnostics\":" << json_diagnostics(iv.diagnostics) << "}\n";
}

std::string summary_json(const defi::McSummary& s) {
  std::ostringstream out;
  out << "{\"scenario\":\"" << json_escape(s.scenario) << "\""
      << ",\"method\":\"" << json_escape(s.method) << "\""
      << ",\"replicates\":" << s.replicates
      << ",\"rejection_rate_05\":" << json_number(s.rejection_rate(0.05))
      << ",\"coverage\":"
      << (s.coverage ? json_number(*s.coverage) : std::string("null"))
      << ",\"ks_vs_uniform\":" << json_number(s.ks_vs_uniform)
      << ",\"seed\":" << s.seed << ",\"failures\":" << s.failures << "}";
  return out.str();
}

void print_error(const std::string& kind, const std::string& message) {
  std::cerr << "{\"error\":{\"kind\":\"" << json_escape(kind)
            << "\",\"message\":\"" << json_escape(message) << "\"}}\n";
}

// Single-column numeric CSV (header line ignored), for weight/contrast files.
Eigen::VectorXd load_vector_csv(const std::string& path) {
  Eigen::MatrixXd m = defi::load_matrix_csv(path);
  if (m.cols() != 1) {
    throw defi::ValidationError("expected a single-column file: " + path);
  }
  return m.col(0);
}

struct LambdaFlags {
  double fixed_a = 1.05;
  bool quantile = false;

  double resolve(int n, int p) const {
    int p_eff = std::max(p, 2);
    if (quantile) return defi::quantile_lambda(n, p_eff);
    return defi::default_lambda(n, p_eff, fixed_a);
  }
};

void add_lambda_flags(CLI::App* cmd, LambdaFlags* lf) {
  cmd->add_option("--lambda-a", lf->fixed_a,
                  "multiplier A in lambda = A*sqrt(2*log(p)/n)")
      ->capture_default_str();
  cmd->add_flag("--lambda-quantile", lf->quantile,
                "use the Gaussian-quantile lambda rule instead of fixed-a");
}

int run_test(const std::string& data_path, const std::string& response,
             const std::string& exposure, const std::string& method,
             const std::string& family_y, const std::string& family_x,
             const LambdaFlags& lf, const std::string& weights_y_path,
             const std::string& weights_x_path, bool glm_def_split) {
  static const std::vector<std::string> known = {
      "t-ols", "t-ols-exact", "t-glm", "t-def",
      "t-db",  "t-w-def",     "t-glm-def"};
  if (std::find(known.begin(), known.end(), method) == known.end()) {
    throw defi::ValidationError("unknown test method: " + method);
  }

  defi::Dataset ds = defi::load_dataset(data_path, response, exposure);
  const double lambda = lf.resolve(static_cast<int>(ds.n()),
                                   static_cast<int>(ds.p()));

  defi::TestResult result;
  if (method == "t-ols") {
    result = defi::t_ols(ds);
  } else if (method == "t-ols-exact") {
    result = defi::t_ols_exact(ds);
  } else if (method == "t-glm") {
    result = defi::t_glm(ds, defi::GlmFamily::parse(family_y));
  } else if (method == "t-def") {
    result = defi::t_def(ds, lambda, lambda);
  } else if (method == "t-db") {
    result = defi::t_db(ds, lambda, lambda);
  } else if (method == "t-w-def") {
    defi::WeightSpec w;
    w.d_y = weights_y_path.empty()
                ? Eigen::VectorXd::Ones(static_cast<Eigen::Index>(ds.n()))
                : load_vector_csv(weights_y_path);
    w.d_x = weights_x_path.empty()
                ? Eigen::VectorXd::Ones(static_cast<Eigen::Index>(ds.n()))
                : load_vector_csv(weights_x_path);
    result = defi::t_w_def(ds.y, ds.x, ds.z, w, lambda);
  } else {  // t-glm-def
    result = defi::t_glm_def(ds, defi::GlmFamily::parse(family_y),
                             defi::GlmFamily::parse(family_x), lambda,
                             glm_def_split);
  }
  print_test_result(result, ds.n(), ds.p());
  return 0;
}

int run_ci(const std::string& data_path, const std::string& response,
           const std::string& exposure, double alpha, const LambdaFlags& lf) {
  defi::Dataset ds = defi::load_dataset(data_path, response, exposure);
  const double lambda = lf.resolve(static_cast<int>(ds.n()),
                                   static_cast<int>(ds.p()));
  defi::Interval iv = defi::confidence_interval(ds, alpha, lambda, lambda);
  print_interval(iv);
  return 0;
}

int run_wbeta_ci(const std::string& data_path, const std::string& response,
                 const std::string& w_path, double alpha,
                 const LambdaFlags& lf) {
  // The data file holds the response plus every regressor; the contrast file
  // holds one weight per regressor, in file column order.
  std::ifstream in(data_path);
  if (!in) throw defi::ValidationError("cannot open file: " + data_path);
  std::string header;
  if (!std::getline(in, header)) {
    throw defi::CsvParseError("empty file: " + data_path, 0, 0);
  }
  if (!header.empty() && header.back() == '\r') header.pop_back();
  std::vector<std::string> names;
  {
    std::stringstream ss(header);
    std::string cell;
    while (std::getline(ss, cell, ',')) names.push_back(cell);
  }
  int y_idx = -1;
  for (std::size_t j = 0; j < names.size(); ++j) {
    if (names[j] == response) y_idx = static_cast<int>(j);
  }
  if (y_idx < 0) throw defi::MissingColumnError(response);

  Eigen::MatrixXd all = defi::load_matrix_csv(data_path);
  if (all.cols() != static_cast<Eigen::Index>(names.size())) {
    throw defi::CsvParseError("header/value column count mismatch", 1, 0);
  }
  if (all.cols() < 2) {
    throw defi::ValidationError("need at least one regressor column");
  }
  Eigen::VectorXd y = all.col(y_idx);
  Eigen::MatrixXd z(all.rows(), all.cols() - 1);
  Eigen::Index out_col = 0;
  for (Eigen::Index j = 0; j < all.cols(); ++j) {
    if (j == y_idx) continue;
    z.col(out_col++) = all.col(j);
  }

  Eigen::VectorXd w = load_vector_csv(w_path);
  const double lambda = lf.resolve(static_cast<int>(z.rows()),
                                   static_cast<int>(z.cols()));
  defi::Interval iv = defi::wbeta_region(y, z, w, alpha, lambda);
  print_interval(iv);
  return 0;
}

int run_simulate(const std::string& scenario_tag, const std::string& method,
                 int reps, std::uint64_t seed, double alpha, int n_override,
                 int p_override, double rho, double sigma,
                 const std::string& design_csv, int threads,
                 const std::string& out_dir, const LambdaFlags& lf) {
  defi::Scenario sc = defi::make_scenario(scenario_tag);
  sc.seed = seed;
  if (n_override > 0) sc.n = n_override;
  if (p_override > 0) sc.p = p_override;
  if (rho > 0) sc.rho = rho;
  sc.sigma = sigma;
  sc.design_csv = design_csv;

  defi::McOptions opts;
  opts.lambda_a = lf.fixed_a;
  opts.lambda_quantile = lf.quantile;
  opts.threads = threads;

  defi::McSummary summary =
      defi::run_monte_carlo(sc, method, reps, alpha, opts);
  defi::write_outputs(summary, out_dir);

  const std::string text = summary_json(summary);
  {
    std::ofstream out(out_dir + "/summary.json");
    if (!out) throw defi::ValidationError("cannot write to: " + out_dir);
    out << text << "\n";
  }
  std::cout << text << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"conditional-independence tests that stay valid when one of "
               "two working models is wrong"};
  app.require_subcommand(0, 1);

  bool print_schema = false;
  app.add_flag("--schema", print_schema,
               "print the JSON schema for all CLI output and exit");

  // ---- test ----
  auto* test_cmd =
      app.add_subcommand("test", "run one conditional-independence test");
  std::string t_data, t_response, t_exposure, t_method = "t-def";
  std::string t_family_y = "gaussian", t_family_x = "gaussian";
  std::string t_wy, t_wx;
  bool t_split = false;
  LambdaFlags t_lambda;
  test_cmd->add_option("--data", t_data, "CSV file with named columns")
      ->required();
  test_cmd->add_option("--response", t_response, "response column name")
      ->required();
  test_cmd->add_option("--exposure", t_exposure, "exposure column name")
      ->required();
  test_cmd
      ->add_option("--method", t_method,
                   "one of t-ols, t-ols-exact, t-glm, t-def, t-db, t-w-def, "
                   "t-glm-def")
      ->capture_default_str();
  test_cmd->add_option("--family-y", t_family_y,
                       "response family: gaussian, binomial, poisson")
      ->capture_default_str();
  test_cmd->add_option("--family-x", t_family_x,
                       "exposure family (t-glm-def only)")
      ->capture_default_str();
  test_cmd->add_option("--weights-y", t_wy,
                       "single-column CSV of response-side weights (t-w-def)");
  test_cmd->add_option("--weights-x", t_wx,
                       "single-column CSV of exposure-side weights (t-w-def)");
  test_cmd->add_flag("--split", t_split,
                     "t-glm-def: fit nuisance models on the first half, "
                     "test on the second");
  add_lambda_flags(test_cmd, &t_lambda);

  // ---- ci ----
  auto* ci_cmd = app.add_subcommand(
      "ci", "confidence interval for the exposure coefficient by test "
            "inversion");
  std::string c_data, c_response, c_exposure;
  double c_alpha = 0.05;
  LambdaFlags c_lambda;
  ci_cmd->add_option("--data", c_data, "CSV file with named columns")
      ->required();
  ci_cmd->add_option("--response", c_response, "response column name")
      ->required();
  ci_cmd->add_option("--exposure", c_exposure, "exposure column name")
      ->required();
  ci_cmd->add_option("--alpha", c_alpha, "miscoverage level")
      ->capture_default_str();
  add_lambda_flags(ci_cmd, &c_lambda);

  // ---- wbeta-ci ----
  auto* wb_cmd = app.add_subcommand(
      "wbeta-ci", "confidence region for a linear contrast of regression "
                  "coefficients");
  std::string w_data, w_response, w_file;
  double w_alpha = 0.05;
  LambdaFlags w_lambda;
  wb_cmd->add_option("--data", w_data, "CSV file with named columns")
      ->required();
  wb_cmd->add_option("--response", w_response, "response column name")
      ->required();
  wb_cmd->add_option("--w-file", w_file,
                     "single-column CSV holding the contrast weights")
      ->required();
  wb_cmd->add_option("--alpha", w_alpha, "miscoverage level")
      ->capture_default_str();
  add_lambda_flags(wb_cmd, &w_lambda);

  // ---- simulate ----
  auto* sim_cmd =
      app.add_subcommand("simulate", "seeded Monte Carlo study of one "
                                     "scenario/method pair");
  std::string s_scenario, s_method = "t-ols", s_design, s_out = "defi_out";
  int s_reps = 100, s_n = 0, s_p = 0, s_threads = 1;
  double s_alpha = 0.05, s_rho = 0.0, s_sigma = 0.0;
  std::uint64_t s_seed = 0;
  LambdaFlags s_lambda;
  sim_cmd->add_option("--scenario", s_scenario,
                      "example1-null, example1-alt, poisson-misspec, "
                      "partial-linear-a/b/c, logistic-hd-null, "
                      "logistic-hd-alt, toeplitz-confint")
      ->required();
  sim_cmd->add_option("--method", s_method,
                      "test methods plus def-ci and db-ci")
      ->capture_default_str();
  sim_cmd->add_option("--reps", s_reps, "number of replicates")
      ->capture_default_str();
  sim_cmd->add_option("--seed", s_seed, "root seed for the replicate streams")
      ->capture_default_str();
  sim_cmd->add_option("--alpha", s_alpha, "nominal level")
      ->capture_default_str();
  sim_cmd->add_option("--n", s_n, "override the scenario sample size");
  sim_cmd->add_option("--p", s_p, "override the scenario dimension");
  sim_cmd->add_option("--rho", s_rho, "override the design correlation");
  sim_cmd->add_option("--sigma", s_sigma,
                      "misspecification strength (poisson-misspec)");
  sim_cmd->add_option("--design-csv", s_design,
                      "fixed design matrix reused across replicates");
  sim_cmd->add_option("--threads", s_threads, "worker threads")
      ->capture_default_str();
  sim_cmd->add_option("--out", s_out, "output directory for CSV/JSON files")
      ->capture_default_str();
  add_lambda_flags(sim_cmd, &s_lambda);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    print_error("cli-parse", e.what());
    return 2;
  }

  try {
    if (print_schema) {
      std::cout << kOutputSchema;
      return 0;
    }
    if (test_cmd->parsed()) {
      return run_test(t_data, t_response, t_exposure, t_method, t_family_y,
                      t_family_x, t_lambda, t_wy, t_wx, t_split);
    }
    if (ci_cmd->parsed()) {
      return run_ci(c_data, c_response, c_exposure, c_alpha, c_lambda);
    }
    if (wb_cmd->parsed()) {
      return run_wbeta_ci(w_data, w_response, w_file, w_alpha, w_lambda);
    }
    if (sim_cmd->parsed()) {
      return run_simulate(s_scenario, s_method, s_reps, s_seed, s_alpha, s_n,
                          s_p, s_rho, s_sigma, s_design, s_threads, s_out,
                          s_lambda);
    }
    std::cout << app.help();
    return 0;
  } catch (const defi::ValidationError& e) {
    print_error(e.kind(), e.what());
    return 2;
  } catch (const defi::NumericError& e) {
    print_error(e.kind(), e.what());
    return 3;
  } catch (const std::exception& e) {
    print_error("internal", e.what());
    return 3;
  }
}
