#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "defi/dataset.hpp"
#include "defi/ols.hpp"
#include "defi/rng.hpp"
#include "doctest.h"
#include "json.hpp"

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const fs::path work = fs::temp_directory_path() / "defi_cli_test";

struct CliResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

CliResult run_cli(const std::string& args) {
  fs::create_directories(work);
  const fs::path out_f = work / "stdout.txt";
  const fs::path err_f = work / "stderr.txt";
  const std::string cmd = std::string(DEFI_CLI_PATH) + " " + args + " >" +
                          out_f.string() + " 2>" + err_f.string();
  const int raw = std::system(cmd.c_str());
  CliResult r;
  r.exit_code = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  r.out = slurp(out_f);
  r.err = slurp(err_f);
  return r;
}

// A small dataset all the happy-path cases share.
fs::path write_small_csv() {
  fs::create_directories(work);
  const fs::path p = work / "small.csv";
  defi::Rng rng(881);
  const long n = 40;
  std::ofstream f(p);
  f << "y,x,z1,z2,z3\n";
  for (long i = 0; i < n; ++i) {
    const double z1 = rng.normal(), z2 = rng.normal(), z3 = rng.normal();
    const double x = 0.5 * z1 + rng.normal();
    const double y = 0.8 * x + z2 + rng.normal();
    f << defi::format_double(y) << ',' << defi::format_double(x) << ','
      << defi::format_double(z1) << ',' << defi::format_double(z2) << ','
      << defi::format_double(z3) << '\n';
  }
  return p;
}

}  // namespace

TEST_CASE("--schema output is byte-identical to the checked-in schema file") {
  const CliResult r = run_cli("--schema");
  CHECK(r.exit_code == 0);
  CHECK(r.out == slurp(DEFI_SCHEMA_PATH));
  CHECK(json::parse(r.out).contains("definitions"));
}

TEST_CASE("no subcommand prints help and succeeds") {
  const CliResult r = run_cli("");
  CHECK(r.exit_code == 0);
  CHECK(r.out.find("test") != std::string::npos);
  CHECK(r.out.find("simulate") != std::string::npos);
}

TEST_CASE("test subcommand emits a schema-shaped result that matches the library") {
  const fs::path csv = write_small_csv();
  const CliResult r = run_cli("test --data " + csv.string() +
                              " --response y --exposure x --method t-ols");
  REQUIRE(r.exit_code == 0);
  const json j = json::parse(r.out);
  CHECK(j.at("method") == "t-ols");
  CHECK(j.at("n") == 40);
  CHECK(j.at("p") == 3);
  const defi::Dataset ds = defi::load_dataset(csv.string(), "y", "x");
  const defi::TestResult want = defi::t_ols(ds);
  CHECK(j.at("statistic").get<double>() == doctest::Approx(want.statistic).epsilon(1e-12));
  CHECK(j.at("p_value").get<double>() == doctest::Approx(want.p_value).epsilon(1e-12));
  CHECK(j.at("diagnostics").contains("theta_hat"));
}

TEST_CASE("every test method runs on the small dataset") {
  const fs::path csv = write_small_csv();
  for (const char* m : {"t-ols", "t-ols-exact", "t-glm", "t-def", "t-db", "t-w-def"}) {
    const CliResult r = run_cli("test --data " + csv.string() +
                                " --response y --exposure x --method " + m);
    CHECK(r.exit_code == 0);
    const json j = json::parse(r.out);
    CHECK(j.at("method") == m);
    CHECK(j.at("p_value").get<double>() >= 0.0);
    CHECK(j.at("p_value").get<double>() <= 1.0);
  }
}

TEST_CASE("ci subcommand reports an ordered interval") {
  const fs::path csv = write_small_csv();
  const CliResult r = run_cli("ci --data " + csv.string() +
                              " --response y --exposure x --lambda-quantile");
  REQUIRE(r.exit_code == 0);
  const json j = json::parse(r.out);
  CHECK(j.at("lower").get<double>() < j.at("upper").get<double>());
  CHECK(j.at("alpha").get<double>() == 0.05);
  CHECK(j.at("evaluations").get<long>() > 0);
}

TEST_CASE("wbeta-ci subcommand inverts a contrast region") {
  const fs::path csv = write_small_csv();
  const fs::path wf = work / "w.csv";
  {
    std::ofstream f(wf);
    f << "w\n1\n0\n0\n0\n";  // contrast = coefficient of x in y ~ (x, z)
  }
  const CliResult r = run_cli("wbeta-ci --data " + csv.string() +
                              " --response y --w-file " + wf.string() +
                              " --lambda-quantile");
  REQUIRE(r.exit_code == 0);
  const json j = json::parse(r.out);
  CHECK(j.at("lower").get<double>() < j.at("upper").get<double>());
}

TEST_CASE("cli parse failures exit 2 with a machine-readable error") {
  const CliResult r = run_cli("test --no-such-flag");
  CHECK(r.exit_code == 2);
  const json e = json::parse(r.err);
  CHECK(e.at("error").at("kind") == "cli-parse");
}

TEST_CASE("input problems exit 2 with the library's error kind") {
  const CliResult missing = run_cli(
      "test --data /definitely/not/here.csv --response y --exposure x");
  CHECK(missing.exit_code == 2);
  CHECK(json::parse(missing.err).at("error").contains("kind"));

  const fs::path csv = write_small_csv();
  const CliResult bad_method = run_cli("test --data " + csv.string() +
                                       " --response y --exposure x --method t-nope");
  CHECK(bad_method.exit_code == 2);
  CHECK(json::parse(bad_method.err).at("error").at("kind") == "validation");

  const CliResult bad_col = run_cli("test --data " + csv.string() +
                                    " --response nope --exposure x");
  CHECK(bad_col.exit_code == 2);
  CHECK(json::parse(bad_col.err).at("error").at("kind") == "missing-column");
}

TEST_CASE("numerical breakdown exits 3") {
  fs::create_directories(work);
  const fs::path p = work / "collinear.csv";
  {
    defi::Rng rng(882);
    std::ofstream f(p);
    f << "y,x,z1,z2\n";
    for (long i = 0; i < 20; ++i) {
      const double z1 = rng.normal();
      f << defi::format_double(rng.normal()) << ','
        << defi::format_double(rng.normal()) << ',' << defi::format_double(z1)
        << ',' << defi::format_double(2.0 * z1) << '\n';  // exact collinearity
    }
  }
  // The projection-based statistic tolerates collinear controls (the fitted
  // projection is still unique), so t-ols succeeds...
  const CliResult ols = run_cli("test --data " + p.string() +
                                " --response y --exposure x --method t-ols");
  CHECK(ols.exit_code == 0);
  // ...while the GLM path solves for explicit coefficients and must refuse.
  const CliResult r = run_cli("test --data " + p.string() +
                              " --response y --exposure x --method t-glm");
  CHECK(r.exit_code == 3);
  CHECK(json::parse(r.err).at("error").at("kind") == "rank-deficient");
}

TEST_CASE("simulate writes summary plus data files and is byte deterministic") {
  const fs::path out_a = work / "sim_a";
  const fs::path out_b = work / "sim_b";
  fs::remove_all(out_a);
  fs::remove_all(out_b);
  const std::string common =
      "simulate --scenario example1-null --method t-ols --reps 25 --seed 7 --out ";
  const CliResult a = run_cli(common + out_a.string());
  const CliResult b = run_cli(common + out_b.string());
  REQUIRE(a.exit_code == 0);
  REQUIRE(b.exit_code == 0);
  CHECK(a.out == b.out);
  const json j = json::parse(a.out);
  CHECK(j.at("scenario") == "example1-null");
  CHECK(j.at("replicates") == 25);
  CHECK(j.at("seed") == 7);
  CHECK(j.at("failures") == 0);
  for (const char* name : {"summary.json", "pvalues.csv", "ecdf.csv", "coverage.csv"}) {
    const std::string fa = slurp(out_a / name);
    REQUIRE(!fa.empty());
    CHECK(fa == slurp(out_b / name));
  }
  // The written summary is the same document that went to stdout.
  CHECK(slurp(out_a / "summary.json") == a.out);
  fs::remove_all(out_a);
  fs::remove_all(out_b);
}

TEST_CASE("simulate rejects unknown scenarios cleanly") {
  const CliResult r = run_cli("simulate --scenario banana --reps 3 --out " +
                              (work / "never").string());
  CHECK(r.exit_code == 2);
  CHECK(json::parse(r.err).at("error").at("kind") == "validation");
}
