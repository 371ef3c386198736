#include <doctest.h>

#include <filesystem>

#include "rscrub/matio.hpp"
#include "rscrub/scrub.hpp"
#include "rscrub/simlab.hpp"

using namespace rscrub;
namespace fs = std::filesystem;

namespace {

fs::path temp_path(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "rscrub_test_matio";
  fs::create_directories(dir);
  return dir / name;
}

template <typename F>
ParseError parse_error_of(F&& f) {
  try {
    f();
  } catch (const ParseError& e) {
    return e;
  }
  FAIL("expected a ParseError");
  return ParseError("unreachable");
}

bool same_doubles(double a, double b) { return a == b || (std::isnan(a) && std::isnan(b)); }

bool same_vector(const Vector& a, const Vector& b) {
  if (a.size() != b.size()) return false;
  for (Index i = 0; i < a.size(); ++i)
    if (!same_doubles(a(i), b(i))) return false;
  return true;
}

bool same_vector(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (!same_doubles(a[i], b[i])) return false;
  return true;
}

void check_reports_equal(const ScrubReport& a, const ScrubReport& b) {
  CHECK(a.flags == b.flags);
  CHECK(same_vector(a.rds.distances, b.rds.distances));
  const McdFit& fa = a.rds.fit;
  const McdFit& fb = b.rds.fit;
  CHECK(fa.included == fb.included);
  CHECK(fa.excluded == fb.excluded);
  CHECK(fa.mean == fb.mean);
  CHECK(fa.covariance == fb.covariance);
  CHECK(fa.raw_covariance == fb.raw_covariance);
  CHECK(fa.determinant == fb.determinant);
  CHECK(fa.raw_log_determinant == fb.raw_log_determinant);
  CHECK(fa.consistency_factor == fb.consistency_factor);
  CHECK(fa.n == fb.n);
  CHECK(fa.p == fb.p);
  CHECK(fa.h == fb.h);
  REQUIRE(a.thresholds.size() == b.thresholds.size());
  for (std::size_t i = 0; i < a.thresholds.size(); ++i) {
    CHECK(a.thresholds[i].method == b.thresholds[i].method);
    CHECK(a.thresholds[i].cutoff == b.thresholds[i].cutoff);
    CHECK(a.thresholds[i].alpha == b.thresholds[i].alpha);
    CHECK(a.thresholds[i].ci_level == b.thresholds[i].ci_level);
    CHECK(a.thresholds[i].dof == b.thresholds[i].dof);
    CHECK(a.thresholds[i].replicates == b.thresholds[i].replicates);
  }
  CHECK(a.active_threshold == b.active_threshold);
  CHECK(a.selected_components == b.selected_components);
  CHECK(same_vector(a.kurtosis_values, b.kurtosis_values));
  CHECK(a.kurtosis_cutoff == b.kurtosis_cutoff);
  CHECK(a.source == b.source);
  CHECK(a.config == b.config);
  REQUIRE(a.diagnostics.size() == b.diagnostics.size());
  for (std::size_t i = 0; i < a.diagnostics.size(); ++i) {
    CHECK(a.diagnostics[i].outliers == b.diagnostics[i].outliers);
    CHECK(a.diagnostics[i].transform.lambda == b.diagnostics[i].transform.lambda);
    CHECK(a.diagnostics[i].transform.family == b.diagnostics[i].transform.family);
    CHECK(a.diagnostics[i].transform.pre_scale == b.diagnostics[i].transform.pre_scale);
    CHECK(a.diagnostics[i].transform.post_center == b.diagnostics[i].transform.post_center);
    CHECK(a.diagnostics[i].passed_through == b.diagnostics[i].passed_through);
    CHECK(a.diagnostics[i].message == b.diagnostics[i].message);
  }
  CHECK(a.warnings == b.warnings);
  CHECK(a.artifact_map.has_value() == b.artifact_map.has_value());
  if (a.artifact_map && b.artifact_map) CHECK(*a.artifact_map == *b.artifact_map);
}

ScrubReport small_report() {
  ScrubReport r;
  r.flags = {false, true, false, false, true};
  r.rds.distances = Vector::LinSpaced(5, 0.5, 4.5);
  r.rds.fit.n = 5;
  r.rds.fit.p = 1;
  r.rds.fit.h = 3;
  r.rds.fit.included = {0, 2, 3};
  r.rds.fit.excluded = {1, 4};
  r.rds.fit.mean = Vector::Constant(1, 0.1);
  r.rds.fit.covariance = Matrix::Constant(1, 1, 2.0);
  r.rds.fit.raw_covariance = Matrix::Constant(1, 1, 1.0);
  ThresholdEstimate t;
  t.cutoff = 1.0 / 3.0;
  r.thresholds = {t};
  r.selected_components = {0};
  r.kurtosis_values = {0.3, -std::numeric_limits<double>::infinity()};
  return r;
}

}  // namespace

TEST_CASE("delimited parsing with header") {
  const DenseMatrix m = parse_delimited("a,b\n1,2\n3,4\n");
  CHECK(m.rows() == 2);
  CHECK(m.cols() == 2);
  CHECK(m.col_labels == std::vector<std::string>{"a", "b"});
  CHECK(m.values(1, 0) == 3.0);
  CHECK(m.values(0, 1) == 2.0);
}

TEST_CASE("delimited parsing variants") {
  const DenseMatrix tabs = parse_delimited("1.5\t-2e-3\r\n+3\t4E2\r\n");
  CHECK(tabs.rows() == 2);
  CHECK(tabs.col_labels.empty());
  CHECK(tabs.values(0, 1) == -2e-3);
  CHECK(tabs.values(1, 0) == 3.0);
  CHECK(tabs.values(1, 1) == 400.0);
  // rows = lines - header, no trailing newline needed
  CHECK(parse_delimited("x\n1\n2\n3").rows() == 3);
  CHECK(parse_delimited(" 1 , 2 \n").values(0, 1) == 2.0);
}

TEST_CASE("delimited parse errors carry coordinates") {
  const ParseError bad = parse_error_of([] { parse_delimited("1,x,3\n"); });
  CHECK(bad.line() == 1);
  CHECK(bad.column() == 2);
  CHECK(std::string(bad.what()).find("line 1, column 2") != std::string::npos);

  const ParseError ragged = parse_error_of([] { parse_delimited("1,2\n3,4\n5\n"); });
  CHECK(ragged.line() == 3);

  const ParseError missing = parse_error_of([] { parse_delimited("1,2\n3,\n"); });
  CHECK(missing.line() == 2);
  CHECK(missing.column() == 2);
  const ParseError nan = parse_error_of([] { parse_delimited("a,b\n1,nan\n"); });
  CHECK(nan.line() == 2);
  CHECK_THROWS_AS(parse_delimited("1,2\n\n3,4\n"), ParseError);  // blank line inside the data
  CHECK_THROWS_AS(parse_delimited(""), EmptyFileError);
  CHECK_THROWS_AS(parse_delimited("\n\n"), EmptyFileError);
  CHECK_THROWS_AS(parse_delimited("a,b\n"), EmptyFileError);
}

TEST_CASE("matrix files round-trip") {
  DenseMatrix m;
  m.values = gen_iid_gaussian(10, 4, 1);
  m.values(0, 0) = 1e-300;
  m.values(1, 1) = -0.0;

  save_matrix(m, temp_path("m.bin"));
  const DenseMatrix b = load_matrix(temp_path("m.bin"));
  CHECK(b.values == m.values);
  CHECK(std::signbit(b.values(1, 1)));

  m.col_labels = {"w", "x", "y", "z"};
  save_matrix(m, temp_path("m.csv"));
  const DenseMatrix c = load_matrix(temp_path("m.csv"));
  CHECK(c.values == m.values);  // shortest round-trip formatting is exact
  CHECK(c.col_labels == m.col_labels);
}

TEST_CASE("matrix file errors") {
  write_file(temp_path("empty.csv"), "");
  CHECK_THROWS_AS(load_matrix(temp_path("empty.csv")), EmptyFileError);
  CHECK_THROWS_AS(load_matrix(temp_path("does_not_exist.csv")), IoError);
  write_file(temp_path("bad.bin"), "NOTRSCRUB0000000000000000");
  CHECK_THROWS_AS(load_matrix(temp_path("bad.bin")), ParseError);
  DenseMatrix m;
  m.values = Matrix::Ones(3, 3);
  save_matrix(m, temp_path("short.bin"));
  std::string bytes = read_file(temp_path("short.bin"));
  bytes.resize(bytes.size() - 8);
  write_file(temp_path("short.bin"), bytes);
  CHECK_THROWS_AS(load_matrix(temp_path("short.bin")), ParseError);
  CHECK_THROWS_AS(save_matrix(m, "/nonexistent_dir/x.csv"), IoError);
}

TEST_CASE("report document shape") {
  const ScrubReport r = small_report();
  const std::string doc = report_to_string(r);
  CHECK(doc.find("\"schema\": 1") != std::string::npos);
  const ScrubReport back = report_from_string(doc);
  CHECK(back.rds.distances.size() == 5);
  CHECK(back.flags.size() == 5);
  check_reports_equal(r, back);
}

TEST_CASE("report with mismatched flags is rejected") {
  ScrubReport r = small_report();
  r.flags.pop_back();
  CHECK_THROWS_AS(report_to_string(r), PreconditionError);
  CHECK_THROWS_AS(save_report(r, temp_path("bad.json")), PreconditionError);
}

TEST_CASE("full pipeline report round-trips losslessly") {
  BurstData d = gen_burst_components(200, 4, 5, 2, 8.0, 3);
  ComponentMatrix cm;
  cm.data = d.data;
  cm.spatial = gen_iid_gaussian(4, 30, 4);
  RunConfig cfg;
  cfg.seed = 5;
  cfg.bootstrap_reps = 200;
  cfg.mcd_starts = 100;
  ScrubReport r = scrub(cm, cfg);
  r.artifact_map = artifact_map(r, cm);
  save_report(r, temp_path("report.json"));
  const ScrubReport back = load_report(temp_path("report.json"));
  check_reports_equal(r, back);
  // saving the loaded report reproduces the same bytes
  CHECK(report_to_string(back) == read_file(temp_path("report.json")));
}

TEST_CASE("malformed reports") {
  CHECK_THROWS_AS(report_from_string("{"), ParseError);
  CHECK_THROWS_AS(report_from_string("{\"schema\": 2}"), ParseError);
  std::string doc = report_to_string(small_report());
  const auto pos = doc.find("\"flags\"");
  doc.replace(pos, 7, "\"flagz\"");
  CHECK_THROWS_AS(report_from_string(doc), ParseError);
}

TEST_CASE("tables") {
  Table t;
  t.header = {"a", "b"};
  t.add_row({"1", "x"});
  CHECK(table_to_string(t) == "a,b\n1,x\n");
  CHECK_THROWS_AS(t.add_row({"1"}), PreconditionError);
  CHECK(format_number(0.1) == "0.1");
  CHECK(format_number(1.0 / 3.0) == "0.3333333333333333");
}
