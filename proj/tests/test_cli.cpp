#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <string>

#include "rscrub/matio.hpp"

namespace fs = std::filesystem;

namespace {

const std::string kBinary = RSCRUB_CLI_PATH;
const fs::path kData = RSCRUB_DATA_DIR;

fs::path workdir() {
  static const fs::path dir = [] {
    const fs::path d = fs::temp_directory_path() / "rscrub_test_cli";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

// Runs the CLI from `cwd` and returns its exit code; stdout/stderr go to files.
int run(const std::string& args, const fs::path& cwd = workdir()) {
  const std::string cmd = "cd '" + cwd.string() + "' && '" + kBinary + "' " + args + " >'" +
                          (workdir() / "stdout.txt").string() + "' 2>'" + (workdir() / "stderr.txt").string() + "'";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string err() { return rscrub::read_file(workdir() / "stderr.txt"); }
std::string out() { return rscrub::read_file(workdir() / "stdout.txt"); }

std::string p(const std::string& name) { return "'" + (workdir() / name).string() + "'"; }

}  // namespace

TEST_CASE("help exits 0 and touches nothing") {
  const fs::path empty = workdir() / "empty";
  fs::create_directories(empty);
  for (const char* sub : {"", "scrub ", "simulate-fpr ", "mac ", "emit-plotdata "}) {
    CHECK(run(std::string(sub) + "--help", empty) == 0);
    CHECK(fs::is_empty(empty));
  }
  CHECK(out().find("--out") != std::string::npos);
}

TEST_CASE("usage errors exit 1 with a synopsis") {
  CHECK(run("scrub --out x.json") == 1);
  CHECK(err().find("--input") != std::string::npos);
  CHECK(err().find("Usage") != std::string::npos);
  CHECK(run("scrub --input '" + (kData / "toy_components.csv").string() + "' --out x.json --bogus 1") == 1);
  CHECK(run("") == 1);
  CHECK(run("frobnicate") == 1);
  CHECK(run("scrub --input '" + (kData / "toy_components.csv").string() + "' --out x.json --alpha 0.7") == 1);
  CHECK(run("simulate-fpr --out f.csv --method chi2") == 1);
}

TEST_CASE("runtime errors exit 2") {
  rscrub::write_file(workdir() / "bad.csv", "1,2\n3,x\n");
  CHECK(run("scrub --input " + p("bad.csv") + " --out " + p("bad.json")) == 2);
  CHECK(err().find("line 2, column 2") != std::string::npos);
  CHECK_FALSE(fs::exists(workdir() / "bad.json"));
}

TEST_CASE("scrub on the toy data") {
  const std::string input = "'" + (kData / "toy_components.csv").string() + "'";
  const std::string spatial = "'" + (kData / "toy_spatial.csv").string() + "'";
  const std::string common = "scrub --input " + input + " --spatial " + spatial + " --seed 7 --reps 200 ";
  REQUIRE(run(common + "--out " + p("toy1.json") + " --artifact-map " + p("map1.csv")) == 0);
  REQUIRE(run(common + "--out " + p("toy2.json") + " --artifact-map " + p("map2.csv")) == 0);
  const rscrub::ScrubReport r = rscrub::load_report(workdir() / "toy1.json");
  CHECK(r.flags.size() == 145);
  CHECK(rscrub::read_file(workdir() / "toy1.json") == rscrub::read_file(workdir() / "toy2.json"));
  CHECK(rscrub::read_file(workdir() / "map1.csv") == rscrub::read_file(workdir() / "map2.csv"));
  const rscrub::DenseMatrix map = rscrub::load_matrix(workdir() / "map1.csv");
  CHECK(map.rows() == 400);
  CHECK(map.cols() == 1);

  REQUIRE(run("emit-plotdata --report " + p("toy1.json") + " --out " + p("plot.csv") + " --replicates-out " +
              p("reps.csv")) == 0);
  const rscrub::DenseMatrix plot = rscrub::load_matrix(workdir() / "plot.csv");
  CHECK(plot.rows() == 145);
  CHECK(plot.col_labels.front() == "t");
  CHECK(plot.col_labels.back() == "cutoff_active");
  CHECK(rscrub::load_matrix(workdir() / "reps.csv").rows() == 200);

  CHECK(run(common + "--method theoretical --out " + p("toy3.json")) == 0);
  CHECK(rscrub::load_report(workdir() / "toy3.json").active().method == rscrub::ThresholdMethod::theoretical);
}

TEST_CASE("simulate-fpr") {
  const std::string args = "simulate-fpr --model ar1 --phi 0.4 --reps 3 --n 200 --p 3 --seed 5 --method theoretical,empirical ";
  REQUIRE(run(args + "--out " + p("fpr1.csv") + " --summary " + p("sum.csv")) == 0);
  REQUIRE(run(args + "--out " + p("fpr2.csv")) == 0);
  CHECK(rscrub::read_file(workdir() / "fpr1.csv") == rscrub::read_file(workdir() / "fpr2.csv"));
  const rscrub::DenseMatrix t = rscrub::load_matrix(workdir() / "fpr1.csv");
  CHECK(t.rows() == 3);
  CHECK(t.col_labels == std::vector<std::string>{"replicate", "theoretical", "empirical"});
  CHECK(rscrub::read_file(workdir() / "sum.csv").find("mean_fpr") != std::string::npos);
  CHECK(run("simulate-fpr --model iid --phi 0.4 --out " + p("x.csv")) == 2);
}

TEST_CASE("simulate-fpr empirical mean on iid data") {
  REQUIRE(run("simulate-fpr --model iid --method empirical --reps 100 --seed 1 --out " + p("emp.csv") + " --summary " +
              p("emp_sum.csv")) == 0);
  const rscrub::DenseMatrix t = rscrub::load_matrix(workdir() / "emp.csv");
  const double mean = t.values.col(1).mean();
  CHECK(mean >= 0.01);
  CHECK(mean <= 0.02);
}

TEST_CASE("mac") {
  const std::string args = "mac --nodes 5 --subjects 2 --perms 10 --t 150 --bursts 3,6 --seed 2 ";
  REQUIRE(run(args + "--out " + p("mac1.csv")) == 0);
  REQUIRE(run(args + "--out " + p("mac2.csv")) == 0);
  const std::string a = rscrub::read_file(workdir() / "mac1.csv");
  CHECK(a == rscrub::read_file(workdir() / "mac2.csv"));
  CHECK(a.rfind("bursts,method,censoring_rate,mac\n", 0) == 0);
  CHECK(run("mac --perms 5 --out " + p("m.csv")) == 1);
}
