#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>

#include <gtest/gtest.h>

#include "froda/cli.hpp"

namespace froda {
namespace {

namespace fs = std::filesystem;

struct Result {
  int code;
  std::string out, err;
};

Result run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("froda_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  void synth(const std::string& seed = "7") {
    ASSERT_EQ(run({"synth", "--seed", seed, "--D", "20", "--d", "3", "--n-per-class-source", "10",
                   "--n-per-class-target", "6", "--n-unknown-target", "10", "--out-dir", dir_.string()})
                  .code,
              0);
  }

  fs::path dir_;
};

TEST_F(Cli, MissingSourceIsUsageError) {
  const Result r = run({"fit", "--target", "t.csv", "--out", "m.froda"});
  EXPECT_EQ(r.code, cli::kUsage);
  EXPECT_NE(r.err.find("--source"), std::string::npos);
  EXPECT_EQ(run({}).code, cli::kUsage);
  EXPECT_EQ(run({"frobnicate"}).code, cli::kUsage);
}

TEST_F(Cli, DFrodaWithoutLabelsIsValidationError) {
  synth();
  std::ofstream(path("plain.csv")) << "1,2\n3,4\n5,6\n";
  const Result r = run({"fit", "--variant", "dfroda", "--source", path("plain.csv"), "--target", path("plain.csv"),
                        "--out", path("m.froda")});
  EXPECT_EQ(r.code, cli::kFailure);
  EXPECT_EQ(r.err.rfind("error: ", 0), 0u);
  EXPECT_EQ(std::count(r.err.begin(), r.err.end(), '\n'), 1);
}

TEST_F(Cli, FitLogEchoesDefaults) {
  synth();
  ASSERT_EQ(run({"fit", "--source", path("source.csv"), "--target", path("target.csv"), "--out", path("m.froda")}).code,
            0);
  const std::string log = slurp(path("m.froda.log"));
  for (const char* line : {"alpha=0.1\n", "beta=0.01\n", "lambda1=0.001\n", "lambda2=0.001\n", "epsilon=0.2\n",
                           "d=0\n", "pca_variance=0.99\n"}) {
    EXPECT_NE(log.find(line), std::string::npos) << line;
  }
  EXPECT_NE(log.find("iteration=1 objective="), std::string::npos);
  EXPECT_EQ(slurp(path("m.froda.trace.csv")).rfind("iteration,objective\n0,", 0), 0u);
}

TEST_F(Cli, PredictDefaultsAndDeterminism) {
  synth();
  ASSERT_EQ(run({"fit", "--source", path("source.csv"), "--target", path("target.csv"), "--out", path("m.froda")}).code,
            0);
  ASSERT_EQ(run({"predict", "--model", path("m.froda"), "--out", path("a.csv")}).code, 0);
  ASSERT_EQ(run({"predict", "--model", path("m.froda"), "--classifier", "knn", "--k", "3", "--out", path("b.csv")}).code,
            0);
  ASSERT_EQ(run({"predict", "--model", path("m.froda"), "--out", path("c.csv")}).code, 0);
  const std::string a = slurp(path("a.csv"));
  EXPECT_EQ(a, slurp(path("b.csv")));
  EXPECT_EQ(a, slurp(path("c.csv")));
  EXPECT_EQ(a.rfind("sample_index,ratio,is_unknown,label\n0,", 0), 0u);
  EXPECT_NE(run({"predict", "--help"}).out.find("--k INT [3]"), std::string::npos);
}

TEST_F(Cli, PredictOnNewTargetsMatchesTrainingTargets) {
  synth();
  ASSERT_EQ(run({"fit", "--source", path("source.csv"), "--target", path("target.csv"), "--out", path("m.froda")}).code,
            0);
  ASSERT_EQ(run({"predict", "--model", path("m.froda"), "--out", path("a.csv")}).code, 0);
  ASSERT_EQ(run({"predict", "--model", path("m.froda"), "--target", path("target.csv"), "--out", path("b.csv")}).code, 0);
  // a fresh group-lasso solve: same decisions, ratios equal to solver tolerance
  std::istringstream a(slurp(path("a.csv"))), b(slurp(path("b.csv")));
  std::string la, lb;
  int rows = 0;
  while (std::getline(a, la)) {
    ASSERT_TRUE(std::getline(b, lb));
    if (rows++ == 0) {
      EXPECT_EQ(la, lb);
      continue;
    }
    const auto c1 = la.find(','), c2 = la.find(',', c1 + 1);
    const auto d1 = lb.find(','), d2 = lb.find(',', d1 + 1);
    EXPECT_EQ(la.substr(c2), lb.substr(d2)) << la;
    const double ra = std::stod(la.substr(c1 + 1, c2 - c1 - 1)), rb = std::stod(lb.substr(d1 + 1, d2 - d1 - 1));
    EXPECT_NEAR(ra, rb, 1e-4 * (1.0 + ra));
  }
  EXPECT_FALSE(std::getline(b, lb));
  EXPECT_GT(rows, 1);
}

TEST_F(Cli, CorruptModelIsReported) {
  std::ofstream(path("bad.froda")) << "GARBAGE!";
  const Result r = run({"predict", "--model", path("bad.froda"), "--out", path("p.csv")});
  EXPECT_EQ(r.code, cli::kFailure);
  EXPECT_EQ(r.err.rfind("error: bad model file", 0), 0u);
}

TEST_F(Cli, SynthIsRepeatable) {
  synth("7");
  const std::string first = slurp(path("source.csv")) + slurp(path("target.csv"));
  synth("7");
  EXPECT_EQ(first, slurp(path("source.csv")) + slurp(path("target.csv")));
  synth("8");
  EXPECT_NE(first, slurp(path("source.csv")) + slurp(path("target.csv")));
}

TEST_F(Cli, SweepAcceptsListGrid) {
  synth();
  ASSERT_EQ(run({"fit", "--source", path("source.csv"), "--target", path("target.csv"), "--out", path("m.froda")}).code,
            0);
  ASSERT_EQ(run({"sweep", "--model", path("m.froda"), "--truth", path("target.csv"), "--grid", "0.1,0.2,0.5", "--out",
                 path("sweep.csv")})
                .code,
            0);
  const std::string csv = slurp(path("sweep.csv"));
  EXPECT_EQ(csv.rfind("epsilon,class_avg_accuracy\n0.1,", 0), 0u);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 4);
  EXPECT_EQ(run({"sweep", "--model", path("m.froda"), "--truth", path("target.csv"), "--grid", "x"}).code,
            cli::kFailure);
}

TEST_F(Cli, EvalNoiseFreeSyntheticIsPerfect) {
  const Result r = run({"eval", "--synthetic", "--synth-noise-sigma", "0", "--seeds", "2", "--outer-max-iter", "30",
                        "--out-dir", dir_.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const std::string csv = slurp(path("report.csv"));
  std::istringstream lines(csv);
  std::string header, row;
  std::getline(lines, header);
  std::getline(lines, row);
  EXPECT_EQ(row.rfind("experiment,2,1,0,", 0), 0u) << row;
  EXPECT_NE(slurp(path("report.json")).find("\"overall_accuracy\""), std::string::npos);
}

TEST_F(Cli, ConfigFileWithOverrides) {
  synth();
  std::ofstream(path("run.cfg")) << "# fit settings\nsource=" << path("source.csv") << "\ntarget=" << path("target.csv")
                                 << "\nout=" << path("m.froda") << "\nalpha=0.5\nd=2\n";
  ASSERT_EQ(run({"fit", "--config", path("run.cfg"), "--alpha", "0.25"}).code, 0);
  const std::string log = slurp(path("m.froda.log"));
  EXPECT_NE(log.find("alpha=0.25\n"), std::string::npos);
  EXPECT_NE(log.find("d=2\n"), std::string::npos);
  std::ofstream(path("bad.cfg")) << "bogus=1\n";
  EXPECT_EQ(run({"fit", "--config", path("bad.cfg"), "--source", "a", "--target", "b", "--out", "c"}).code,
            cli::kUsage);
  EXPECT_EQ(run({"fit", "--config", path("missing.cfg")}).code, cli::kFailure);
}

TEST_F(Cli, InvalidValuesFailValidation) {
  synth();
  const Result r = run({"fit", "--source", path("source.csv"), "--target", path("target.csv"), "--out",
                        path("m.froda"), "--alpha", "-1"});
  EXPECT_EQ(r.code, cli::kFailure);
  EXPECT_EQ(run({"predict", "--model", "m", "--classifier", "tree", "--out", "p"}).code, cli::kUsage);
}

}  // namespace
}  // namespace froda
