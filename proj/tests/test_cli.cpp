#include <gtest/gtest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "ribkit/io.hpp"
#include "ribkit/metrics.hpp"
#include "ribkit/nifti.hpp"

namespace fs = std::filesystem;
using namespace ribkit;

namespace {

// One phantom directory shared by every test in this file.
class Cli : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new fs::path(fs::temp_directory_path() /
                        ("ribkit_cli_test_" + std::to_string(::getpid())));
    fs::remove_all(*dir_);
    fs::create_directories(*dir_);
    ASSERT_EQ(run("phantom --out-dir " + path("ph") + " --corrupt shift:8-11:+1"), 0);
    ASSERT_EQ(run("phantom --out-dir " + path("ph13") + " --rib-pairs 13"), 0);
  }
  static void TearDownTestSuite() {
    fs::remove_all(*dir_);
    delete dir_;
  }

  static std::string path(const std::string& name) { return (*dir_ / name).string(); }

  // Runs the CLI with stderr captured to <dir>/stderr.txt; returns the exit code.
  static int run(const std::string& args) {
    const std::string cmd =
        std::string("'") + RIBKIT_CLI + "' " + args + " 2>'" + path("stderr.txt") + "'";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }

  static std::string last_stderr() {
    std::ifstream in(path("stderr.txt"));
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }

 private:
  static fs::path* dir_;
};

fs::path* Cli::dir_ = nullptr;

}  // namespace

TEST_F(Cli, PhantomWritesAllOutputs) {
  for (const char* f : {"intensity.nii.gz", "labels.nii.gz", "centerline.csv", "variant_1.nii.gz"})
    EXPECT_TRUE(fs::exists(path("ph") + "/" + f)) << f;
}

TEST_F(Cli, RefineRestoresShiftedVariant) {
  ASSERT_EQ(run("refine --pred " + path("ph/variant_1.nii.gz") + " --out " + path("fixed.nii.gz") +
                " --centerline " + path("ph/centerline.csv")),
            0);
  EXPECT_NE(last_stderr().find("config: {"), std::string::npos);
  const LabelVolume gt = nifti::read_labels(path("ph/labels.nii.gz"));
  const LabelVolume fixed = nifti::read_labels(path("fixed.nii.gz"));
  EXPECT_EQ(*evaluate_case(fixed, gt).accuracy.all.percent(), 100.0);
}

TEST_F(Cli, EvalWritesJsonAndCsv) {
  ASSERT_EQ(run("eval --pred " + path("ph/variant_1.nii.gz") + " --gt " + path("ph/labels.nii.gz") +
                " --centerline " + path("ph/centerline.csv") + " --id v1 --report " +
                path("r.json") + " --csv " + path("r.csv")),
            0);
  std::ifstream j(path("r.json"));
  const auto report = nlohmann::json::parse(j);
  EXPECT_EQ(report["cases"][0]["id"], "v1");
  EXPECT_FALSE(report["cases"][0]["cut"].is_null());
  std::ifstream c(path("r.csv"));
  std::string header;
  std::getline(c, header);
  EXPECT_EQ(header, "id,A,F,I,T,dice_avg,dice_min");
}

TEST_F(Cli, BatchEvalSortsCases) {
  fs::create_directories(path("batch"));
  for (const char* id : {"b", "a"}) {
    fs::copy_file(path("ph/variant_1.nii.gz"), path(std::string("batch/") + id + "_pred.nii.gz"),
                  fs::copy_options::overwrite_existing);
    fs::copy_file(path("ph/labels.nii.gz"), path(std::string("batch/") + id + "_gt.nii.gz"),
                  fs::copy_options::overwrite_existing);
  }
  ASSERT_EQ(run("--threads 2 eval --batch " + path("batch") + " --csv " + path("b.csv")), 0);
  std::ifstream c(path("b.csv"));
  std::vector<std::string> rows;
  for (std::string line; std::getline(c, line);) rows.push_back(line);
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_EQ(rows[1].substr(0, 2), "a,");
  EXPECT_EQ(rows[2].substr(0, 2), "b,");
  EXPECT_EQ(rows[3].substr(0, 4), "ALL,");
}

TEST_F(Cli, InferWithOracleReproducesLabels) {
  ASSERT_EQ(run("infer --in " + path("ph/intensity.nii.gz") + " --predictor oracle:" +
                path("ph/labels.nii.gz") + " --centerline " + path("ph/centerline.csv") +
                " --out " + path("inf.nii.gz")),
            0);
  EXPECT_EQ(nifti::read_labels(path("inf.nii.gz")), nifti::read_labels(path("ph/labels.nii.gz")));
}

TEST_F(Cli, PreprocessResamplesAndWindows) {
  ASSERT_EQ(run("preprocess --in " + path("ph/intensity.nii.gz") + " --out " + path("pre.nii") +
                " --spacing 4"),
            0);
  const Volume v = nifti::read_volume(path("pre.nii"));
  EXPECT_EQ(v.dims(), (Dims{80, 80, 100}));
  for (float x : v.data()) {
    EXPECT_GE(x, 0.0f);
    EXPECT_LE(x, 1.0f);
  }
}

TEST_F(Cli, LosscheckPasses) {
  EXPECT_EQ(run("losscheck --trials 2 --report " + path("lc.json")), 0);
  std::ifstream j(path("lc.json"));
  EXPECT_TRUE(nlohmann::json::parse(j)["passed"].get<bool>());
}

TEST_F(Cli, ExitCodes) {
  EXPECT_EQ(run("eval --pred " + path("missing.nii.gz") + " --gt " + path("ph/labels.nii.gz") +
                " --report " + path("x.json")),
            1);
  EXPECT_NE(last_stderr().find("missing.nii.gz"), std::string::npos);
  EXPECT_EQ(run(""), 2);
  EXPECT_EQ(run("eval --bogus"), 2);
  EXPECT_EQ(run("preprocess --in a --out b --window 1050:-450"), 2);
  EXPECT_EQ(run("eval --pred a --gt b"), 2);
  EXPECT_EQ(run("phantom --out-dir " + path("x") + " --corrupt twist:3"), 2);
  EXPECT_EQ(run("refine --pred " + path("ph13/labels.nii.gz") + " --out " + path("x.nii.gz")), 3);
  EXPECT_NE(last_stderr().find("13"), std::string::npos);
  EXPECT_EQ(run("infer --in " + path("ph/intensity.nii.gz") + " --predictor 'subprocess:exit 0'" +
                " --out " + path("x.nii.gz")),
            4);
  EXPECT_EQ(run("losscheck --trials 1 --break-gradient focal"), 5);
  EXPECT_NE(last_stderr().find("focal at trial"), std::string::npos);
  EXPECT_EQ(run("--help"), 0);
}
