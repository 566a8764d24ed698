#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

namespace fs = std::filesystem;

namespace {

struct CliResult {
  int code;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir = fs::temp_directory_path() /
          ("deepsvm_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  void TearDown() override { fs::remove_all(dir); }

  CliResult run(const std::string& args, const std::string& env = "") {
    const fs::path out = dir / "stdout.txt", err = dir / "stderr.txt";
    const std::string cmd = env + " " + DEEPSVM_CLI + " " + args + " >" + out.string() + " 2>" +
                            err.string();
    const int status = std::system(cmd.c_str());
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(out), slurp(err)};
  }

  fs::path write_tiny_config() {
    const fs::path cfg = dir / "tiny.conf";
    std::ofstream os(cfg);
    os << "hidden_width = 8\nhidden_depth = 2\nembedding_width = 4\nadam_steps = 12\n"
          "learning_rate = 0.001\nbatch_size = 64\nrar_interval = 5\ninterior_size = 200\n"
          "rar_candidates = 50\nrar_top_k = 10\natm_count = 16\nboundary_count = 16\n"
          "boundary_augment = 8\nlbfgs_iterations = 4\ncheckpoint_interval = 100\n";
    return cfg;
  }

  fs::path dir;
};

TEST_F(Cli, MissingSubcommandIsUsageError) { EXPECT_EQ(run("").code, 2); }

TEST_F(Cli, MissingConfigNamesPath) {
  const auto r = run("--out " + dir.string() + " train --config /no/such/desk.conf");
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("/no/such/desk.conf"), std::string::npos);
}

TEST_F(Cli, UnknownConfigKey) {
  const fs::path cfg = dir / "bad.conf";
  std::ofstream(cfg) << "adam_stepz = 4\n";
  EXPECT_EQ(run("--out " + dir.string() + " train --config " + cfg.string()).code, 2);
}

TEST_F(Cli, TrainPriceGreeksRoundTrip) {
  const auto cfg = write_tiny_config();
  const auto a = dir / "a", b = dir / "b";
  ASSERT_EQ(run("--out " + a.string() + " train --config " + cfg.string()).code, 0);
  ASSERT_EQ(run("--out " + b.string() + " --threads 2 train --config " + cfg.string()).code, 0);
  EXPECT_EQ(slurp(a / "model.ckpt"), slurp(b / "model.ckpt"));
  EXPECT_EQ(slurp(a / "train_log.csv"), slurp(b / "train_log.csv"));
  EXPECT_TRUE(fs::exists(a / "train_log_timed.csv"));

  const std::string ckpt = "--checkpoint " + (a / "model.ckpt").string();
  auto r = run("price " + ckpt + " --x 0.3 --nu0 0.1 --tau 0");
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("u=0.34985880757600"), std::string::npos) << r.out;

  r = run("price " + ckpt + " --x 2.5 --nu0 0.1 --tau 0.5");
  EXPECT_EQ(r.code, 4);
  EXPECT_NE(r.err.find("(x)"), std::string::npos) << r.err;

  r = run("greeks " + ckpt + " --x 0.3 --nu0 0.1 --tau 0.5");
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("gamma="), std::string::npos);

  r = run("check " + ckpt);
  EXPECT_EQ(r.code, 0) << r.out;
}

TEST_F(Cli, SeedEnvironmentOverride) {
  const auto cfg = write_tiny_config();
  ASSERT_EQ(run("--out " + dir.string() + " train --config " + cfg.string(), "DEEPSVM_SEED=7").code, 0);
  EXPECT_NE(slurp(dir / "train_config.txt").find("seed = 7"), std::string::npos);
}

TEST_F(Cli, GreeksOfAnalyticSolution) {
  const auto r = run("greeks --analytic --x -0.4 --nu0 0.1 --tau 0.5");
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("delta=1\n"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("gamma=0\n"), std::string::npos) << r.out;
}

TEST_F(Cli, ResidualMapFiles) {
  const auto r = run("--out " + dir.string() + " residual-map --analytic --nx 11 --nnu 5 --n-params 2");
  ASSERT_EQ(r.code, 0) << r.err;
  int files = 0;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.path().filename().string().rfind("residual_tau_", 0) != 0) continue;
    ++files;
    std::istringstream is(slurp(e.path()));
    std::string line;
    std::getline(is, line);
    EXPECT_EQ(line, "x,nu,mean_r2");
    int rows = 0;
    while (std::getline(is, line)) ++rows;
    EXPECT_EQ(rows, 55);
  }
  EXPECT_EQ(files, 3);
}

TEST_F(Cli, CompareWritesRowsAndSummary) {
  const auto r = run("--out " + dir.string() + " compare --analytic --n-params 1 --x-points 5");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::exists(dir / "comparison.csv"));
  EXPECT_TRUE(fs::exists(dir / "comparison_summary.csv"));
}

TEST_F(Cli, CheckReportsCorruptCheckpoint) {
  const fs::path bad = dir / "bad.ckpt";
  std::ofstream(bad) << "deepsvm-ckpt-1\nspec";
  const auto r = run("check --checkpoint " + bad.string());
  EXPECT_EQ(r.code, 5);
  EXPECT_NE(r.out.find("FAIL checkpoint_load"), std::string::npos);
  EXPECT_NE(r.out.find("PASS oracle_bs_limit"), std::string::npos);
}

}  // namespace
