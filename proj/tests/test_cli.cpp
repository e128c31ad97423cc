#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

const fs::path kWork = fs::temp_directory_path() / "dqf_test_cli";

struct Outcome {
  int code;
  std::string out;
};

Outcome run(const std::string& args, const std::string& env = "") {
  fs::create_directories(kWork);
  const fs::path log = kWork / "log.txt";
  const std::string cmd = "cd " + kWork.string() + " && env -u CI " + env + " " + DQF_CLI + " " + args + " > " +
                          log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  std::ifstream in(log);
  std::stringstream ss;
  ss << in.rdbuf();
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, ss.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const std::string kTinySampler =
    " --n-epo 300 --n-disc 100 --j-min 2 --j-max 2 --n-sample 600 --n-sample-disc 200 ";

}  // namespace

TEST(Cli, UsageErrors) {
  EXPECT_EQ(run("frobnicate").code, 1);
  EXPECT_EQ(run("clean --instrument FTSE").code, 1);
  EXPECT_EQ(run("--help").code, 0);
}

TEST(Cli, MissingInputIsDataError) {
  Outcome r = run("clean --ticks no_such_file.csv --instrument FTSE --calendar " DQF_CALENDAR);
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.out.find("error"), std::string::npos);
  EXPECT_EQ(run("clean --ticks " DQF_FIXTURES "/ticks_ftse.csv --instrument FTSE --calendar nowhere.txt").code, 2);
}

TEST(Cli, CiModeNeedsSeed) {
  fs::create_directories(kWork);
  EXPECT_EQ(run("--ci simulate-market --days 5 --out-dir m").code, 1);
  EXPECT_EQ(run("simulate-market --days 5 --out-dir m", "CI=1").code, 1);
  EXPECT_EQ(run("--ci --seed 3 simulate-market --days 5 --out-dir m").code, 0);
}

TEST(Cli, CleanFixture) {
  Outcome r = run("clean --ticks " DQF_FIXTURES "/ticks_ftse.csv --instrument FTSE --calendar " DQF_CALENDAR
              " --out-dir c1");
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("Days 8"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("Obs 2952"), std::string::npos) << r.out;
  EXPECT_EQ(slurp(kWork / "c1/removals.csv"), slurp(DQF_FIXTURES "/ticks_ftse_expected.csv"));

  // cleaning the cleaned output removes nothing
  Outcome again = run("clean --ticks c1/cleaned.csv --instrument FTSE --calendar " DQF_CALENDAR " --out-dir c2");
  ASSERT_EQ(again.code, 0) << again.out;
  EXPECT_EQ(slurp(kWork / "c2/removals.csv"), "timestamp,rule\n");
  EXPECT_EQ(slurp(kWork / "c2/returns.csv"), slurp(kWork / "c1/returns.csv"));
}

TEST(Cli, EmptyTickFile) {
  fs::create_directories(kWork);
  std::ofstream(kWork / "empty.csv") << "timestamp,price\n";
  Outcome r = run("clean --ticks empty.csv --instrument FTSE --calendar " DQF_CALENDAR " --out-dir e");
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("Days 0"), std::string::npos) << r.out;
}

TEST(Cli, PipelineDeterministic) {
  ASSERT_EQ(run("--seed 11 simulate-market --days 130 --out-dir mk").code, 0);
  const std::string args = "--seed 5 pipeline --ticks mk/ticks.csv --daily mk/daily_returns.csv --instrument SPX "
                           "--calendar " DQF_CALENDAR " --window 90 --refit-every 20 --plugin-draws 20 --n-draws 20" +
                           kTinySampler;
  Outcome a = run(args + " --out-dir p1");
  ASSERT_EQ(a.code, 0) << a.out;
  Outcome b = run(args + " --out-dir p2");
  ASSERT_EQ(b.code, 0) << b.out;
  for (const char* f : {"removals.csv", "xi.csv", "draws.csv", "forecast.csv", "var_forecasts.csv", "scores.csv"}) {
    const std::string x = slurp(kWork / "p1" / f);
    EXPECT_FALSE(x.empty()) << f;
    EXPECT_EQ(x, slurp(kWork / "p2" / f)) << f;
  }
  std::istringstream scores(slurp(kWork / "p1/scores.csv"));
  std::string line;
  std::getline(scores, line);
  int models = 0;
  while (std::getline(scores, line)) {
    ++models;
    std::istringstream cells(line);
    std::string cell;
    std::getline(cells, cell, ',');
    while (std::getline(cells, cell, ',')) {
      const double v = std::stod(cell);
      EXPECT_TRUE(std::isfinite(v) && v >= 0.0) << line;
    }
  }
  EXPECT_EQ(models, 2);
}

TEST(Cli, PipelineStageErrorNamesStage) {
  fs::create_directories(kWork);
  std::ofstream(kWork / "daily.csv") << "day,return\n";
  Outcome r = run("--seed 1 pipeline --ticks nothing.csv --daily daily.csv --instrument SPX --calendar " DQF_CALENDAR
              " --out-dir pe");
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.out.find("clean:"), std::string::npos) << r.out;
}
