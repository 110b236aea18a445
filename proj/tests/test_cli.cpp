#include <gtest/gtest.h>

#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

struct Result {
  int code = -1;
  std::string out;  // stdout and stderr combined
};

Result cli(const std::string& args) {
  const std::string cmd = std::string("'") + ENDOSIM_CLI + "' " + args + " 2>&1";
  Result r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return r;
  std::array<char, 4096> buf{};
  while (const std::size_t n = std::fread(buf.data(), 1, buf.size(), pipe)) r.out.append(buf.data(), n);
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string sample(const std::string& name) { return std::string("'") + ENDOSIM_SAMPLES + "/" + name + "'"; }

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

void spit(const fs::path& p, const std::string& text) { std::ofstream(p, std::ios::binary) << text; }

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir = fs::temp_directory_path() /
          ("endosim_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  void TearDown() override { fs::remove_all(dir); }
  std::string path(const std::string& name) const { return "'" + (dir / name).string() + "'"; }
  fs::path dir;
};

}  // namespace

TEST_F(Cli, RunFreeEvolutionIsConstant) {
  const auto r = cli("run --program " + sample("free.pp") + " --preset " + sample("reference.preset"));
  ASSERT_EQ(r.code, 0) << r.out;
  std::istringstream lines(r.out);
  std::string header, row, first;
  std::getline(lines, header);
  EXPECT_EQ(header.substr(0, 8), "time_us,");
  int count = 0;
  while (std::getline(lines, row)) {
    const std::string tail = row.substr(row.find(','));
    if (first.empty()) first = tail;
    EXPECT_EQ(tail, first);
    ++count;
  }
  EXPECT_EQ(count, 11);
}

TEST_F(Cli, MissingProgramIsInputError) {
  const auto r = cli("run --program " + path("nope.pp"));
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.out.find("nope.pp"), std::string::npos) << r.out;
}

TEST_F(Cli, ParseErrorReportsLine) {
  spit(dir / "bad.pp", "# header\ntotal 5\nseg MW t=0 dur=-1 f=9660 amp=1 ph=0\n");
  const auto r = cli("run --program " + path("bad.pp"));
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.out.find("line 3"), std::string::npos) << r.out;
  const auto v = cli("validate --program " + path("bad.pp"));
  EXPECT_EQ(v.code, 2);
  EXPECT_NE(v.out.find("line 3"), std::string::npos) << v.out;
}

TEST_F(Cli, UnknownKeyAndUsageErrors) {
  spit(dir / "x.spec", "bogus_key = 1\n");
  EXPECT_EQ(cli("run --program " + sample("free.pp") + " --spec " + path("x.spec")).code, 2);
  EXPECT_EQ(cli("replicate fig9").code, 2);
  EXPECT_EQ(cli("frobnicate").code, 2);
  EXPECT_EQ(cli("").code, 2);
}

TEST_F(Cli, ValidateAcceptsSamples) {
  const auto r = cli("validate --program " + sample("endor_kicks.pp") + " --preset " + sample("reference.preset") +
                     " --spec " + sample("kicked_rabi.spec"));
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_EQ(cli("validate --spec " + sample("symmetric_gate.sweep")).code, 0);
}

TEST_F(Cli, ReplicateKickedRabi) {
  const auto r = cli("replicate fig3a --out " + path("fig3a.csv"));
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("experiment=kicked_rabi reversal_score="), std::string::npos) << r.out;
  EXPECT_TRUE(fs::exists(dir / "fig3a.csv"));
  EXPECT_NE(slurp(dir / "fig3a.csv.gp").find("fig3a.csv"), std::string::npos);
}

TEST_F(Cli, ReplicateLockIsDeterministic) {
  const auto a = cli("replicate fig3e --out " + path("a.csv"));
  const auto b = cli("replicate fig3e --out " + path("b.csv"));
  ASSERT_EQ(a.code, 0) << a.out;
  EXPECT_EQ(a.out, b.out);
  EXPECT_NE(a.out.find("lock_bound="), std::string::npos);
  EXPECT_EQ(slurp(dir / "a.csv"), slurp(dir / "b.csv"));
}

TEST_F(Cli, ReplicatePhaseMap) {
  const auto r = cli("replicate fig4 --out " + path("fig4.csv"));
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("monotone=1"), std::string::npos) << r.out;
  std::istringstream csv(slurp(dir / "fig4.csv"));
  int lines = 0;
  for (std::string l; std::getline(csv, l);) ++lines;
  EXPECT_EQ(lines, 40);
}

TEST_F(Cli, CalibrateWritesSnippet) {
  spit(dir / "gate.spec", "mode = symmetric\nnu1_MHz = 7.9\n");
  const auto r = cli("calibrate --spec " + path("gate.spec") + " --out " + path("gate.pp"));
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("mode=symmetric"), std::string::npos);
  EXPECT_NE(r.out.find("phase_simulated_rad="), std::string::npos);
  EXPECT_EQ(cli("validate --program " + path("gate.pp")).code, 0);
  spit(dir / "bad.spec", "mode = symmetric\nnu1_MHz = 7.9\nnu1_min_MHz = 1\n");
  EXPECT_EQ(cli("calibrate --spec " + path("bad.spec")).code, 2);
}

TEST_F(Cli, SweepSinglePointMatchesRun) {
  spit(dir / "one.sweep", "target = run\nprogram = " + std::string(ENDOSIM_SAMPLES) +
                              "/endor_kicks.pp\ngrid.rf_cutoff_MHz = 0.02\n");
  const auto s = cli("sweep --spec " + path("one.sweep") + " --out " + path("one.csv"));
  ASSERT_EQ(s.code, 0) << s.out;
  const auto r = cli("run --program " + sample("endor_kicks.pp"));
  ASSERT_EQ(r.code, 0);
  // Last trajectory row carries the same populations as the single sweep row.
  std::istringstream rows(r.out);
  std::string line, last;
  while (std::getline(rows, line)) last = line;
  std::istringstream table(slurp(dir / "one.csv"));
  std::string header, row;
  std::getline(table, header);
  std::getline(table, row);
  const std::string p00 = row.substr(row.find(',') + 1, row.find(',', row.find(',') + 1) - row.find(',') - 1);
  EXPECT_NE(last.find(p00), std::string::npos) << last << " vs " << row;
}

TEST_F(Cli, SweepResumesToIdenticalTable) {
  spit(dir / "s.sweep", "target = symmetric_gate\ngrid.nu1_MHz = 4:12:5\n");
  const auto full = cli("sweep --spec " + path("s.sweep") + " --out " + path("full.csv"));
  ASSERT_EQ(full.code, 0) << full.out;
  const auto part = cli("sweep --spec " + path("s.sweep") + " --out " + path("part.csv") + " --max-rows 2");
  EXPECT_EQ(part.code, 4) << part.out;
  EXPECT_FALSE(fs::exists(dir / "part.csv"));
  EXPECT_TRUE(fs::exists(dir / "part.csv.manifest"));
  // A torn trailing line from an interrupted write is ignored.
  std::ofstream(dir / "part.csv.manifest", std::ios::app) << "3\tduration_us=0.1";
  const auto rest = cli("sweep --spec " + path("s.sweep") + " --out " + path("part.csv"));
  ASSERT_EQ(rest.code, 0) << rest.out;
  EXPECT_EQ(slurp(dir / "part.csv"), slurp(dir / "full.csv"));
  EXPECT_FALSE(fs::exists(dir / "part.csv.manifest"));
  EXPECT_NE(slurp(dir / "full.csv").find("phase_unwrapped_rad"), std::string::npos);
}
