#include <gtest/gtest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "dyadlab/analysis.hpp"
#include "dyadlab/equilibrium.hpp"
#include "dyadlab/matrix.hpp"
#include "dyadlab/phenotypes.hpp"
#include "dyadlab/runner.hpp"

using namespace dyadlab;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code = -1;
  std::string out, err;
};

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / ("dyadlab_cli_" + std::string(info->name()) + "_" + std::to_string(::getpid()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  Outcome run(const std::string& args) const {
    const std::string err = path("stderr.txt");
    const std::string cmd = std::string(DYADLAB_CLI) + " " + args + " 2>" + err;
    Outcome o;
    FILE* pipe = ::popen(cmd.c_str(), "r");
    if (!pipe) return o;
    std::array<char, 4096> buf{};
    std::size_t n = 0;
    while ((n = std::fread(buf.data(), 1, buf.size(), pipe)) > 0) o.out.append(buf.data(), n);
    const int status = ::pclose(pipe);
    o.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    o.err = slurp(err);
    return o;
  }

  static std::string slurp(const std::string& p) {
    std::ifstream is(p, std::ios::binary);
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
  }

  fs::path dir_;
};

}  // namespace

TEST_F(Cli, NashThenRegionAverage) {
  const auto nash = run("nash --grid original --out " + path("nash.csv"));
  ASSERT_EQ(nash.code, 0) << nash.err;
  EXPECT_EQ(slurp(path("nash.csv")), to_csv(nash_matrix(GridSpec::original()).matrix));
  const auto avg = run("region-average " + path("nash.csv") + " --region original");
  ASSERT_EQ(avg.code, 0) << avg.err;
  EXPECT_EQ(avg.out, "0.500\n");
}

TEST_F(Cli, CompareAgainstItself) {
  ASSERT_EQ(run("nash --grid original --out " + path("a.csv")).code, 0);
  const auto r = run("compare " + path("a.csv") + " " + path("a.csv") + " --json");
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_EQ(j["msd"], 0.0);
  EXPECT_DOUBLE_EQ(j["pearson_r"].get<double>(), 1.0);
  EXPECT_EQ(j["n_cells"], 121);
}

TEST_F(Cli, NashAndPhenotypeAreByteReproducible) {
  for (int k = 0; k < 2; ++k) {
    ASSERT_EQ(run("nash --grid extended --method replicator --out " + path("r" + std::to_string(k) + ".csv")).code, 0);
    ASSERT_EQ(run("phenotype --weights paper --grid extended --out " + path("p" + std::to_string(k) + ".csv")).code, 0);
  }
  EXPECT_EQ(slurp(path("r0.csv")), slurp(path("r1.csv")));
  EXPECT_EQ(slurp(path("p0.csv")), slurp(path("p1.csv")));
  const auto p = load_csv(path("p0.csv"));
  EXPECT_EQ(p.at(8, 7), 0.94);
  EXPECT_EQ(p.at(2, 12), 0.23);
}

TEST_F(Cli, PhenotypeToStdout) {
  const auto r = run("phenotype --weights trustful --grid 2x2");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out, "S,T,value\n0,5,1\n0,6,1\n1,5,1\n1,6,1\n");
}

TEST_F(Cli, MockRunWritesMatrixAndLog) {
  const std::string out = path("run");
  const auto r = run("mock-run --grid 3x3 --plays 5 --seed 3 --out-dir " + out);
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("status completed"), std::string::npos);
  const auto m = load_csv(out + "/matrix.csv");
  EXPECT_EQ(m.size(), 9u);
  for (double v : m.cells()) EXPECT_EQ(v, 1.0);
  EXPECT_EQ(read_play_log(out + "/plays.jsonl").size(), 45u);

  const auto again = run("mock-run --grid 3x3 --plays 5 --out-dir " + out);
  EXPECT_EQ(again.code, 8);
  EXPECT_NE(again.err.find("error: state:"), std::string::npos);
}

TEST_F(Cli, MockRunInterruptAndResume) {
  const std::string out = path("run");
  const auto first = run("mock-run --grid 2x2 --plays 4 --policy flaky --stage double --max-rounds 1 --json --out-dir " + out);
  ASSERT_EQ(first.code, 0) << first.err;
  EXPECT_EQ(nlohmann::json::parse(first.out)["status"], "interrupted");
  const auto second = run("simulate --resume " + out + " --json");
  ASSERT_EQ(second.code, 0) << second.err;
  EXPECT_EQ(nlohmann::json::parse(second.out)["status"], "completed");

  const auto whole = run("mock-run --grid 2x2 --plays 4 --policy flaky --stage double --out-dir " + path("whole"));
  ASSERT_EQ(whole.code, 0) << whole.err;
  EXPECT_EQ(slurp(out + "/matrix.csv"), slurp(path("whole") + "/matrix.csv"));
}

TEST_F(Cli, SimulateFromConfig) {
  RunConfig c;
  c.grid = GridSpec{0, 1, 5, 6, 1};
  c.agent.kind = AgentKind::Phenotype;
  c.agent.phenotype = Phenotype::Optimist;
  c.plays_per_game = 3;
  c.output_dir = path("sim");
  std::ofstream(path("run.json")) << to_json(c).dump(2);
  const auto r = run("simulate --config " + path("run.json"));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(slurp(path("sim") + "/matrix.csv"), to_csv(phenotype_matrix(Phenotype::Optimist, c.grid)));
}

TEST_F(Cli, RenderAndIngest) {
  std::ofstream(path("human.csv")) << "S,T,coop_rate\n0,5,0.5\n0,6,0.25\n";
  const auto ing = run("ingest --in " + path("human.csv") + " --schema aggregate --grid 0-0:5-6 --out " + path("h.csv"));
  ASSERT_EQ(ing.code, 0) << ing.err;
  EXPECT_EQ(slurp(path("h.csv")), "S,T,value\n0,5,0.5\n0,6,0.25\n");
  const auto svg = run("render " + path("h.csv") + " --out " + path("h.svg") + " --outline-original");
  ASSERT_EQ(svg.code, 0) << svg.err;
  EXPECT_NE(slurp(path("h.svg")).find("<svg xmlns"), std::string::npos);

  std::ofstream(path("gap.csv")) << "S,T,coop_rate\n0,5,0.5\n";
  const auto gap = run("ingest --in " + path("gap.csv") + " --grid 0-0:5-6");
  EXPECT_EQ(gap.code, 5);
  EXPECT_NE(gap.err.find("error: ingestion: missing cells: (S=0,T=6)"), std::string::npos);
}

TEST_F(Cli, ValidateExtractorWithFake) {
  std::ofstream(path("gold.jsonl")) << R"({"long_answer": "I choose A.", "gold": "A"})" << "\n"
                                    << R"({"long_answer": "Group A pays less. I choose B.", "gold": "B"})" << "\n";
  const auto r = run("validate-extractor --annotations " + path("gold.jsonl") + " --fake --json");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(nlohmann::json::parse(r.out)["accuracy"], 1.0);
}

TEST_F(Cli, ErrorsAndUsage) {
  EXPECT_EQ(run("frobnicate").code, 2);
  EXPECT_EQ(run("nash --bogus").code, 2);
  EXPECT_EQ(run("").code, 2);
  const auto bad = run("nash --grid 5-2:5-6");
  EXPECT_EQ(bad.code, 3);
  EXPECT_EQ(bad.err.rfind("error: specification: ", 0), 0u) << bad.err;
  EXPECT_EQ(run("region-average " + path("missing.csv")).code, 10);
  EXPECT_EQ(run("simulate --resume " + path("nowhere")).code, 8);
}

TEST_F(Cli, HelpListsEveryFlag) {
  for (const char* cmd : {"nash", "phenotype", "simulate", "mock-run", "compare", "region-average", "render",
                          "validate-extractor", "ingest"}) {
    const auto r = run(std::string(cmd) + " --help");
    EXPECT_EQ(r.code, 0) << cmd;
    EXPECT_NE(r.out.find("--help"), std::string::npos) << cmd;
  }
  const auto mock = run("mock-run --help").out;
  for (const char* flag : {"--grid", "--plays", "--policy", "--stage", "--seed", "--out-dir", "--max-rounds"})
    EXPECT_NE(mock.find(flag), std::string::npos) << flag;
}
