#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "nlspn/cli.hpp"
#include "nlspn/io.hpp"

using namespace nlspn;
namespace fs = std::filesystem;

namespace {

struct CliRun {
  int code;
  std::string out;
  std::string err;
};

CliRun run(std::vector<std::string> args) {
  args.insert(args.begin(), "nlspn");
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / "nlspn_cli_test" / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

void write_file(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const char* kSmallConfig = R"({
  "scene": {"kind": "two-plane-step", "height": 12, "width": 12, "depth_min": 1, "depth_max": 2},
  "sampling": {"count": 10, "seed": 1},
  "propagation": {"steps": 3},
  "fit": {"iterations": 5}
})";

}  // namespace

TEST(Cli, UsageErrors) {
  EXPECT_EQ(run({}).code, kExitUsage);
  EXPECT_EQ(run({"frobnicate"}).code, kExitUsage);
  EXPECT_EQ(run({"mc-norm", "--k", "zero"}).code, kExitUsage);
  EXPECT_EQ(run({"mc-norm", "--scheme", "softmax"}).code, kExitUsage);
  EXPECT_EQ(run({"gradcheck"}).code, kExitUsage);
  EXPECT_EQ(run({"--help"}).code, kExitOk);
}

TEST(Cli, McNormPaperValue) {
  const CliRun r = run({"mc-norm", "--k", "4", "--scheme", "abs-sum-star", "--samples", "1000000",
                     "--seed", "7"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const double p = std::stod(r.out);
  EXPECT_GE(p, 0.980);
  EXPECT_LE(p, 0.990);
}

TEST(Cli, NormPairsCsv) {
  const fs::path dir = scratch("pairs");
  const CliRun r = run({"norm-pairs", "--scheme", "abs-sum", "--samples", "10", "--out",
                     (dir / "p.csv").string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  std::istringstream in(read_file(dir / "p.csv"));
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "w1,w2");
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, 10);
}

TEST(Cli, SynthPropagateEvalPipeline) {
  const fs::path dir = scratch("pipeline");
  write_file(dir / "cfg.json", kSmallConfig);
  CliRun r = run({"synth", "--spec", (dir / "cfg.json").string(), "--out", (dir / "scene").string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  for (const char* f : {"gt.nlfm", "sparse.nlfm", "mask.nlfm", "discontinuity.nlfm", "gt.png", "sparse.png"}) {
    EXPECT_TRUE(fs::exists(dir / "scene" / f)) << f;
  }
  write_map(dir / "scene" / "affinity.nlfm", ChannelStack(12, 12, 8, 0.3));
  r = run({"propagate", "--config", (dir / "cfg.json").string(), "--in", (dir / "scene").string(),
           "--out", (dir / "out").string(), "--trace"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_EQ(read_map(dir / "out" / "trace.nlfm").channels(), 4);

  const std::string gt = (dir / "scene" / "gt.nlfm").string();
  r = run({"eval", "--pred", gt, "--gt", gt, "--out", (dir / "m.csv").string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_EQ(r.out, "rmse,mae,irmse,imae,rel,d1,d2,d3,count\n0,0,0,0,0,100,100,100,144\n");
  EXPECT_EQ(read_file(dir / "m.csv"), r.out);

  r = run({"eval", "--pred", (dir / "out" / "refined.nlfm").string(), "--gt",
           (dir / "scene" / "gt.png").string(), "--band",
           (dir / "scene" / "discontinuity.nlfm").string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_NE(r.out.find(",24\n"), std::string::npos) << r.out;
}

TEST(Cli, FitWritesArtifactsDeterministically) {
  const fs::path dir = scratch("fit");
  write_file(dir / "cfg.json", kSmallConfig);
  ASSERT_EQ(run({"fit", "--config", (dir / "cfg.json").string(), "--out", (dir / "a").string()}).code, kExitOk);
  ASSERT_EQ(run({"fit", "--config", (dir / "cfg.json").string(), "--out", (dir / "b").string()}).code, kExitOk);
  for (const char* f : {"x0.nlfm", "conf.nlfm", "offsets.nlfm", "affinity.nlfm", "refined.nlfm",
                        "trace.csv", "metrics.csv", "summary.json"}) {
    ASSERT_TRUE(fs::exists(dir / "a" / f)) << f;
    EXPECT_EQ(read_file(dir / "a" / f), read_file(dir / "b" / f)) << f;
  }
}

TEST(Cli, ConfigErrorsWriteNothing) {
  const fs::path dir = scratch("bad");
  write_file(dir / "cfg.json", R"({"scene": {"kind": "two-plane-step", "bogus": 1}, "sampling": {}})");
  const CliRun r = run({"synth", "--spec", (dir / "cfg.json").string(), "--out", (dir / "out").string()});
  EXPECT_EQ(r.code, kExitRuntime);
  EXPECT_NE(r.err.find("bogus"), std::string::npos);
  EXPECT_FALSE(fs::exists(dir / "out"));
  EXPECT_EQ(run({"eval", "--pred", "/nonexistent.nlfm", "--gt", "/nonexistent.nlfm"}).code, kExitRuntime);
}

TEST(Cli, AblateWritesTable) {
  const fs::path dir = scratch("ablate");
  write_file(dir / "cfg.json", R"({
    "propagation": {"steps": 2},
    "fit": {"iterations": 3},
    "ablation": {"suite": {"size": 12, "seed": 1}}
  })");
  const CliRun r = run({"ablate", "--config", (dir / "cfg.json").string(), "--out", (dir / "t.csv").string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  std::istringstream in(read_file(dir / "t.csv"));
  std::string line;
  int rows = -1;
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, 8);
}

TEST(Cli, GradcheckPasses) {
  const CliRun r = run({"gradcheck", "--seed", "1"});
  EXPECT_EQ(r.code, kExitOk) << r.out;
  EXPECT_NE(r.out.find("gradcheck passed"), std::string::npos);
}
