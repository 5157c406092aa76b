#include "../support/temp_dir.hpp"

#include <cli.hpp>

#include <gtest/gtest.h>

using testing_support::TempDir;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run cli(std::vector<std::string> args) {
  args.insert(args.begin(), "ssp");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = ssp::cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  ssp::thread_cap() = 0;
  return {code, out.str(), err.str()};
}

class CliTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    tmp_ = new TempDir;
    const auto r = cli({"synth", "--classes", "4", "--shots", "3", "--test", "20", "--dim", "16", "--grid", "3", "3",
                        "--gap-angle", "60", "--kappa", "50", "--seed", "7", "--out", bank()});
    ASSERT_EQ(r.code, 0) << r.err;
    ASSERT_EQ(cli({"build", "--bank", bank(), "--rank", "6", "--out", model()}).code, 0);
  }
  static void TearDownTestSuite() { delete tmp_; }

  static std::string bank() { return (*tmp_ / "bank").string(); }
  static std::string model() { return (*tmp_ / "model.bin").string(); }
  static inline TempDir* tmp_ = nullptr;
};

}  // namespace

TEST_F(CliTest, SynthWritesLoadableBank) {
  const auto b = ssp::load_bank(bank());
  EXPECT_EQ(b.N(), 4u);
  EXPECT_EQ(b.cells(), 9u);
  EXPECT_EQ(b.manifest.meta["seed"], 7);
}

TEST_F(CliTest, UsageErrorsExitTwo) {
  EXPECT_EQ(cli({"synth", "--grid", "0", "3", "--out", (*tmp_ / "x").string()}).code, 2);
  EXPECT_EQ(cli({"synth", "--gap-angle", "200", "--out", (*tmp_ / "x").string()}).code, 2);
  EXPECT_EQ(cli({"build", "--bank", bank(), "--q", "60", "--out", "-"}).code, 2);
  EXPECT_EQ(cli({"build", "--bank", bank()}).code, 2);
  EXPECT_EQ(cli({"classify", "--bank", bank(), "--classifier", "nope"}).code, 2);
  EXPECT_EQ(cli({"classify", "--bank", bank()}).code, 2);  // ssp-zeroshot without --model
  EXPECT_EQ(cli({"frobnicate"}).code, 2);
  EXPECT_EQ(cli({}).code, 2);
  EXPECT_EQ(cli({"sweep", "--bank", bank(), "--values", "4,x"}).code, 2);
  EXPECT_EQ(cli({"--help"}).code, 0);
}

TEST_F(CliTest, RuntimeErrorsExitOne) {
  const auto r = cli({"classify", "--bank", (*tmp_ / "missing").string(), "--classifier", "raw-zeroshot"});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("error:"), std::string::npos);
  ssp::binio::write_file(*tmp_ / "junk.bin", "junk");
  EXPECT_EQ(cli({"classify", "--bank", bank(), "--model", (*tmp_ / "junk.bin").string()}).code, 1);
}

TEST_F(CliTest, ProvenanceMismatchExitsThree) {
  const std::string other = (*tmp_ / "other").string();
  ASSERT_EQ(cli({"synth", "--classes", "4", "--shots", "3", "--test", "20", "--dim", "16", "--grid", "3", "3", "--seed", "8",
                 "--out", other})
                .code,
            0);
  const auto r = cli({"classify", "--bank", other, "--model", model()});
  EXPECT_EQ(r.code, 3);
  EXPECT_NE(r.err.find(ssp::ProvenanceError::hex(ssp::load_bank(bank()).digest())), std::string::npos);
  EXPECT_NE(r.err.find(ssp::ProvenanceError::hex(ssp::load_bank(other).digest())), std::string::npos);
  EXPECT_EQ(cli({"gap", "--bank", other, "--model", model()}).code, 3);
}

TEST_F(CliTest, RankClampWarnings) {
  const auto r = cli({"build", "--bank", bank(), "--rank", "900", "--out", (*tmp_ / "m900.bin").string()});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.err.find("warning: language subspace 0 clamped from 900 to 16"), std::string::npos) << r.err;
}

TEST_F(CliTest, BuildToStdoutMatchesFile) {
  const auto r = cli({"build", "--bank", bank(), "--rank", "6", "--out", "-"});
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(r.out, ssp::binio::read_file(model()));
}

TEST_F(CliTest, ClassifyReport) {
  const auto r = cli({"classify", "--bank", bank(), "--model", model(), "--out", "-"});
  ASSERT_EQ(r.code, 0);
  const auto j = ssp::json::parse(r.out);
  EXPECT_EQ(j["confusion"].size(), 4u);
  EXPECT_TRUE(j["timing_ms"].is_null());
  EXPECT_EQ(j["spec"]["kind"], "ssp-zeroshot");
  const auto timed = ssp::json::parse(cli({"classify", "--bank", bank(), "--model", model(), "--timing", "--out", "-"}).out);
  EXPECT_TRUE(timed["timing_ms"].is_number());
}

TEST_F(CliTest, AlphaZeroCacheSameAccuracy) {
  const auto a = ssp::json::parse(cli({"classify", "--bank", bank(), "--model", model(), "--out", "-"}).out);
  const auto b = ssp::json::parse(
      cli({"classify", "--bank", bank(), "--model", model(), "--classifier", "ssp-cache", "--alpha", "0", "--out", "-"}).out);
  EXPECT_EQ(a["accuracy"], b["accuracy"]);
  EXPECT_EQ(a["confusion"], b["confusion"]);
}

TEST_F(CliTest, GapBlocks) {
  const auto before = ssp::json::parse(cli({"gap", "--bank", bank()}).out);
  EXPECT_TRUE(before.contains("before"));
  EXPECT_FALSE(before.contains("after"));
  const auto both = ssp::json::parse(cli({"gap", "--bank", bank(), "--model", model()}).out);
  EXPECT_TRUE(both.contains("after"));
}

TEST_F(CliTest, Simmap) {
  const auto j = ssp::json::parse(cli({"simmap", "--bank", bank(), "--class", "0", "--shot", "0"}).out);
  EXPECT_EQ(j["class"], 0);
  EXPECT_EQ(j["shot"], 0);
  EXPECT_EQ(j["h"], 3);
  EXPECT_EQ(j["w"], 3);
  std::size_t entries = 0;
  for (const auto& row : j["map"]) entries += row.size();
  EXPECT_EQ(entries, 9u);
  const auto n = ssp::json::parse(cli({"simmap", "--bank", bank(), "--class", "1", "--shot", "2", "--normalized", "--ref", "image"}).out);
  double lo = 1, hi = 0;
  for (const auto& row : n["map"])
    for (double v : row) lo = std::min(lo, v), hi = std::max(hi, v);
  EXPECT_EQ(lo, 0.0);
  EXPECT_EQ(hi, 1.0);
  EXPECT_EQ(cli({"simmap", "--bank", bank(), "--class", "9"}).code, 2);
  EXPECT_EQ(cli({"simmap", "--bank", bank(), "--test-index", "3", "--ref", "aligned-text", "--model", model()}).code, 0);
}

TEST_F(CliTest, SweepRows) {
  const auto r = cli({"sweep", "--bank", bank(), "--param", "rank", "--values", "2,4,8,16"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(std::count(r.out.begin(), r.out.end(), '\n'), 5);
  EXPECT_EQ(cli({"sweep", "--bank", bank(), "--param", "q", "--values", "1,10"}).code, 2);
}

TEST_F(CliTest, AblateCsv) {
  const auto r = cli({"ablate", "--bank", bank(), "--rank", "6", "--shots", "1,3"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out.substr(0, r.out.find('\n')), "use_vision,use_language,shots,accuracy");
  EXPECT_EQ(std::count(r.out.begin(), r.out.end(), '\n'), 9);
  EXPECT_EQ(cli({"ablate", "--bank", bank(), "--shots", "4"}).code, 2);
}

TEST_F(CliTest, OutputIndependentOfThreads) {
  const std::vector<std::vector<std::string>> commands = {
      {"build", "--bank", bank(), "--rank", "6", "--out", "-"},
      {"classify", "--bank", bank(), "--model", model(), "--classifier", "ssp-cache", "--out", "-"},
      {"gap", "--bank", bank(), "--model", model(), "--out", "-"},
      {"simmap", "--bank", bank(), "--class", "2", "--shot", "1", "--out", "-"},
      {"sweep", "--bank", bank(), "--values", "2,4,8", "--out", "-"},
      {"ablate", "--bank", bank(), "--rank", "6", "--out", "-"},
  };
  for (auto args : commands) {
    auto one = args, many = args;
    one.insert(one.begin(), {"--threads", "1"});
    many.insert(many.begin(), {"--threads", "8"});
    const auto a = cli(one), b = cli(many), c = cli(one);
    EXPECT_EQ(a.code, 0) << args[0];
    EXPECT_EQ(a.out, b.out) << args[0];
    EXPECT_EQ(a.out, c.out) << args[0];
  }
}
