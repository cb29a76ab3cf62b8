#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

class Cli : public ::testing::Test {
protected:
  void SetUp() override {
    std::random_device rd;
    dir_ = fs::temp_directory_path() / ("segtext_cli_" + std::to_string(rd()));
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  // Runs the tool with `args` inside the temp dir; returns the exit status.
  int run(const std::string& args, const std::string& stdout_file = "stdout.txt") const {
    std::string cmd = "cd '" + dir_.string() + "' && '" + SEGTEXT_CLI_PATH + "' " + args + " > " + stdout_file +
                      " 2> stderr.txt";
    int rc = std::system(cmd.c_str());
    return rc == 0 ? 0 : 1;
  }

  std::string slurp(const std::string& name) const {
    std::ifstream in(path(name), std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }

  bool exists(const std::string& name) const { return fs::exists(dir_ / name); }

  // Small end-to-end pipeline; every artifact lands in the temp dir.
  void pipeline() const {
    ASSERT_EQ(run("synth --docs 60 --seed 1 --out train.txt --pairs-out pairs.txt"), 0);
    ASSERT_EQ(run("synth --docs 15 --seed 2 --out heldout.txt"), 0);
    ASSERT_EQ(run("synth --docs 15 --seed 3 --out test.txt"), 0);
    ASSERT_EQ(run("build-vocab --corpus train.txt --size 2000 --out vocab.txt"), 0);
    ASSERT_EQ(run("train-trigram --corpus train.txt --vocab vocab.txt --out lm.arpa"), 0);
    ASSERT_EQ(run("select-triggers --corpus train.txt --vocab vocab.txt --window 200 --max-pairs 100 --out sel.txt"), 0);
    std::string models = "--vocab vocab.txt --trigram lm.arpa --window 200";
    ASSERT_EQ(run("train-triggers --corpus train.txt " + models +
                  " --triggers sel.txt --iterations 3 --out trig.txt --log ll.txt"),
              0);
    models += " --triggers trig.txt";
    ASSERT_EQ(run("relevance-profile --corpus train.txt " + models + " --max-offset 5 --out profile.txt"), 0);
    ASSERT_EQ(run("extract-events --corpus train.txt " + models + " --out events.tsv"), 0);
    ASSERT_EQ(run("induce --corpus train.txt " + models +
                  " --num-features 6 --max-word-rank 50 --out model.txt --trace trace.txt"),
              0);
    ASSERT_EQ(run("tune --heldout heldout.txt " + models + " --model model.txt --out config.txt"), 0);
    ASSERT_EQ(run("segment --text test.txt " + models +
                  " --model model.txt --config config.txt --out hyp.seg --probs-out probs.txt --ref-out ref.seg"),
              0);
    ASSERT_EQ(run("baseline --ref ref.seg --kind even --out even.seg"), 0);
    ASSERT_EQ(run("evaluate --ref ref.seg --hyp hyp.seg --hyp even.seg --baselines", "report.txt"), 0);
  }

  fs::path dir_;
};

}  // namespace

TEST_F(Cli, PipelineProducesArtifacts) {
  pipeline();
  for (const char* f : {"train.txt", "pairs.txt", "vocab.txt", "lm.arpa", "sel.txt", "trig.txt", "ll.txt",
                        "profile.txt", "events.tsv", "model.txt", "trace.txt", "config.txt", "hyp.seg",
                        "probs.txt", "ref.seg", "even.seg"})
    EXPECT_TRUE(exists(f)) << f;
  EXPECT_EQ(slurp("events.tsv").rfind("gap\tlabel\trelevance_next\n", 0), 0u);
  std::string config = slurp("config.txt");
  EXPECT_NE(config.find("alpha\t"), std::string::npos);
  EXPECT_NE(config.find("epsilon\t"), std::string::npos);
  std::string report = slurp("report.txt");
  for (const char* row : {"model", "hyp", "even", "random", "all", "none"})
    EXPECT_NE(report.find(row), std::string::npos) << row;
}

TEST_F(Cli, RerunsAreByteIdentical) {
  pipeline();
  std::string model = slurp("model.txt"), trig = slurp("trig.txt"), hyp = slurp("hyp.seg");
  ASSERT_EQ(run("train-triggers --corpus train.txt --vocab vocab.txt --trigram lm.arpa --window 200"
                " --triggers sel.txt --iterations 3 --threads 3 --out trig2.txt"),
            0);
  EXPECT_EQ(slurp("trig2.txt"), trig);
  ASSERT_EQ(run("induce --corpus train.txt --vocab vocab.txt --trigram lm.arpa --window 200 --triggers trig.txt"
                " --num-features 6 --max-word-rank 50 --threads 2 --out model2.txt"),
            0);
  EXPECT_EQ(slurp("model2.txt"), model);
  ASSERT_EQ(run("segment --text test.txt --vocab vocab.txt --trigram lm.arpa --window 200 --triggers trig.txt"
                " --model model.txt --config config.txt --out hyp2.seg"),
            0);
  EXPECT_EQ(slurp("hyp2.seg"), hyp);
}

TEST_F(Cli, TsvReport) {
  ASSERT_EQ(run("synth --docs 5 --seed 1 --out c.txt"), 0);
  ASSERT_EQ(run("baseline --ref-corpus c.txt --kind all --out all.seg"), 0);
  ASSERT_EQ(run("evaluate --ref-corpus c.txt --hyp all.seg --tsv", "r.tsv"), 0);
  std::istringstream is(slurp("r.tsv"));
  std::string header, row;
  std::getline(is, header);
  std::getline(is, row);
  EXPECT_EQ(header.rfind("model\t", 0), 0u);
  EXPECT_EQ(row.rfind("all\t", 0), 0u);
}

TEST_F(Cli, FailuresExitNonzeroWithoutOutput) {
  EXPECT_NE(run("build-vocab --corpus missing.txt --out v.txt"), 0);
  EXPECT_FALSE(exists("v.txt"));
  EXPECT_NE(slurp("stderr.txt").find("segtext: error"), std::string::npos);

  EXPECT_NE(run("synth --docs 3 --bogus 1 --out s.txt"), 0);
  EXPECT_FALSE(exists("s.txt"));

  {
    std::ofstream bad(path("bad.seg"));
    bad << "not a segmentation\n";
  }
  EXPECT_NE(run("baseline --ref bad.seg --kind none --out b.seg"), 0);
  EXPECT_FALSE(exists("b.seg"));

  ASSERT_EQ(run("synth --docs 3 --seed 1 --out c.txt"), 0);
  EXPECT_NE(run("build-vocab --corpus c.txt --size 2 --out v.txt"), 0);
  EXPECT_FALSE(exists("v.txt"));
  EXPECT_NE(run("nonsense"), 0);
}
