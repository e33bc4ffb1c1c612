#include <gtest/gtest.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "mouthtrace/image.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

const fs::path kWork = fs::temp_directory_path() / ("mouthtrace_cli_test_" + std::to_string(::getpid()));

/// Exit status of `mouthtrace <args>`; output goes to a log in the work dir.
int run(const std::string& args) {
  fs::create_directories(kWork);
  const std::string cmd = std::string(MOUTHTRACE_CLI) + " " + args + " >>" + (kWork / "out.log").string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string read_text(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

std::string w(const char* rel) { return (kWork / rel).string(); }

class Cli : public ::testing::Test {
 protected:
  static void TearDownTestSuite() { fs::remove_all(kWork); }
};

}  // namespace

TEST_F(Cli, HelpAndUsageErrors) {
  EXPECT_EQ(run("--help"), 0);
  EXPECT_EQ(run(""), 2);
  EXPECT_EQ(run("frobnicate"), 2);
  EXPECT_EQ(run("corrupt --kind blur"), 2);
}

TEST_F(Cli, ParamsAndGradcheck) {
  EXPECT_EQ(run("params"), 0);
  EXPECT_EQ(run("gradcheck --instances 2 --seed 5"), 0);
  EXPECT_EQ(run("gradcheck --instances 2 --tolerance 0"), 4);
}

TEST_F(Cli, ConfigErrorsExitTwo) {
  fs::create_directories(kWork);
  std::ofstream(w("bad.json")) << R"({"train": {"bogus": 1}})";
  EXPECT_EQ(run("--config " + w("bad.json") + " params"), 2);
  EXPECT_EQ(run("synth --out " + w("s") + " --family nope --seed 1"), 2);
  EXPECT_EQ(run("synth --out " + w("s")), 2);  // no seed
  EXPECT_EQ(run("corrupt --kind fog --severity 1 --seed 1 --in " + kWork.string() + " --out " + w("c")), 2);
}

TEST_F(Cli, DataErrorsExitThree) {
  fs::create_directories(kWork / "empty");
  EXPECT_EQ(run("corrupt --kind blur --severity 1 --seed 1 --in " + w("empty") + " --out " + w("c")), 3);
  std::ofstream(w("broken.jsonl")) << "{not json\n";
  EXPECT_EQ(run("preprocess --manifest " + w("broken.jsonl") + " --out " + w("p")), 3);
}

TEST_F(Cli, CorruptWritesFrames) {
  fs::create_directories(kWork / "frames");
  for (int i = 0; i < 3; ++i)
    mouthtrace::write_image(kWork / "frames" / ("0000" + std::to_string(i) + ".png"),
                            mouthtrace::Image(32, 32, 3, static_cast<std::uint8_t>(60 + 40 * i)));
  ASSERT_EQ(run("corrupt --kind noise --severity 2 --seed 4 --in " + w("frames") + " --out " + w("noisy")), 0);
  EXPECT_EQ(mouthtrace::list_frames(kWork / "noisy").size(), 3u);
  EXPECT_NE(mouthtrace::read_image(kWork / "noisy/00001.png"), mouthtrace::read_image(kWork / "frames/00001.png"));
}

TEST_F(Cli, ScratchPipelineProducesReports) {
  ASSERT_EQ(run("synth --out " + w("fg") + " --seed 3 --num-videos 8 --frames 30"), 0);
  ASSERT_EQ(run("preprocess --manifest " + w("fg/manifest.jsonl") + " --out " + w("fgp")), 0);
  // Forgery finetuning needs pretrained weights unless training from scratch.
  EXPECT_EQ(run("train --manifest " + w("fgp/manifest.jsonl") + " --out " + w("ck/x.lfw") + " --seed 1"), 2);
  ASSERT_EQ(run("train --manifest " + w("fgp/manifest.jsonl") + " --out " + w("ck/fg.lfw") +
                " --seed 1 --mode scratch --epochs 1 --batch-size 4"),
            0);
  EXPECT_TRUE(fs::exists(kWork / "ck/fg.lfw.config.json"));
  const auto log = read_text(kWork / "ck/fg.lfw.log.jsonl");
  EXPECT_EQ(json::parse(log.substr(0, log.find('\n')))["epoch"], 1);

  const std::string eval = "eval --checkpoint " + w("ck/fg.lfw") + " --manifest " + w("fgp/manifest.jsonl") + " --seed 2";
  ASSERT_EQ(run(eval + " --out " + w("plain.json")), 0);
  const json plain = json::parse(read_text(kWork / "plain.json"));
  EXPECT_EQ(plain["protocol"], "plain");
  EXPECT_FALSE(plain["videos"].empty());
  ASSERT_EQ(run(eval + " --protocol clip-sweep --out " + w("sweep.json")), 0);
  EXPECT_EQ(json::parse(read_text(kWork / "sweep.json"))["rows"].size(), 6u);
  ASSERT_EQ(run(eval + " --protocol frame-probe --out " + w("probe.json")), 0);
  EXPECT_GT(json::parse(read_text(kWork / "probe.json"))["testFrames"], 0);
  // Only one fake method in this corpus.
  EXPECT_EQ(run(eval + " --protocol cross-manipulation --mode scratch --epochs 1 --out " + w("cm.json")), 3);

  std::string clip;
  for (const auto& e : fs::directory_iterator(kWork / "fgp"))
    if (e.path().extension() == ".lfw") clip = e.path().string();
  ASSERT_FALSE(clip.empty());
  ASSERT_EQ(run("occlude --checkpoint " + w("ck/fg.lfw") + " --clip " + clip + " --block 60 --out " + w("occ/h.pgm")), 0);
  const auto heat = mouthtrace::read_image(kWork / "occ/h.pgm");
  EXPECT_EQ(heat.width, 88);
  EXPECT_EQ(heat.channels, 1);
  EXPECT_TRUE(fs::exists(kWork / "occ/h_overlay.png"));
  EXPECT_EQ(run("occlude --checkpoint " + w("ck/fg.lfw") + " --clip " + clip + " --index 99 --out " + w("o.pgm")), 3);
}
