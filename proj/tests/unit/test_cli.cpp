#include <gtest/gtest.h>

#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "c2f/image_io.hpp"

namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string output;
};

Run run(const std::string& args) {
  const std::string cmd = std::string(C2FNET_BINARY) + " " + args + " 2>&1";
  Run r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return r;
  std::array<char, 512> buf{};
  while (std::fgets(buf.data(), buf.size(), pipe)) r.output += buf.data();
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("c2f_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::size_t count_files(const fs::path& dir, const std::string& ext) {
  std::size_t n = 0;
  for (const auto& e : fs::directory_iterator(dir)) n += e.path().extension() == ext;
  return n;
}

void write_text(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

const char* kTinyConfig =
    "image_size = 32\nbackbone_channels = 4,4,6,6,8\nrfb_channels = 6\nmsca_reduction = 2\n"
    "epochs = 1\nbatch_size = 2\nweight_kernel = 7\n";

}  // namespace

TEST(Cli, GenDataIsReproducible) {
  const auto dir = scratch("gen");
  const std::string flags = " --count 8 --size 64 --seed 1";
  ASSERT_EQ(run("-q gen-data --out " + (dir / "a").string() + flags).code, 0);
  ASSERT_EQ(run("-q gen-data --out " + (dir / "b").string() + flags).code, 0);
  EXPECT_EQ(count_files(dir / "a" / "images", ".ppm"), 8u);
  EXPECT_EQ(count_files(dir / "a" / "masks", ".pgm"), 8u);
  EXPECT_TRUE(fs::exists(dir / "a" / "manifest.txt"));
  for (const auto& e : fs::recursive_directory_iterator(dir / "a")) {
    if (!e.is_regular_file()) continue;
    const auto rel = fs::relative(e.path(), dir / "a");
    EXPECT_EQ(c2f::read_binary_file(e.path()), c2f::read_binary_file(dir / "b" / rel)) << rel;
  }
}

TEST(Cli, GenDataRejectsBadSize) {
  const auto dir = scratch("badsize");
  const auto r = run("gen-data --out " + dir.string() + " --size 60");
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.output.find("32"), std::string::npos) << r.output;
}

TEST(Cli, UsageErrors) {
  EXPECT_EQ(run("").code, 1);
  EXPECT_EQ(run("train --data x").code, 1);
  EXPECT_EQ(run("frobnicate").code, 1);
}

TEST(Cli, TrainRejectsUnknownKey) {
  const auto dir = scratch("unknown");
  write_text(dir / "bad.cfg", "lr = 1e-3\nmomentum = 0.9\n");
  ASSERT_EQ(run("-q gen-data --out " + (dir / "data").string() + " --count 2 --size 32").code, 0);
  const auto r = run("train --config " + (dir / "bad.cfg").string() + " --data " +
                     (dir / "data").string() + " --out " + (dir / "run").string());
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.output.find("momentum"), std::string::npos) << r.output;
}

TEST(Cli, TrainInferEvalPipeline) {
  const auto dir = scratch("pipeline");
  write_text(dir / "tiny.cfg", kTinyConfig);
  ASSERT_EQ(run("-q gen-data --out " + (dir / "data").string() + " --count 4 --size 32").code, 0);
  const std::string train = "-q train --config " + (dir / "tiny.cfg").string() + " --data " +
                            (dir / "data").string() + " --out ";
  ASSERT_EQ(run(train + (dir / "a").string()).code, 0);
  ASSERT_EQ(run(train + (dir / "b").string()).code, 0);
  EXPECT_TRUE(fs::exists(dir / "a" / "model.ckpt"));
  EXPECT_EQ(c2f::read_binary_file(dir / "a" / "loss.log"), c2f::read_binary_file(dir / "b" / "loss.log"));
  EXPECT_NE(c2f::read_binary_file(dir / "a" / "loss.log").find("# config rfb_channels = 6"),
            std::string::npos);

  const std::string infer = "-q infer --ckpt " + (dir / "a" / "model.ckpt").string() + " --images " +
                            (dir / "data" / "images").string() + " --out ";
  ASSERT_EQ(run(infer + (dir / "p1").string()).code, 0);
  ASSERT_EQ(run(infer + (dir / "p2").string()).code, 0);
  EXPECT_EQ(count_files(dir / "p1", ".pgm"), 4u);
  for (const auto& e : fs::directory_iterator(dir / "p1")) {
    EXPECT_EQ(c2f::read_binary_file(e.path()), c2f::read_binary_file(dir / "p2" / e.path().filename()));
    const auto img = c2f::read_image(e.path());
    EXPECT_EQ(img.shape(), (c2f::Shape{1, 1, 32, 32}));
  }

  const auto r1 = run("eval --pred " + (dir / "p1").string() + " --gt " + (dir / "data" / "masks").string() +
                      " --out " + (dir / "r1.csv").string());
  const auto r2 = run("eval --pred " + (dir / "p1").string() + " --gt " + (dir / "data" / "masks").string() +
                      " --out " + (dir / "r2.csv").string());
  ASSERT_EQ(r1.code, 0) << r1.output;
  EXPECT_EQ(c2f::read_binary_file(dir / "r1.csv"), c2f::read_binary_file(dir / "r2.csv"));
  EXPECT_NE(r1.output.find("MEAN,"), std::string::npos);
}

TEST(Cli, EvalIdenticalDirectories) {
  const auto dir = scratch("same");
  ASSERT_EQ(run("-q gen-data --out " + dir.string() + " --count 3 --size 32").code, 0);
  const auto masks = (dir / "masks").string();
  const auto r = run("eval --pred " + masks + " --gt " + masks + " --out " + (dir / "r.csv").string());
  ASSERT_EQ(r.code, 0) << r.output;
  const auto csv = c2f::read_binary_file(dir / "r.csv");
  const auto mean = csv.substr(csv.find("MEAN,"));
  EXPECT_EQ(mean.substr(0, 14), "MEAN,0.000000,");
  EXPECT_NE(mean.find(",1.000000,"), std::string::npos) << mean;
  EXPECT_EQ(mean.substr(mean.size() - 9), "1.000000\n");
}

TEST(Cli, EvalListsMissingMasks) {
  const auto dir = scratch("missing");
  ASSERT_EQ(run("-q gen-data --out " + dir.string() + " --count 3 --size 32").code, 0);
  fs::copy(dir / "masks", dir / "pred");
  fs::remove(dir / "masks" / "00001.pgm");
  const auto r = run("eval --pred " + (dir / "pred").string() + " --gt " + (dir / "masks").string() +
                     " --out " + (dir / "r.csv").string());
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.output.find("00001"), std::string::npos) << r.output;
}

TEST(Cli, SelfcheckSingleSuite) {
  const auto r = run("selfcheck --suite edt-oracle");
  EXPECT_EQ(r.code, 0) << r.output;
  EXPECT_NE(r.output.find("edt-oracle"), std::string::npos);
  EXPECT_EQ(run("selfcheck --suite nonsense").code, 1);
}
