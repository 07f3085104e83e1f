#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>

#include "cicoder/experiment.hpp"
#include "cicoder/fileio.hpp"
#include "support.hpp"

using namespace cicoder;
using namespace cicoder::testing;

namespace {

struct Run {
  int code = -1;
  std::string out;
  std::string err;
};

Run cli(const TempDir& dir, const std::string& args) {
  const auto out = dir / "stdout.txt";
  const auto err = dir / "stderr.txt";
  const std::string cmd = std::string("'") + CICODER_CLI_PATH + "' " + args + " >'" + out.string() +
                          "' 2>'" + err.string() + "'";
  const int status = std::system(cmd.c_str());
  Run r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = read_file(out);
  r.err = read_file(err);
  return r;
}

}  // namespace

TEST(Cli, SelfStoiPrintsOne) {
  TempDir dir;
  write_wav(generate_speech(1), dir / "a.wav");
  const auto a = (dir / "a.wav").string();
  const auto r = cli(dir, "stoi --clean '" + a + "' --degraded '" + a + "'");
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out, "1.0000\n");
  const auto j = cli(dir, "stoi --json --clean '" + a + "' --degraded '" + a + "'");
  EXPECT_EQ(j.code, 0);
  EXPECT_NE(j.out.find("\"per_band\""), std::string::npos);
}

TEST(Cli, MissingRequiredOptionExitsTwoWithUsage) {
  TempDir dir;
  const auto r = cli(dir, "encode --out x");
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("--in"), std::string::npos) << r.err;
  EXPECT_NE(r.err.find("Usage"), std::string::npos) << r.err;
}

TEST(Cli, HelpAndUnknownSubcommand) {
  TempDir dir;
  const auto h = cli(dir, "--help");
  EXPECT_EQ(h.code, 0);
  EXPECT_NE(h.out.find("evaluate"), std::string::npos);
  EXPECT_EQ(cli(dir, "frobnicate").code, 2);
  EXPECT_EQ(cli(dir, "").code, 2);
}

TEST(Cli, OverlappingSplitsExitOneNamingFile) {
  TempDir dir;
  CorpusManifest m;
  m.ace_config_hash = hash(AceConfig{});
  m.entries = {{"x.wav", "x.egrm", 1.0, Split::kTrain},
               {"dup.wav", "d.egrm", 1.0, Split::kVal},
               {"dup.wav", "d.egrm", 1.0, Split::kTest}};
  write_manifest(m, dir / "manifest.txt");
  const auto r = cli(dir, "evaluate --manifest '" + (dir / "manifest.txt").string() + "' --checkpoint '" +
                              (dir / "m.nckp").string() + "' --out '" + (dir / "o").string() + "'");
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("dup.wav"), std::string::npos) << r.err;
  EXPECT_EQ(r.err.rfind("cicoder: ", 0), 0u) << r.err;
}

TEST(Cli, EncodeVocodeAndPrintConfig) {
  TempDir dir;
  write_wav(generate_speech(2, {16000, 1.0}), dir / "s.wav");
  ASSERT_EQ(cli(dir, "encode --in '" + (dir / "s.wav").string() + "' --out '" + (dir / "e").string() + "'").code, 0);
  EXPECT_EQ(read_electrodogram(dir / "e" / "s.egrm").num_frames, 1000u);
  ASSERT_EQ(cli(dir, "vocode --in '" + (dir / "e" / "s.egrm").string() + "' --out '" + (dir / "v.wav").string() +
                         "'").code, 0);
  EXPECT_EQ(read_wav(dir / "v.wav").samples.size(), 16000u);

  const auto p = cli(dir, "--print-config");
  EXPECT_EQ(p.code, 0);
  write_file_atomic(dir / "c.toml", p.out);
  const auto q = cli(dir, "--config '" + (dir / "c.toml").string() + "' --print-config");
  EXPECT_EQ(q.out, p.out);
  write_file_atomic(dir / "bad.toml", "[ace]\nwhat = 1\n");
  const auto b = cli(dir, "--config '" + (dir / "bad.toml").string() + "' --print-config");
  EXPECT_EQ(b.code, 1);
  EXPECT_NE(b.err.find("bad.toml"), std::string::npos) << b.err;
}

TEST(Cli, MissingInputFileExitsOne) {
  TempDir dir;
  const auto r = cli(dir, "vocode --in '" + (dir / "nope.egrm").string() + "' --out '" + (dir / "v.wav").string() + "'");
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("nope.egrm"), std::string::npos) << r.err;
}
