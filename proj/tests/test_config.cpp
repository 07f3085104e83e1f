#include <gtest/gtest.h>

#include "cicoder/config.hpp"
#include "cicoder/fileio.hpp"
#include "support.hpp"

using namespace cicoder;

TEST(Config, DefaultsRoundTripAndEmitIsIdempotent) {
  const GlobalConfig def;
  const std::string text = emit_config(def);
  const GlobalConfig back = parse_config(text);
  EXPECT_EQ(back, def);
  EXPECT_EQ(emit_config(back), text);
  EXPECT_EQ(parse_config(""), def);
}

TEST(Config, NonDefaultValuesSurvive) {
  GlobalConfig c;
  c.ace.num_maxima = 6;
  c.ace.lgf_rho = 0.1 + 0.2;
  c.model.tcn_layers = {{16, 5, 1, Activation::kTanh}, {8, 2, 3, Activation::kIdentity}};
  c.model.attention_context = 17;
  c.training.chunk_frames = 100;
  c.training.rng_seed = 18446744073709551615ull;
  c.vocoder.inverse_lgf = false;
  c.stoi.reference_method = false;
  c.experiment.normalize_dbfs = -23.5;
  const std::string text = emit_config(c);
  const GlobalConfig back = parse_config(text);
  EXPECT_EQ(back, c);
  EXPECT_EQ(emit_config(back), text);
}

TEST(Config, PartialFileKeepsDefaults) {
  const auto c = parse_config("# comment\n[ace]\nnum_maxima = 4   # trailing\n\n[training]\nmax_epochs = 10\n");
  EXPECT_EQ(c.ace.num_maxima, 4);
  EXPECT_EQ(c.training.max_epochs, 10);
  EXPECT_EQ(c.model, ModelConfig{});
}

TEST(Config, RejectsUnknownAndMalformed) {
  auto message = [](const std::string& text) {
    try {
      parse_config(text);
    } catch (const FormatError& e) {
      return std::string(e.what());
    }
    return std::string("no error");
  };
  EXPECT_NE(message("[ace]\nbogus = 1\n").find("line 2"), std::string::npos);
  EXPECT_NE(message("[nonsense]\n").find("line 1"), std::string::npos);
  EXPECT_NE(message("[ace]\nnum_maxima = eight\n").find("line 2"), std::string::npos);
  EXPECT_NE(message("[ace]\nnum_maxima 8\n").find("line 2"), std::string::npos);
  EXPECT_NE(message("[vocoder]\ninverse_lgf = yes\n").find("line 2"), std::string::npos);
  EXPECT_NE(message("top = 1\n").find("line 1"), std::string::npos);
}

TEST(Config, LoadValidatesAndNamesFile) {
  cicoder::testing::TempDir dir;
  write_file_atomic(dir / "c.toml", "[model]\nnum_channels = 20\n");
  try {
    load_config(dir / "c.toml");
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("c.toml"), std::string::npos) << e.what();
  }
  write_file_atomic(dir / "ok.toml", "[ace]\nnum_maxima = 5\n");
  EXPECT_EQ(load_config(dir / "ok.toml").ace.num_maxima, 5);
}
