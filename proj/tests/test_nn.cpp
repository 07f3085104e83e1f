#include <gtest/gtest.h>

#include <cmath>

#include "cicoder/checkpoint.hpp"
#include "cicoder/nn.hpp"
#include "cicoder/speechgen.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace cicoder;
using namespace cicoder::testing;

namespace {

TcnLayerParams layer(std::size_t out, std::size_t in, std::size_t k, int d, Activation a) {
  TcnLayerParams p;
  p.weight = Tensor({out, in, k});
  p.bias = Tensor({out});
  p.dilation = d;
  p.activation = a;
  return p;
}

void expect_near(const Matrix& a, const Matrix& b, double tol) {
  ASSERT_EQ(a.rows(), b.rows());
  ASSERT_EQ(a.cols(), b.cols());
  for (std::size_t i = 0; i < a.data().size(); ++i) EXPECT_NEAR(a.data()[i], b.data()[i], tol) << i;
}

Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  Matrix m(rows.size(), rows.begin()->size());
  std::size_t r = 0;
  for (auto row : rows) {
    std::size_t c = 0;
    for (double v : row) m(r, c++) = v;
    ++r;
  }
  return m;
}

}  // namespace

TEST(Conv, IdentityKernel) {
  auto l = layer(3, 3, 1, 1, Activation::kIdentity);
  for (std::size_t c = 0; c < 3; ++c) l.weight[c * 3 + c] = 1.0;
  detail::SplitMix rng(1);
  const Matrix x = random_matrix(3, 10, rng);
  EXPECT_EQ(causal_dilated_conv1d(x, l), x);
}

TEST(Conv, PureDelay) {
  auto l = layer(1, 1, 2, 1, Activation::kIdentity);
  l.weight[0] = 1.0;  // tap on x[t - 1]
  const Matrix x = from_rows({{3, 1, 4, 1, 5}});
  EXPECT_EQ(causal_dilated_conv1d(x, l), from_rows({{0, 3, 1, 4, 1}}));
}

TEST(Conv, MatchesNaiveSum) {
  detail::SplitMix rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    auto l = layer(1 + rng.below(4), 1 + rng.below(4), 1 + rng.below(4), 1 + static_cast<int>(rng.below(4)),
                   static_cast<Activation>(rng.below(3)));
    for (double& w : l.weight.data()) w = rng.uniform(-1, 1);
    for (double& b : l.bias.data()) b = rng.uniform(-1, 1);
    const Matrix x = random_matrix(l.in_channels(), 1 + rng.below(12), rng);
    expect_near(causal_dilated_conv1d(x, l), naive_conv(x, l), 1e-12);
  }
  auto l = layer(1, 1, 3, 2, Activation::kIdentity);
  for (double& w : l.weight.data()) w = rng.uniform(-1, 1);
  const Matrix x = random_matrix(1, 8, rng);
  expect_near(causal_dilated_conv1d(x, l), naive_conv(x, l), 1e-12);
}

TEST(Conv, ShapeErrors) {
  auto l = layer(2, 3, 1, 1, Activation::kRelu);
  EXPECT_THROW(causal_dilated_conv1d(Matrix(2, 4), l), ShapeError);
}

TEST(Attention, SingleKey) {
  const Matrix q = from_rows({{0.3, -2.0}, {5.0, 1.0}});
  const Matrix k = from_rows({{1.0, 1.0}});
  const Matrix v = from_rows({{0.25, -0.5, 2.0}});
  const auto r = scaled_dot_product_attention(q, k, v);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(r.weights(i, 0), 1.0);
    for (std::size_t a = 0; a < 3; ++a) EXPECT_EQ(r.output(i, a), v(0, a));
  }
}

TEST(Attention, IdenticalKeysAverageValues) {
  detail::SplitMix rng(3);
  const Matrix q = random_matrix(3, 4, rng);
  Matrix k(5, 4);
  for (std::size_t j = 0; j < 5; ++j)
    for (std::size_t a = 0; a < 4; ++a) k(j, a) = 0.1 * a - 0.2;
  const Matrix v = random_matrix(5, 2, rng);
  const auto r = scaled_dot_product_attention(q, k, v);
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t a = 0; a < 2; ++a) {
      double mean = 0.0;
      for (std::size_t j = 0; j < 5; ++j) mean += v(j, a) / 5.0;
      EXPECT_NEAR(r.output(i, a), mean, 1e-15);
    }
  }
}

TEST(Attention, WorkedExample) {
  const auto r = scaled_dot_product_attention(from_rows({{1, 0}}), from_rows({{1, 0}, {0, 1}}),
                                              from_rows({{1, 0}, {0, 1}}));
  // mpmath: e^(1/sqrt 2) / (e^(1/sqrt 2) + 1)
  constexpr double sigma = 0.669761549326656925616794945834;
  EXPECT_NEAR(r.weights(0, 0), sigma, 1e-15);
  EXPECT_NEAR(r.output(0, 0), sigma, 1e-15);
  EXPECT_NEAR(r.output(0, 1), 0.330238450673343074383205054166, 1e-15);
}

TEST(Attention, MatchesNaiveOracleAndNormalises) {
  detail::SplitMix rng(4);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + rng.below(6), m = 1 + rng.below(6), dk = 1 + rng.below(6),
                      dv = 1 + rng.below(6);
    const Matrix q = random_matrix(n, dk, rng, -3, 3);
    const Matrix k = random_matrix(m, dk, rng, -3, 3);
    const Matrix v = random_matrix(m, dv, rng, -3, 3);
    const auto r = scaled_dot_product_attention(q, k, v);
    expect_near(r.output, naive_attention(q, k, v), 1e-10);
    for (std::size_t i = 0; i < n; ++i) {
      double sum = 0.0;
      for (double w : r.weights.row(i)) {
        EXPECT_GE(w, 0.0);
        sum += w;
      }
      EXPECT_NEAR(sum, 1.0, 1e-12);
    }
  }
}

TEST(Attention, LargeLogitsStayFinite) {
  const auto r = scaled_dot_product_attention(from_rows({{800, 0}}), from_rows({{1, 0}, {-1, 0}}),
                                              from_rows({{2}, {7}}));
  EXPECT_EQ(r.output(0, 0), 2.0);
}

TEST(Attention, ShapeErrors) {
  EXPECT_THROW(scaled_dot_product_attention(Matrix(1, 2), Matrix(2, 3), Matrix(2, 1)), ShapeError);
  EXPECT_THROW(scaled_dot_product_attention(Matrix(1, 2), Matrix(2, 2), Matrix(3, 1)), ShapeError);
}

TEST(Model, ZeroWeightsGiveHalfAndZeroLogits) {
  ModelParams p = init_params(ModelConfig{}, 9);
  for (auto& n : p.named_tensors())
    for (double& w : n.tensor->data()) w = 0.0;
  detail::SplitMix rng(5);
  const auto out = model_forward(random_matrix(22, 40, rng, 0, 5), p);
  for (double m : out.magnitudes.data()) EXPECT_EQ(m, 0.5);
  for (double l : out.logits.data()) EXPECT_EQ(l, 0.0);
}

TEST(Model, ConfigShapes) {
  const ModelConfig cfg;
  EXPECT_EQ(cfg.hidden_channels(), 32);
  EXPECT_EQ(cfg.receptive_field(), 31);
  const ModelParams p = init_params(cfg, 1);
  EXPECT_EQ(p.magnitude_head.weight.shape(), (std::vector<std::size_t>{22, 64}));
  EXPECT_EQ(p.tcn[0].weight.shape(), (std::vector<std::size_t>{32, 22, 3}));
  EXPECT_EQ(init_params(cfg, 1).tcn[2].weight, p.tcn[2].weight);
  EXPECT_NE(init_params(cfg, 2).tcn[2].weight, p.tcn[2].weight);
  ModelConfig bad = cfg;
  bad.tcn_layers[1].dilation = 0;
  EXPECT_THROW(bad.validate(), Error);
}

TEST(Loss, PerfectPrediction) {
  detail::SplitMix rng(6);
  const auto target = random_target(4, 9, rng);
  Matrix mag(4, 9), logits(4, 9);
  for (std::size_t c = 0; c < 4; ++c)
    for (std::size_t t = 0; t < 9; ++t) {
      mag(c, t) = target.at(c, t);
      logits(c, t) = target.at(c, t) > 0.0f ? 40.0 : -40.0;
    }
  EXPECT_LT(combined_loss(mag, logits, target, 1.0).value, 1e-10);
}

TEST(Loss, MseArithmetic) {
  Electrodogram target(1, 1, 1000.0);
  target.at(0, 0) = 0.5f;
  const auto r = combined_loss(Matrix(1, 1, 0.6), Matrix(1, 1, 3.0), target, 0.0);
  EXPECT_NEAR(r.value, 0.01, 1e-15);
}

TEST(Loss, BceAtZeroLogit) {
  Electrodogram target(1, 1, 1000.0);
  target.at(0, 0) = 0.25f;
  const auto r = combined_loss(Matrix(1, 1, 0.25), Matrix(1, 1, 0.0), target, 1.0);
  EXPECT_NEAR(r.value, 0.693147180559945309417232121458, 1e-15);
  EXPECT_NEAR(r.grad_logits(0, 0), -0.5, 1e-15);
}

TEST(Loss, ExtremeLogitsStayFinite) {
  Electrodogram target(1, 2, 1000.0);
  target.at(0, 0) = 1.0f;
  const auto r = combined_loss(Matrix(1, 2, 0.5), from_rows({{-1000, 1000}}), target, 1.0);
  EXPECT_TRUE(std::isfinite(r.value));
  EXPECT_NEAR(r.bce, 1000.0, 1e-9);
}

TEST(Loss, ShapeMismatch) {
  EXPECT_THROW(combined_loss(Matrix(2, 3), Matrix(2, 3), Electrodogram(2, 4, 1000.0), 1.0), ShapeError);
}

TEST(Backward, RequiresForward) {
  NeuralCoder coder(init_params(tiny_model_config(), 1));
  EXPECT_THROW(coder.backward(Matrix(5, 4), Matrix(5, 4)), Error);
}

TEST(Backward, MatchesFiniteDifferences) {
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const auto r = gradient_check(tiny_model_config(), seed, 12);
    EXPECT_LT(r.max_rel_error, 1e-4) << "seed " << seed << " worst " << r.worst;
    EXPECT_GT(r.checked, 300u);
  }
}

TEST(Backward, IdentityActivationsAndUnitLambda) {
  ModelConfig cfg = tiny_model_config();
  for (auto& l : cfg.tcn_layers) l.activation = Activation::kIdentity;
  const auto r = gradient_check(cfg, 17, 10, 0.3);
  EXPECT_LT(r.max_rel_error, 1e-4) << r.worst;
}

TEST(Backward, UnreachableTapHasZeroGradient) {
  // A dilation-8 kernel of width 3 reaches t - 16, never inside 12 frames.
  ModelConfig cfg = tiny_model_config();
  cfg.tcn_layers[1] = {6, 3, 8, Activation::kTanh};
  ModelParams p = init_params(cfg, 3);
  detail::SplitMix rng(8);
  NeuralCoder coder(p);
  const Matrix x = random_matrix(5, 12, rng);
  const auto out = coder.forward(x);
  const auto loss = combined_loss(out.magnitudes, out.logits, random_target(5, 12, rng), 1.0);
  coder.backward(loss.grad_magnitudes, loss.grad_logits);
  const Tensor& w = coder.params().tcn[1].weight;
  bool any_other = false;
  for (std::size_t o = 0; o < 6; ++o)
    for (std::size_t i = 0; i < 6; ++i) {
      EXPECT_EQ(w.grad()[(o * 6 + i) * 3 + 0], 0.0);
      any_other |= w.grad()[(o * 6 + i) * 3 + 2] != 0.0;
    }
  EXPECT_TRUE(any_other);
}

TEST(Causality, FutureFramesNeverAffectThePast) {
  const ModelConfig cfg;
  const ModelParams p = init_params(cfg, 21);
  detail::SplitMix rng(22);
  const Matrix x = random_matrix(22, 90, rng, 0, 4);
  const auto base = model_forward(x, p);
  for (int trial = 0; trial < 10; ++trial) {
    Matrix y = x;
    const std::size_t t0 = rng.below(90);
    y(rng.below(22), t0) += 1.5;
    const auto out = model_forward(y, p);
    bool changed = false;
    for (std::size_t c = 0; c < 22; ++c)
      for (std::size_t t = 0; t < 90; ++t) {
        if (t < t0) {
          ASSERT_EQ(out.magnitudes(c, t), base.magnitudes(c, t));
          ASSERT_EQ(out.logits(c, t), base.logits(c, t));
        } else {
          changed |= out.logits(c, t) != base.logits(c, t);
        }
      }
    EXPECT_TRUE(changed);
  }
}

TEST(Infer, ProjectionKeepsInvariants) {
  const AceConfig ace;
  const ModelParams p = init_params(ModelConfig{}, 4);
  const auto e = infer(generate_speech(2, {16000, 1.0}), p, ace);
  EXPECT_EQ(e.num_frames, 1000u);
  EXPECT_NO_THROW(e.validate(8));
  for (std::size_t t = 0; t < e.num_frames; ++t) EXPECT_EQ(e.nonzero_in_frame(t), 8u);

  const auto s = infer(AudioSignal{std::vector<double>(4000, 0.0), 16000}, p, ace);
  EXPECT_NO_THROW(s.validate(8));

  AceConfig narrow = ace;
  narrow.num_channels = 21;
  narrow.band_edges.pop_back();
  EXPECT_THROW(infer(AudioSignal{std::vector<double>(160, 0.0), 16000}, p, narrow), ShapeError);
}

TEST(Features, LogCompressedEnvelopes) {
  const AceConfig ace;
  Matrix env(22, 2);
  env(3, 1) = ace.lgf_base;
  const Matrix f = encoder_features(env, ace);
  EXPECT_EQ(f(0, 0), 0.0);
  EXPECT_NEAR(f(3, 1), std::log(2.0), 1e-15);
}

TEST(Checkpoint, RoundTripIsByteExact) {
  const ModelParams p = init_params(tiny_model_config(), 5);
  const std::string bytes = serialize_checkpoint(p);
  EXPECT_EQ(bytes.substr(0, 4), "NCKP");
  const ModelParams q = deserialize_checkpoint(bytes);
  EXPECT_EQ(q.config, p.config);
  EXPECT_EQ(serialize_checkpoint(q), bytes);
  const auto a = p.tensors();
  const auto b = q.tensors();
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < a[i]->size(); ++j)
      EXPECT_EQ((*b[i])[j], static_cast<double>(static_cast<float>((*a[i])[j])));

  TempDir dir;
  save_checkpoint(p, dir / "m.nckp");
  EXPECT_EQ(serialize_checkpoint(load_checkpoint(dir / "m.nckp")), bytes);
}

TEST(Checkpoint, RejectsCorruption) {
  const std::string bytes = serialize_checkpoint(init_params(tiny_model_config(), 5));
  EXPECT_THROW(deserialize_checkpoint(bytes.substr(0, bytes.size() - 3)), FormatError);
  EXPECT_THROW(deserialize_checkpoint(bytes + "x"), FormatError);
  EXPECT_THROW(deserialize_checkpoint("NCKQ" + bytes.substr(4)), FormatError);
  TempDir dir;
  try {
    load_checkpoint(dir / "absent.nckp");
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("absent.nckp"), std::string::npos);
  }
}
