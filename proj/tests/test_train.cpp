#include <gtest/gtest.h>

#include <vector>

#include "cicoder/train.hpp"
#include "oracles.hpp"

using namespace cicoder;
using namespace cicoder::testing;

namespace {

TrainingHistory scripted(const std::vector<double>& val, TrainingConfig cfg, int* best_seen = nullptr) {
  return run_schedule(
      cfg,
      [&](int epoch, double) {
        const double v = val.at(static_cast<std::size_t>(epoch - 1));
        return EpochLosses{v + 0.1, v};
      },
      [&](int epoch) {
        if (best_seen) *best_seen = epoch;
      });
}

std::vector<TrainingExample> toy_set(std::size_t files, std::size_t frames, std::uint64_t seed) {
  detail::SplitMix rng(seed);
  std::vector<TrainingExample> set;
  for (std::size_t i = 0; i < files; ++i)
    set.push_back({random_matrix(5, frames, rng, 0, 3), random_target(5, frames, rng)});
  return set;
}

}  // namespace

TEST(Schedule, StrictlyDecreasingRunsToTheEnd) {
  std::vector<double> val(300);
  for (std::size_t i = 0; i < val.size(); ++i) val[i] = 1.0 - 1e-3 * static_cast<double>(i);
  const auto h = scripted(val, TrainingConfig{});
  ASSERT_EQ(h.epochs.size(), 300u);
  for (const auto& r : h.epochs) EXPECT_EQ(r.lr, 1e-3);
  EXPECT_EQ(h.best_epoch, 300);
  EXPECT_FALSE(h.early_stopped);
}

TEST(Schedule, ConstantLossReducesThenStops) {
  int best = 0;
  const auto h = scripted(std::vector<double>(300, 0.5), TrainingConfig{}, &best);
  ASSERT_EQ(h.epochs.size(), 6u);
  for (int e = 0; e < 4; ++e) EXPECT_EQ(h.epochs[e].lr, 1e-3);
  EXPECT_DOUBLE_EQ(h.epochs[4].lr, 0.8e-3);
  EXPECT_DOUBLE_EQ(h.epochs[5].lr, 0.8e-3);
  EXPECT_EQ(h.best_epoch, 1);
  EXPECT_EQ(best, 1);
  EXPECT_TRUE(h.early_stopped);
}

TEST(Schedule, ImprovementBelowToleranceIsStagnation) {
  const auto h = scripted({1.0, 1.0 - 5e-7, 1.0 - 9e-7, 1.0 - 9.5e-7, 1.0 - 9.9e-7, 1.0 - 9.99e-7, 0.5},
                         TrainingConfig{});
  EXPECT_EQ(h.epochs.size(), 6u);
  EXPECT_EQ(h.best_epoch, 1);
}

TEST(Schedule, LrWaitRestartsAfterReduction) {
  TrainingConfig cfg;
  cfg.early_stop_patience = 8;
  const auto h = scripted(std::vector<double>(20, 1.0), cfg);
  ASSERT_EQ(h.epochs.size(), 9u);
  const double lr[] = {1e-3, 1e-3, 1e-3, 1e-3, 8e-4, 8e-4, 8e-4, 6.4e-4, 6.4e-4};
  for (std::size_t i = 0; i < 9; ++i) EXPECT_NEAR(h.epochs[i].lr, lr[i], 1e-15) << i;
}

TEST(Schedule, NonFiniteLossNamesEpoch) {
  try {
    scripted({1.0, 0.9, std::nan("")}, TrainingConfig{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("epoch 3"), std::string::npos);
  }
}

TEST(Schedule, ConfigValidation) {
  TrainingConfig cfg;
  cfg.lr_factor = 1.0;
  EXPECT_THROW(cfg.validate(), Error);
  cfg = {};
  cfg.chunk_frames = -1;
  EXPECT_THROW(cfg.validate(), Error);
}

TEST(History, CsvLayout) {
  TrainingHistory h;
  h.epochs = {{1, 0.5, 0.25, 0.001}, {2, 0.4, 0.2, 0.0008}};
  EXPECT_EQ(history_csv(h), "epoch,train_loss,val_loss,lr\n1,0.5,0.25,0.001\n2,0.4,0.2,0.0008\n");
  EXPECT_EQ(history_gnuplot(h).substr(0, 1), "#");
}

TEST(Chunking, ConsecutiveCropsInFileOrder) {
  const auto set = toy_set(2, 250, 3);
  const auto chunks = chunk_examples(set, 100);
  ASSERT_EQ(chunks.size(), 6u);
  const std::size_t lens[] = {100, 100, 50, 100, 100, 50};
  for (std::size_t i = 0; i < 6; ++i) {
    EXPECT_EQ(chunks[i].features.cols(), lens[i]);
    EXPECT_EQ(chunks[i].target.num_frames, lens[i]);
  }
  EXPECT_EQ(chunks[4].features(2, 7), set[1].features(2, 107));
  EXPECT_EQ(chunks[2].target.at(4, 49), set[0].target.at(4, 249));
  EXPECT_THROW(chunk_examples(set, 0), Error);
}

TEST(Train, DeterministicAndReturnsBestSnapshot) {
  TrainingConfig cfg;
  cfg.max_epochs = 6;
  cfg.initial_lr = 5e-3;
  const auto tr = toy_set(3, 40, 10);
  const auto va = toy_set(2, 40, 11);
  const auto a = train(tiny_model_config(), tr, va, cfg);
  const auto b = train(tiny_model_config(), tr, va, cfg);
  ASSERT_EQ(a.history.epochs.size(), b.history.epochs.size());
  for (std::size_t i = 0; i < a.history.epochs.size(); ++i) {
    EXPECT_EQ(a.history.epochs[i].train_loss, b.history.epochs[i].train_loss);
    EXPECT_EQ(a.history.epochs[i].val_loss, b.history.epochs[i].val_loss);
  }
  const auto ta = a.best.tensors();
  const auto tb = b.best.tensors();
  for (std::size_t i = 0; i < ta.size(); ++i) EXPECT_EQ(*ta[i], *tb[i]);

  EXPECT_DOUBLE_EQ(evaluate_loss(a.best, va, cfg.loss_weight), a.history.best_val_loss);
  EXPECT_LT(a.history.best_val_loss, a.history.epochs.front().val_loss);
  for (std::size_t i = 1; i < a.history.epochs.size(); ++i)
    EXPECT_LE(a.history.epochs[i].lr, a.history.epochs[i - 1].lr);
}

TEST(Train, ChunkedTrainingValidatesOnWholeFiles) {
  TrainingConfig cfg;
  cfg.max_epochs = 3;
  cfg.chunk_frames = 16;
  const auto va = toy_set(2, 40, 13);
  const auto r = train(tiny_model_config(), toy_set(2, 40, 12), va, cfg);
  EXPECT_DOUBLE_EQ(evaluate_loss(r.best, va, cfg.loss_weight), r.history.best_val_loss);
}

TEST(Train, EmptySetsRejected) {
  const auto s = toy_set(1, 10, 1);
  EXPECT_THROW(train(tiny_model_config(), {}, s, TrainingConfig{}), Error);
  EXPECT_THROW(train(tiny_model_config(), s, {}, TrainingConfig{}), Error);
}
