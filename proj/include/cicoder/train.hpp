#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "cicoder/ace.hpp"
#include "cicoder/matrix.hpp"
#include "cicoder/nn.hpp"

namespace cicoder {

struct TrainingConfig {
  double initial_lr = 1e-3;
  int max_epochs = 300;
  int early_stop_patience = 5;
  int lr_patience = 3;
  double lr_factor = 0.8;
  int batch_files = 1;
  // > 0: split each training file into consecutive crops of this many frames
  // and treat every crop as one example (more updates per epoch).
  // Validation always uses whole files.
  int chunk_frames = 0;
  double loss_weight = 1.0;          // BCE weight relative to MSE
  double improvement_tol = 1e-6;     // smaller drops count as stagnation
  std::uint64_t rng_seed = 1234;
  // Adam moments.
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  void validate() const;
  bool operator==(const TrainingConfig&) const = default;
};

struct EpochRecord {
  int epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_loss = 0.0;
  double lr = 0.0;  // rate used during this epoch
};

struct TrainingHistory {
  std::vector<EpochRecord> epochs;
  int best_epoch = 0;
  double best_val_loss = 0.0;
  bool early_stopped = false;
};

// "epoch,train_loss,val_loss,lr" with one row per epoch.
std::string history_csv(const TrainingHistory& history);
// Whitespace-separated columns for gnuplot, '#' header line.
std::string history_gnuplot(const TrainingHistory& history);

// Reduce-on-plateau learning rate plus early stopping, tracked per epoch.
class PlateauSchedule {
 public:
  explicit PlateauSchedule(const TrainingConfig& cfg);

  struct Decision {
    bool improved = false;
    bool reduce_lr = false;
    bool stop = false;
  };
  Decision observe(double val_loss);

  double lr() const { return lr_; }
  double best() const { return best_; }

 private:
  const TrainingConfig cfg_;
  double lr_;
  double best_;
  int since_improvement_ = 0;
  int since_lr_change_ = 0;
};

struct EpochLosses {
  double train_loss = 0.0;
  double val_loss = 0.0;
};

// Drives `run_epoch(epoch, lr)` under the schedule. `on_best(epoch)` fires on
// every strict improvement so the caller can snapshot. Throws on a
// non-finite loss, naming the epoch.
TrainingHistory run_schedule(const TrainingConfig& cfg,
                             const std::function<EpochLosses(int, double)>& run_epoch,
                             const std::function<void(int)>& on_best);

struct TrainingExample {
  Matrix features;       // M x T
  Electrodogram target;  // M x T
};

struct TrainResult {
  ModelParams best;
  TrainingHistory history;
};

class AdamOptimizer {
 public:
  AdamOptimizer(const TrainingConfig& cfg, ModelParams& params);
  void step(ModelParams& params, double lr);

 private:
  TrainingConfig cfg_;
  long step_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

// Consecutive crops of at most chunk_frames frames, in file order.
std::vector<TrainingExample> chunk_examples(const std::vector<TrainingExample>& set,
                                            std::size_t chunk_frames);

double evaluate_loss(const ModelParams& params, const std::vector<TrainingExample>& set,
                     double lambda);

using EpochCallback = std::function<void(const EpochRecord&)>;

TrainResult train(const ModelConfig& model_cfg, const std::vector<TrainingExample>& train_set,
                  const std::vector<TrainingExample>& val_set, const TrainingConfig& cfg,
                  const EpochCallback& on_epoch = {});

}  // namespace cicoder
