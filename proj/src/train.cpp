#include "cicoder/train.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "cicoder/error.hpp"
#include "cicoder/rng.hpp"

namespace cicoder {

void TrainingConfig::validate() const {
  auto fail = [](const std::string& msg) { throw Error("training config: " + msg); };
  if (!(initial_lr > 0.0)) fail("initial_lr must be positive");
  if (max_epochs < 1) fail("max_epochs must be >= 1");
  if (early_stop_patience < 1 || lr_patience < 1) fail("patience values must be >= 1");
  if (!(lr_factor > 0.0 && lr_factor < 1.0)) fail("lr_factor must be in (0, 1)");
  if (batch_files < 1) fail("batch_files must be >= 1");
  if (chunk_frames < 0) fail("chunk_frames must be >= 0");
  if (!(loss_weight >= 0.0)) fail("loss_weight must be >= 0");
  if (!(improvement_tol >= 0.0)) fail("improvement_tol must be >= 0");
}

std::string history_csv(const TrainingHistory& history) {
  std::ostringstream os;
  os.precision(10);
  os << "epoch,train_loss,val_loss,lr\n";
  for (const auto& r : history.epochs)
    os << r.epoch << ',' << r.train_loss << ',' << r.val_loss << ',' << r.lr << '\n';
  return os.str();
}

std::string history_gnuplot(const TrainingHistory& history) {
  std::ostringstream os;
  os.precision(10);
  os << "# epoch train_loss val_loss lr\n";
  for (const auto& r : history.epochs)
    os << r.epoch << ' ' << r.train_loss << ' ' << r.val_loss << ' ' << r.lr << '\n';
  return os.str();
}

PlateauSchedule::PlateauSchedule(const TrainingConfig& cfg)
    : cfg_(cfg), lr_(cfg.initial_lr), best_(std::numeric_limits<double>::infinity()) {}

PlateauSchedule::Decision PlateauSchedule::observe(double val_loss) {
  Decision d;
  if (val_loss < best_ - cfg_.improvement_tol) {
    best_ = val_loss;
    since_improvement_ = 0;
    since_lr_change_ = 0;
    d.improved = true;
    return d;
  }
  ++since_improvement_;
  ++since_lr_change_;
  if (since_improvement_ >= cfg_.early_stop_patience) {
    d.stop = true;
    return d;
  }
  if (since_lr_change_ >= cfg_.lr_patience) {
    lr_ *= cfg_.lr_factor;
    since_lr_change_ = 0;
    d.reduce_lr = true;
  }
  return d;
}

TrainingHistory run_schedule(const TrainingConfig& cfg,
                             const std::function<EpochLosses(int, double)>& run_epoch,
                             const std::function<void(int)>& on_best) {
  cfg.validate();
  PlateauSchedule schedule(cfg);
  TrainingHistory history;
  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    const double lr = schedule.lr();
    const EpochLosses losses = run_epoch(epoch, lr);
    if (!std::isfinite(losses.train_loss) || !std::isfinite(losses.val_loss)) {
      throw Error("training: non-finite loss at epoch " + std::to_string(epoch));
    }
    history.epochs.push_back({epoch, losses.train_loss, losses.val_loss, lr});
    const auto decision = schedule.observe(losses.val_loss);
    if (decision.improved) {
      history.best_epoch = epoch;
      history.best_val_loss = losses.val_loss;
      if (on_best) on_best(epoch);
    }
    if (decision.stop) {
      history.early_stopped = true;
      break;
    }
  }
  return history;
}

AdamOptimizer::AdamOptimizer(const TrainingConfig& cfg, ModelParams& params) : cfg_(cfg) {
  for (const auto& n : params.named_tensors()) {
    m_.emplace_back(n.tensor->size(), 0.0);
    v_.emplace_back(n.tensor->size(), 0.0);
  }
}

void AdamOptimizer::step(ModelParams& params, double lr) {
  ++step_;
  const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
  const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
  auto named = params.named_tensors();
  for (std::size_t i = 0; i < named.size(); ++i) {
    auto data = named[i].tensor->data();
    auto grad = named[i].tensor->grad();
    auto& m = m_[i];
    auto& v = v_[i];
    for (std::size_t j = 0; j < data.size(); ++j) {
      m[j] = cfg_.beta1 * m[j] + (1.0 - cfg_.beta1) * grad[j];
      v[j] = cfg_.beta2 * v[j] + (1.0 - cfg_.beta2) * grad[j] * grad[j];
      data[j] -= lr * (m[j] / c1) / (std::sqrt(v[j] / c2) + cfg_.epsilon);
    }
  }
}

double evaluate_loss(const ModelParams& params, const std::vector<TrainingExample>& set,
                     double lambda) {
  if (set.empty()) throw Error("evaluate_loss: empty set");
  NeuralCoder coder(params);
  double total = 0.0;
  for (const auto& ex : set) {
    const auto out = coder.forward(ex.features);
    total += combined_loss(out.magnitudes, out.logits, ex.target, lambda).value;
  }
  return total / static_cast<double>(set.size());
}

std::vector<TrainingExample> chunk_examples(const std::vector<TrainingExample>& set,
                                            std::size_t chunk_frames) {
  if (chunk_frames == 0) throw Error("chunk_examples: chunk_frames must be >= 1");
  std::vector<TrainingExample> out;
  for (const auto& ex : set) {
    const std::size_t rows = ex.features.rows();
    const std::size_t frames = ex.features.cols();
    for (std::size_t t0 = 0; t0 < frames; t0 += chunk_frames) {
      const std::size_t len = std::min(chunk_frames, frames - t0);
      TrainingExample c;
      c.features = Matrix(rows, len);
      c.target = Electrodogram(ex.target.num_channels, len, ex.target.frame_rate_hz);
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t t = 0; t < len; ++t) c.features(r, t) = ex.features(r, t0 + t);
      for (std::size_t ch = 0; ch < ex.target.num_channels; ++ch)
        for (std::size_t t = 0; t < len; ++t) c.target.at(ch, t) = ex.target.at(ch, t0 + t);
      out.push_back(std::move(c));
    }
  }
  return out;
}

TrainResult train(const ModelConfig& model_cfg, const std::vector<TrainingExample>& train_set,
                  const std::vector<TrainingExample>& val_set, const TrainingConfig& cfg,
                  const EpochCallback& on_epoch) {
  cfg.validate();
  if (train_set.empty()) throw Error("train: empty training set");
  if (val_set.empty()) throw Error("train: empty validation set");

  std::vector<TrainingExample> chunked;
  if (cfg.chunk_frames > 0) chunked = chunk_examples(train_set, static_cast<std::size_t>(cfg.chunk_frames));
  const auto& examples = cfg.chunk_frames > 0 ? chunked : train_set;

  NeuralCoder coder(init_params(model_cfg, cfg.rng_seed));
  AdamOptimizer adam(cfg, coder.params());
  detail::SplitMix shuffle_rng(cfg.rng_seed ^ 0x5eedf00dull);
  std::vector<std::size_t> order(examples.size());
  std::iota(order.begin(), order.end(), 0);

  TrainResult result;
  result.best = coder.params();
  const auto batch = static_cast<std::size_t>(cfg.batch_files);

  auto run_epoch = [&](int /*epoch*/, double lr) {
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[shuffle_rng.below(i)]);

    double train_total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t end = std::min(order.size(), start + batch);
      const double scale = 1.0 / static_cast<double>(end - start);
      coder.params().zero_grad();
      for (std::size_t i = start; i < end; ++i) {
        const auto& ex = examples[order[i]];
        const auto out = coder.forward(ex.features);
        auto loss = combined_loss(out.magnitudes, out.logits, ex.target, cfg.loss_weight);
        train_total += loss.value;
        for (double& g : loss.grad_magnitudes.data()) g *= scale;
        for (double& g : loss.grad_logits.data()) g *= scale;
        coder.backward(loss.grad_magnitudes, loss.grad_logits);
      }
      adam.step(coder.params(), lr);
    }
    EpochLosses losses;
    losses.train_loss = train_total / static_cast<double>(order.size());
    losses.val_loss = evaluate_loss(coder.params(), val_set, cfg.loss_weight);
    return losses;
  };

  auto epoch_and_report = [&](int epoch, double lr) {
    const auto losses = run_epoch(epoch, lr);
    if (on_epoch) on_epoch({epoch, losses.train_loss, losses.val_loss, lr});
    return losses;
  };
  result.history = run_schedule(cfg, epoch_and_report,
                                [&](int) { result.best = coder.params(); });
  for (auto& n : result.best.named_tensors()) n.tensor->zero_grad();
  return result;
}

}  // namespace cicoder
