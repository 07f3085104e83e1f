#pragma once

// Causal TCN + scaled dot-product attention coder that maps per-frame
// envelope features to electrodograms, with exact reverse-mode gradients.

#include <cstdint>
#include <string>
#include <vector>

#include "cicoder/ace.hpp"
#include "cicoder/matrix.hpp"
#include "cicoder/tensor.hpp"

namespace cicoder {

enum class Activation { kIdentity, kRelu, kTanh };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& name);

struct TcnLayerSpec {
  int out_channels = 32;
  int kernel_size = 3;
  int dilation = 1;
  Activation activation = Activation::kRelu;

  bool operator==(const TcnLayerSpec&) const = default;
};

struct ModelConfig {
  int num_channels = 22;  // feature width M and width of both output heads
  std::vector<TcnLayerSpec> tcn_layers = {
      {32, 3, 1, Activation::kRelu},
      {32, 3, 2, Activation::kRelu},
      {32, 3, 4, Activation::kRelu},
      {32, 3, 8, Activation::kRelu},
  };
  int d_k = 32;
  int d_v = 32;
  int attention_context = 64;  // frames t-63..t attend for query t

  int hidden_channels() const;
  // Frames of feature history one TCN output sees: 1 + sum (k - 1) * d.
  int receptive_field() const;
  void validate() const;

  bool operator==(const ModelConfig&) const = default;
};

struct TcnLayerParams {
  Tensor weight;  // out x in x k
  Tensor bias;    // out
  int dilation = 1;
  Activation activation = Activation::kRelu;

  std::size_t out_channels() const { return weight.dim(0); }
  std::size_t in_channels() const { return weight.dim(1); }
  std::size_t kernel_size() const { return weight.dim(2); }
};

// Projections from the TCN output h_t (width H): q_t = h_t Wq, etc.
struct AttentionParams {
  Tensor wq;  // H x d_k
  Tensor wk;  // H x d_k
  Tensor wv;  // H x d_v
};

struct LinearHead {
  Tensor weight;  // M x (H + d_v)
  Tensor bias;    // M
};

struct ModelParams {
  ModelConfig config;
  std::vector<TcnLayerParams> tcn;
  AttentionParams attention;
  LinearHead magnitude_head;
  LinearHead selection_head;

  struct Named {
    std::string name;
    Tensor* tensor;
  };
  std::vector<Named> named_tensors();
  std::vector<const Tensor*> tensors() const;
  void zero_grad();
  std::size_t parameter_count() const;
};

// Fan-in scaled uniform weights (bound 1/sqrt(fan_in)), zero biases.
ModelParams init_params(const ModelConfig& config, std::uint64_t seed);

// Log-compressed ACE channel envelopes, log(1 + env / lgf_base); M x T.
Matrix encoder_features(const AudioSignal& signal, const AceConfig& ace);
Matrix encoder_features(const Matrix& envelopes, const AceConfig& ace);

double apply_activation(Activation a, double x);

// y[c, t] = f(b[c] + sum_ci sum_j W[c, ci, j] x[ci, t - d (k - 1 - j)]),
// with x = 0 for negative time. x is in_channels x T.
Matrix causal_dilated_conv1d(const Matrix& x, const TcnLayerParams& layer);

struct AttentionResult {
  Matrix output;   // n x d_v
  Matrix weights;  // n x m, rows sum to 1
};

// softmax(Q K^T / sqrt(d_k)) V with per-row max subtraction.
AttentionResult scaled_dot_product_attention(const Matrix& q, const Matrix& k,
                                             const Matrix& v);

struct ModelOutput {
  Matrix magnitudes;  // M x T, sigmoid of the magnitude head
  Matrix logits;      // M x T, selection head
};

struct LossResult {
  double value = 0.0;
  double mse = 0.0;
  double bce = 0.0;
  Matrix grad_magnitudes;  // dL / d magnitudes
  Matrix grad_logits;      // dL / d logits
};

// mean (mag - target)^2 + lambda * mean BCE(sigmoid(logits), target > 0).
LossResult combined_loss(const Matrix& pred_magnitudes, const Matrix& pred_logits,
                         const Electrodogram& target, double lambda);

// Holds parameters plus the activations of the last forward pass.
class NeuralCoder {
 public:
  explicit NeuralCoder(ModelParams params);

  ModelOutput forward(const Matrix& features);
  // Accumulates gradients of the loss whose output-gradients are given into
  // every parameter's grad buffer. Throws if no forward pass is recorded.
  void backward(const Matrix& grad_magnitudes, const Matrix& grad_logits);

  ModelParams& params() { return params_; }
  const ModelParams& params() const { return params_; }

 private:
  struct Cache {
    bool valid = false;
    std::size_t frames = 0;
    std::vector<Matrix> layer_inputs;   // input to each TCN layer
    std::vector<Matrix> layer_preacts;  // before activation
    Matrix hidden;                      // H x T, TCN output
    Matrix q, k, v;                     // T x d, time-major
    std::vector<std::vector<double>> weights;  // per query, over its window
    Matrix attended;                    // d_v x T
    Matrix magnitudes;                  // after sigmoid
  };

  ModelParams params_;
  Cache cache_;
};

// Convenience: forward pass without keeping a NeuralCoder around.
ModelOutput model_forward(const Matrix& features, const ModelParams& params);

// Top-N logits per frame select channels; predicted magnitudes fill them.
Electrodogram project_to_electrodogram(const ModelOutput& out, const AceConfig& ace);

Electrodogram infer(const AudioSignal& signal, const ModelParams& params,
                    const AceConfig& ace);

}  // namespace cicoder
