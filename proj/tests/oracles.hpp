#pragma once

// Independent reference computations shared by the unit suites and the
// acceptance runner. Deliberately naive: plain loops, no shared code paths
// with the library beyond its data types.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "cicoder/nn.hpp"
#include "cicoder/rng.hpp"

namespace cicoder::testing {

inline std::vector<bool> stable_top_n(const std::vector<double>& v, int n) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] > v[b]; });
  std::vector<bool> mask(v.size(), false);
  for (int i = 0; i < std::min<int>(n, static_cast<int>(v.size())); ++i) mask[idx[i]] = true;
  return mask;
}

inline Matrix random_matrix(std::size_t rows, std::size_t cols, detail::SplitMix& rng,
                            double lo = -1.0, double hi = 1.0) {
  Matrix m(rows, cols);
  for (double& x : m.data()) x = rng.uniform(lo, hi);
  return m;
}

inline Tensor random_tensor(std::vector<std::size_t> shape, detail::SplitMix& rng, double scale) {
  Tensor t(std::move(shape));
  for (double& x : t.data()) x = rng.uniform(-scale, scale);
  return t;
}

// y[c][t] = f(b[c] + sum over ci, j of W[c][ci][j] * x[ci][t - d*(k-1-j)]).
inline Matrix naive_conv(const Matrix& x, const TcnLayerParams& layer) {
  const std::size_t out = layer.out_channels(), in = layer.in_channels(), k = layer.kernel_size();
  const long d = layer.dilation;
  Matrix y(out, x.cols());
  for (std::size_t c = 0; c < out; ++c) {
    for (std::size_t t = 0; t < x.cols(); ++t) {
      double acc = layer.bias[c];
      for (std::size_t ci = 0; ci < in; ++ci) {
        for (std::size_t j = 0; j < k; ++j) {
          const long src = static_cast<long>(t) - d * static_cast<long>(k - 1 - j);
          if (src < 0) continue;
          acc += layer.weight[(c * in + ci) * k + j] * x(ci, static_cast<std::size_t>(src));
        }
      }
      y(c, t) = apply_activation(layer.activation, acc);
    }
  }
  return y;
}

// Row-wise softmax(q k^T / sqrt(d_k)) v, evaluated with two plain loops.
inline Matrix naive_attention(const Matrix& q, const Matrix& k, const Matrix& v) {
  const double scale = 1.0 / std::sqrt(static_cast<double>(q.cols()));
  Matrix out(q.rows(), v.cols());
  for (std::size_t i = 0; i < q.rows(); ++i) {
    std::vector<double> s(k.rows());
    for (std::size_t j = 0; j < k.rows(); ++j) {
      double dot = 0.0;
      for (std::size_t a = 0; a < q.cols(); ++a) dot += q(i, a) * k(j, a);
      s[j] = dot * scale;
    }
    const double mx = *std::max_element(s.begin(), s.end());
    double z = 0.0;
    for (double& x : s) z += (x = std::exp(x - mx));
    for (std::size_t j = 0; j < k.rows(); ++j)
      for (std::size_t b = 0; b < v.cols(); ++b) out(i, b) += s[j] / z * v(j, b);
  }
  return out;
}

// Two tanh conv layers, d_k = 4, attention window shorter than the sequence.
inline ModelConfig tiny_model_config() {
  ModelConfig cfg;
  cfg.num_channels = 5;
  cfg.tcn_layers = {{6, 3, 1, Activation::kTanh}, {6, 2, 2, Activation::kTanh}};
  cfg.d_k = 4;
  cfg.d_v = 3;
  cfg.attention_context = 7;
  return cfg;
}

inline Electrodogram random_target(std::size_t channels, std::size_t frames, detail::SplitMix& rng) {
  Electrodogram e(channels, frames, 1000.0);
  for (float& m : e.magnitudes) m = rng.uniform() < 0.4 ? static_cast<float>(rng.uniform()) : 0.0f;
  return e;
}

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst;
  std::size_t checked = 0;
};

// Central differences on every scalar parameter of a freshly initialised
// model. Relative error uses max(|analytic|, |numeric|, 1e-6) as denominator.
inline GradCheckResult gradient_check(const ModelConfig& cfg, std::uint64_t seed, std::size_t frames,
                                      double lambda = 1.0, double h = 1e-5) {
  detail::SplitMix rng(detail::SplitMix::mix(seed));
  ModelParams params = init_params(cfg, seed);
  // Non-zero biases so every bias path is exercised.
  for (auto& n : params.named_tensors())
    if (n.name.ends_with("bias"))
      for (double& b : n.tensor->data()) b = rng.uniform(-0.3, 0.3);
  const Matrix features = random_matrix(static_cast<std::size_t>(cfg.num_channels), frames, rng);
  const Electrodogram target = random_target(static_cast<std::size_t>(cfg.num_channels), frames, rng);

  NeuralCoder coder(params);
  coder.params().zero_grad();
  const ModelOutput out = coder.forward(features);
  const LossResult loss = combined_loss(out.magnitudes, out.logits, target, lambda);
  coder.backward(loss.grad_magnitudes, loss.grad_logits);

  ModelParams probe = coder.params();
  auto eval = [&] {
    const ModelOutput o = model_forward(features, probe);
    return combined_loss(o.magnitudes, o.logits, target, lambda).value;
  };

  GradCheckResult r;
  auto analytic = coder.params().named_tensors();
  auto perturbed = probe.named_tensors();
  for (std::size_t p = 0; p < analytic.size(); ++p) {
    Tensor& t = *perturbed[p].tensor;
    for (std::size_t i = 0; i < t.size(); ++i) {
      const double saved = t[i];
      t[i] = saved + h;
      const double up = eval();
      t[i] = saved - h;
      const double down = eval();
      t[i] = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double a = analytic[p].tensor->grad()[i];
      const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-6});
      ++r.checked;
      if (rel > r.max_rel_error) {
        r.max_rel_error = rel;
        r.worst = analytic[p].name + "[" + std::to_string(i) + "]";
      }
    }
  }
  return r;
}

}  // namespace cicoder::testing
