#include "cicoder/nn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "cicoder/error.hpp"
#include "cicoder/rng.hpp"

namespace cicoder {

namespace {

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// Derivative expressed through the pre-activation.
double activation_grad(Activation a, double pre) {
  switch (a) {
    case Activation::kIdentity:
      return 1.0;
    case Activation::kRelu:
      return pre > 0.0 ? 1.0 : 0.0;
    case Activation::kTanh: {
      const double y = std::tanh(pre);
      return 1.0 - y * y;
    }
  }
  return 1.0;
}

void require_finite(const Matrix& m, const char* what) {
  for (double v : m.data()) {
    if (!std::isfinite(v)) throw Error(std::string("model: non-finite value in ") + what);
  }
}

void fill_uniform(Tensor& t, double bound, detail::SplitMix& rng) {
  for (double& v : t.data()) v = rng.uniform(-bound, bound);
}

// Raw conv sum without activation; x is in x T.
Matrix conv_preact(const Matrix& x, const TcnLayerParams& layer) {
  const std::size_t out = layer.out_channels();
  const std::size_t in = layer.in_channels();
  const std::size_t k = layer.kernel_size();
  const std::size_t frames = x.cols();
  if (x.rows() != in) {
    throw ShapeError("conv1d: input has " + std::to_string(x.rows()) +
                     " channels, layer expects " + std::to_string(in));
  }
  if (layer.bias.size() != out) throw ShapeError("conv1d: bias size mismatch");
  Matrix y(out, frames);
  const auto d = static_cast<std::size_t>(layer.dilation);
  for (std::size_t c = 0; c < out; ++c) {
    auto yr = y.row(c);
    std::fill(yr.begin(), yr.end(), layer.bias[c]);
    for (std::size_t ci = 0; ci < in; ++ci) {
      const auto xr = x.row(ci);
      for (std::size_t j = 0; j < k; ++j) {
        const double w = layer.weight[(c * in + ci) * k + j];
        const std::size_t shift = d * (k - 1 - j);
        for (std::size_t t = shift; t < frames; ++t) yr[t] += w * xr[t - shift];
      }
    }
  }
  return y;
}

// Output of a linear head over z (width x T): W z + b.
Matrix head_forward(const LinearHead& head, const Matrix& z) {
  const std::size_t m = head.weight.dim(0);
  const std::size_t width = head.weight.dim(1);
  Matrix y(m, z.cols());
  for (std::size_t c = 0; c < m; ++c) {
    auto yr = y.row(c);
    std::fill(yr.begin(), yr.end(), head.bias[c]);
    for (std::size_t i = 0; i < width; ++i) {
      const double w = head.weight[c * width + i];
      const auto zr = z.row(i);
      for (std::size_t t = 0; t < z.cols(); ++t) yr[t] += w * zr[t];
    }
  }
  return y;
}

void head_backward(LinearHead& head, const Matrix& z, const Matrix& grad_out,
                   Matrix& grad_z) {
  const std::size_t m = head.weight.dim(0);
  const std::size_t width = head.weight.dim(1);
  auto wg = head.weight.grad();
  auto bg = head.bias.grad();
  for (std::size_t c = 0; c < m; ++c) {
    const auto gr = grad_out.row(c);
    double bsum = 0.0;
    for (double g : gr) bsum += g;
    bg[c] += bsum;
    for (std::size_t i = 0; i < width; ++i) {
      const auto zr = z.row(i);
      auto gzr = grad_z.row(i);
      const double w = head.weight[c * width + i];
      double acc = 0.0;
      for (std::size_t t = 0; t < z.cols(); ++t) {
        acc += gr[t] * zr[t];
        gzr[t] += w * gr[t];
      }
      wg[c * width + i] += acc;
    }
  }
}

// Projects channel-major h (H x T) through w (H x d) into time-major T x d.
Matrix project(const Matrix& h, const Tensor& w) {
  const std::size_t width = w.dim(0);
  const std::size_t d = w.dim(1);
  Matrix out(h.cols(), d);
  for (std::size_t t = 0; t < h.cols(); ++t) {
    auto orow = out.row(t);
    for (std::size_t i = 0; i < width; ++i) {
      const double hv = h(i, t);
      const double* wr = &w.data()[i * d];
      for (std::size_t a = 0; a < d; ++a) orow[a] += hv * wr[a];
    }
  }
  return out;
}

void project_backward(const Matrix& h, Tensor& w, const Matrix& grad_out, Matrix& grad_h) {
  const std::size_t width = w.dim(0);
  const std::size_t d = w.dim(1);
  auto wg = w.grad();
  for (std::size_t t = 0; t < h.cols(); ++t) {
    const auto grow = grad_out.row(t);
    for (std::size_t i = 0; i < width; ++i) {
      const double hv = h(i, t);
      const double* wr = &w.data()[i * d];
      double* wgr = &wg[i * d];
      double acc = 0.0;
      for (std::size_t a = 0; a < d; ++a) {
        wgr[a] += hv * grow[a];
        acc += wr[a] * grow[a];
      }
      grad_h(i, t) += acc;
    }
  }
}

}  // namespace

std::string to_string(Activation a) {
  switch (a) {
    case Activation::kIdentity:
      return "identity";
    case Activation::kRelu:
      return "relu";
    case Activation::kTanh:
      return "tanh";
  }
  return "identity";
}

Activation activation_from_string(const std::string& name) {
  if (name == "relu") return Activation::kRelu;
  if (name == "tanh") return Activation::kTanh;
  if (name == "identity") return Activation::kIdentity;
  throw Error("unknown activation '" + name + "' (expected relu, tanh or identity)");
}

int ModelConfig::hidden_channels() const {
  return tcn_layers.empty() ? num_channels : tcn_layers.back().out_channels;
}

int ModelConfig::receptive_field() const {
  int rf = 1;
  for (const auto& l : tcn_layers) rf += (l.kernel_size - 1) * l.dilation;
  return rf;
}

void ModelConfig::validate() const {
  auto fail = [](const std::string& msg) { throw Error("model config: " + msg); };
  if (num_channels < 1) fail("num_channels must be >= 1");
  for (const auto& l : tcn_layers) {
    if (l.out_channels < 1) fail("tcn out_channels must be >= 1");
    if (l.kernel_size < 1) fail("tcn kernel_size must be >= 1");
    if (l.dilation < 1) fail("tcn dilation must be >= 1");
  }
  if (d_k < 1 || d_v < 1) fail("d_k and d_v must be >= 1");
  if (attention_context < 1) fail("attention_context must be >= 1");
}

std::vector<ModelParams::Named> ModelParams::named_tensors() {
  std::vector<Named> out;
  for (std::size_t i = 0; i < tcn.size(); ++i) {
    out.push_back({"tcn." + std::to_string(i) + ".weight", &tcn[i].weight});
    out.push_back({"tcn." + std::to_string(i) + ".bias", &tcn[i].bias});
  }
  out.push_back({"attention.wq", &attention.wq});
  out.push_back({"attention.wk", &attention.wk});
  out.push_back({"attention.wv", &attention.wv});
  out.push_back({"magnitude_head.weight", &magnitude_head.weight});
  out.push_back({"magnitude_head.bias", &magnitude_head.bias});
  out.push_back({"selection_head.weight", &selection_head.weight});
  out.push_back({"selection_head.bias", &selection_head.bias});
  return out;
}

std::vector<const Tensor*> ModelParams::tensors() const {
  auto named = const_cast<ModelParams*>(this)->named_tensors();
  std::vector<const Tensor*> out;
  for (const auto& n : named) out.push_back(n.tensor);
  return out;
}

void ModelParams::zero_grad() {
  for (auto& n : named_tensors()) n.tensor->zero_grad();
}

std::size_t ModelParams::parameter_count() const {
  std::size_t n = 0;
  for (const Tensor* t : tensors()) n += t->size();
  return n;
}

ModelParams init_params(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  detail::SplitMix rng(seed);
  ModelParams p;
  p.config = config;

  auto in = static_cast<std::size_t>(config.num_channels);
  for (const auto& spec : config.tcn_layers) {
    TcnLayerParams layer;
    const auto out = static_cast<std::size_t>(spec.out_channels);
    const auto k = static_cast<std::size_t>(spec.kernel_size);
    layer.weight = Tensor({out, in, k});
    layer.bias = Tensor({out});
    layer.dilation = spec.dilation;
    layer.activation = spec.activation;
    fill_uniform(layer.weight, 1.0 / std::sqrt(static_cast<double>(in * k)), rng);
    p.tcn.push_back(std::move(layer));
    in = out;
  }

  const auto h = static_cast<std::size_t>(config.hidden_channels());
  const auto dk = static_cast<std::size_t>(config.d_k);
  const auto dv = static_cast<std::size_t>(config.d_v);
  const double proj_bound = 1.0 / std::sqrt(static_cast<double>(h));
  p.attention.wq = Tensor({h, dk});
  p.attention.wk = Tensor({h, dk});
  p.attention.wv = Tensor({h, dv});
  fill_uniform(p.attention.wq, proj_bound, rng);
  fill_uniform(p.attention.wk, proj_bound, rng);
  fill_uniform(p.attention.wv, proj_bound, rng);

  const auto m = static_cast<std::size_t>(config.num_channels);
  const double head_bound = 1.0 / std::sqrt(static_cast<double>(h + dv));
  for (LinearHead* head : {&p.magnitude_head, &p.selection_head}) {
    head->weight = Tensor({m, h + dv});
    head->bias = Tensor({m});
    fill_uniform(head->weight, head_bound, rng);
  }
  return p;
}

Matrix encoder_features(const Matrix& envelopes, const AceConfig& ace) {
  Matrix f(envelopes.rows(), envelopes.cols());
  const double base = ace.lgf_base;
  for (std::size_t i = 0; i < f.data().size(); ++i)
    f.data()[i] = std::log1p(envelopes.data()[i] / base);
  return f;
}

Matrix encoder_features(const AudioSignal& signal, const AceConfig& ace) {
  return encoder_features(compute_envelopes(signal, ace, build_filterbank(ace)), ace);
}

double apply_activation(Activation a, double x) {
  switch (a) {
    case Activation::kIdentity:
      return x;
    case Activation::kRelu:
      return x > 0.0 ? x : 0.0;
    case Activation::kTanh:
      return std::tanh(x);
  }
  return x;
}

Matrix causal_dilated_conv1d(const Matrix& x, const TcnLayerParams& layer) {
  Matrix y = conv_preact(x, layer);
  for (double& v : y.data()) v = apply_activation(layer.activation, v);
  return y;
}

AttentionResult scaled_dot_product_attention(const Matrix& q, const Matrix& k,
                                             const Matrix& v) {
  if (q.cols() != k.cols()) throw ShapeError("attention: Q and K must share d_k");
  if (k.rows() != v.rows()) throw ShapeError("attention: K and V must have equal rows");
  if (q.cols() < 1) throw ShapeError("attention: d_k must be >= 1");
  if (k.rows() < 1) throw ShapeError("attention: need at least one key");
  for (const Matrix* m : {&q, &k, &v}) {
    for (double x : m->data())
      if (!std::isfinite(x)) throw Error("attention: non-finite input");
  }
  const std::size_t n = q.rows();
  const std::size_t m = k.rows();
  const std::size_t dk = q.cols();
  const std::size_t dv = v.cols();
  const double scale = 1.0 / std::sqrt(static_cast<double>(dk));

  AttentionResult r{Matrix(n, dv), Matrix(n, m)};
  for (std::size_t i = 0; i < n; ++i) {
    auto w = r.weights.row(i);
    double peak = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < m; ++j) {
      double s = 0.0;
      for (std::size_t a = 0; a < dk; ++a) s += q(i, a) * k(j, a);
      w[j] = s * scale;
      peak = std::max(peak, w[j]);
    }
    double total = 0.0;
    for (double& x : w) {
      x = std::exp(x - peak);
      total += x;
    }
    for (double& x : w) x /= total;
    auto o = r.output.row(i);
    for (std::size_t j = 0; j < m; ++j)
      for (std::size_t a = 0; a < dv; ++a) o[a] += w[j] * v(j, a);
  }
  return r;
}

LossResult combined_loss(const Matrix& mag, const Matrix& logits, const Electrodogram& target,
                         double lambda) {
  if (mag.rows() != target.num_channels || mag.cols() != target.num_frames ||
      logits.rows() != mag.rows() || logits.cols() != mag.cols()) {
    throw ShapeError("loss: prediction is " + std::to_string(mag.rows()) + " x " +
                     std::to_string(mag.cols()) + ", target is " +
                     std::to_string(target.num_channels) + " x " +
                     std::to_string(target.num_frames));
  }
  LossResult r;
  r.grad_magnitudes = Matrix(mag.rows(), mag.cols());
  r.grad_logits = Matrix(mag.rows(), mag.cols());
  const std::size_t count = mag.rows() * mag.cols();
  if (count == 0) return r;
  const double inv = 1.0 / static_cast<double>(count);

  double sse = 0.0;
  double ce = 0.0;
  for (std::size_t c = 0; c < mag.rows(); ++c) {
    for (std::size_t t = 0; t < mag.cols(); ++t) {
      const double y = target.at(c, t);
      const double diff = mag(c, t) - y;
      sse += diff * diff;
      r.grad_magnitudes(c, t) = 2.0 * diff * inv;

      // max(z, 0) - z*label + log(1 + exp(-|z|))
      const double z = logits(c, t);
      const double label = y > 0.0 ? 1.0 : 0.0;
      ce += std::max(z, 0.0) - z * label + std::log1p(std::exp(-std::abs(z)));
      r.grad_logits(c, t) = lambda * (sigmoid(z) - label) * inv;
    }
  }
  r.mse = sse * inv;
  r.bce = ce * inv;
  r.value = r.mse + lambda * r.bce;
  return r;
}

NeuralCoder::NeuralCoder(ModelParams params) : params_(std::move(params)) {
  params_.config.validate();
}

ModelOutput NeuralCoder::forward(const Matrix& features) {
  const auto& cfg = params_.config;
  if (features.rows() != static_cast<std::size_t>(cfg.num_channels)) {
    throw ShapeError("model: features have " + std::to_string(features.rows()) +
                     " rows, model expects " + std::to_string(cfg.num_channels));
  }
  require_finite(features, "features");
  cache_ = Cache{};
  const std::size_t frames = features.cols();
  cache_.frames = frames;

  Matrix x = features;
  for (const auto& layer : params_.tcn) {
    cache_.layer_inputs.push_back(x);
    Matrix pre = conv_preact(x, layer);
    x = pre;
    for (double& v : x.data()) v = apply_activation(layer.activation, v);
    cache_.layer_preacts.push_back(std::move(pre));
  }
  cache_.hidden = std::move(x);
  const Matrix& h = cache_.hidden;
  const std::size_t width = h.rows();

  cache_.q = project(h, params_.attention.wq);
  cache_.k = project(h, params_.attention.wk);
  cache_.v = project(h, params_.attention.wv);
  const std::size_t dk = cache_.q.cols();
  const std::size_t dv = cache_.v.cols();
  const double scale = 1.0 / std::sqrt(static_cast<double>(dk));
  const auto ctx = static_cast<std::size_t>(cfg.attention_context);

  cache_.attended = Matrix(dv, frames);
  cache_.weights.assign(frames, {});
  for (std::size_t t = 0; t < frames; ++t) {
    const std::size_t first = t + 1 >= ctx ? t + 1 - ctx : 0;
    auto& w = cache_.weights[t];
    w.resize(t - first + 1);
    const auto qr = cache_.q.row(t);
    double peak = -std::numeric_limits<double>::infinity();
    for (std::size_t j = first; j <= t; ++j) {
      const auto kr = cache_.k.row(j);
      double s = 0.0;
      for (std::size_t a = 0; a < dk; ++a) s += qr[a] * kr[a];
      w[j - first] = s * scale;
      peak = std::max(peak, w[j - first]);
    }
    double total = 0.0;
    for (double& x2 : w) {
      x2 = std::exp(x2 - peak);
      total += x2;
    }
    for (double& x2 : w) x2 /= total;
    for (std::size_t j = first; j <= t; ++j) {
      const auto vr = cache_.v.row(j);
      const double a = w[j - first];
      for (std::size_t b = 0; b < dv; ++b) cache_.attended(b, t) += a * vr[b];
    }
  }

  Matrix z(width + dv, frames);
  for (std::size_t i = 0; i < width; ++i) std::copy_n(h.row(i).begin(), frames, z.row(i).begin());
  for (std::size_t i = 0; i < dv; ++i)
    std::copy_n(cache_.attended.row(i).begin(), frames, z.row(width + i).begin());

  ModelOutput out;
  out.magnitudes = head_forward(params_.magnitude_head, z);
  for (double& v : out.magnitudes.data()) v = sigmoid(v);
  out.logits = head_forward(params_.selection_head, z);
  require_finite(out.magnitudes, "magnitude head");
  require_finite(out.logits, "selection head");

  cache_.magnitudes = out.magnitudes;
  cache_.valid = true;
  return out;
}

void NeuralCoder::backward(const Matrix& grad_magnitudes, const Matrix& grad_logits) {
  if (!cache_.valid) throw Error("model: backward called before forward");
  const std::size_t frames = cache_.frames;
  const auto m = static_cast<std::size_t>(params_.config.num_channels);
  if (grad_magnitudes.rows() != m || grad_magnitudes.cols() != frames ||
      grad_logits.rows() != m || grad_logits.cols() != frames) {
    throw ShapeError("model: output gradient shape mismatch");
  }
  const Matrix& h = cache_.hidden;
  const std::size_t width = h.rows();
  const std::size_t dk = cache_.q.cols();
  const std::size_t dv = cache_.v.cols();

  // Rebuild the head input.
  Matrix z(width + dv, frames);
  for (std::size_t i = 0; i < width; ++i) std::copy_n(h.row(i).begin(), frames, z.row(i).begin());
  for (std::size_t i = 0; i < dv; ++i)
    std::copy_n(cache_.attended.row(i).begin(), frames, z.row(width + i).begin());

  Matrix grad_mag_pre = grad_magnitudes;
  for (std::size_t i = 0; i < grad_mag_pre.data().size(); ++i) {
    const double s = cache_.magnitudes.data()[i];
    grad_mag_pre.data()[i] *= s * (1.0 - s);
  }
  Matrix grad_z(width + dv, frames);
  head_backward(params_.magnitude_head, z, grad_mag_pre, grad_z);
  head_backward(params_.selection_head, z, grad_logits, grad_z);

  Matrix grad_h(width, frames);
  for (std::size_t i = 0; i < width; ++i)
    std::copy_n(grad_z.row(i).begin(), frames, grad_h.row(i).begin());

  Matrix grad_q(frames, dk), grad_k(frames, dk), grad_v(frames, dv);
  const double scale = 1.0 / std::sqrt(static_cast<double>(dk));
  const auto ctx = static_cast<std::size_t>(params_.config.attention_context);
  std::vector<double> grad_w;
  for (std::size_t t = 0; t < frames; ++t) {
    const std::size_t first = t + 1 >= ctx ? t + 1 - ctx : 0;
    const auto& w = cache_.weights[t];
    grad_w.assign(w.size(), 0.0);
    double weighted = 0.0;
    for (std::size_t j = first; j <= t; ++j) {
      const auto vr = cache_.v.row(j);
      auto gvr = grad_v.row(j);
      const double a = w[j - first];
      double g = 0.0;
      for (std::size_t b = 0; b < dv; ++b) {
        const double go = grad_z(width + b, t);
        g += go * vr[b];
        gvr[b] += a * go;
      }
      grad_w[j - first] = g;
      weighted += a * g;
    }
    const auto qr = cache_.q.row(t);
    auto gqr = grad_q.row(t);
    for (std::size_t j = first; j <= t; ++j) {
      const double gs = w[j - first] * (grad_w[j - first] - weighted) * scale;
      if (gs == 0.0) continue;
      const auto kr = cache_.k.row(j);
      auto gkr = grad_k.row(j);
      for (std::size_t a = 0; a < dk; ++a) {
        gqr[a] += gs * kr[a];
        gkr[a] += gs * qr[a];
      }
    }
  }
  project_backward(h, params_.attention.wq, grad_q, grad_h);
  project_backward(h, params_.attention.wk, grad_k, grad_h);
  project_backward(h, params_.attention.wv, grad_v, grad_h);

  Matrix grad = std::move(grad_h);
  for (std::size_t li = params_.tcn.size(); li-- > 0;) {
    auto& layer = params_.tcn[li];
    const Matrix& pre = cache_.layer_preacts[li];
    const Matrix& x = cache_.layer_inputs[li];
    for (std::size_t i = 0; i < grad.data().size(); ++i)
      grad.data()[i] *= activation_grad(layer.activation, pre.data()[i]);

    const std::size_t out = layer.out_channels();
    const std::size_t in = layer.in_channels();
    const std::size_t k = layer.kernel_size();
    const auto d = static_cast<std::size_t>(layer.dilation);
    Matrix grad_x(in, frames);
    auto wg = layer.weight.grad();
    auto bg = layer.bias.grad();
    for (std::size_t c = 0; c < out; ++c) {
      const auto gr = grad.row(c);
      double bsum = 0.0;
      for (double g : gr) bsum += g;
      bg[c] += bsum;
      for (std::size_t ci = 0; ci < in; ++ci) {
        const auto xr = x.row(ci);
        auto gxr = grad_x.row(ci);
        for (std::size_t j = 0; j < k; ++j) {
          const std::size_t idx = (c * in + ci) * k + j;
          const double w = layer.weight[idx];
          const std::size_t shift = d * (k - 1 - j);
          double acc = 0.0;
          for (std::size_t t = shift; t < frames; ++t) {
            acc += gr[t] * xr[t - shift];
            gxr[t - shift] += w * gr[t];
          }
          wg[idx] += acc;
        }
      }
    }
    grad = std::move(grad_x);
  }

  for (const Tensor* t : params_.tensors()) {
    for (double g : t->grad())
      if (!std::isfinite(g)) throw Error("model: non-finite gradient");
  }
}

ModelOutput model_forward(const Matrix& features, const ModelParams& params) {
  NeuralCoder coder(params);
  return coder.forward(features);
}

Electrodogram project_to_electrodogram(const ModelOutput& out, const AceConfig& ace) {
  const std::size_t m = out.logits.rows();
  const std::size_t frames = out.logits.cols();
  Electrodogram e(m, frames, ace.frame_rate_hz());
  for (std::size_t t = 0; t < frames; ++t) {
    const auto mask = select_maxima(out.logits.column(t), ace.num_maxima);
    for (std::size_t c = 0; c < m; ++c) {
      if (mask[c])
        e.at(c, t) = static_cast<float>(std::clamp(out.magnitudes(c, t), 0.0, 1.0));
    }
  }
  return e;
}

Electrodogram infer(const AudioSignal& signal, const ModelParams& params,
                    const AceConfig& ace) {
  if (params.config.num_channels != ace.num_channels) {
    throw ShapeError("infer: model has " + std::to_string(params.config.num_channels) +
                     " channels, ACE config has " + std::to_string(ace.num_channels));
  }
  return project_to_electrodogram(model_forward(encoder_features(signal, ace), params), ace);
}

}  // namespace cicoder
