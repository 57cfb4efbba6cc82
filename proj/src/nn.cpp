#include "uwauth/nn.hpp"

#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "uwauth/util.hpp"

namespace uwauth::nn {

std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::ReLU: return "relu";
    case Activation::Sigmoid: return "sigmoid";
    case Activation::Linear: return "linear";
  }
  return "?";
}

Activation parse_activation(std::string_view name) {
  const auto n = to_lower(trim(name));
  if (n == "relu") return Activation::ReLU;
  if (n == "sigmoid") return Activation::Sigmoid;
  if (n == "linear") return Activation::Linear;
  throw FormatError("unknown activation '" + std::string(name) + "'");
}

std::string_view to_string(Optimizer o) {
  return o == Optimizer::Adam ? "adam" : "sgd";
}

Optimizer parse_optimizer(std::string_view name) {
  const auto n = to_lower(trim(name));
  if (n == "adam") return Optimizer::Adam;
  if (n == "sgd" || n == "gd") return Optimizer::GradientDescent;
  throw FormatError("unknown optimizer '" + std::string(name) + "'");
}

void GradientSet::zero() {
  for (auto& l : layers) {
    std::fill(l.weights.begin(), l.weights.end(), 0.0);
    std::fill(l.bias.begin(), l.bias.end(), 0.0);
  }
}

void GradientSet::scale(double factor) {
  for (auto& l : layers) {
    for (auto& w : l.weights) w *= factor;
    for (auto& b : l.bias) b *= factor;
  }
}

double GradientSet::max_abs() const {
  double m = 0.0;
  for (const auto& l : layers) {
    for (double w : l.weights) m = std::max(m, std::abs(w));
    for (double b : l.bias) m = std::max(m, std::abs(b));
  }
  return m;
}

MlpNetwork::MlpNetwork(std::size_t input_dim, std::vector<LayerSpec> specs) : input_dim_(input_dim) {
  if (input_dim == 0) throw InputShapeError("network input dimension must be positive");
  if (specs.empty()) throw InputShapeError("network needs at least one layer");
  std::size_t fan_in = input_dim;
  layers_.reserve(specs.size());
  for (const auto& s : specs) {
    if (s.width == 0) throw InputShapeError("layer width must be positive");
    DenseLayer layer;
    layer.fan_in = fan_in;
    layer.spec = s;
    layer.weights.assign(s.width * fan_in, 0.0);
    layer.bias.assign(s.width, 0.0);
    layers_.push_back(std::move(layer));
    fan_in = s.width;
  }
}

void MlpNetwork::initialize(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  // Map raw 53-bit output to [-1, 1) directly so the stream is the same
  // across standard library implementations.
  auto unit = [&rng] { return static_cast<double>(rng() >> 11) * 0x1.0p-52 - 1.0; };
  for (auto& layer : layers_) {
    const double fan_in = static_cast<double>(layer.fan_in);
    const double fan_out = static_cast<double>(layer.spec.width);
    const double limit = layer.spec.activation == Activation::ReLU
                             ? std::sqrt(6.0 / fan_in)
                             : std::sqrt(6.0 / (fan_in + fan_out));
    for (auto& w : layer.weights) w = limit * unit();
    std::fill(layer.bias.begin(), layer.bias.end(), 0.0);
  }
}

std::size_t MlpNetwork::output_dim() const noexcept {
  return layers_.empty() ? 0 : layers_.back().spec.width;
}

std::size_t MlpNetwork::parameter_count() const noexcept {
  std::size_t n = 0;
  for (const auto& l : layers_) n += l.weights.size() + l.bias.size();
  return n;
}

std::size_t MlpNetwork::neuron_count() const noexcept {
  std::size_t n = 0;
  for (const auto& l : layers_) n += l.spec.width;
  return n;
}

std::vector<LayerSpec> MlpNetwork::specs() const {
  std::vector<LayerSpec> out;
  for (const auto& l : layers_) out.push_back(l.spec);
  return out;
}

GradientSet MlpNetwork::zero_gradient() const {
  GradientSet g;
  g.layers.reserve(layers_.size());
  for (const auto& l : layers_)
    g.layers.push_back({std::vector<double>(l.weights.size(), 0.0), std::vector<double>(l.bias.size(), 0.0)});
  return g;
}

bool MlpNetwork::all_finite() const noexcept {
  for (const auto& l : layers_) {
    for (double w : l.weights)
      if (!std::isfinite(w)) return false;
    for (double b : l.bias)
      if (!std::isfinite(b)) return false;
  }
  return true;
}

namespace {

inline double activate(Activation a, double v) {
  switch (a) {
    case Activation::ReLU: return v > 0.0 ? v : 0.0;
    case Activation::Sigmoid: return 1.0 / (1.0 + std::exp(-v));
    case Activation::Linear: return v;
  }
  return v;
}

// Derivative expressed through the post-activation value.
inline double activation_slope(Activation a, double out) {
  switch (a) {
    case Activation::ReLU: return out > 0.0 ? 1.0 : 0.0;
    case Activation::Sigmoid: return out * (1.0 - out);
    case Activation::Linear: return 1.0;
  }
  return 1.0;
}

void dense_forward(const DenseLayer& layer, const double* in, double* out) {
  const std::size_t n_in = layer.fan_in;
  const double* w = layer.weights.data();
  for (std::size_t o = 0; o < layer.spec.width; ++o, w += n_in) {
    double acc = layer.bias[o];
    for (std::size_t i = 0; i < n_in; ++i) acc += w[i] * in[i];
    out[o] = activate(layer.spec.activation, acc);
  }
}

void check_input(const MlpNetwork& net, std::span<const double> x) {
  if (x.size() != net.input_dim())
    throw InputShapeError("input has " + std::to_string(x.size()) + " entries, network expects " +
                          std::to_string(net.input_dim()));
}

}  // namespace

std::vector<double> MlpNetwork::forward(std::span<const double> x) const {
  check_input(*this, x);
  std::vector<double> cur(x.begin(), x.end());
  std::vector<double> next;
  for (const auto& layer : layers_) {
    next.resize(layer.spec.width);
    dense_forward(layer, cur.data(), next.data());
    cur.swap(next);
  }
  return cur;
}

void Trace::prepare(const MlpNetwork& net) {
  activations.resize(net.layer_count());
  deltas.resize(net.layer_count());
  for (std::size_t p = 0; p < net.layer_count(); ++p) {
    activations[p].resize(net.layers()[p].spec.width);
    deltas[p].resize(net.layers()[p].spec.width);
  }
}

void forward_trace(const MlpNetwork& net, std::span<const double> x, Trace& trace) {
  check_input(net, x);
  if (trace.activations.size() != net.layer_count()) trace.prepare(net);
  const double* in = x.data();
  for (std::size_t p = 0; p < net.layer_count(); ++p) {
    dense_forward(net.layers()[p], in, trace.activations[p].data());
    in = trace.activations[p].data();
  }
}

double min_relu_activity(const MlpNetwork& net, std::span<const double> inputs) {
  const std::size_t d = net.input_dim();
  if (d == 0 || inputs.size() % d != 0) throw InputShapeError("probe inputs are not a whole number of rows");
  const std::size_t rows = inputs.size() / d;
  if (rows == 0) throw EmptyInputError("no probe inputs");
  Trace trace;
  trace.prepare(net);
  std::vector<std::vector<std::size_t>> fired(net.layer_count());
  for (std::size_t p = 0; p < net.layer_count(); ++p) fired[p].assign(net.layers()[p].spec.width, 0);
  for (std::size_t r = 0; r < rows; ++r) {
    forward_trace(net, inputs.subspan(r * d, d), trace);
    for (std::size_t p = 0; p < net.layer_count(); ++p)
      for (std::size_t o = 0; o < fired[p].size(); ++o) fired[p][o] += trace.activations[p][o] > 0.0;
  }
  double lowest = 1.0;
  for (std::size_t p = 0; p < net.layer_count(); ++p) {
    if (net.layers()[p].spec.activation != Activation::ReLU) continue;
    for (auto f : fired[p]) lowest = std::min(lowest, static_cast<double>(f) / static_cast<double>(rows));
  }
  return lowest;
}

void backprop(const MlpNetwork& net, std::span<const double> x, Trace& trace,
              std::span<const double> d_output, GradientSet& grad, std::span<double> d_input) {
  const std::size_t depth = net.layer_count();
  if (d_output.size() != net.output_dim()) throw InputShapeError("output gradient has wrong length");
  {
    const auto& top = net.layers()[depth - 1];
    auto& delta = trace.deltas[depth - 1];
    const auto& act = trace.activations[depth - 1];
    for (std::size_t o = 0; o < top.spec.width; ++o)
      delta[o] = d_output[o] * activation_slope(top.spec.activation, act[o]);
  }
  for (std::size_t p = depth; p-- > 0;) {
    const auto& layer = net.layers()[p];
    const double* in = p == 0 ? x.data() : trace.activations[p - 1].data();
    const auto& delta = trace.deltas[p];
    auto& g = grad.layers[p];
    const std::size_t n_in = layer.fan_in;
    for (std::size_t o = 0; o < layer.spec.width; ++o) {
      const double d = delta[o];
      g.bias[o] += d;
      double* gw = g.weights.data() + o * n_in;
      for (std::size_t i = 0; i < n_in; ++i) gw[i] += d * in[i];
    }
    double* below = nullptr;
    Activation below_act = Activation::Linear;
    if (p > 0) {
      below = trace.deltas[p - 1].data();
      below_act = net.layers()[p - 1].spec.activation;
    } else if (!d_input.empty()) {
      if (d_input.size() != n_in) throw InputShapeError("input gradient buffer has wrong length");
      below = d_input.data();
    }
    if (below == nullptr) continue;
    for (std::size_t i = 0; i < n_in; ++i) below[i] = 0.0;
    const double* w = layer.weights.data();
    for (std::size_t o = 0; o < layer.spec.width; ++o, w += n_in) {
      const double d = delta[o];
      for (std::size_t i = 0; i < n_in; ++i) below[i] += w[i] * d;
    }
    if (p > 0) {
      const auto& act = trace.activations[p - 1];
      for (std::size_t i = 0; i < n_in; ++i) below[i] *= activation_slope(below_act, act[i]);
    }
  }
}

double mse_loss(std::span<const double> pred, std::span<const double> target) {
  if (pred.size() != target.size()) throw InputShapeError("mse_loss: length mismatch");
  if (pred.empty()) throw EmptyInputError("mse_loss: empty vectors");
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - target[i];
    sum += d * d;
  }
  return sum / static_cast<double>(pred.size());
}

double mse_loss_gradient(std::span<const double> pred, std::span<const double> target,
                         std::span<double> d_pred) {
  if (pred.size() != target.size() || d_pred.size() != pred.size())
    throw InputShapeError("mse_loss_gradient: length mismatch");
  const double scale = 2.0 / static_cast<double>(pred.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - target[i];
    sum += d * d;
    d_pred[i] = scale * d;
  }
  return sum / static_cast<double>(pred.size());
}

void SampleSet::push_back(std::span<const double> x, std::span<const double> y) {
  if (x.size() != input_dim || y.size() != target_dim) throw InputShapeError("SampleSet: row shape mismatch");
  inputs.insert(inputs.end(), x.begin(), x.end());
  targets.insert(targets.end(), y.begin(), y.end());
}

void SampleSet::reserve(std::size_t rows) {
  inputs.reserve(rows * input_dim);
  targets.reserve(rows * target_dim);
}

void gather(const SampleSet& data, std::span<const std::size_t> rows, Batch& out) {
  const std::size_t n = rows.size();
  out.size = n;
  out.x.resize(data.input_dim * n);
  out.y.resize(data.target_dim * n);
  for (std::size_t b = 0; b < n; ++b) {
    const double* x = data.inputs.data() + rows[b] * data.input_dim;
    const double* y = data.targets.data() + rows[b] * data.target_dim;
    for (std::size_t u = 0; u < data.input_dim; ++u) out.x[u * n + b] = x[u];
    for (std::size_t u = 0; u < data.target_dim; ++u) out.y[u * n + b] = y[u];
  }
}

void gather_range(const SampleSet& data, std::size_t begin, std::size_t end, Batch& out) {
  std::vector<std::size_t> rows(end - begin);
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = begin + i;
  gather(data, rows, out);
}

namespace {

// Sum of a[b] * c[b] with eight independent partial sums, so the loop
// pipelines without reassociating across runs.
inline double dot(const double* a, const double* c, std::size_t n) {
  double acc[8] = {0, 0, 0, 0, 0, 0, 0, 0};
  std::size_t b = 0;
  for (; b + 8 <= n; b += 8)
    for (std::size_t l = 0; l < 8; ++l) acc[l] += a[b + l] * c[b + l];
  double tail = 0.0;
  for (; b < n; ++b) tail += a[b] * c[b];
  return ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7])) + tail;
}

inline double total(const double* a, std::size_t n) {
  double acc[8] = {0, 0, 0, 0, 0, 0, 0, 0};
  std::size_t b = 0;
  for (; b + 8 <= n; b += 8)
    for (std::size_t l = 0; l < 8; ++l) acc[l] += a[b + l];
  double tail = 0.0;
  for (; b < n; ++b) tail += a[b];
  return ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7])) + tail;
}

void check_block(std::span<const double> x, std::size_t dim, std::size_t size, const char* what) {
  if (size == 0) throw EmptyInputError(std::string(what) + ": empty batch");
  if (x.size() != dim * size) throw InputShapeError(std::string(what) + ": block has wrong shape");
}

}  // namespace

void forward_batch(const MlpNetwork& net, std::span<const double> x, std::size_t size, BatchTrace& trace) {
  check_block(x, net.input_dim(), size, "forward_batch");
  const std::size_t depth = net.layer_count();
  trace.size = size;
  trace.activations.resize(depth);
  trace.deltas.resize(depth);
  const double* in = x.data();
  for (std::size_t p = 0; p < depth; ++p) {
    const auto& layer = net.layers()[p];
    auto& out = trace.activations[p];
    out.resize(layer.spec.width * size);
    trace.deltas[p].resize(layer.spec.width * size);
    for (std::size_t o = 0; o < layer.spec.width; ++o) {
      double* z = out.data() + o * size;
      const double bias = layer.bias[o];
      for (std::size_t b = 0; b < size; ++b) z[b] = bias;
      const double* w = layer.weights.data() + o * layer.fan_in;
      for (std::size_t i = 0; i < layer.fan_in; ++i) {
        const double wi = w[i];
        const double* xi = in + i * size;
        for (std::size_t b = 0; b < size; ++b) z[b] += wi * xi[b];
      }
      switch (layer.spec.activation) {
        case Activation::ReLU:
          for (std::size_t b = 0; b < size; ++b) z[b] = z[b] > 0.0 ? z[b] : 0.0;
          break;
        case Activation::Sigmoid:
          for (std::size_t b = 0; b < size; ++b) z[b] = 1.0 / (1.0 + std::exp(-z[b]));
          break;
        case Activation::Linear:
          break;
      }
    }
    in = out.data();
  }
}

void backprop_batch(const MlpNetwork& net, std::span<const double> x, BatchTrace& trace,
                    std::span<const double> d_output, GradientSet& grad, std::span<double> d_input) {
  const std::size_t depth = net.layer_count();
  const std::size_t size = trace.size;
  check_block(x, net.input_dim(), size, "backprop_batch");
  if (d_output.size() != net.output_dim() * size) throw InputShapeError("output gradient block has wrong shape");
  if (!d_input.empty() && d_input.size() != net.input_dim() * size)
    throw InputShapeError("input gradient block has wrong shape");
  {
    const auto act = net.layers()[depth - 1].spec.activation;
    auto& delta = trace.deltas[depth - 1];
    const auto& out = trace.activations[depth - 1];
    for (std::size_t j = 0; j < delta.size(); ++j) delta[j] = d_output[j] * activation_slope(act, out[j]);
  }
  for (std::size_t p = depth; p-- > 0;) {
    const auto& layer = net.layers()[p];
    const std::size_t n_in = layer.fan_in;
    const double* in = p == 0 ? x.data() : trace.activations[p - 1].data();
    const double* delta = trace.deltas[p].data();
    auto& g = grad.layers[p];
    for (std::size_t o = 0; o < layer.spec.width; ++o) {
      const double* d = delta + o * size;
      g.bias[o] += total(d, size);
      for (std::size_t i = 0; i < n_in; ++i) g.weights[o * n_in + i] += dot(d, in + i * size, size);
    }
    double* below = nullptr;
    if (p > 0)
      below = trace.deltas[p - 1].data();
    else if (!d_input.empty())
      below = d_input.data();
    if (below == nullptr) continue;
    for (std::size_t i = 0; i < n_in; ++i) {
      double* bi = below + i * size;
      for (std::size_t b = 0; b < size; ++b) bi[b] = 0.0;
      for (std::size_t o = 0; o < layer.spec.width; ++o) {
        const double w = layer.weights[o * n_in + i];
        const double* d = delta + o * size;
        for (std::size_t b = 0; b < size; ++b) bi[b] += w * d[b];
      }
    }
    if (p > 0) {
      const auto act = net.layers()[p - 1].spec.activation;
      const auto& a = trace.activations[p - 1];
      if (act == Activation::ReLU) {
        for (std::size_t j = 0; j < n_in * size; ++j) below[j] = a[j] > 0.0 ? below[j] : 0.0;
      } else {
        for (std::size_t j = 0; j < n_in * size; ++j) below[j] *= activation_slope(act, a[j]);
      }
    }
  }
}

double mse_loss_batch(std::span<const double> pred, std::span<const double> target, std::size_t size) {
  if (size == 0) throw EmptyInputError("mse_loss_batch: empty batch");
  if (pred.size() != target.size() || pred.size() % size != 0) throw InputShapeError("mse_loss_batch: shape mismatch");
  const std::size_t dim = pred.size() / size;
  double sum = 0.0;
  for (std::size_t j = 0; j < pred.size(); ++j) {
    const double d = pred[j] - target[j];
    sum += d * d;
  }
  return sum / static_cast<double>(dim);
}

double mse_loss_gradient_batch(std::span<const double> pred, std::span<const double> target, std::size_t size,
                               std::span<double> d_pred) {
  if (size == 0) throw EmptyInputError("mse_loss_gradient_batch: empty batch");
  if (pred.size() != target.size() || d_pred.size() != pred.size() || pred.size() % size != 0)
    throw InputShapeError("mse_loss_gradient_batch: shape mismatch");
  const double dim = static_cast<double>(pred.size() / size);
  const double scale = 2.0 / dim;
  double sum = 0.0;
  for (std::size_t j = 0; j < pred.size(); ++j) {
    const double d = pred[j] - target[j];
    sum += d * d;
    d_pred[j] = scale * d;
  }
  return sum / dim;
}

GradientSet backward(const MlpNetwork& net, const SampleSet& batch) {
  if (batch.empty()) throw EmptyInputError("backward: empty batch");
  if (batch.input_dim != net.input_dim() || batch.target_dim != net.output_dim())
    throw InputShapeError("backward: batch shape does not match network");
  GradientSet grad = net.zero_gradient();
  MlpNetwork copy = net;
  NetworkModel model(copy);
  for (const auto& block : detail::blocks_of(batch)) model.accumulate(block, std::span<GradientSet>(&grad, 1));
  grad.scale(1.0 / static_cast<double>(batch.size()));
  return grad;
}

double mean_loss(const MlpNetwork& net, const SampleSet& data) {
  if (data.empty()) throw EmptyInputError("mean_loss: empty data");
  MlpNetwork copy = net;
  NetworkModel model(copy);
  return mean_model_loss(model, data);
}

void validate(const TrainConfig& cfg, std::size_t train_size) {
  if (!(cfg.learning_rate > 0.0) || !std::isfinite(cfg.learning_rate))
    throw ConfigError("learning_rate must be positive");
  if (cfg.batch_size == 0) throw ConfigError("batch_size must be positive");
  if (cfg.batch_size > train_size)
    throw ConfigError("batch_size " + std::to_string(cfg.batch_size) + " exceeds training-set size " +
                      std::to_string(train_size));
}

namespace detail {

OptimizerState::OptimizerState(const TrainConfig& cfg, const std::vector<MlpNetwork*>& nets) : cfg_(cfg) {
  if (cfg.optimizer == Optimizer::Adam) {
    for (auto* n : nets) {
      first_.push_back(n->zero_gradient());
      second_.push_back(n->zero_gradient());
    }
  }
}

void OptimizerState::step(const std::vector<MlpNetwork*>& nets, const std::vector<GradientSet>& grads) {
  const double lr = cfg_.learning_rate;
  if (cfg_.optimizer == Optimizer::GradientDescent) {
    for (std::size_t k = 0; k < nets.size(); ++k) {
      auto& layers = nets[k]->layers();
      for (std::size_t p = 0; p < layers.size(); ++p) {
        const auto& g = grads[k].layers[p];
        for (std::size_t i = 0; i < g.weights.size(); ++i) layers[p].weights[i] -= lr * g.weights[i];
        for (std::size_t i = 0; i < g.bias.size(); ++i) layers[p].bias[i] -= lr * g.bias[i];
      }
    }
    return;
  }
  constexpr double beta1 = 0.9;
  constexpr double beta2 = 0.999;
  constexpr double eps = 1e-8;
  ++t_;
  const double c1 = 1.0 - std::pow(beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2, static_cast<double>(t_));
  const double step = lr * std::sqrt(c2) / c1;
  const double eps_hat = eps * std::sqrt(c2);
  auto update = [&](std::vector<double>& param, const std::vector<double>& g, std::vector<double>& m,
                    std::vector<double>& v) {
    for (std::size_t i = 0; i < param.size(); ++i) {
      m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
      v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
      param[i] -= step * m[i] / (std::sqrt(v[i]) + eps_hat);
    }
  };
  for (std::size_t k = 0; k < nets.size(); ++k) {
    auto& layers = nets[k]->layers();
    for (std::size_t p = 0; p < layers.size(); ++p) {
      update(layers[p].weights, grads[k].layers[p].weights, first_[k].layers[p].weights,
             second_[k].layers[p].weights);
      update(layers[p].bias, grads[k].layers[p].bias, first_[k].layers[p].bias, second_[k].layers[p].bias);
    }
  }
}

std::vector<Batch> blocks_of(const SampleSet& data) {
  std::vector<Batch> out;
  for (std::size_t start = 0; start < data.size(); start += kEvalBlock) {
    out.emplace_back();
    gather_range(data, start, std::min(data.size(), start + kEvalBlock), out.back());
  }
  return out;
}

}  // namespace detail

double NetworkModel::accumulate(const Batch& batch, std::span<GradientSet> grads) {
  forward_batch(*net_, batch.x, batch.size, trace_);
  d_out_.resize(batch.y.size());
  const double loss = mse_loss_gradient_batch(trace_.output(), batch.y, batch.size, d_out_);
  backprop_batch(*net_, batch.x, trace_, d_out_, grads[0]);
  return loss;
}

double NetworkModel::loss(const Batch& batch) const {
  forward_batch(*net_, batch.x, batch.size, trace_);
  return mse_loss_batch(trace_.output(), batch.y, batch.size);
}

TrainedNetwork train(const MlpNetwork& net, const SampleSet& train_set, const SampleSet& val_set,
                     const TrainConfig& cfg) {
  if (train_set.input_dim != net.input_dim() || train_set.target_dim != net.output_dim() ||
      val_set.input_dim != net.input_dim() || val_set.target_dim != net.output_dim())
    throw InputShapeError("train: data shape does not match network");
  TrainedNetwork out{net, {}};
  NetworkModel model(out.net);
  out.outcome = fit(model, train_set, val_set, cfg);
  return out;
}

void write_network(std::ostream& os, const MlpNetwork& net) {
  os << "uwauth-mlp 1\n";
  os << "input_dim " << net.input_dim() << "\n";
  os << "layers " << net.layer_count() << "\n";
  for (const auto& l : net.layers()) os << "layer " << l.spec.width << ' ' << to_string(l.spec.activation) << "\n";
  for (const auto& l : net.layers()) {
    os << "W";
    for (double w : l.weights) os << ' ' << format_double(w);
    os << "\nb";
    for (double b : l.bias) os << ' ' << format_double(b);
    os << "\n";
  }
  os << "end-mlp\n";
}

namespace {

std::string next_line(std::istream& is) {
  std::string line;
  while (std::getline(is, line)) {
    if (!trim(line).empty()) return line;
  }
  throw FormatError("unexpected end of network block");
}

std::vector<double> read_values(std::istream& is, char tag, std::size_t count) {
  std::istringstream ls(next_line(is));
  std::string head;
  ls >> head;
  if (head.size() != 1 || head[0] != tag) throw FormatError(std::string("expected '") + tag + "' row");
  std::vector<double> out;
  out.reserve(count);
  std::string tok;
  while (ls >> tok) out.push_back(parse_double(tok));
  if (out.size() != count) throw FormatError("parameter row has wrong length");
  return out;
}

}  // namespace

MlpNetwork read_network(std::istream& is) {
  std::istringstream header(next_line(is));
  std::string magic;
  int version = 0;
  header >> magic >> version;
  if (magic != "uwauth-mlp" || version != 1) throw FormatError("not a uwauth-mlp v1 block");

  std::string key;
  std::size_t input_dim = 0, count = 0;
  std::istringstream(next_line(is)) >> key >> input_dim;
  if (key != "input_dim") throw FormatError("expected input_dim");
  std::istringstream(next_line(is)) >> key >> count;
  if (key != "layers" || count == 0) throw FormatError("expected layer count");
  std::vector<LayerSpec> specs;
  for (std::size_t p = 0; p < count; ++p) {
    std::string act;
    std::size_t width = 0;
    std::istringstream(next_line(is)) >> key >> width >> act;
    if (key != "layer") throw FormatError("expected layer spec");
    specs.push_back({width, parse_activation(act)});
  }
  MlpNetwork net(input_dim, specs);
  for (auto& l : net.layers()) {
    l.weights = read_values(is, 'W', l.weights.size());
    l.bias = read_values(is, 'b', l.bias.size());
  }
  if (trim(next_line(is)) != "end-mlp") throw FormatError("expected end-mlp");
  if (!net.all_finite()) throw FormatError("network parameters must be finite");
  return net;
}

}  // namespace uwauth::nn
