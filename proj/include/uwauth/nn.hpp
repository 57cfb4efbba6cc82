#pragma once

// Feed-forward perceptron engine: dense layers, ReLU/sigmoid/linear
// activations, MSE loss, backpropagation and mini-batch training.

#include <cmath>
#include <algorithm>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "uwauth/errors.hpp"
#include "uwauth/util.hpp"

namespace uwauth::nn {

enum class Activation { ReLU, Sigmoid, Linear };

std::string_view to_string(Activation a);
Activation parse_activation(std::string_view name);

struct LayerSpec {
  std::size_t width = 1;
  Activation activation = Activation::ReLU;

  bool operator==(const LayerSpec&) const = default;
};

struct DenseLayer {
  std::size_t fan_in = 0;
  LayerSpec spec;
  std::vector<double> weights;  // spec.width x fan_in, row-major
  std::vector<double> bias;     // spec.width

  bool operator==(const DenseLayer&) const = default;
};

struct LayerGradient {
  std::vector<double> weights;
  std::vector<double> bias;
};

// Gradients shaped exactly like the parameters of one MlpNetwork.
struct GradientSet {
  std::vector<LayerGradient> layers;

  void zero();
  void scale(double factor);
  double max_abs() const;
};

class MlpNetwork {
 public:
  MlpNetwork() = default;
  // Parameters start at zero; call initialize() for a random start.
  MlpNetwork(std::size_t input_dim, std::vector<LayerSpec> layers);

  // Uniform He scaling for ReLU layers, uniform Xavier scaling otherwise.
  // Biases are zeroed.
  void initialize(std::uint64_t seed);

  std::size_t input_dim() const noexcept { return input_dim_; }
  std::size_t output_dim() const noexcept;
  std::size_t layer_count() const noexcept { return layers_.size(); }
  std::size_t parameter_count() const noexcept;
  std::size_t neuron_count() const noexcept;
  std::vector<LayerSpec> specs() const;

  const std::vector<DenseLayer>& layers() const noexcept { return layers_; }
  std::vector<DenseLayer>& layers() noexcept { return layers_; }

  std::vector<double> forward(std::span<const double> x) const;

  GradientSet zero_gradient() const;
  bool all_finite() const noexcept;

  bool operator==(const MlpNetwork&) const = default;

 private:
  std::size_t input_dim_ = 0;
  std::vector<DenseLayer> layers_;
};

// Per-layer activations and deltas, reused across samples during training.
struct Trace {
  std::vector<std::vector<double>> activations;
  std::vector<std::vector<double>> deltas;

  void prepare(const MlpNetwork& net);
  std::span<const double> output() const { return activations.back(); }
};

void forward_trace(const MlpNetwork& net, std::span<const double> x, Trace& trace);

// Smallest share, over all ReLU units, of the row-major `inputs` on which the
// unit fires. 1 when the net has no ReLU unit.
double min_relu_activity(const MlpNetwork& net, std::span<const double> inputs);

// Accumulates d(loss)/d(params) into `grad`, given d(loss)/d(output) and a
// trace produced by forward_trace on the same input. When `d_input` is
// non-empty it receives d(loss)/d(input).
void backprop(const MlpNetwork& net, std::span<const double> x, Trace& trace,
              std::span<const double> d_output, GradientSet& grad,
              std::span<double> d_input = {});

double mse_loss(std::span<const double> pred, std::span<const double> target);

// Writes d(mse)/d(pred) into `d_pred` and returns the loss.
double mse_loss_gradient(std::span<const double> pred, std::span<const double> target,
                         std::span<double> d_pred);

// Row-major (input, target) pairs.
struct SampleSet {
  std::size_t input_dim = 0;
  std::size_t target_dim = 0;
  std::vector<double> inputs;
  std::vector<double> targets;

  SampleSet() = default;
  SampleSet(std::size_t in_dim, std::size_t out_dim) : input_dim(in_dim), target_dim(out_dim) {}

  std::size_t size() const noexcept { return input_dim == 0 ? 0 : inputs.size() / input_dim; }
  bool empty() const noexcept { return size() == 0; }
  std::span<const double> input(std::size_t i) const {
    return {inputs.data() + i * input_dim, input_dim};
  }
  std::span<const double> target(std::size_t i) const {
    return {targets.data() + i * target_dim, target_dim};
  }
  void push_back(std::span<const double> x, std::span<const double> y);
  void reserve(std::size_t rows);
};

// Average MSE gradient over the whole batch.
GradientSet backward(const MlpNetwork& net, const SampleSet& batch);

double mean_loss(const MlpNetwork& net, const SampleSet& data);

// A block of samples stored unit-major: entry (unit u, sample b) sits at
// u * size + b, so the batched kernels run over contiguous samples.
struct Batch {
  std::size_t size = 0;
  std::vector<double> x;
  std::vector<double> y;
};

void gather(const SampleSet& data, std::span<const std::size_t> rows, Batch& out);
void gather_range(const SampleSet& data, std::size_t begin, std::size_t end, Batch& out);

struct BatchTrace {
  std::size_t size = 0;
  std::vector<std::vector<double>> activations;  // per layer, width x size
  std::vector<std::vector<double>> deltas;

  std::span<const double> output() const { return activations.back(); }
};

void forward_batch(const MlpNetwork& net, std::span<const double> x, std::size_t size, BatchTrace& trace);

// Batched counterpart of backprop: gradients are summed over the samples.
void backprop_batch(const MlpNetwork& net, std::span<const double> x, BatchTrace& trace,
                    std::span<const double> d_output, GradientSet& grad, std::span<double> d_input = {});

// Per-sample MSE over unit-major blocks; both return the summed loss.
double mse_loss_batch(std::span<const double> pred, std::span<const double> target, std::size_t size);
double mse_loss_gradient_batch(std::span<const double> pred, std::span<const double> target, std::size_t size,
                               std::span<double> d_pred);

enum class Optimizer { GradientDescent, Adam };

std::string_view to_string(Optimizer o);
Optimizer parse_optimizer(std::string_view name);

struct TrainConfig {
  double learning_rate = 1e-3;
  std::size_t epochs = 500;
  std::size_t batch_size = 128;
  Optimizer optimizer = Optimizer::Adam;
  std::uint64_t seed = 0;
  std::size_t early_stop_patience = 25;  // 0 disables early stopping
};

void validate(const TrainConfig& cfg, std::size_t train_size);

struct EpochLoss {
  double train = 0.0;
  double validation = 0.0;
};

struct TrainOutcome {
  std::vector<EpochLoss> history;
  std::size_t best_epoch = 0;  // 0 means the starting parameters were kept
  double best_validation_loss = 0.0;
};

// A model the trainer can optimize: it exposes the networks whose parameters
// move, the summed loss of a batch, and summed gradient accumulation (one
// GradientSet per trainable network, same order).
template <class M>
concept TrainableModel = requires(M& m, const M& cm, const Batch& b, std::span<GradientSet> g) {
  { m.trainable() } -> std::same_as<std::vector<MlpNetwork*>>;
  { m.accumulate(b, g) } -> std::convertible_to<double>;
  { cm.loss(b) } -> std::convertible_to<double>;
};

namespace detail {

class OptimizerState {
 public:
  OptimizerState(const TrainConfig& cfg, const std::vector<MlpNetwork*>& nets);
  void step(const std::vector<MlpNetwork*>& nets, const std::vector<GradientSet>& grads);

 private:
  TrainConfig cfg_;
  std::vector<GradientSet> first_;
  std::vector<GradientSet> second_;
  std::uint64_t t_ = 0;
};

inline constexpr std::size_t kEvalBlock = 1024;

std::vector<Batch> blocks_of(const SampleSet& data);

template <class Model>
double summed_loss(const Model& model, const std::vector<Batch>& blocks, std::size_t rows) {
  double sum = 0.0;
  for (const auto& b : blocks) sum += model.loss(b);
  return sum / static_cast<double>(rows);
}

}  // namespace detail

template <TrainableModel Model>
double mean_model_loss(const Model& model, const SampleSet& data) {
  if (data.empty()) throw EmptyInputError("mean_model_loss: empty data");
  return detail::summed_loss(model, detail::blocks_of(data), data.size());
}

// Mini-batch training with checkpoint-best selection on validation loss. On
// return the model's networks hold the best checkpoint (possibly the start).
template <TrainableModel Model>
TrainOutcome fit(Model& model, const SampleSet& train, const SampleSet& val,
                 const TrainConfig& cfg) {
  if (train.empty() || val.empty()) throw EmptyInputError("training and validation sets must be non-empty");
  validate(cfg, train.size());

  std::vector<MlpNetwork*> nets = model.trainable();
  std::vector<GradientSet> grads;
  grads.reserve(nets.size());
  for (auto* n : nets) grads.push_back(n->zero_gradient());

  std::vector<MlpNetwork> best;
  best.reserve(nets.size());
  for (auto* n : nets) best.push_back(*n);

  const auto val_blocks = detail::blocks_of(val);
  TrainOutcome out;
  out.best_validation_loss = detail::summed_loss(model, val_blocks, val.size());
  if (!std::isfinite(out.best_validation_loss))
    throw TrainingDivergedError("validation loss is not finite at start", 0);

  detail::OptimizerState opt(cfg, nets);
  std::vector<std::size_t> order(train.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::mt19937_64 shuffle_rng(cfg.seed);
  std::size_t stale = 0;
  Batch batch;

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    shuffle_indices(order, shuffle_rng);
    double sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
      gather(train, std::span<const std::size_t>(order).subspan(start, stop - start), batch);
      for (auto& g : grads) g.zero();
      sum += model.accumulate(batch, grads);
      const double inv = 1.0 / static_cast<double>(stop - start);
      for (auto& g : grads) g.scale(inv);
      opt.step(nets, grads);
    }
    const double train_loss = sum / static_cast<double>(train.size());
    if (!std::isfinite(train_loss))
      throw TrainingDivergedError("training loss became non-finite", epoch - 1);
    const double val_loss = detail::summed_loss(model, val_blocks, val.size());
    if (!std::isfinite(val_loss))
      throw TrainingDivergedError("validation loss became non-finite", epoch - 1);
    out.history.push_back({train_loss, val_loss});

    if (val_loss < out.best_validation_loss) {
      out.best_validation_loss = val_loss;
      out.best_epoch = epoch;
      for (std::size_t k = 0; k < nets.size(); ++k) best[k] = *nets[k];
      stale = 0;
    } else if (cfg.early_stop_patience > 0 && ++stale >= cfg.early_stop_patience) {
      break;
    }
  }
  for (std::size_t k = 0; k < nets.size(); ++k) *nets[k] = std::move(best[k]);
  return out;
}

// One network trained directly against its targets.
class NetworkModel {
 public:
  explicit NetworkModel(MlpNetwork& net) : net_(&net) {}

  std::vector<MlpNetwork*> trainable() { return {net_}; }
  double accumulate(const Batch& batch, std::span<GradientSet> grads);
  double loss(const Batch& batch) const;

 private:
  MlpNetwork* net_;
  mutable BatchTrace trace_;
  std::vector<double> d_out_;
};

struct TrainedNetwork {
  MlpNetwork net;
  TrainOutcome outcome;
};

TrainedNetwork train(const MlpNetwork& net, const SampleSet& train_set, const SampleSet& val_set,
                     const TrainConfig& cfg);

// Text format "uwauth-mlp 1": layer specs followed by row-major parameters
// in shortest round-trip decimal.
void write_network(std::ostream& os, const MlpNetwork& net);
MlpNetwork read_network(std::istream& is);

}  // namespace uwauth::nn
