#pragma once

// Sensor-side encoders, sink-side fusion and the four training schemes:
// autoencoder (AE), local decision (LD), combined LD + AE (CLDAE) and global
// end-to-end training.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "uwauth/datagen.hpp"
#include "uwauth/eval.hpp"
#include "uwauth/nn.hpp"

namespace uwauth::schemes {

enum class Scheme { AE, LD, CLDAE, Global };

std::string_view to_string(Scheme s);
Scheme parse_scheme(std::string_view name);

// Per-feature z-scoring fitted on a sensor's training rows.
struct Standardizer {
  std::vector<double> mean;
  std::vector<double> scale;

  static Standardizer fit(const nn::SampleSet& rows);
  void apply(std::span<const double> raw, std::span<double> out) const;
  std::size_t dim() const noexcept { return mean.size(); }

  bool operator==(const Standardizer&) const = default;
};

// Layer layouts. The leading "4" of every sensor-side network is a trainable
// layer of width 4 fed by the K raw features.
std::vector<nn::LayerSpec> ae_encoder_layers(std::size_t m);
std::vector<nn::LayerSpec> decoder_layers(std::size_t k);
std::vector<nn::LayerSpec> ld_layers();
std::vector<nn::LayerSpec> cldae_f2_layers(std::size_t m);
std::vector<nn::LayerSpec> fusion_layers(std::size_t m, std::size_t sensors);

struct LocalEncoder {
  Scheme kind = Scheme::LD;
  std::size_t m = 1;
  Standardizer standardizer;
  nn::MlpNetwork primary;                   // AE encoder, LD net, CLDAE f1, or global local subnet
  std::optional<nn::MlpNetwork> secondary;  // CLDAE f2 (M - 1 outputs)

  std::vector<double> encode(std::span<const double> raw) const;

  bool operator==(const LocalEncoder&) const = default;
};

struct DecoderNet {
  nn::MlpNetwork net;  // M -> 3 -> 3 -> K, linear output
};

struct FusionNetwork {
  nn::MlpNetwork net;  // MN -> N -> 1 (sigmoid) for local schemes
  // Applied to the concatenated codes before `net`; empty for the global
  // scheme, whose sink is trained end to end on raw codes.
  Standardizer input;

  // Standardizes `codes` in place, then runs the network.
  double score(std::span<double> codes) const;
};

struct LocalTraining {
  LocalEncoder encoder;
  DecoderNet decoder;
  nn::TrainOutcome outcome;
};

// Composite models the trainer optimizes end to end. They hold pointers to
// networks owned elsewhere.
namespace models {

// Encoder then decoder; the batch target is the (standardized) input.
class AutoencoderModel {
 public:
  AutoencoderModel(nn::MlpNetwork& encoder, nn::MlpNetwork& decoder);

  std::vector<nn::MlpNetwork*> trainable() { return {enc_, dec_}; }
  double accumulate(const nn::Batch& batch, std::span<nn::GradientSet> grads);
  double loss(const nn::Batch& batch) const;

 private:
  nn::MlpNetwork* enc_;
  nn::MlpNetwork* dec_;
  mutable nn::BatchTrace te_, td_;
  std::vector<double> d_rec_, d_code_;
};

// Code [f1(x), f2(x)] feeding the decoder. Trainable order is f2, decoder,
// then f1 when joint.
class CldaeModel {
 public:
  CldaeModel(nn::MlpNetwork& f1, nn::MlpNetwork& f2, nn::MlpNetwork& decoder, bool joint);

  std::vector<nn::MlpNetwork*> trainable();
  double accumulate(const nn::Batch& batch, std::span<nn::GradientSet> grads);
  double loss(const nn::Batch& batch) const;

 private:
  void run(const nn::Batch& batch) const;

  nn::MlpNetwork* f1_;
  nn::MlpNetwork* f2_;
  nn::MlpNetwork* dec_;
  bool joint_;
  mutable nn::BatchTrace t1_, t2_, td_;
  mutable std::vector<double> code_;
  std::vector<double> d_rec_, d_code_;
};

// N local subnets on sensor slices of an N x K row, concatenated into the
// sink. Trainable order is the locals, then the sink.
class GlobalModel {
 public:
  GlobalModel(std::vector<nn::MlpNetwork>& locals, nn::MlpNetwork& sink);

  std::vector<nn::MlpNetwork*> trainable();
  double accumulate(const nn::Batch& batch, std::span<nn::GradientSet> grads);
  double loss(const nn::Batch& batch) const;

 private:
  void run(const nn::Batch& batch) const;

  std::vector<nn::MlpNetwork>* locals_;
  nn::MlpNetwork* sink_;
  mutable std::vector<nn::BatchTrace> tl_;
  mutable nn::BatchTrace ts_;
  mutable std::vector<double> codes_;
  std::vector<double> d_codes_, d_out_;
};

}  // namespace models

// Single-sensor rows: input = K raw features, target = label.
nn::SampleSet sensor_rows(const datagen::FeatureDataset& ds, std::size_t sensor);

// Unsupervised; labels are ignored. Loss is reconstruction MSE in
// standardized feature space.
LocalTraining train_ae_local(const nn::SampleSet& train, const nn::SampleSet& val, std::size_t m,
                             const nn::TrainConfig& cfg);

LocalEncoder train_ld_local(const nn::SampleSet& train, const nn::SampleSet& val, const nn::TrainConfig& cfg);

enum class CldaeMode {
  FrozenDecision,  // stage 2 trains f2 and the decoder only
  Joint,           // stage 2 also moves f1
};

// Stage 1 is train_ld_local with the same cfg; stage 2 trains [f1, f2] as
// the code of an autoencoder. Requires m >= 2.
LocalTraining train_cldae_local(const nn::SampleSet& train, const nn::SampleSet& val, std::size_t m,
                                const nn::TrainConfig& cfg, CldaeMode mode = CldaeMode::FrozenDecision);
// Same, starting from an already trained stage-1 network.
LocalTraining train_cldae_local(const nn::SampleSet& train, const nn::SampleSet& val, std::size_t m,
                                const nn::TrainConfig& cfg, const LocalEncoder& stage1,
                                CldaeMode mode = CldaeMode::FrozenDecision);

double reconstruction_mse(const LocalEncoder& encoder, const DecoderNet& decoder, const nn::SampleSet& rows);

// Concatenated codes [y_1, ..., y_N] (sensor-major) with the row labels.
nn::SampleSet fusion_rows(std::span<const LocalEncoder> encoders, const datagen::FeatureDataset& ds);

FusionNetwork train_fusion(std::span<const LocalEncoder> encoders, const datagen::FeatureDataset& train,
                           const datagen::FeatureDataset& val, const nn::TrainConfig& cfg);

struct GlobalConfig {
  std::string notation;
  std::size_t sensors = 0;
  std::vector<std::size_t> local_widths;
  std::vector<std::size_t> sink_widths;

  std::size_t m() const { return local_widths.back(); }
  std::size_t total_neurons() const;
};

// Parses "a1-...-aQ||b1-...-bR" (empty tokens next to "||" are allowed, as
// in "4-3-||-6-3-3-1"). The sink must end in a single output neuron. When a
// budget is given, N * sum(a) + sum(b) must equal it.
GlobalConfig parse_global_config(std::string_view notation, std::size_t sensors,
                                 std::optional<std::size_t> neuron_budget = std::nullopt);

inline constexpr std::size_t kDefaultNeuronBudget = 34;

struct AuthenticatorBundle {
  Scheme scheme = Scheme::LD;
  std::size_t m = 1;
  std::size_t sensors = 0;
  std::size_t features = 0;
  std::string notation;  // global scheme only
  std::vector<LocalEncoder> encoders;
  FusionNetwork fusion;
  std::optional<double> lambda;
  double alpha = 0.0;
  std::uint64_t seed = 0;

  void validate() const;
  std::size_t parameter_count() const;
};

// Trains a global composite network: N independent local subnets feeding the
// sink, optimised end to end on label MSE. Lambda is left unset.
AuthenticatorBundle train_global(const GlobalConfig& gc, const datagen::FeatureDataset& train,
                                 const datagen::FeatureDataset& val, const nn::TrainConfig& cfg);

// Training seed used for sensor n by the local schemes; LD and CLDAE stage 1
// share it.
nn::TrainConfig sensor_config(const nn::TrainConfig& cfg, std::size_t sensor);
nn::TrainConfig fusion_config(const nn::TrainConfig& cfg);

std::vector<LocalEncoder> train_ld_encoders(const datagen::FeatureDataset& train, const datagen::FeatureDataset& val,
                                            const nn::TrainConfig& cfg);

struct LocalSchemeOptions {
  CldaeMode cldae_mode = CldaeMode::FrozenDecision;
  // Reused as LD encoders / CLDAE stage 1 when present (must come from
  // train_ld_encoders with the same data and cfg).
  const std::vector<LocalEncoder>* ld_encoders = nullptr;
};

// AE / LD / CLDAE bundle: N local encoders plus fusion. CLDAE with m == 1
// falls back to LD. Lambda is left unset.
AuthenticatorBundle train_local_scheme(Scheme scheme, std::size_t m, const datagen::FeatureDataset& train,
                                       const datagen::FeatureDataset& val, const nn::TrainConfig& cfg,
                                       const LocalSchemeOptions& options = {});

// z = g([f_1(x_1), ..., f_N(x_N)]) for one sensor-major N x K row.
double encode_and_fuse(const AuthenticatorBundle& bundle, std::span<const double> features);

eval::ScoreSet score_dataset(const AuthenticatorBundle& bundle, const datagen::FeatureDataset& ds);

// Text container "uwauth-bundle 1" holding metadata, standardizers, network
// blocks and lambda.
void write_bundle(std::ostream& os, const AuthenticatorBundle& bundle);
AuthenticatorBundle read_bundle(std::istream& is);

}  // namespace uwauth::schemes
