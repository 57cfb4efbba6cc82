#include "uwauth/schemes.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

#include "uwauth/errors.hpp"
#include "uwauth/util.hpp"

namespace uwauth::schemes {

using nn::Activation;
using nn::LayerSpec;
using nn::MlpNetwork;
using nn::SampleSet;

std::string_view to_string(Scheme s) {
  switch (s) {
    case Scheme::AE: return "AE";
    case Scheme::LD: return "LD";
    case Scheme::CLDAE: return "CLDAE";
    case Scheme::Global: return "GLOBAL";
  }
  return "?";
}

Scheme parse_scheme(std::string_view name) {
  const auto n = to_lower(trim(name));
  if (n == "ae") return Scheme::AE;
  if (n == "ld") return Scheme::LD;
  if (n == "cldae") return Scheme::CLDAE;
  if (n == "global") return Scheme::Global;
  throw ConfigError("unknown scheme '" + std::string(name) + "'");
}

Standardizer Standardizer::fit(const SampleSet& rows) {
  if (rows.empty()) throw EmptyInputError("standardizer needs at least one row");
  const std::size_t d = rows.input_dim;
  Standardizer s;
  s.mean.assign(d, 0.0);
  s.scale.assign(d, 1.0);
  const double n = static_cast<double>(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto x = rows.input(i);
    for (std::size_t j = 0; j < d; ++j) s.mean[j] += x[j];
  }
  for (auto& m : s.mean) m /= n;
  std::vector<double> ss(d, 0.0);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto x = rows.input(i);
    for (std::size_t j = 0; j < d; ++j) ss[j] += (x[j] - s.mean[j]) * (x[j] - s.mean[j]);
  }
  for (std::size_t j = 0; j < d; ++j) {
    const double sd = std::sqrt(ss[j] / n);
    s.scale[j] = sd > 0.0 ? sd : 1.0;  // constant features pass through centred
  }
  return s;
}

void Standardizer::apply(std::span<const double> raw, std::span<double> out) const {
  if (raw.size() != mean.size() || out.size() != mean.size()) throw InputShapeError("standardizer: wrong width");
  for (std::size_t j = 0; j < raw.size(); ++j) out[j] = (raw[j] - mean[j]) / scale[j];
}

std::vector<LayerSpec> ae_encoder_layers(std::size_t m) {
  if (m == 0) throw ConfigError("code width M must be positive");
  return {{4, Activation::ReLU}, {3, Activation::ReLU}, {3, Activation::ReLU}, {m, Activation::ReLU}};
}

std::vector<LayerSpec> decoder_layers(std::size_t k) {
  return {{3, Activation::ReLU}, {3, Activation::ReLU}, {k, Activation::Linear}};
}

std::vector<LayerSpec> ld_layers() {
  return {{4, Activation::ReLU}, {3, Activation::ReLU}, {2, Activation::ReLU}, {1, Activation::Sigmoid}};
}

std::vector<LayerSpec> cldae_f2_layers(std::size_t m) {
  if (m < 2) throw ConfigError("CLDAE needs M >= 2; use LD for M = 1");
  return {{4, Activation::ReLU}, {3, Activation::ReLU}, {m - 1, Activation::ReLU}};
}

std::vector<LayerSpec> fusion_layers(std::size_t m, std::size_t sensors) {
  return {{m * sensors, Activation::ReLU}, {sensors, Activation::ReLU}, {1, Activation::Sigmoid}};
}

std::vector<double> LocalEncoder::encode(std::span<const double> raw) const {
  std::vector<double> x(raw.size());
  standardizer.apply(raw, x);
  auto code = primary.forward(x);
  if (secondary) {
    const auto extra = secondary->forward(x);
    code.insert(code.end(), extra.begin(), extra.end());
  }
  if (code.size() != m) throw InputShapeError("encoder produced a code of unexpected width");
  return code;
}

namespace {

constexpr std::uint64_t kTagEncoder = hash_tag("encoder");
constexpr std::uint64_t kTagDecoder = hash_tag("decoder");
constexpr std::uint64_t kTagLd = hash_tag("ld");
constexpr std::uint64_t kTagF2 = hash_tag("cldae-f2");
constexpr std::uint64_t kTagStage2 = hash_tag("cldae-stage2");
constexpr std::uint64_t kTagFusion = hash_tag("fusion");
constexpr std::uint64_t kTagSensor = hash_tag("sensor");
constexpr std::uint64_t kTagGlobalLocal = hash_tag("global-local");
constexpr std::uint64_t kTagSink = hash_tag("global-sink");
constexpr std::uint64_t kTagRetry = hash_tag("retry");

constexpr std::size_t kProbeRows = 512;
constexpr double kMinActivity = 0.02;
constexpr std::uint64_t kInitAttempts = 32;
constexpr std::uint64_t kTrainAttempts = 3;

std::span<const double> probe_of(const SampleSet& rows) {
  return std::span<const double>(rows.inputs).first(std::min(rows.size(), kProbeRows) * rows.input_dim);
}

std::vector<double> outputs_on(const MlpNetwork& net, std::span<const double> probe) {
  std::vector<double> out;
  nn::Trace trace;
  for (std::size_t r = 0; r * net.input_dim() < probe.size(); ++r) {
    nn::forward_trace(net, probe.subspan(r * net.input_dim(), net.input_dim()), trace);
    out.insert(out.end(), trace.output().begin(), trace.output().end());
  }
  return out;
}

// Row-wise concatenation of equally long row-major blocks.
std::vector<double> concat_rows(const std::vector<std::vector<double>>& blocks, const std::vector<std::size_t>& widths) {
  std::vector<double> out;
  const std::size_t rows = widths[0] == 0 ? 0 : blocks[0].size() / widths[0];
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t b = 0; b < blocks.size(); ++b)
      out.insert(out.end(), blocks[b].begin() + static_cast<std::ptrdiff_t>(r * widths[b]),
                 blocks[b].begin() + static_cast<std::ptrdiff_t>((r + 1) * widths[b]));
  return out;
}

// Tiny ReLU layers are often born dead. The start is re-drawn from derived
// seeds until every ReLU unit fires on some of the probe rows; if no draw
// manages, the liveliest one is kept.
MlpNetwork make_net(std::size_t input_dim, std::vector<LayerSpec> layers, std::uint64_t seed,
                    std::span<const double> probe) {
  MlpNetwork net(input_dim, std::move(layers));
  MlpNetwork best = net;
  double best_activity = -1.0;
  for (std::uint64_t attempt = 0; attempt < kInitAttempts; ++attempt) {
    net.initialize(attempt == 0 ? seed : derive_seed(seed, {attempt}));
    const double activity = probe.empty() ? 1.0 : nn::min_relu_activity(net, probe);
    if (activity >= kMinActivity) return net;
    if (activity > best_activity) {
      best_activity = activity;
      best = net;
    }
  }
  return best;
}

// Every ReLU unit, hidden or output, fires on part of the probe rows.
bool units_alive(const MlpNetwork& net, std::span<const double> probe) {
  return nn::min_relu_activity(net, probe) >= kMinActivity;
}

// The output is not constant over the probe rows.
bool responsive(const MlpNetwork& net, std::span<const double> probe) {
  const auto out = outputs_on(net, probe);
  const auto [lo, hi] = std::minmax_element(out.begin(), out.end());
  return *hi - *lo > 1e-9;
}

// Every output unit varies over the probe rows.
bool outputs_vary(const MlpNetwork& net, std::span<const double> probe) {
  const auto out = outputs_on(net, probe);
  const std::size_t width = net.output_dim();
  const std::size_t rows = out.size() / width;
  for (std::size_t o = 0; o < width; ++o) {
    double lo = out[o], hi = out[o];
    for (std::size_t r = 1; r < rows; ++r) {
      lo = std::min(lo, out[r * width + o]);
      hi = std::max(hi, out[r * width + o]);
    }
    if (hi - lo <= 1e-9) return false;
  }
  return true;
}

nn::TrainConfig with_seed(nn::TrainConfig cfg, std::uint64_t seed) {
  cfg.seed = seed;
  return cfg;
}

struct AttemptScore {
  bool alive = false;
  double validation_loss = 0.0;

  bool beats(const AttemptScore& o) const { return alive != o.alive ? alive : validation_loss < o.validation_loss; }
};

// Units can also die during training. A run that ends with a dead unit
// or a constant output is repeated from fresh derived seeds; the first
// healthy run wins, otherwise the lowest validation loss.
template <class Result, class Attempt>
Result best_of_attempts(std::uint64_t seed, Attempt&& attempt) {
  std::optional<std::pair<Result, AttemptScore>> best;
  for (std::uint64_t a = 0; a < kTrainAttempts; ++a) {
    auto run = attempt(a == 0 ? seed : derive_seed(seed, {kTagRetry, a}));
    const bool done = run.second.alive;
    if (!best || run.second.beats(best->second)) best = std::move(run);
    if (done) break;
  }
  return std::move(best->first);
}

void require_sensor_rows(const SampleSet& train, const SampleSet& val) {
  if (train.empty() || val.empty()) throw EmptyInputError("training and validation rows are required");
  if (train.input_dim != val.input_dim) throw InputShapeError("train/validation feature widths differ");
  if (train.target_dim != 1 || val.target_dim != 1) throw InputShapeError("sensor rows must carry a scalar label");
}

// Standardized inputs paired with either the label or the input itself.
SampleSet standardized(const SampleSet& rows, const Standardizer& st, bool reconstruct) {
  SampleSet out(rows.input_dim, reconstruct ? rows.input_dim : 1);
  out.reserve(rows.size());
  std::vector<double> x(rows.input_dim);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    st.apply(rows.input(i), x);
    if (reconstruct)
      out.push_back(x, x);
    else
      out.push_back(x, rows.target(i));
  }
  return out;
}

}  // namespace

namespace models {

AutoencoderModel::AutoencoderModel(MlpNetwork& encoder, MlpNetwork& decoder) : enc_(&encoder), dec_(&decoder) {}

double AutoencoderModel::accumulate(const nn::Batch& batch, std::span<nn::GradientSet> grads) {
  nn::forward_batch(*enc_, batch.x, batch.size, te_);
  nn::forward_batch(*dec_, te_.output(), batch.size, td_);
  d_rec_.resize(batch.y.size());
  d_code_.resize(te_.output().size());
  const double loss = nn::mse_loss_gradient_batch(td_.output(), batch.y, batch.size, d_rec_);
  nn::backprop_batch(*dec_, te_.output(), td_, d_rec_, grads[1], d_code_);
  nn::backprop_batch(*enc_, batch.x, te_, d_code_, grads[0]);
  return loss;
}

double AutoencoderModel::loss(const nn::Batch& batch) const {
  nn::forward_batch(*enc_, batch.x, batch.size, te_);
  nn::forward_batch(*dec_, te_.output(), batch.size, td_);
  return nn::mse_loss_batch(td_.output(), batch.y, batch.size);
}

CldaeModel::CldaeModel(MlpNetwork& f1, MlpNetwork& f2, MlpNetwork& decoder, bool joint)
    : f1_(&f1), f2_(&f2), dec_(&decoder), joint_(joint) {}

std::vector<MlpNetwork*> CldaeModel::trainable() {
  if (joint_) return {f2_, dec_, f1_};
  return {f2_, dec_};
}

// Unit-major blocks concatenate by appending: f1's row, then f2's rows.
void CldaeModel::run(const nn::Batch& batch) const {
  nn::forward_batch(*f1_, batch.x, batch.size, t1_);
  nn::forward_batch(*f2_, batch.x, batch.size, t2_);
  code_.assign(t1_.output().begin(), t1_.output().end());
  code_.insert(code_.end(), t2_.output().begin(), t2_.output().end());
  nn::forward_batch(*dec_, code_, batch.size, td_);
}

double CldaeModel::accumulate(const nn::Batch& batch, std::span<nn::GradientSet> grads) {
  run(batch);
  d_rec_.resize(batch.y.size());
  d_code_.resize(code_.size());
  const double loss = nn::mse_loss_gradient_batch(td_.output(), batch.y, batch.size, d_rec_);
  nn::backprop_batch(*dec_, code_, td_, d_rec_, grads[1], d_code_);
  const std::size_t split = f1_->output_dim() * batch.size;
  nn::backprop_batch(*f2_, batch.x, t2_, std::span<const double>(d_code_).subspan(split), grads[0]);
  if (joint_) nn::backprop_batch(*f1_, batch.x, t1_, std::span<const double>(d_code_).first(split), grads[2]);
  return loss;
}

double CldaeModel::loss(const nn::Batch& batch) const {
  run(batch);
  return nn::mse_loss_batch(td_.output(), batch.y, batch.size);
}

GlobalModel::GlobalModel(std::vector<MlpNetwork>& locals, MlpNetwork& sink)
    : locals_(&locals), sink_(&sink), tl_(locals.size()) {
  if (locals.empty()) throw ConfigError("global model needs at least one local network");
  if (sink.input_dim() != locals.size() * locals[0].output_dim())
    throw InputShapeError("sink input must equal N * M");
}

std::vector<MlpNetwork*> GlobalModel::trainable() {
  std::vector<MlpNetwork*> out;
  for (auto& l : *locals_) out.push_back(&l);
  out.push_back(sink_);
  return out;
}

// Sensor n's features are units [nK, (n+1)K) of the row, i.e. one contiguous
// slice of the unit-major block.
void GlobalModel::run(const nn::Batch& batch) const {
  const std::size_t k = (*locals_)[0].input_dim();
  const std::size_t slice = k * batch.size;
  if (batch.x.size() != locals_->size() * slice) throw InputShapeError("global model: batch has wrong width");
  codes_.clear();
  for (std::size_t n = 0; n < locals_->size(); ++n) {
    nn::forward_batch((*locals_)[n], std::span<const double>(batch.x).subspan(n * slice, slice), batch.size, tl_[n]);
    codes_.insert(codes_.end(), tl_[n].output().begin(), tl_[n].output().end());
  }
  nn::forward_batch(*sink_, codes_, batch.size, ts_);
}

double GlobalModel::accumulate(const nn::Batch& batch, std::span<nn::GradientSet> grads) {
  run(batch);
  d_out_.resize(batch.y.size());
  d_codes_.resize(codes_.size());
  const double loss = nn::mse_loss_gradient_batch(ts_.output(), batch.y, batch.size, d_out_);
  nn::backprop_batch(*sink_, codes_, ts_, d_out_, grads[locals_->size()], d_codes_);
  const std::size_t k = (*locals_)[0].input_dim();
  const std::size_t code = (*locals_)[0].output_dim() * batch.size;
  for (std::size_t n = 0; n < locals_->size(); ++n)
    nn::backprop_batch((*locals_)[n], std::span<const double>(batch.x).subspan(n * k * batch.size, k * batch.size),
                       tl_[n], std::span<const double>(d_codes_).subspan(n * code, code), grads[n]);
  return loss;
}

double GlobalModel::loss(const nn::Batch& batch) const {
  run(batch);
  return nn::mse_loss_batch(ts_.output(), batch.y, batch.size);
}

}  // namespace models

SampleSet sensor_rows(const datagen::FeatureDataset& ds, std::size_t sensor) {
  if (sensor >= ds.sensors()) throw InputShapeError("sensor index out of range");
  SampleSet out(ds.features(), 1);
  out.reserve(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const double y = ds.label(i);
    out.push_back(ds.sensor_row(i, sensor), std::span<const double>(&y, 1));
  }
  return out;
}

LocalTraining train_ae_local(const SampleSet& train, const SampleSet& val, std::size_t m,
                             const nn::TrainConfig& cfg) {
  require_sensor_rows(train, val);
  const auto st = Standardizer::fit(train);
  const auto tr = standardized(train, st, true);
  const auto va = standardized(val, st, true);
  const auto probe = probe_of(tr);
  return best_of_attempts<LocalTraining>(cfg.seed, [&](std::uint64_t seed) {
    LocalTraining out;
    out.encoder.kind = Scheme::AE;
    out.encoder.m = m;
    out.encoder.standardizer = st;
    out.encoder.primary =
        make_net(train.input_dim, ae_encoder_layers(m), derive_seed(seed, {kTagEncoder}), probe);
    out.decoder.net = make_net(m, decoder_layers(train.input_dim), derive_seed(seed, {kTagDecoder}),
                               outputs_on(out.encoder.primary, probe));
    models::AutoencoderModel model(out.encoder.primary, out.decoder.net);
    out.outcome = nn::fit(model, tr, va, with_seed(cfg, seed));
    const auto codes = outputs_on(out.encoder.primary, probe);
    const bool alive = units_alive(out.encoder.primary, probe) && units_alive(out.decoder.net, codes) &&
                       outputs_vary(out.decoder.net, codes);
    const AttemptScore score{alive, out.outcome.best_validation_loss};
    return std::pair{std::move(out), score};
  });
}

LocalEncoder train_ld_local(const SampleSet& train, const SampleSet& val, const nn::TrainConfig& cfg) {
  require_sensor_rows(train, val);
  const auto st = Standardizer::fit(train);
  const auto tr = standardized(train, st, false);
  const auto va = standardized(val, st, false);
  const auto probe = probe_of(tr);
  return best_of_attempts<LocalEncoder>(cfg.seed, [&](std::uint64_t seed) {
    LocalEncoder enc;
    enc.kind = Scheme::LD;
    enc.m = 1;
    enc.standardizer = st;
    auto trained = nn::train(make_net(train.input_dim, ld_layers(), derive_seed(seed, {kTagLd}), probe), tr, va,
                             with_seed(cfg, seed));
    enc.primary = std::move(trained.net);
    const bool alive = units_alive(enc.primary, probe) && responsive(enc.primary, probe);
    const AttemptScore score{alive, trained.outcome.best_validation_loss};
    return std::pair{std::move(enc), score};
  });
}

LocalTraining train_cldae_local(const SampleSet& train, const SampleSet& val, std::size_t m,
                                const nn::TrainConfig& cfg, CldaeMode mode) {
  if (m < 2) throw ConfigError("CLDAE needs M >= 2; M = 1 is the LD scheme");
  return train_cldae_local(train, val, m, cfg, train_ld_local(train, val, cfg), mode);
}

LocalTraining train_cldae_local(const SampleSet& train, const SampleSet& val, std::size_t m,
                                const nn::TrainConfig& cfg, const LocalEncoder& stage1, CldaeMode mode) {
  if (m < 2) throw ConfigError("CLDAE needs M >= 2; M = 1 is the LD scheme");
  require_sensor_rows(train, val);
  if (stage1.kind != Scheme::LD || stage1.primary.output_dim() != 1)
    throw ConfigError("CLDAE stage 1 must be a trained LD encoder");
  const auto tr = standardized(train, stage1.standardizer, true);
  const auto va = standardized(val, stage1.standardizer, true);
  const auto probe = probe_of(tr);
  return best_of_attempts<LocalTraining>(derive_seed(cfg.seed, {kTagStage2}), [&](std::uint64_t seed) {
    LocalTraining out;
    out.encoder.kind = Scheme::CLDAE;
    out.encoder.m = m;
    out.encoder.standardizer = stage1.standardizer;
    out.encoder.primary = stage1.primary;
    out.encoder.secondary = make_net(train.input_dim, cldae_f2_layers(m), derive_seed(seed, {kTagF2}), probe);
    const auto code_probe =
        concat_rows({outputs_on(out.encoder.primary, probe), outputs_on(*out.encoder.secondary, probe)}, {1, m - 1});
    out.decoder.net = make_net(m, decoder_layers(train.input_dim), derive_seed(seed, {kTagDecoder}), code_probe);
    models::CldaeModel model(out.encoder.primary, *out.encoder.secondary, out.decoder.net, mode == CldaeMode::Joint);
    out.outcome = nn::fit(model, tr, va, with_seed(cfg, seed));
    // f1 is only judged when it was allowed to move
    const auto trained_codes =
        concat_rows({outputs_on(out.encoder.primary, probe), outputs_on(*out.encoder.secondary, probe)}, {1, m - 1});
    const bool alive = units_alive(*out.encoder.secondary, probe) && units_alive(out.decoder.net, trained_codes) &&
                       outputs_vary(out.decoder.net, trained_codes) &&
                       (mode == CldaeMode::FrozenDecision ||
                        (units_alive(out.encoder.primary, probe) && responsive(out.encoder.primary, probe)));
    const AttemptScore score{alive, out.outcome.best_validation_loss};
    return std::pair{std::move(out), score};
  });
}

double reconstruction_mse(const LocalEncoder& encoder, const DecoderNet& decoder, const SampleSet& rows) {
  if (rows.empty()) throw EmptyInputError("reconstruction_mse: no rows");
  std::vector<double> x(rows.input_dim);
  double sum = 0.0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    encoder.standardizer.apply(rows.input(i), x);
    const auto rec = decoder.net.forward(encoder.encode(rows.input(i)));
    sum += nn::mse_loss(rec, x);
  }
  return sum / static_cast<double>(rows.size());
}

namespace {

void check_encoders(std::span<const LocalEncoder> encoders, std::size_t sensors, std::size_t features) {
  if (encoders.size() != sensors) throw ConfigError("need one encoder per sensor");
  for (const auto& e : encoders) {
    if (e.m != encoders[0].m) throw ConfigError("all encoders must share the same code width M");
    if (e.standardizer.dim() != features) throw ConfigError("encoder feature width does not match the data");
  }
}

// Encoder evaluation with reused buffers.
class CodeWriter {
 public:
  explicit CodeWriter(std::span<const LocalEncoder> encoders) : encoders_(encoders) {
    traces_.resize(encoders.size());
    extra_.resize(encoders.size());
    for (std::size_t n = 0; n < encoders.size(); ++n) {
      traces_[n].prepare(encoders[n].primary);
      if (encoders[n].secondary) extra_[n].prepare(*encoders[n].secondary);
    }
    x_.resize(encoders.empty() ? 0 : encoders[0].standardizer.dim());
  }

  void write(std::span<const double> row, std::span<double> codes) {
    const std::size_t k = x_.size();
    std::size_t pos = 0;
    for (std::size_t n = 0; n < encoders_.size(); ++n) {
      const auto& e = encoders_[n];
      e.standardizer.apply(row.subspan(n * k, k), x_);
      nn::forward_trace(e.primary, x_, traces_[n]);
      for (double v : traces_[n].output()) codes[pos++] = v;
      if (e.secondary) {
        nn::forward_trace(*e.secondary, x_, extra_[n]);
        for (double v : extra_[n].output()) codes[pos++] = v;
      }
    }
  }

 private:
  std::span<const LocalEncoder> encoders_;
  std::vector<nn::Trace> traces_, extra_;
  std::vector<double> x_;
};

}  // namespace

SampleSet fusion_rows(std::span<const LocalEncoder> encoders, const datagen::FeatureDataset& ds) {
  check_encoders(encoders, ds.sensors(), ds.features());
  const std::size_t width = encoders[0].m * encoders.size();
  SampleSet out(width, 1);
  out.reserve(ds.size());
  CodeWriter writer(encoders);
  std::vector<double> codes(width);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    writer.write(ds.row(i), codes);
    const double y = ds.label(i);
    out.push_back(codes, std::span<const double>(&y, 1));
  }
  return out;
}

nn::TrainConfig sensor_config(const nn::TrainConfig& cfg, std::size_t sensor) {
  auto c = cfg;
  c.seed = derive_seed(cfg.seed, {kTagSensor, sensor});
  return c;
}

nn::TrainConfig fusion_config(const nn::TrainConfig& cfg) {
  auto c = cfg;
  c.seed = derive_seed(cfg.seed, {kTagFusion});
  return c;
}

FusionNetwork train_fusion(std::span<const LocalEncoder> encoders, const datagen::FeatureDataset& train,
                           const datagen::FeatureDataset& val, const nn::TrainConfig& cfg) {
  auto tr = fusion_rows(encoders, train);
  auto va = fusion_rows(encoders, val);
  const auto input = Standardizer::fit(tr);
  for (auto* rows : {&tr, &va})
    for (std::size_t i = 0; i < rows->size(); ++i) {
      std::span<double> x(rows->inputs.data() + i * rows->input_dim, rows->input_dim);
      input.apply(x, x);
    }
  const std::size_t m = encoders[0].m;
  const auto probe = probe_of(tr);
  return best_of_attempts<FusionNetwork>(cfg.seed, [&](std::uint64_t seed) {
    auto trained = nn::train(
        make_net(tr.input_dim, fusion_layers(m, encoders.size()), derive_seed(seed, {kTagFusion}), probe), tr, va,
        with_seed(cfg, seed));
    const bool alive = units_alive(trained.net, probe) && responsive(trained.net, probe);
    const AttemptScore score{alive, trained.outcome.best_validation_loss};
    return std::pair{FusionNetwork{std::move(trained.net), input}, score};
  });
}

std::size_t GlobalConfig::total_neurons() const {
  return sensors * std::accumulate(local_widths.begin(), local_widths.end(), std::size_t{0}) +
         std::accumulate(sink_widths.begin(), sink_widths.end(), std::size_t{0});
}

namespace {

std::vector<std::size_t> parse_widths(std::string_view part, std::string_view notation, bool allow_lead,
                                      bool allow_trail) {
  auto tokens = split(part, '-');
  if (allow_trail && tokens.size() > 1 && trim(tokens.back()).empty()) tokens.pop_back();
  if (allow_lead && tokens.size() > 1 && trim(tokens.front()).empty()) tokens.erase(tokens.begin());
  std::vector<std::size_t> widths;
  for (auto t : tokens) {
    t = trim(t);
    if (t.empty()) throw ParseError("malformed network notation '" + std::string(notation) + "': empty layer");
    long long w = 0;
    try {
      w = parse_integer(t);
    } catch (const FormatError&) {
      throw ParseError("malformed network notation '" + std::string(notation) + "': '" + std::string(t) +
                       "' is not a layer width");
    }
    if (w <= 0) throw ParseError("malformed network notation '" + std::string(notation) + "': widths must be positive");
    widths.push_back(static_cast<std::size_t>(w));
  }
  return widths;
}

}  // namespace

GlobalConfig parse_global_config(std::string_view notation, std::size_t sensors,
                                 std::optional<std::size_t> neuron_budget) {
  if (sensors == 0) throw ConfigError("global config needs N >= 1");
  const auto text = trim(notation);
  const auto bar = text.find("||");
  if (bar == std::string_view::npos || text.find("||", bar + 2) != std::string_view::npos)
    throw ParseError("network notation '" + std::string(notation) + "' must contain exactly one '||'");
  GlobalConfig gc;
  gc.notation = std::string(text);
  gc.sensors = sensors;
  gc.local_widths = parse_widths(text.substr(0, bar), notation, false, true);
  gc.sink_widths = parse_widths(text.substr(bar + 2), notation, true, false);
  if (gc.sink_widths.back() != 1)
    throw ConfigError("network notation '" + gc.notation + "': the sink must end in a single output neuron");
  if (neuron_budget && gc.total_neurons() != *neuron_budget)
    throw ConfigError("network notation '" + gc.notation + "' uses " + std::to_string(gc.total_neurons()) +
                      " neurons at N=" + std::to_string(sensors) + ", expected " + std::to_string(*neuron_budget));
  return gc;
}

void AuthenticatorBundle::validate() const {
  if (encoders.size() != sensors || sensors == 0) throw ConfigError("bundle must hold one encoder per sensor");
  for (const auto& e : encoders) {
    if (e.m != m) throw ConfigError("bundle encoders disagree on M");
    if (e.standardizer.dim() != features || e.primary.input_dim() != features)
      throw ConfigError("bundle encoder feature width mismatch");
    const std::size_t width = e.primary.output_dim() + (e.secondary ? e.secondary->output_dim() : 0);
    if (width != m) throw ConfigError("bundle encoder code width mismatch");
  }
  if (fusion.net.input_dim() != m * sensors) throw ConfigError("fusion input must equal M * N");
  if (fusion.net.output_dim() != 1) throw ConfigError("fusion must produce a scalar score");
  if (fusion.input.scale.size() != fusion.input.dim() ||
      (fusion.input.dim() != 0 && fusion.input.dim() != m * sensors))
    throw ConfigError("fusion standardizer width mismatch");
}

std::size_t AuthenticatorBundle::parameter_count() const {
  std::size_t n = fusion.net.parameter_count();
  for (const auto& e : encoders) n += e.primary.parameter_count() + (e.secondary ? e.secondary->parameter_count() : 0);
  return n;
}

AuthenticatorBundle train_global(const GlobalConfig& gc, const datagen::FeatureDataset& train,
                                 const datagen::FeatureDataset& val, const nn::TrainConfig& cfg) {
  if (train.empty() || val.empty()) throw EmptyInputError("global training needs data");
  if (train.sensors() != gc.sensors || val.sensors() != gc.sensors)
    throw ConfigError("global config sensor count does not match the data");
  const std::size_t k = train.features();
  const std::size_t m = gc.m();

  AuthenticatorBundle b;
  b.scheme = Scheme::Global;
  b.m = m;
  b.sensors = gc.sensors;
  b.features = k;
  b.notation = gc.notation;
  b.seed = cfg.seed;
  b.alpha = train.alpha;

  std::vector<Standardizer> standardizers;
  for (std::size_t n = 0; n < gc.sensors; ++n) standardizers.push_back(Standardizer::fit(sensor_rows(train, n)));

  auto to_rows = [&](const datagen::FeatureDataset& ds) {
    SampleSet s(gc.sensors * k, 1);
    s.reserve(ds.size());
    std::vector<double> x(gc.sensors * k);
    for (std::size_t i = 0; i < ds.size(); ++i) {
      for (std::size_t n = 0; n < gc.sensors; ++n)
        standardizers[n].apply(ds.sensor_row(i, n), std::span<double>(x).subspan(n * k, k));
      const double y = ds.label(i);
      s.push_back(x, std::span<const double>(&y, 1));
    }
    return s;
  };
  const auto tr = to_rows(train);
  const auto va = to_rows(val);

  std::vector<LayerSpec> local_specs;
  for (auto w : gc.local_widths) local_specs.push_back({w, Activation::ReLU});
  std::vector<LayerSpec> sink_specs;
  for (std::size_t q = 0; q < gc.sink_widths.size(); ++q)
    sink_specs.push_back({gc.sink_widths[q], q + 1 == gc.sink_widths.size() ? Activation::Sigmoid : Activation::ReLU});
  const auto probe = probe_of(tr);
  std::vector<std::vector<double>> slices(gc.sensors);
  for (std::size_t r = 0; r * tr.input_dim < probe.size(); ++r)
    for (std::size_t n = 0; n < gc.sensors; ++n) {
      const auto row = probe.subspan(r * tr.input_dim + n * k, k);
      slices[n].insert(slices[n].end(), row.begin(), row.end());
    }

  using Nets = std::pair<std::vector<MlpNetwork>, MlpNetwork>;
  auto [locals, sink] = best_of_attempts<Nets>(cfg.seed, [&](std::uint64_t seed) {
    Nets nets;
    auto& [trial_locals, trial_sink] = nets;
    auto local_outputs = [&] {
      std::vector<std::vector<double>> out;
      for (std::size_t n = 0; n < gc.sensors; ++n) out.push_back(outputs_on(trial_locals[n], slices[n]));
      return concat_rows(out, std::vector<std::size_t>(gc.sensors, m));
    };
    for (std::size_t n = 0; n < gc.sensors; ++n)
      trial_locals.push_back(make_net(k, local_specs, derive_seed(seed, {kTagGlobalLocal, n}), slices[n]));
    trial_sink = make_net(m * gc.sensors, sink_specs, derive_seed(seed, {kTagSink}), local_outputs());
    models::GlobalModel model(trial_locals, trial_sink);
    const auto outcome = nn::fit(model, tr, va, with_seed(cfg, seed));
    const auto codes = local_outputs();
    bool alive = units_alive(trial_sink, codes) && responsive(trial_sink, codes);
    for (std::size_t n = 0; n < gc.sensors; ++n) alive = alive && units_alive(trial_locals[n], slices[n]);
    const AttemptScore score{alive, outcome.best_validation_loss};
    return std::pair{std::move(nets), score};
  });

  for (std::size_t n = 0; n < gc.sensors; ++n) {
    LocalEncoder e;
    e.kind = Scheme::Global;
    e.m = m;
    e.standardizer = standardizers[n];
    e.primary = std::move(locals[n]);
    b.encoders.push_back(std::move(e));
  }
  b.fusion.net = std::move(sink);
  return b;
}

std::vector<LocalEncoder> train_ld_encoders(const datagen::FeatureDataset& train, const datagen::FeatureDataset& val,
                                            const nn::TrainConfig& cfg) {
  std::vector<LocalEncoder> out;
  for (std::size_t n = 0; n < train.sensors(); ++n)
    out.push_back(train_ld_local(sensor_rows(train, n), sensor_rows(val, n), sensor_config(cfg, n)));
  return out;
}

AuthenticatorBundle train_local_scheme(Scheme scheme, std::size_t m, const datagen::FeatureDataset& train,
                                       const datagen::FeatureDataset& val, const nn::TrainConfig& cfg,
                                       const LocalSchemeOptions& options) {
  if (scheme == Scheme::Global) throw ConfigError("use train_global for the global scheme");
  if (train.sensors() != val.sensors() || train.features() != val.features())
    throw InputShapeError("train/validation shapes differ");
  if (scheme == Scheme::LD && m != 1) throw ConfigError("LD reports a single value (M = 1)");
  const bool ld_like = scheme == Scheme::LD || (scheme == Scheme::CLDAE && m == 1);

  AuthenticatorBundle b;
  b.scheme = scheme;
  b.m = m;
  b.sensors = train.sensors();
  b.features = train.features();
  b.seed = cfg.seed;
  b.alpha = train.alpha;

  std::vector<LocalEncoder> ld;
  const std::vector<LocalEncoder>* ld_ptr = options.ld_encoders;
  if ((ld_like || scheme == Scheme::CLDAE) && ld_ptr == nullptr) {
    ld = train_ld_encoders(train, val, cfg);
    ld_ptr = &ld;
  }
  if (ld_ptr != nullptr && ld_ptr->size() != train.sensors()) throw ConfigError("cached LD encoders: wrong count");

  for (std::size_t n = 0; n < train.sensors(); ++n) {
    if (ld_like) {
      b.encoders.push_back((*ld_ptr)[n]);
      continue;
    }
    const auto tr = sensor_rows(train, n);
    const auto va = sensor_rows(val, n);
    const auto scfg = sensor_config(cfg, n);
    if (scheme == Scheme::AE)
      b.encoders.push_back(train_ae_local(tr, va, m, scfg).encoder);
    else
      b.encoders.push_back(train_cldae_local(tr, va, m, scfg, (*ld_ptr)[n], options.cldae_mode).encoder);
  }
  b.fusion = train_fusion(b.encoders, train, val, fusion_config(cfg));
  return b;
}

double FusionNetwork::score(std::span<double> codes) const {
  if (input.dim() > 0) input.apply(codes, codes);
  return net.forward(codes)[0];
}

double encode_and_fuse(const AuthenticatorBundle& bundle, std::span<const double> features) {
  if (features.size() != bundle.sensors * bundle.features)
    throw InputShapeError("feature matrix must be N x K = " + std::to_string(bundle.sensors * bundle.features));
  std::vector<double> codes;
  codes.reserve(bundle.m * bundle.sensors);
  for (std::size_t n = 0; n < bundle.sensors; ++n) {
    const auto y = bundle.encoders[n].encode(features.subspan(n * bundle.features, bundle.features));
    codes.insert(codes.end(), y.begin(), y.end());
  }
  return bundle.fusion.score(codes);
}

eval::ScoreSet score_dataset(const AuthenticatorBundle& bundle, const datagen::FeatureDataset& ds) {
  if (ds.sensors() != bundle.sensors || ds.features() != bundle.features)
    throw InputShapeError("dataset shape does not match the bundle");
  CodeWriter writer(bundle.encoders);
  std::vector<double> codes(bundle.m * bundle.sensors);
  nn::Trace trace;
  trace.prepare(bundle.fusion.net);
  eval::ScoreSet s;
  s.scores.reserve(ds.size());
  s.labels.reserve(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    writer.write(ds.row(i), codes);
    if (bundle.fusion.input.dim() > 0) bundle.fusion.input.apply(codes, codes);
    nn::forward_trace(bundle.fusion.net, codes, trace);
    s.push_back(trace.output()[0], ds.label(i));
  }
  return s;
}

namespace {

void write_vector(std::ostream& os, const char* key, const std::vector<double>& v) {
  os << key;
  for (double x : v) os << ' ' << format_double(x);
  os << '\n';
}

std::string expect_line(std::istream& is) {
  std::string line;
  while (std::getline(is, line))
    if (!trim(line).empty()) return line;
  throw FormatError("unexpected end of bundle");
}

std::vector<std::string> tokens_of(const std::string& line) {
  std::istringstream ls(line);
  std::vector<std::string> out;
  std::string t;
  while (ls >> t) out.push_back(t);
  return out;
}

std::vector<std::string> expect_key(std::istream& is, const char* key, std::size_t min_values = 1) {
  auto toks = tokens_of(expect_line(is));
  if (toks.empty() || toks[0] != key || toks.size() < 1 + min_values)
    throw FormatError(std::string("bundle: expected '") + key + "'");
  toks.erase(toks.begin());
  return toks;
}

std::vector<double> to_doubles(const std::vector<std::string>& toks) {
  std::vector<double> out;
  for (const auto& t : toks) out.push_back(parse_double(t));
  return out;
}

}  // namespace

void write_bundle(std::ostream& os, const AuthenticatorBundle& b) {
  os << "uwauth-bundle 1\n";
  os << "scheme " << to_string(b.scheme) << '\n';
  os << "M " << b.m << '\n';
  os << "N " << b.sensors << '\n';
  os << "K " << b.features << '\n';
  os << "notation " << (b.notation.empty() ? "-" : b.notation) << '\n';
  os << "alpha " << format_double(b.alpha) << '\n';
  os << "seed " << b.seed << '\n';
  os << "lambda " << (b.lambda ? format_double(*b.lambda) : "unset") << '\n';
  for (std::size_t n = 0; n < b.encoders.size(); ++n) {
    const auto& e = b.encoders[n];
    os << "encoder " << n << ' ' << to_string(e.kind) << ' ' << e.m << ' ' << (e.secondary ? 2 : 1) << '\n';
    write_vector(os, "mean", e.standardizer.mean);
    write_vector(os, "scale", e.standardizer.scale);
    nn::write_network(os, e.primary);
    if (e.secondary) nn::write_network(os, *e.secondary);
  }
  os << "fusion\n";
  write_vector(os, "mean", b.fusion.input.mean);
  write_vector(os, "scale", b.fusion.input.scale);
  nn::write_network(os, b.fusion.net);
  os << "end-bundle\n";
}

AuthenticatorBundle read_bundle(std::istream& is) {
  const auto magic = tokens_of(expect_line(is));
  if (magic.size() != 2 || magic[0] != "uwauth-bundle" || magic[1] != "1") throw FormatError("not a uwauth-bundle v1 file");
  AuthenticatorBundle b;
  b.scheme = parse_scheme(expect_key(is, "scheme")[0]);
  b.m = static_cast<std::size_t>(parse_integer(expect_key(is, "M")[0]));
  b.sensors = static_cast<std::size_t>(parse_integer(expect_key(is, "N")[0]));
  b.features = static_cast<std::size_t>(parse_integer(expect_key(is, "K")[0]));
  const auto notation = expect_key(is, "notation")[0];
  b.notation = notation == "-" ? "" : notation;
  b.alpha = parse_double(expect_key(is, "alpha")[0]);
  b.seed = static_cast<std::uint64_t>(std::stoull(expect_key(is, "seed")[0]));
  const auto lambda = expect_key(is, "lambda")[0];
  if (lambda != "unset") b.lambda = parse_double(lambda);
  for (std::size_t n = 0; n < b.sensors; ++n) {
    const auto head = expect_key(is, "encoder", 4);
    if (static_cast<std::size_t>(parse_integer(head[0])) != n) throw FormatError("bundle: encoders out of order");
    LocalEncoder e;
    e.kind = parse_scheme(head[1]);
    e.m = static_cast<std::size_t>(parse_integer(head[2]));
    const auto nets = parse_integer(head[3]);
    e.standardizer.mean = to_doubles(expect_key(is, "mean"));
    e.standardizer.scale = to_doubles(expect_key(is, "scale"));
    e.primary = nn::read_network(is);
    if (nets == 2) e.secondary = nn::read_network(is);
    b.encoders.push_back(std::move(e));
  }
  expect_key(is, "fusion", 0);
  b.fusion.input.mean = to_doubles(expect_key(is, "mean", 0));
  b.fusion.input.scale = to_doubles(expect_key(is, "scale", 0));
  b.fusion.net = nn::read_network(is);
  if (trim(expect_line(is)) != "end-bundle") throw FormatError("bundle: expected end-bundle");
  b.validate();
  return b;
}

}  // namespace uwauth::schemes
