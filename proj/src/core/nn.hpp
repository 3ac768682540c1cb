#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "core/datagen.hpp"
#include "core/tensor.hpp"

namespace dfrlab {

// Small convolutional encoder: per stage, 3x3 conv (stride 1, zero padding
// 1), ReLU, 2x2 max-pool. Global average pooling over the final spatial
// maps yields the feature vector the linear sigmoid head consumes. An empty
// widths list configures a passthrough encoder (the spatial maps are the
// input channels themselves), used for logistic-regression-only setups.
struct EncoderConfig {
  uint32_t image_size = 32;
  uint32_t in_channels = 3;
  std::vector<uint32_t> widths = {16, 32, 64};
};

struct ConvStage {
  Tensor weights;  // [out_ch, in_ch, 3, 3]
  Tensor bias;     // [out_ch]
};

struct Encoder {
  EncoderConfig cfg;
  std::vector<ConvStage> stages;

  uint32_t feature_dim() const {
    return cfg.widths.empty() ? cfg.in_channels : cfg.widths.back();
  }
  uint32_t map_side() const {
    return cfg.image_size >> static_cast<uint32_t>(cfg.widths.size());
  }
  size_t parameter_count() const;
  bool operator==(const Encoder&) const;
};

struct Head {
  std::vector<double> weights;
  double bias = 0.0;
};

struct TrainLogEntry {
  double loss = 0.0;
  double accuracy = 0.0;
};

struct TrainedModel {
  Encoder encoder;
  Head head;
  std::vector<TrainLogEntry> log;
};

struct TrainConfig {
  double learning_rate = 0.05;
  double momentum = 0.9;
  uint32_t epochs = 30;
  uint32_t batch_size = 32;
  double weight_decay = 1e-4;
  uint64_t seed = 0;
};

void validate(const EncoderConfig& cfg);
void validate(const TrainConfig& cfg);

// Glorot-uniform weights (+-sqrt(6/(fan_in+fan_out))), zero biases; the
// draw order is fixed so initialization is a pure function of the seed.
Encoder make_encoder(const EncoderConfig& cfg, uint64_t seed);

struct ForwardResult {
  Tensor spatial_maps;           // [d, h, w], post-ReLU, post-pool
  std::vector<double> features;  // d; features[k] = row-major mean of map k
};

ForwardResult forward(const Encoder& encoder, const Tensor& image);

// sigmoid(w.z + b); lengths must match.
double predict(const Head& head, std::span<const double> features);

// -[y ln p + (1-y) ln(1-p)] with p clamped to [1e-7, 1 - 1e-7].
double bce_loss(double p, int y);

// Per-parameter gradients of the mean BCE over a batch; layout matches the
// encoder stages plus the head.
struct Gradients {
  std::vector<ConvStage> stages;
  std::vector<double> head_weights;
  double head_bias = 0.0;
};

// Mean loss over the batch; when grads is non-null it receives the mean
// gradient. Accuracy_out (optional) gets the batch accuracy at threshold
// 0.5.
double batch_loss(const Encoder& encoder, const Head& head,
                  std::span<const Sample> batch, Gradients* grads,
                  double* accuracy_out = nullptr);

// Minibatch SGD with momentum and L2 weight decay on the weights. Shuffle
// stream, init, and update order are all derived from cfg.seed, so training
// is bit-deterministic. Throws Errc::Diverged (naming epoch and batch) on a
// non-finite batch loss.
TrainedModel train_erm(const GroupedDataset& dataset, const TrainConfig& cfg);

// Max relative error between analytic and central-difference gradients over
// a fixed random subset of at least 100 parameters (all parameters when the
// model has fewer). eps must be > 0.
double grad_check(const TrainedModel& model, std::span<const Sample> batch,
                  double eps);

}  // namespace dfrlab
