#pragma once

// Cycle predictor: input projection, stacked (optionally bidirectional) LSTM,
// a two-way regime classifier and short/long regression heads over the
// centered target segment of each window.

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "latpred/features.hpp"

namespace latpred {

struct ModelConfig {
  std::size_t input_dim = kNumFeatures;
  std::size_t proj_dim = 256;
  std::size_t hidden = 256;
  std::size_t layers = 2;
  bool bidirectional = false;
  std::size_t cls_hidden = 64;
  std::uint32_t tau = 10;
  double lambda_cls = 1.0;
  double dropout_p = 0.1;

  [[nodiscard]] std::size_t directions() const { return bidirectional ? 2 : 1; }
  [[nodiscard]] std::size_t state_dim() const { return hidden * directions(); }
  [[nodiscard]] std::string invariant_violation() const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

template <typename T>
struct Tensor {
  std::string name;
  std::vector<std::size_t> shape;
  std::vector<T> data;

  [[nodiscard]] std::size_t numel() const { return data.size(); }
};

/// Named parameter tensors in a fixed order: input_proj, rnn layers (with
/// _reverse twins when bidirectional), cls_fc1, cls_fc2, output_layer_short,
/// output_layer_long.
template <typename T>
class ModelParameters {
 public:
  struct RnnIndex {
    std::size_t w_ih, w_hh, b_ih, b_hh;
  };

  ModelParameters() = default;
  explicit ModelParameters(const ModelConfig& config);

  [[nodiscard]] const ModelConfig& config() const { return config_; }
  [[nodiscard]] std::vector<Tensor<T>>& tensors() { return tensors_; }
  [[nodiscard]] const std::vector<Tensor<T>>& tensors() const { return tensors_; }
  [[nodiscard]] std::size_t param_count() const;

  Tensor<T>* find(std::string_view name);
  const Tensor<T>* find(std::string_view name) const;

  [[nodiscard]] const RnnIndex& rnn(std::size_t layer, std::size_t dir) const {
    return rnn_[layer * config_.directions() + dir];
  }

  void set_zero();

  template <typename U>
  ModelParameters<U> cast() const {
    ModelParameters<U> out(config_);
    for (std::size_t i = 0; i < tensors_.size(); ++i) {
      for (std::size_t k = 0; k < tensors_[i].data.size(); ++k) {
        out.tensors()[i].data[k] = static_cast<U>(tensors_[i].data[k]);
      }
    }
    out.norm = norm;
    out.window = window;
    return out;
  }

  // Stored alongside the weights so a checkpoint is self-describing.
  NormStats norm;
  WindowConfig window;

  // Fixed tensor positions.
  std::size_t proj_w = 0, proj_b = 1;
  std::size_t fc1_w = 0, fc1_b = 0, fc2_w = 0, fc2_b = 0;
  std::size_t short_w = 0, short_b = 0, long_w = 0, long_b = 0;

 private:
  ModelConfig config_;
  std::vector<Tensor<T>> tensors_;
  std::vector<RnnIndex> rnn_;
};

/// Uniform(-k, k) with k = 1/sqrt(fan_in); zero biases except LSTM forget-gate
/// entries of bias_ih, which start at 1.
template <typename T>
ModelParameters<T> init_params(const ModelConfig& config, std::uint64_t seed);

/// Raw per-position network outputs; rows are window-major (b * R + r).
template <typename T>
struct HeadOutputs {
  std::size_t batch = 0;
  std::size_t r = 0;
  std::vector<T> z_short;
  std::vector<T> z_long;
  std::vector<T> logits;  // [B * R, 2]
};

/// Activations kept for the backward pass. Reusable across calls.
template <typename T>
struct ForwardCache {
  std::size_t batch = 0, steps = 0, n = 0, r = 0, s = 0;
  std::vector<T> x;     // [steps * B, in]  time-major
  std::vector<T> proj;  // [steps * B, P]
  struct Dir {
    std::vector<T> gates;   // activated gates [steps * B, 4H]
    std::vector<T> c;       // [steps * B, H]
    std::vector<T> tanh_c;  // [steps * B, H]
  };
  struct Layer {
    std::vector<Dir> dirs;
    std::vector<T> out;      // [steps * B, D]
    std::vector<T> dropped;  // out * mask (empty when dropout is off)
    std::vector<T> mask;
  };
  std::vector<Layer> layers;
  std::vector<T> z1;  // classifier pre-activation [B*R, cls_hidden] (time-major)
  std::vector<T> a1;
  HeadOutputs<T> heads;
  // Scratch for the transposed weights and the backward pass.
  std::vector<T> wt;
  std::vector<T> dgates, dh, dh_total, dc, d_out, d_in;
};

struct ForwardOptions {
  bool training = false;           // enables dropout
  std::uint64_t dropout_seed = 0;
};

/// x holds B windows of N normalized feature rows ([B, N, 13]). Unidirectional
/// models only read the first s + R positions.
template <typename T>
const HeadOutputs<T>& forward(const ModelParameters<T>& params, std::span<const T> x,
                              std::size_t batch, std::size_t n, std::size_t r,
                              ForwardCache<T>& cache, const ForwardOptions& opts = {});

struct PredictionBatch {
  std::size_t batch = 0;
  std::size_t r = 0;
  std::vector<float> z_hat;
  std::vector<float> logits;
  std::vector<std::uint8_t> c_hat;
  std::vector<std::uint32_t> y_hat;
};

/// Inference: the regression head per position is picked by the predicted class
/// (argmax, ties to class 0).
template <typename T>
PredictionBatch predict(const ModelParameters<T>& params, std::span<const T> x,
                        std::size_t batch, std::size_t n, std::size_t r, ForwardCache<T>& cache,
                        const TargetConfig& tcfg = {});

enum class HeadMask { Teacher, Predicted };

struct LossParts {
  double total = 0.0;
  double reg = 0.0;
  double cls = 0.0;
};

/// Mean SmoothL1 (transition 1.0) on log-space targets plus lambda times mean
/// cross-entropy of the regime classifier. Targets are window-major [B, R].
template <typename T>
LossParts loss(const HeadOutputs<T>& out, std::span<const float> targets_z,
               std::span<const std::uint8_t> targets_c, HeadMask mask, double lambda);

/// Reverse-mode gradients of the teacher-masked joint loss for the batch last
/// run through `forward` with this cache. `grads` is overwritten.
template <typename T>
LossParts backward(const ModelParameters<T>& params, ForwardCache<T>& cache,
                   std::span<const float> targets_z, std::span<const std::uint8_t> targets_c,
                   double lambda, ModelParameters<T>& grads);

}  // namespace latpred
