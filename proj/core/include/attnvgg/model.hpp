#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "attnvgg/attention.hpp"
#include "attnvgg/layers.hpp"
#include "attnvgg/rng.hpp"
#include "attnvgg/tensor.hpp"

namespace attnvgg {

struct ConvBlock {
  std::size_t convs = 0;     // 3x3 conv + ReLU layers
  std::size_t channels = 0;  // output channels of each conv
};

/// How the replaced head's dense weights are drawn.
enum class HeadInit {
  kZeroMean,  // N(0, 0.01^2)
  kLiteral,   // N(1, 0.1^2)
};

/// Backbone plan plus head and gate wiring. Layers are numbered sequentially:
/// the input is 0, and every conv and every pool takes the next index.
struct ArchitectureSpec {
  std::string name;
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 0;
  std::vector<ConvBlock> conv_plan;
  bool attention_enabled = true;
  std::size_t tap_x = 0;  // gate input features
  std::size_t tap_g = 0;  // gating signal; must be the last layer
  std::size_t hidden_units = 10;
  std::size_t output_units = 1;
  double dropout_rate = 0.5;
  HeadInit head_init = HeadInit::kZeroMean;

  /// Blocks (2,64) (2,128) (3,256) (3,512) (3,512) on 128x128x3, taps 13/18.
  static ArchitectureSpec vgg16(bool attention = true);
  /// Blocks (1,8) (1,16) on 32x32x1, taps 3/4.
  static ArchitectureSpec vgg_tiny(bool attention = true);
  /// Looks up "vgg16" or "vgg_tiny"; throws ConfigError otherwise.
  static ArchitectureSpec by_name(std::string_view name, bool attention = true);

  /// Throws ConfigError naming the violated invariant.
  void validate() const;
};

enum class LayerKind { kInput, kConv, kPool };

struct LayerInfo {
  std::size_t index = 0;
  LayerKind kind = LayerKind::kInput;
  std::size_t block = 0;     // 1-based, 0 for the input
  std::size_t position = 0;  // 1-based conv position inside the block
  Shape output_shape;
};

/// Static shape walk of the backbone; entry i describes layer index i.
std::vector<LayerInfo> enumerate_layers(const ArchitectureSpec& spec);

/// F_int used by the gate: half the input-feature channels, at least 1.
std::size_t gate_intermediate_channels(const ArchitectureSpec& spec);

/// Width of the vector fed to the head: F_x + F_g with attention, F_g without.
std::size_t head_input_width(const ArchitectureSpec& spec);

struct ForwardOptions {
  bool training = false;
  Rng* rng = nullptr;
  /// Fixed dropout mask for training-mode passes (gradient checks).
  const Tensor* dropout_mask = nullptr;
};

/// Everything the backward pass reads, valid for exactly one backward call.
struct ModelCache {
  bool valid = false;
  bool training = false;
  std::vector<Tensor> activations;  // activation at each layer index
  std::vector<Tensor> pre_relu;     // per layer index, conv layers only
  std::vector<nn::MaxPoolCache> pools;
  GateCache gate;
  Tensor feature;
  Tensor hidden_pre;
  Tensor hidden;
  Tensor dropout_mask;
  Tensor dropped;
  double prediction = 0.0;
};

struct ForwardResult {
  double prediction = 0.0;
  ModelCache cache;
};

class Model {
 public:
  /// Allocates and initializes every parameter: backbone convs He-normal
  /// (sigma = sqrt(2 / fan_in)), gate as AttentionGateParams::create, head per
  /// spec.head_init; all biases zero. Initial values are rounded to float32 so
  /// a fresh model survives the weight-file encoding unchanged.
  static Model build(const ArchitectureSpec& spec, std::uint64_t seed);

  const ArchitectureSpec& spec() const noexcept { return spec_; }
  std::uint64_t seed() const noexcept { return seed_; }

  /// Stable order: backbone, gate (if enabled), head.
  std::vector<Parameter*> parameters();
  std::vector<const Parameter*> parameters() const;
  Parameter* find_parameter(std::string_view name);
  const Parameter* find_parameter(std::string_view name) const;

  ForwardResult forward(const Tensor& image, const ForwardOptions& options = {}) const;
  /// Evaluation-mode score.
  double predict(const Tensor& image) const;

  /// Accumulates d loss / d parameter into every grad. Needs a training-mode
  /// cache; consumes it.
  void backward(ModelCache& cache, double dloss_dprediction);

  void zero_grad();

 private:
  struct ConvLayer {
    std::size_t index = 0;
    Parameter weight;
    Parameter bias;
  };

  Model() = default;

  ArchitectureSpec spec_;
  std::uint64_t seed_ = 0;
  std::vector<LayerInfo> layers_;
  std::vector<ConvLayer> convs_;
  std::vector<std::size_t> conv_of_layer_;  // layer index -> convs_ slot
  std::optional<AttentionGateParams> gate_;
  Parameter fc1_weight_, fc1_bias_, fc2_weight_, fc2_bias_;
};

/// Parameters whose name marks them as backbone (transferable) weights.
bool is_backbone_parameter(std::string_view name);

/// Writes every parameter in AGW1 format.
void save_weights(const Model& model, const std::filesystem::path& path);

struct LoadReport {
  std::vector<std::string> loaded;
  std::vector<std::string> kept_fresh;  // gate/head tensors absent from the file
};

/// Reads an AGW1 file into `model`. Every backbone parameter must be present
/// with a matching shape; absent gate and head tensors keep their current
/// values. Throws FormatError (bad magic, truncation, shape mismatch, missing
/// or unknown tensor) or IoError.
LoadReport load_weights(Model& model, const std::filesystem::path& path);

}  // namespace attnvgg
