#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "dgmm/image.hpp"

namespace dgmm {

/// Dense (batch, channels, height, width) array, row-major.
struct Tensor4 {
  int batch = 1;
  int channels = 1;
  int height = 1;
  int width = 1;
  std::vector<double> values;

  Tensor4() = default;
  Tensor4(int n, int c, int h, int w);

  std::size_t plane() const { return static_cast<std::size_t>(height) * width; }
  double& at(int n, int c, int h, int w) {
    return values[((static_cast<std::size_t>(n) * channels + c) * height + h) * width + w];
  }
  double at(int n, int c, int h, int w) const {
    return values[((static_cast<std::size_t>(n) * channels + c) * height + h) * width + w];
  }
};

/// Encoder-decoder with skip connections. Level l of the encoder has
/// base_width * 2^l channels; the bottleneck has base_width * 2^depth.
struct NetworkConfig {
  int in_channels = 1;
  int out_channels = 2;
  int depth = 3;
  int base_width = 16;
  int kernel_size = 3;

  void validate() const;
  /// Spatial multiple every padded input must satisfy.
  int stride_multiple() const { return 1 << depth; }
  bool operator==(const NetworkConfig&) const = default;
};

struct Parameter {
  std::string name;
  std::vector<int> shape;
  std::vector<double> value;
  /// AdamW first and second moments.
  std::vector<double> m;
  std::vector<double> v;

  std::size_t size() const { return value.size(); }
};

struct NetworkState {
  std::vector<Parameter> params;
  std::int64_t step = 0;
  /// Process-unique tag refreshed on every parameter change; ties cached
  /// activations to the state that produced them.
  std::uint64_t version = 0;

  /// Call after editing parameter values directly.
  void touch();

  std::size_t parameter_count() const;
  Parameter& param(const std::string& name);
  const Parameter& param(const std::string& name) const;
};

using Gradients = std::vector<std::vector<double>>;

/// Weights drawn U(-sqrt(6/fan_in), sqrt(6/fan_in)) from the seed; biases and moments zero.
NetworkState init_network(const NetworkConfig& config, std::uint64_t seed);

Gradients zero_gradients(const NetworkState& net);

namespace detail {
struct ForwardCache;
}

/// Output of forward() plus everything backward() needs.
class ForwardPass {
 public:
  ForwardPass();
  ~ForwardPass();
  ForwardPass(ForwardPass&&) noexcept;
  ForwardPass& operator=(ForwardPass&&) noexcept;

  /// Softmax class probabilities restricted to Ω.
  const ResponsibilityField& output() const { return output_; }

 private:
  friend ForwardPass forward(const NetworkState&, const NetworkConfig&, const MultiChannelImage&);
  friend Gradients backward(const NetworkState&, const NetworkConfig&, const ForwardPass&,
                            const MultiChannelImage&, std::span<const double>);

  ResponsibilityField output_;
  std::unique_ptr<detail::ForwardCache> cache_;
};

ForwardPass forward(const NetworkState& net, const NetworkConfig& config, const MultiChannelImage& image);

/// ∂loss/∂θ given ∂loss/∂(softmax outputs) as an |Ω|×|K| matrix. The pass
/// must come from forward() on the same state version and image.
Gradients backward(const NetworkState& net, const NetworkConfig& config, const ForwardPass& pass,
                   const MultiChannelImage& image, std::span<const double> loss_grad);

struct AdamWOptions {
  double lr = 1e-3;
  double weight_decay = 0.0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Decoupled weight decay Adam step with bias correction.
void adamw_step(NetworkState& net, const Gradients& grads, const AdamWOptions& options);

/// Row-wise softmax of an n×k logit matrix.
std::vector<double> softmax_rows(std::span<const double> logits, int classes);

}  // namespace dgmm
