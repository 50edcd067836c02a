#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dgmm/gmm.hpp"
#include "dgmm/image.hpp"
#include "dgmm/mixture_loss.hpp"
#include "dgmm/network.hpp"

namespace dgmm {

enum class DeepVariant {
  DeepG,
  DeepSVG,
};

struct DeepFitOptions {
  DeepVariant variant = DeepVariant::DeepSVG;
  double lr = 1e-3;
  double weight_decay = 0.0;
  double threshold = 1e-3;
  int max_steps = 5000;
  /// Stop once the best loss has not improved by threshold for this many steps.
  int window = 20;
  double lambda = 0.0;
  /// |K|×m reference means for the regularizer.
  std::optional<std::vector<double>> mu_data;
  double var_floor = 1e-6;
  /// deepSVG only: also differentiate NLL_V through the M-step μ and Σ.
  bool through_components = false;

  void validate(int classes, int channels) const;
  MixtureLossOptions loss_options() const;
};

/// One line of the training trace.
struct LossRecord {
  int step = 0;
  double base = 0.0;
  double penalty = 0.0;

  double total() const { return base + penalty; }
};

std::string format_loss_record(const LossRecord& record);

/// Anything that maps images to responsibilities and can be trained from
/// ∂loss/∂w. The network is the production model; a free per-pixel logit
/// table is useful as a reference.
class ResponsibilityModel {
 public:
  virtual ~ResponsibilityModel() = default;
  /// Forward pass for image i, remembered for the next accumulate(i, ...).
  virtual ResponsibilityField evaluate(std::size_t image) = 0;
  virtual void accumulate(std::size_t image, std::span<const double> grad_w) = 0;
  /// Applies and clears the accumulated gradient.
  virtual void step() = 0;
};

class NetworkModel : public ResponsibilityModel {
 public:
  NetworkModel(NetworkConfig config, NetworkState state, std::span<const MultiChannelImage> images,
               AdamWOptions optimizer);

  ResponsibilityField evaluate(std::size_t image) override;
  void accumulate(std::size_t image, std::span<const double> grad_w) override;
  void step() override;

  const NetworkState& state() const { return state_; }
  NetworkState release() { return std::move(state_); }

 private:
  NetworkConfig config_;
  NetworkState state_;
  std::span<const MultiChannelImage> images_;
  AdamWOptions optimizer_;
  std::vector<ForwardPass> passes_;
  Gradients grads_;
};

/// Free logits per pixel and class, softmax-normalized, trained with Adam.
class LogitTableModel : public ResponsibilityModel {
 public:
  LogitTableModel(std::span<const MultiChannelImage> images, int classes, std::uint64_t seed,
                  AdamWOptions optimizer);

  ResponsibilityField evaluate(std::size_t image) override;
  void accumulate(std::size_t image, std::span<const double> grad_w) override;
  void step() override;

 private:
  std::span<const MultiChannelImage> images_;
  int classes_;
  AdamWOptions optimizer_;
  NetworkState table_;
  std::vector<ResponsibilityField> outputs_;
  Gradients grads_;
};

struct DeepRunResult {
  /// Per-image M-step components at the final state.
  std::vector<std::vector<DiagGaussian>> components;
  /// Per-image mean responsibility per class.
  std::vector<std::vector<double>> weights;
  /// Per-image final model output (Π for deepSVG).
  std::vector<ResponsibilityField> responsibilities;
  std::vector<LossRecord> trace;
  int steps = 0;
  bool converged = false;
};

/// Gradient/M-step alternation over one or more images, accumulating the
/// summed loss gradient before every model update.
DeepRunResult run_deep_em(ResponsibilityModel& model, std::span<const MultiChannelImage> images,
                          const DeepFitOptions& options);

struct DeepFitResult {
  std::vector<DiagGaussian> components;
  std::vector<double> weights;
  ResponsibilityField responsibilities;
  SegmentationMask mask;
  std::vector<LossRecord> trace;
  int steps = 0;
  bool converged = false;
  NetworkState network;
  /// The caller's config with channels and classes filled in.
  NetworkConfig config;

  double final_loss() const { return trace.empty() ? 0.0 : trace.back().total(); }
};

DeepFitResult deep_fit_single(const MultiChannelImage& image, int classes, const NetworkConfig& config,
                              std::uint64_t seed, const DeepFitOptions& options);

struct DeepTrainResult {
  NetworkState network;
  NetworkConfig config;
  std::vector<std::vector<DiagGaussian>> components;
  std::vector<SegmentationMask> masks;
  std::vector<LossRecord> trace;
  int steps = 0;
  bool converged = false;
};

DeepTrainResult deep_train_multi(std::span<const MultiChannelImage> images, int classes,
                                 const NetworkConfig& config, std::uint64_t seed,
                                 const DeepFitOptions& options);

struct Prediction {
  ResponsibilityField responsibilities;
  SegmentationMask mask;
};

Prediction predict(const NetworkState& net, const NetworkConfig& config, const MultiChannelImage& image);

struct LabeledImage {
  MultiChannelImage image;
  SegmentationMask ground_truth;
};

/// Class means from ground truth, averaged over n_images images drawn
/// without replacement using the seed (all images when n_images >= size).
std::vector<double> estimate_mu_data(std::span<const LabeledImage> samples, int n_images, std::uint64_t seed);

}  // namespace dgmm
