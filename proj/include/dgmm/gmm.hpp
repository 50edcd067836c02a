#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "dgmm/image.hpp"

namespace dgmm {

/// Gaussian with diagonal covariance.
struct DiagGaussian {
  std::vector<double> mean;
  std::vector<double> var;

  int dim() const { return static_cast<int>(mean.size()); }
};

/// Global mixing weights plus one DiagGaussian per class.
struct MixtureParams {
  std::vector<double> weights;
  std::vector<DiagGaussian> components;

  int classes() const { return static_cast<int>(components.size()); }
  /// |K|×m row-major matrix of component means.
  std::vector<double> mean_matrix() const;
};

enum class InitMethod {
  /// Distinct ROI pixels drawn with probability proportional to the squared
  /// distance from the means already chosen (k-means++ seeding); each
  /// variance starts at the spread of the pixels nearest to its seed.
  SpreadPixels,
  /// Distinct ROI pixels drawn uniformly.
  UniformPixels,
};

struct EmOptions {
  double threshold = 1e-3;
  int max_iters = 500;
  double var_floor = 1e-6;
  /// Dead-component rescues allowed per run before EmptyComponent is raised.
  int max_rescues = 3;
  InitMethod init = InitMethod::SpreadPixels;
};

double log_density(const DiagGaussian& g, std::span<const double> x);

/// Mean negative log-likelihood of the image under the mixture.
double nll(const MultiChannelImage& image, const MixtureParams& params);

ResponsibilityField e_step(const MultiChannelImage& image, const MixtureParams& params);

/// Closed-form M-step; throws EmptyComponent when a class carries no mass.
MixtureParams m_step(const MultiChannelImage& image, const ResponsibilityField& w,
                     double var_floor = 1e-6);

struct EmResult {
  MixtureParams params;
  /// Posterior from one extra E-step at the final parameters.
  ResponsibilityField responsibilities;
  /// NLL after every iteration.
  std::vector<double> nll_trace;
  int iterations = 0;
  int rescues = 0;
  bool converged = false;
};

EmResult em_fit(const MultiChannelImage& image, int classes, std::uint64_t seed,
                const EmOptions& options = {});

/// Initial components shared by both EM drivers: seeded pixel means, uniform
/// weights, and per-channel variances from the init method (global variance
/// for UniformPixels).
MixtureParams initial_mixture(const MultiChannelImage& image, int classes, std::uint64_t seed,
                              const EmOptions& options);

}  // namespace dgmm
