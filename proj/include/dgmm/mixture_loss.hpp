#pragma once

#include <optional>
#include <span>
#include <vector>

#include "dgmm/gmm.hpp"
#include "dgmm/image.hpp"

namespace dgmm {

/// ∂NLL_V/∂w_xk with Π = w and the components held fixed:
/// −(1/|Ω|) g_k(x) / Σ_k' w_xk' g_k'(x), evaluated in log space.
std::vector<double> nll_v_grad_wrt_w(const MultiChannelImage& image, const ResponsibilityField& w,
                                     const std::vector<DiagGaussian>& components);

/// Squared Frobenius distance between two |K|×m mean matrices.
double mu_regularizer(std::span<const double> mu, std::span<const double> mu_data);

enum class MixtureKind {
  /// Global weights π_k(w) = mean_x w_xk (deepG).
  Global,
  /// Per-pixel proportions Π = w (deepSVG).
  Spatial,
};

struct MixtureLossOptions {
  MixtureKind kind = MixtureKind::Spatial;
  /// Differentiate the NLL through the M-step means and variances as well.
  /// Global mixtures always need this: with frozen components their
  /// gradient is identical for every pixel.
  bool through_components = false;
  double lambda = 0.0;
  /// |K|×m reference means; required when lambda != 0.
  std::optional<std::vector<double>> mu_data;
  double var_floor = 1e-6;
};

struct MixtureLoss {
  double base = 0.0;
  double penalty = 0.0;
  /// M-step output for w; exactly the values used in the loss.
  std::vector<DiagGaussian> components;
  /// Global mixing weights (mean responsibility per class).
  std::vector<double> weights;
  /// ∂(base + penalty)/∂w, |Ω|×|K|.
  std::vector<double> grad_w;

  double total() const { return base + penalty; }
};

/// M-step on w followed by the regularized mixture NLL and its gradient with
/// respect to w. The penalty λ‖μ(w) − μ^data‖² is always differentiated
/// through the M-step mean μ(w).
MixtureLoss evaluate_mixture_loss(const MultiChannelImage& image, const ResponsibilityField& w,
                                  const MixtureLossOptions& options);

}  // namespace dgmm
