#pragma once

#include <cstdint>
#include <vector>

#include "dgmm/gmm.hpp"
#include "dgmm/image.hpp"
#include "dgmm/network.hpp"

namespace dgmm {

struct GradientCheckReport {
  double max_rel_error = 0.0;
  int checked = 0;
  bool passed = false;
};

struct GradientCheckOptions {
  double step = 1e-5;
  double tolerance = 1e-4;
  int samples = 100;
  /// Denominator floor for the relative error, so that near-zero
  /// gradients are judged on an absolute scale.
  double abs_floor = 1e-6;
  std::uint64_t seed = 0;
};

/// Relative error |a - n| / max(|a|, |n|, floor).
double relative_error(double analytic, double numeric, double floor);

/// Compares backward(nll_v_grad_wrt_w(...)) with central differences of
/// nll_v(image | Π = forward(θ), components) on a seeded sample of
/// parameter entries (all entries when samples exceeds the count).
GradientCheckReport finite_diff_check(const NetworkState& net, const NetworkConfig& config,
                                      const MultiChannelImage& image,
                                      const std::vector<DiagGaussian>& components,
                                      const GradientCheckOptions& options = {});

}  // namespace dgmm
