#pragma once

#include <cstdint>
#include <vector>

#include "dgmm/gmm.hpp"
#include "dgmm/image.hpp"

namespace dgmm {

/// Spatially variant mixture: one proportion row per ROI pixel.
struct SpatialMixtureParams {
  /// |Ω|×|K| row-major, rows on the simplex.
  std::vector<double> proportions;
  std::vector<DiagGaussian> components;

  int classes() const { return static_cast<int>(components.size()); }
};

double nll_v(const MultiChannelImage& image, const SpatialMixtureParams& params);

ResponsibilityField e_step_v(const MultiChannelImage& image, const SpatialMixtureParams& params);

/// Proportions are copied from w; components use the same weighted moments
/// as m_step.
SpatialMixtureParams m_step_v(const MultiChannelImage& image, const ResponsibilityField& w,
                              double var_floor = 1e-6);

struct EmVResult {
  SpatialMixtureParams params;
  std::vector<double> nll_trace;
  int iterations = 0;
  int rescues = 0;
  bool converged = false;

  ResponsibilityField proportions_field(const PixelDomain& domain) const;
  SegmentationMask mask(const PixelDomain& domain) const;
};

EmVResult em_fit_v(const MultiChannelImage& image, int classes, std::uint64_t seed,
                   const EmOptions& options = {});

}  // namespace dgmm
