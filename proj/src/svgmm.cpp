#include "dgmm/svgmm.hpp"

#include <cmath>
#include <string>

#include "dgmm/error.hpp"
#include "mixture_detail.hpp"

namespace dgmm {

namespace {

void check_proportions(const MultiChannelImage& image, const SpatialMixtureParams& params) {
  if (params.proportions.size() != image.pixel_count() * params.components.size()) {
    fail(ErrorCode::DimensionMismatch, "proportions have " + std::to_string(params.proportions.size()) +
                                           " entries, expected |Omega| x |K| = " +
                                           std::to_string(image.pixel_count() * params.components.size()));
  }
}

std::vector<double> log_of(const std::vector<double>& values) {
  std::vector<double> out(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) out[i] = std::log(values[i]);
  return out;
}

}  // namespace

double nll_v(const MultiChannelImage& image, const SpatialMixtureParams& params) {
  detail::check_components(image, params.components);
  check_proportions(image, params);
  const int classes = params.classes();
  const auto log_g = detail::log_densities(image, params.components);
  const auto log_prop = log_of(params.proportions);
  return detail::mixture_nll(log_g, image.pixel_count(), classes,
                             [&](std::size_t i, int k) { return log_prop[i * classes + k]; });
}

ResponsibilityField e_step_v(const MultiChannelImage& image, const SpatialMixtureParams& params) {
  detail::check_components(image, params.components);
  check_proportions(image, params);
  const int classes = params.classes();
  const auto log_g = detail::log_densities(image, params.components);
  const auto log_prop = log_of(params.proportions);
  auto w = detail::posterior(log_g, image.pixel_count(), classes,
                             [&](std::size_t i, int k) { return log_prop[i * classes + k]; });
  return ResponsibilityField(image.domain(), classes, std::move(w));
}

SpatialMixtureParams m_step_v(const MultiChannelImage& image, const ResponsibilityField& w,
                              double var_floor) {
  if (!(w.domain() == image.domain())) {
    fail(ErrorCode::DomainMismatch, "responsibilities and image live on different domains");
  }
  auto moments = detail::weighted_moments(image, w.weights(), w.classes(), var_floor);
  if (!moments.dead.empty()) {
    fail(ErrorCode::EmptyComponent, "class " + std::to_string(moments.dead.front()) +
                                        " has no responsibility mass");
  }
  return {w.weights(), std::move(moments.components)};
}

ResponsibilityField EmVResult::proportions_field(const PixelDomain& domain) const {
  return ResponsibilityField(domain, params.classes(), params.proportions);
}

SegmentationMask EmVResult::mask(const PixelDomain& domain) const {
  return argmax_labeling(proportions_field(domain));
}

EmVResult em_fit_v(const MultiChannelImage& image, int classes, std::uint64_t seed,
                   const EmOptions& options) {
  EmVResult result;
  const auto init = initial_mixture(image, classes, seed, options);
  result.params.components = init.components;
  result.params.proportions = e_step(image, init).weights();

  const std::size_t n = image.pixel_count();
  double previous = nll_v(image, result.params);
  std::vector<double> pixel_loglik;
  for (int it = 0; it < options.max_iters; ++it) {
    const auto log_g = detail::log_densities(image, result.params.components);
    const auto log_prop = log_of(result.params.proportions);
    auto w = detail::posterior(log_g, n, classes,
                               [&](std::size_t i, int k) { return log_prop[i * classes + k]; },
                               &pixel_loglik);
    auto moments = detail::weighted_moments(image, w, classes, options.var_floor);
    const bool rescued = !moments.dead.empty();
    if (rescued) {
      result.rescues += static_cast<int>(moments.dead.size());
      if (result.rescues > options.max_rescues) {
        fail(ErrorCode::EmptyComponent, "class " + std::to_string(moments.dead.front()) +
                                            " emptied after " + std::to_string(options.max_rescues) +
                                            " rescues");
      }
      detail::rescue_components(image, moments.components, moments.dead, pixel_loglik, options.var_floor);
      const double uniform = 1.0 / classes;
      for (double& p : w) p = 0.5 * p + 0.5 * uniform;
    }
    result.params.proportions = std::move(w);
    result.params.components = std::move(moments.components);
    const double current = nll_v(image, result.params);
    result.nll_trace.push_back(current);
    result.iterations = it + 1;
    if (!rescued && previous - current < options.threshold) {
      result.converged = true;
      break;
    }
    previous = current;
  }
  return result;
}

}  // namespace dgmm
