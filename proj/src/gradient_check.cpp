#include "dgmm/gradient_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <utility>

#include "dgmm/mixture_loss.hpp"
#include "dgmm/svgmm.hpp"

namespace dgmm {

double relative_error(double analytic, double numeric, double floor) {
  const double scale = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / scale;
}

namespace {

double loss_at(const NetworkState& net, const NetworkConfig& config, const MultiChannelImage& image,
               const std::vector<DiagGaussian>& components) {
  const auto pass = forward(net, config, image);
  return nll_v(image, SpatialMixtureParams{pass.output().weights(), components});
}

}  // namespace

GradientCheckReport finite_diff_check(const NetworkState& net, const NetworkConfig& config,
                                      const MultiChannelImage& image,
                                      const std::vector<DiagGaussian>& components,
                                      const GradientCheckOptions& options) {
  const auto pass = forward(net, config, image);
  const auto grad_w = nll_v_grad_wrt_w(image, pass.output(), components);
  const auto analytic = backward(net, config, pass, image, grad_w);

  std::vector<std::pair<std::size_t, std::size_t>> entries;
  for (std::size_t p = 0; p < net.params.size(); ++p) {
    for (std::size_t j = 0; j < net.params[p].size(); ++j) entries.emplace_back(p, j);
  }
  if (options.samples < static_cast<int>(entries.size())) {
    std::mt19937_64 rng(options.seed);
    std::shuffle(entries.begin(), entries.end(), rng);
    entries.resize(options.samples);
  }

  GradientCheckReport report;
  NetworkState probe = net;
  for (const auto& [p, j] : entries) {
    const double original = probe.params[p].value[j];
    probe.params[p].value[j] = original + options.step;
    probe.touch();
    const double up = loss_at(probe, config, image, components);
    probe.params[p].value[j] = original - options.step;
    probe.touch();
    const double down = loss_at(probe, config, image, components);
    probe.params[p].value[j] = original;
    const double numeric = (up - down) / (2.0 * options.step);
    report.max_rel_error =
        std::max(report.max_rel_error, relative_error(analytic[p][j], numeric, options.abs_floor));
    ++report.checked;
  }
  report.passed = report.max_rel_error < options.tolerance;
  return report;
}

}  // namespace dgmm
