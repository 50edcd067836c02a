#pragma once

// Shared numerics for the GMM and SVGMM drivers. Both objectives route
// through the same templates so their summation order is identical.

#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "dgmm/gmm.hpp"
#include "dgmm/image.hpp"

namespace dgmm::detail {

void check_components(const MultiChannelImage& image, const std::vector<DiagGaussian>& components);

/// |Ω|×|K| matrix of log g(I(x)|μ_k,Σ_k).
std::vector<double> log_densities(const MultiChannelImage& image,
                                  const std::vector<DiagGaussian>& components);

/// log Σ_k exp(terms_k); -inf terms contribute nothing.
inline double log_sum_exp(std::span<const double> terms) {
  double top = -std::numeric_limits<double>::infinity();
  for (double t : terms) top = t > top ? t : top;
  if (top == -std::numeric_limits<double>::infinity()) return top;
  double sum = 0.0;
  for (double t : terms) {
    if (t != -std::numeric_limits<double>::infinity()) sum += std::exp(t - top);
  }
  return top + std::log(sum);
}

/// −(1/|Ω|) Σ_x log Σ_k exp(log_prior(x,k) + log g_k(x)).
template <class LogPrior>
double mixture_nll(const std::vector<double>& log_g, std::size_t pixels, int classes,
                   LogPrior&& log_prior) {
  std::vector<double> terms(classes);
  double total = 0.0;
  for (std::size_t i = 0; i < pixels; ++i) {
    for (int k = 0; k < classes; ++k) {
      terms[k] = log_prior(i, k) + log_g[i * classes + k];
    }
    total += log_sum_exp(terms);
  }
  return -total / static_cast<double>(pixels);
}

/// Bayes posterior rows; optionally returns per-pixel log-likelihoods.
template <class LogPrior>
std::vector<double> posterior(const std::vector<double>& log_g, std::size_t pixels, int classes,
                              LogPrior&& log_prior, std::vector<double>* pixel_loglik = nullptr) {
  std::vector<double> w(pixels * classes);
  std::vector<double> terms(classes);
  if (pixel_loglik != nullptr) pixel_loglik->assign(pixels, 0.0);
  for (std::size_t i = 0; i < pixels; ++i) {
    for (int k = 0; k < classes; ++k) {
      terms[k] = log_prior(i, k) + log_g[i * classes + k];
    }
    const double lse = log_sum_exp(terms);
    for (int k = 0; k < classes; ++k) {
      w[i * classes + k] = std::exp(terms[k] - lse);
    }
    if (pixel_loglik != nullptr) (*pixel_loglik)[i] = lse;
  }
  return w;
}

struct WeightedMoments {
  /// Σ_x w_xk per class.
  std::vector<double> mass;
  std::vector<DiagGaussian> components;
  /// Classes whose mass fell below the empty-component threshold.
  std::vector<int> dead;
};

inline constexpr double kEmptyMass = 1e-12;

WeightedMoments weighted_moments(const MultiChannelImage& image, std::span<const double> weights,
                                 int classes, double var_floor);

/// Per-channel population variance over Ω, floored.
std::vector<double> global_variance(const MultiChannelImage& image, double var_floor);

/// Resets each dead component to the worst-explained pixels (distinct) with
/// global variance.
void rescue_components(const MultiChannelImage& image, std::vector<DiagGaussian>& components,
                       const std::vector<int>& dead, const std::vector<double>& pixel_loglik,
                       double var_floor);

}  // namespace dgmm::detail
