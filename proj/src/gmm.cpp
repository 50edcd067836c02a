#include "dgmm/gmm.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include "dgmm/error.hpp"
#include "mixture_detail.hpp"

namespace dgmm {

namespace detail {

void check_components(const MultiChannelImage& image, const std::vector<DiagGaussian>& components) {
  if (components.empty()) {
    fail(ErrorCode::DimensionMismatch, "mixture has no components");
  }
  for (std::size_t k = 0; k < components.size(); ++k) {
    const auto& g = components[k];
    if (g.dim() != image.channels() || g.var.size() != g.mean.size()) {
      fail(ErrorCode::DimensionMismatch, "component " + std::to_string(k) + " has dimension " +
                                             std::to_string(g.dim()) + ", image has " +
                                             std::to_string(image.channels()) + " channels");
    }
  }
}

std::vector<double> log_densities(const MultiChannelImage& image,
                                  const std::vector<DiagGaussian>& components) {
  const int classes = static_cast<int>(components.size());
  const int m = image.channels();
  std::vector<double> offset(classes);
  std::vector<double> inv_var(static_cast<std::size_t>(classes) * m);
  for (int k = 0; k < classes; ++k) {
    double log_det = 0.0;
    for (int j = 0; j < m; ++j) {
      log_det += std::log(components[k].var[j]);
      inv_var[k * m + j] = 1.0 / components[k].var[j];
    }
    offset[k] = -0.5 * m * std::log(2.0 * std::numbers::pi) - 0.5 * log_det;
  }
  const std::size_t n = image.pixel_count();
  std::vector<double> out(n * classes);
  for (std::size_t i = 0; i < n; ++i) {
    const auto x = image.sample(i);
    for (int k = 0; k < classes; ++k) {
      const auto& mu = components[k].mean;
      double q = 0.0;
      for (int j = 0; j < m; ++j) {
        const double d = x[j] - mu[j];
        q += d * d * inv_var[k * m + j];
      }
      out[i * classes + k] = offset[k] - 0.5 * q;
    }
  }
  return out;
}

WeightedMoments weighted_moments(const MultiChannelImage& image, std::span<const double> weights,
                                 int classes, double var_floor) {
  const std::size_t n = image.pixel_count();
  const int m = image.channels();
  WeightedMoments out;
  out.mass.assign(classes, 0.0);
  std::vector<double> sums(static_cast<std::size_t>(classes) * m, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto x = image.sample(i);
    for (int k = 0; k < classes; ++k) {
      const double w = weights[i * classes + k];
      out.mass[k] += w;
      for (int j = 0; j < m; ++j) sums[k * m + j] += w * x[j];
    }
  }
  out.components.resize(classes);
  for (int k = 0; k < classes; ++k) {
    auto& g = out.components[k];
    g.mean.assign(m, 0.0);
    g.var.assign(m, var_floor);
    if (out.mass[k] < kEmptyMass) {
      out.dead.push_back(k);
      continue;
    }
    for (int j = 0; j < m; ++j) g.mean[j] = sums[k * m + j] / out.mass[k];
  }
  std::vector<double> sq(static_cast<std::size_t>(classes) * m, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto x = image.sample(i);
    for (int k = 0; k < classes; ++k) {
      const double w = weights[i * classes + k];
      const auto& mu = out.components[k].mean;
      for (int j = 0; j < m; ++j) {
        const double d = x[j] - mu[j];
        sq[k * m + j] += w * d * d;
      }
    }
  }
  for (int k = 0; k < classes; ++k) {
    if (out.mass[k] < kEmptyMass) continue;
    for (int j = 0; j < m; ++j) {
      out.components[k].var[j] = std::max(sq[k * m + j] / out.mass[k], var_floor);
    }
  }
  return out;
}

std::vector<double> global_variance(const MultiChannelImage& image, double var_floor) {
  const std::size_t n = image.pixel_count();
  const int m = image.channels();
  std::vector<double> mean(m, 0.0);
  std::vector<double> var(m, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (int j = 0; j < m; ++j) mean[j] += image.sample(i)[j];
  }
  for (int j = 0; j < m; ++j) mean[j] /= static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (int j = 0; j < m; ++j) {
      const double d = image.sample(i)[j] - mean[j];
      var[j] += d * d;
    }
  }
  for (int j = 0; j < m; ++j) var[j] = std::max(var[j] / static_cast<double>(n), var_floor);
  return var;
}

void rescue_components(const MultiChannelImage& image, std::vector<DiagGaussian>& components,
                       const std::vector<int>& dead, const std::vector<double>& pixel_loglik,
                       double var_floor) {
  std::vector<std::size_t> order(pixel_loglik.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  const std::size_t count = std::min(dead.size(), order.size());
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(count), order.end(),
                    [&](std::size_t a, std::size_t b) {
                      return pixel_loglik[a] < pixel_loglik[b] || (pixel_loglik[a] == pixel_loglik[b] && a < b);
                    });
  const auto var = global_variance(image, var_floor);
  for (std::size_t r = 0; r < count; ++r) {
    auto& g = components[dead[r]];
    const auto x = image.sample(order[r]);
    g.mean.assign(x.begin(), x.end());
    g.var = var;
  }
}

}  // namespace detail

std::vector<double> MixtureParams::mean_matrix() const {
  std::vector<double> out;
  for (const auto& g : components) out.insert(out.end(), g.mean.begin(), g.mean.end());
  return out;
}

double log_density(const DiagGaussian& g, std::span<const double> x) {
  if (x.size() != g.mean.size() || g.var.size() != g.mean.size()) {
    fail(ErrorCode::DimensionMismatch, "observation has dimension " + std::to_string(x.size()) +
                                           ", gaussian has " + std::to_string(g.mean.size()));
  }
  const double m = static_cast<double>(x.size());
  double log_det = 0.0;
  double q = 0.0;
  for (std::size_t j = 0; j < x.size(); ++j) {
    if (!(g.var[j] > 0.0)) fail(ErrorCode::ZeroVariance, "variance must be positive");
    const double d = x[j] - g.mean[j];
    log_det += std::log(g.var[j]);
    q += d * d / g.var[j];
  }
  return -0.5 * m * std::log(2.0 * std::numbers::pi) - 0.5 * log_det - 0.5 * q;
}

namespace {

void check_weights(const MixtureParams& params) {
  if (params.weights.size() != params.components.size()) {
    fail(ErrorCode::DimensionMismatch, "mixture has " + std::to_string(params.weights.size()) +
                                           " weights for " + std::to_string(params.components.size()) +
                                           " components");
  }
}

MixtureParams to_params(detail::WeightedMoments&& moments, std::size_t pixels) {
  MixtureParams p;
  p.components = std::move(moments.components);
  p.weights.resize(moments.mass.size());
  for (std::size_t k = 0; k < moments.mass.size(); ++k) {
    p.weights[k] = moments.mass[k] / static_cast<double>(pixels);
  }
  return p;
}

void blend_toward_uniform(std::vector<double>& weights) {
  const double uniform = 1.0 / static_cast<double>(weights.size());
  double total = 0.0;
  for (double& w : weights) {
    w = 0.5 * w + 0.5 * uniform;
    total += w;
  }
  for (double& w : weights) w /= total;
}

}  // namespace

double nll(const MultiChannelImage& image, const MixtureParams& params) {
  detail::check_components(image, params.components);
  check_weights(params);
  const auto log_g = detail::log_densities(image, params.components);
  std::vector<double> log_pi(params.weights.size());
  for (std::size_t k = 0; k < log_pi.size(); ++k) log_pi[k] = std::log(params.weights[k]);
  return detail::mixture_nll(log_g, image.pixel_count(), params.classes(),
                             [&](std::size_t, int k) { return log_pi[k]; });
}

ResponsibilityField e_step(const MultiChannelImage& image, const MixtureParams& params) {
  detail::check_components(image, params.components);
  check_weights(params);
  const auto log_g = detail::log_densities(image, params.components);
  std::vector<double> log_pi(params.weights.size());
  for (std::size_t k = 0; k < log_pi.size(); ++k) log_pi[k] = std::log(params.weights[k]);
  auto w = detail::posterior(log_g, image.pixel_count(), params.classes(),
                             [&](std::size_t, int k) { return log_pi[k]; });
  return ResponsibilityField(image.domain(), params.classes(), std::move(w));
}

MixtureParams m_step(const MultiChannelImage& image, const ResponsibilityField& w, double var_floor) {
  if (!(w.domain() == image.domain())) {
    fail(ErrorCode::DomainMismatch, "responsibilities and image live on different domains");
  }
  auto moments = detail::weighted_moments(image, w.weights(), w.classes(), var_floor);
  if (!moments.dead.empty()) {
    fail(ErrorCode::EmptyComponent, "class " + std::to_string(moments.dead.front()) +
                                        " has no responsibility mass");
  }
  return to_params(std::move(moments), image.pixel_count());
}

MixtureParams initial_mixture(const MultiChannelImage& image, int classes, std::uint64_t seed,
                              const EmOptions& options) {
  const std::size_t n = image.pixel_count();
  if (classes < 1) {
    fail(ErrorCode::InvalidArgument, "need at least one class");
  }
  if (n < static_cast<std::size_t>(classes)) {
    fail(ErrorCode::TooFewPixels, std::to_string(n) + " roi pixels for " + std::to_string(classes) +
                                      " classes");
  }
  const int m = image.channels();
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> chosen;
  std::vector<double> dist2(n, std::numeric_limits<double>::infinity());
  auto taken = [&](std::size_t i) { return std::find(chosen.begin(), chosen.end(), i) != chosen.end(); };
  auto draw_uniform = [&]() {
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    std::size_t i = pick(rng);
    while (taken(i)) i = pick(rng);
    return i;
  };
  while (chosen.size() < static_cast<std::size_t>(classes)) {
    std::size_t next = 0;
    if (chosen.empty() || options.init == InitMethod::UniformPixels) {
      next = draw_uniform();
    } else {
      double total = 0.0;
      for (std::size_t i = 0; i < n; ++i) total += taken(i) ? 0.0 : dist2[i];
      if (!(total > 0.0) || !std::isfinite(total)) {
        next = draw_uniform();
      } else {
        // Greedy variant: several D^2 draws, keep the one leaving the
        // smallest total squared distance.
        const int trials = 2 + static_cast<int>(std::log(static_cast<double>(classes)));
        std::uniform_real_distribution<double> u(0.0, total);
        double best_potential = std::numeric_limits<double>::infinity();
        for (int t = 0; t < trials; ++t) {
          double target = u(rng);
          std::size_t candidate = n;
          for (std::size_t i = 0; i < n; ++i) {
            if (taken(i) || dist2[i] <= 0.0) continue;
            target -= dist2[i];
            candidate = i;
            if (target < 0.0) break;
          }
          const auto c = image.sample(candidate);
          double potential = 0.0;
          for (std::size_t i = 0; i < n; ++i) {
            const auto x = image.sample(i);
            double d = 0.0;
            for (int j = 0; j < m; ++j) d += (x[j] - c[j]) * (x[j] - c[j]);
            potential += std::min(dist2[i], d);
          }
          if (potential < best_potential) {
            best_potential = potential;
            next = candidate;
          }
        }
      }
    }
    chosen.push_back(next);
    const auto c = image.sample(next);
    for (std::size_t i = 0; i < n; ++i) {
      const auto x = image.sample(i);
      double d = 0.0;
      for (int j = 0; j < m; ++j) d += (x[j] - c[j]) * (x[j] - c[j]);
      dist2[i] = std::min(dist2[i], d);
    }
  }
  MixtureParams p;
  const auto var = detail::global_variance(image, options.var_floor);
  p.weights.assign(classes, 1.0 / classes);
  for (std::size_t i : chosen) {
    const auto x = image.sample(i);
    p.components.push_back({std::vector<double>(x.begin(), x.end()), var});
  }
  if (options.init == InitMethod::SpreadPixels) {
    // A component started at the global variance overlaps every class, and
    // EM can sit on that plateau for dozens of iterations with gains below
    // the threshold. Start each one at the spread of its nearest-seed cell.
    std::vector<double> count(classes, 0.0), sum(classes * m, 0.0), sum2(classes * m, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const auto x = image.sample(i);
      int best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (int k = 0; k < classes; ++k) {
        double d = 0.0;
        for (int j = 0; j < m; ++j) d += (x[j] - p.components[k].mean[j]) * (x[j] - p.components[k].mean[j]);
        if (d < best_d) {
          best_d = d;
          best = k;
        }
      }
      count[best] += 1.0;
      for (int j = 0; j < m; ++j) {
        sum[best * m + j] += x[j];
        sum2[best * m + j] += x[j] * x[j];
      }
    }
    for (int k = 0; k < classes; ++k) {
      if (count[k] < 2.0) continue;
      for (int j = 0; j < m; ++j) {
        const double mean = sum[k * m + j] / count[k];
        p.components[k].var[j] = std::max(sum2[k * m + j] / count[k] - mean * mean, options.var_floor);
      }
    }
  }
  return p;
}

EmResult em_fit(const MultiChannelImage& image, int classes, std::uint64_t seed,
                const EmOptions& options) {
  EmResult result;
  result.params = initial_mixture(image, classes, seed, options);
  const std::size_t n = image.pixel_count();
  double previous = nll(image, result.params);
  std::vector<double> pixel_loglik;
  for (int it = 0; it < options.max_iters; ++it) {
    const auto log_g = detail::log_densities(image, result.params.components);
    std::vector<double> log_pi(classes);
    for (int k = 0; k < classes; ++k) log_pi[k] = std::log(result.params.weights[k]);
    const auto w = detail::posterior(log_g, n, classes, [&](std::size_t, int k) { return log_pi[k]; },
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
    }
    result.params = to_params(std::move(moments), n);
    if (rescued) blend_toward_uniform(result.params.weights);
    const double current = nll(image, result.params);
    result.nll_trace.push_back(current);
    result.iterations = it + 1;
    if (!rescued && previous - current < options.threshold) {
      result.converged = true;
      break;
    }
    previous = current;
  }
  result.responsibilities = e_step(image, result.params);
  return result;
}

}  // namespace dgmm
