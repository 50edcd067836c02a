#include "dgmm/mixture_loss.hpp"

#include <cmath>
#include <string>

#include "dgmm/error.hpp"
#include "mixture_detail.hpp"

namespace dgmm {

std::vector<double> nll_v_grad_wrt_w(const MultiChannelImage& image, const ResponsibilityField& w,
                                     const std::vector<DiagGaussian>& components) {
  detail::check_components(image, components);
  if (!(w.domain() == image.domain()) || w.classes() != static_cast<int>(components.size())) {
    fail(ErrorCode::DimensionMismatch, "responsibilities do not match image and components");
  }
  const int classes = w.classes();
  const std::size_t n = image.pixel_count();
  const auto log_g = detail::log_densities(image, components);
  std::vector<double> grad(n * classes);
  std::vector<double> terms(classes);
  const double scale = -1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (int k = 0; k < classes; ++k) terms[k] = std::log(w(i, k)) + log_g[i * classes + k];
    const double lse = detail::log_sum_exp(terms);
    for (int k = 0; k < classes; ++k) grad[i * classes + k] = scale * std::exp(log_g[i * classes + k] - lse);
  }
  return grad;
}

double mu_regularizer(std::span<const double> mu, std::span<const double> mu_data) {
  if (mu.size() != mu_data.size()) {
    fail(ErrorCode::ShapeError, "mean matrices differ in size: " + std::to_string(mu.size()) + " vs " +
                                    std::to_string(mu_data.size()));
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < mu.size(); ++i) {
    const double d = mu[i] - mu_data[i];
    sum += d * d;
  }
  return sum;
}

MixtureLoss evaluate_mixture_loss(const MultiChannelImage& image, const ResponsibilityField& w,
                                  const MixtureLossOptions& options) {
  if (!(w.domain() == image.domain())) {
    fail(ErrorCode::DomainMismatch, "responsibilities and image live on different domains");
  }
  const int classes = w.classes();
  const int m = image.channels();
  const std::size_t n = image.pixel_count();
  const double inv_n = 1.0 / static_cast<double>(n);
  if (options.lambda != 0.0 &&
      (!options.mu_data || options.mu_data->size() != static_cast<std::size_t>(classes) * m)) {
    fail(ErrorCode::InvalidConfig, "a nonzero lambda needs a |K| x m mu_data matrix");
  }

  auto moments = detail::weighted_moments(image, w.weights(), classes, options.var_floor);
  if (!moments.dead.empty()) {
    fail(ErrorCode::EmptyComponent, "class " + std::to_string(moments.dead.front()) +
                                        " has no responsibility mass");
  }
  MixtureLoss out;
  out.components = std::move(moments.components);
  out.weights.resize(classes);
  for (int k = 0; k < classes; ++k) out.weights[k] = moments.mass[k] * inv_n;

  const auto log_g = detail::log_densities(image, out.components);
  std::vector<double> log_prior;
  if (options.kind == MixtureKind::Spatial) {
    log_prior.resize(n * classes);
    for (std::size_t i = 0; i < n * classes; ++i) log_prior[i] = std::log(w.weights()[i]);
  } else {
    log_prior.resize(classes);
    for (int k = 0; k < classes; ++k) log_prior[k] = std::log(out.weights[k]);
  }
  auto prior = [&](std::size_t i, int k) {
    return options.kind == MixtureKind::Spatial ? log_prior[i * classes + k] : log_prior[k];
  };
  out.base = detail::mixture_nll(log_g, n, classes, prior);

  std::vector<double> pixel_loglik;
  const auto gamma = detail::posterior(log_g, n, classes, prior, &pixel_loglik);

  out.grad_w.assign(n * classes, 0.0);
  if (options.kind == MixtureKind::Spatial) {
    for (std::size_t i = 0; i < n; ++i) {
      for (int k = 0; k < classes; ++k) {
        out.grad_w[i * classes + k] = -inv_n * std::exp(log_g[i * classes + k] - pixel_loglik[i]);
      }
    }
  } else {
    std::vector<double> per_class(classes, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      for (int k = 0; k < classes; ++k) per_class[k] += std::exp(log_g[i * classes + k] - pixel_loglik[i]);
    }
    for (int k = 0; k < classes; ++k) per_class[k] *= -inv_n * inv_n;
    for (std::size_t i = 0; i < n; ++i) {
      for (int k = 0; k < classes; ++k) out.grad_w[i * classes + k] = per_class[k];
    }
  }

  const bool through = options.through_components || options.kind == MixtureKind::Global;
  const bool regularized = options.lambda != 0.0;
  if (regularized) {
    out.penalty = options.lambda * mu_regularizer(MixtureParams{out.weights, out.components}.mean_matrix(),
                                                  *options.mu_data);
  }
  if (!through && !regularized) return out;

  // ∂loss/∂μ_kj and ∂loss/∂v_kj, then chained through the weighted moments.
  std::vector<double> d_mu(static_cast<std::size_t>(classes) * m, 0.0);
  std::vector<double> d_var(static_cast<std::size_t>(classes) * m, 0.0);
  if (through) {
    for (std::size_t i = 0; i < n; ++i) {
      const auto x = image.sample(i);
      for (int k = 0; k < classes; ++k) {
        const double g = gamma[i * classes + k];
        const auto& c = out.components[k];
        for (int j = 0; j < m; ++j) {
          const double d = x[j] - c.mean[j];
          const double v = c.var[j];
          d_mu[k * m + j] -= inv_n * g * d / v;
          d_var[k * m + j] -= inv_n * g * (d * d / (2.0 * v * v) - 0.5 / v);
        }
      }
    }
    for (int k = 0; k < classes; ++k) {
      for (int j = 0; j < m; ++j) {
        if (out.components[k].var[j] == options.var_floor) d_var[k * m + j] = 0.0;
      }
    }
  }
  if (regularized) {
    for (int k = 0; k < classes; ++k) {
      for (int j = 0; j < m; ++j) {
        d_mu[k * m + j] += 2.0 * options.lambda * (out.components[k].mean[j] - (*options.mu_data)[k * m + j]);
      }
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    const auto x = image.sample(i);
    for (int k = 0; k < classes; ++k) {
      const auto& c = out.components[k];
      double acc = 0.0;
      for (int j = 0; j < m; ++j) {
        const double d = x[j] - c.mean[j];
        acc += d_mu[k * m + j] * d + d_var[k * m + j] * (d * d - c.var[j]);
      }
      out.grad_w[i * classes + k] += acc / moments.mass[k];
    }
  }
  return out;
}

}  // namespace dgmm
