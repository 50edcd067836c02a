#pragma once

// Random instance generators and brute-force reference computations shared
// by the unit tests. The references deliberately avoid the library's
// log-space code paths.

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "dgmm/gmm.hpp"
#include "dgmm/image.hpp"

namespace testing {

using Rng = std::mt19937_64;

inline dgmm::PixelDomain random_domain(Rng& rng, int height, int width, double keep = 0.7) {
  std::bernoulli_distribution in(keep);
  std::vector<std::uint8_t> roi(static_cast<std::size_t>(height) * width);
  for (auto& r : roi) r = in(rng) ? 1 : 0;
  roi[std::uniform_int_distribution<std::size_t>(0, roi.size() - 1)(rng)] = 1;
  return dgmm::PixelDomain(height, width, roi);
}

inline dgmm::MultiChannelImage random_image(Rng& rng, const dgmm::PixelDomain& domain, int channels,
                                            double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  std::vector<double> values(domain.grid_size() * channels);
  for (auto& v : values) v = n(rng);
  return dgmm::MultiChannelImage(domain, channels, values);
}

inline std::vector<double> random_simplex_rows(Rng& rng, std::size_t rows, int classes, double floor = 0.0) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> w(rows * classes);
  for (std::size_t i = 0; i < rows; ++i) {
    double sum = 0.0;
    for (int k = 0; k < classes; ++k) sum += w[i * classes + k] = floor + u(rng);
    for (int k = 0; k < classes; ++k) w[i * classes + k] /= sum;
  }
  return w;
}

inline dgmm::ResponsibilityField random_field(Rng& rng, const dgmm::PixelDomain& domain, int classes,
                                              double floor = 0.05) {
  return dgmm::ResponsibilityField(domain, classes, random_simplex_rows(rng, domain.size(), classes, floor));
}

inline std::vector<dgmm::DiagGaussian> random_components(Rng& rng, int classes, int channels) {
  std::normal_distribution<double> n(0.0, 1.0);
  std::uniform_real_distribution<double> v(0.3, 2.0);
  std::vector<dgmm::DiagGaussian> out(classes);
  for (auto& c : out) {
    for (int j = 0; j < channels; ++j) {
      c.mean.push_back(n(rng));
      c.var.push_back(v(rng));
    }
  }
  return out;
}

// Gaussian density evaluated directly, in extended precision.
inline long double density(const dgmm::DiagGaussian& g, std::span<const double> x) {
  long double p = 1.0L;
  for (int j = 0; j < g.dim(); ++j) {
    const long double d = x[j] - g.mean[j];
    p *= std::exp(-d * d / (2.0L * g.var[j])) / std::sqrt(2.0L * 3.14159265358979323846264338327950288L * g.var[j]);
  }
  return p;
}

// −(1/|Ω|) Σ_x log Σ_k prior(x,k) g_k(x) without log-sum-exp.
template <typename Prior>
double naive_nll(const dgmm::MultiChannelImage& image, const std::vector<dgmm::DiagGaussian>& comps, Prior prior) {
  long double total = 0.0L;
  for (std::size_t i = 0; i < image.pixel_count(); ++i) {
    long double p = 0.0L;
    for (std::size_t k = 0; k < comps.size(); ++k) p += prior(i, static_cast<int>(k)) * density(comps[k], image.sample(i));
    total += std::log(p);
  }
  return static_cast<double>(-total / image.pixel_count());
}

struct Moments {
  std::vector<double> weight;
  std::vector<std::vector<double>> mean;
  std::vector<std::vector<double>> var;
};

// Weighted moments by definition, one class and channel at a time.
inline Moments brute_moments(const dgmm::MultiChannelImage& image, const std::vector<double>& w, int classes) {
  const std::size_t n = image.pixel_count();
  const int m = image.channels();
  Moments out;
  for (int k = 0; k < classes; ++k) {
    long double mass = 0.0L;
    for (std::size_t i = 0; i < n; ++i) mass += w[i * classes + k];
    out.weight.push_back(static_cast<double>(mass / n));
    std::vector<double> mu(m), var(m);
    for (int j = 0; j < m; ++j) {
      long double s = 0.0L;
      for (std::size_t i = 0; i < n; ++i) s += w[i * classes + k] * image.sample(i)[j];
      const long double mean = s / mass;
      long double s2 = 0.0L;
      for (std::size_t i = 0; i < n; ++i) {
        const long double d = image.sample(i)[j] - mean;
        s2 += w[i * classes + k] * d * d;
      }
      mu[j] = static_cast<double>(mean);
      var[j] = static_cast<double>(s2 / mass);
    }
    out.mean.push_back(mu);
    out.var.push_back(var);
  }
  return out;
}

inline dgmm::MultiChannelImage line_image(const std::vector<double>& values) {
  return dgmm::MultiChannelImage(dgmm::PixelDomain::full(1, static_cast<int>(values.size())), 1, values);
}

}  // namespace testing
