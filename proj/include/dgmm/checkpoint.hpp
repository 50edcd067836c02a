#pragma once

#include <filesystem>
#include <vector>

#include "dgmm/gmm.hpp"
#include "dgmm/network.hpp"

namespace dgmm {

struct Checkpoint {
  NetworkConfig config;
  NetworkState network;
};

/// Writes checkpoint.txt (config, step, one line per parameter with dtype
/// and shape) plus value and moment tensors for every parameter.
void save_checkpoint(const std::filesystem::path& dir, const NetworkConfig& config, const NetworkState& net);
Checkpoint load_checkpoint(const std::filesystem::path& dir);

/// Mixture parameters as a |K|×(1+2m) float64 tensor: weight, means, variances.
void write_mixture_params(const std::filesystem::path& path, const std::vector<double>& weights,
                          const std::vector<DiagGaussian>& components);
MixtureParams read_mixture_params(const std::filesystem::path& path);

/// |K|×m float64 tensor of reference class means.
void write_mean_matrix(const std::filesystem::path& path, const std::vector<double>& mu, int classes,
                       int channels);
std::vector<double> read_mean_matrix(const std::filesystem::path& path, int classes, int channels);

}  // namespace dgmm
