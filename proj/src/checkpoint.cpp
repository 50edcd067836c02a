#include "dgmm/checkpoint.hpp"

#include <fstream>
#include <sstream>

#include "dgmm/error.hpp"
#include "dgmm/tensor_io.hpp"
#include "text_util.hpp"

namespace dgmm {

namespace {

std::vector<std::uint32_t> dims_of(const std::vector<int>& shape) {
  return {shape.begin(), shape.end()};
}

std::string join_shape(const std::vector<int>& shape) {
  std::string s;
  for (std::size_t i = 0; i < shape.size(); ++i) s += (i ? "," : "") + std::to_string(shape[i]);
  return s;
}

int parse_int(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const int v = std::stoi(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::logic_error&) {
    fail(ErrorCode::InvalidConfig, "checkpoint key " + key + " is not an integer: '" + value + "'");
  }
}

std::vector<double> load_values(const std::filesystem::path& path, const std::vector<int>& shape) {
  const auto t = read_tensor(path);
  if (t.dtype != DType::Float64 || t.dims != dims_of(shape)) {
    fail(ErrorCode::ShapeError, path.string() + ": tensor does not match the declared shape " + join_shape(shape));
  }
  return t.to_doubles();
}

}  // namespace

void save_checkpoint(const std::filesystem::path& dir, const NetworkConfig& config, const NetworkState& net) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) fail(ErrorCode::IoError, "cannot create " + dir.string() + ": " + ec.message());
  std::ostringstream manifest;
  manifest << "in_channels=" << config.in_channels << "\n"
           << "out_channels=" << config.out_channels << "\n"
           << "depth=" << config.depth << "\n"
           << "base_width=" << config.base_width << "\n"
           << "kernel_size=" << config.kernel_size << "\n"
           << "step=" << net.step << "\n";
  for (const auto& p : net.params) {
    manifest << "param=" << p.name << " f64 " << join_shape(p.shape) << "\n";
    write_tensor(dir / (p.name + ".dgmm"), TensorFile::from_doubles(dims_of(p.shape), p.value));
    write_tensor(dir / (p.name + ".m.dgmm"), TensorFile::from_doubles(dims_of(p.shape), p.m));
    write_tensor(dir / (p.name + ".v.dgmm"), TensorFile::from_doubles(dims_of(p.shape), p.v));
  }
  const auto path = dir / "checkpoint.txt";
  std::ofstream out(path, std::ios::trunc);
  if (!out) fail(ErrorCode::IoError, "cannot open " + path.string() + " for writing");
  out << manifest.str();
  if (!out) fail(ErrorCode::IoError, "write failed for " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& dir) {
  const auto path = dir / "checkpoint.txt";
  Checkpoint ck;
  std::vector<std::pair<std::string, std::vector<int>>> declared;
  for (const auto& [key, value] : detail::parse_key_values(detail::read_text_file(path.string()))) {
    if (key == "in_channels") {
      ck.config.in_channels = parse_int(key, value);
    } else if (key == "out_channels") {
      ck.config.out_channels = parse_int(key, value);
    } else if (key == "depth") {
      ck.config.depth = parse_int(key, value);
    } else if (key == "base_width") {
      ck.config.base_width = parse_int(key, value);
    } else if (key == "kernel_size") {
      ck.config.kernel_size = parse_int(key, value);
    } else if (key == "step") {
      ck.network.step = parse_int(key, value);
    } else if (key == "param") {
      std::istringstream in(value);
      std::string name, dtype, shape;
      if (!(in >> name >> dtype >> shape) || dtype != "f64") {
        fail(ErrorCode::InvalidConfig, path.string() + ": bad param line '" + value + "'");
      }
      std::vector<int> dims;
      for (double d : detail::parse_doubles(shape)) dims.push_back(static_cast<int>(d));
      declared.emplace_back(name, dims);
    } else {
      fail(ErrorCode::InvalidConfig, path.string() + ": unknown key '" + key + "'");
    }
  }
  ck.config.validate();
  // The layout is fixed by the config; the files must agree with it.
  auto reference = init_network(ck.config, 0);
  if (declared.size() != reference.params.size()) {
    fail(ErrorCode::ConfigMismatch, path.string() + ": parameter list does not match the config");
  }
  for (std::size_t i = 0; i < declared.size(); ++i) {
    auto& p = reference.params[i];
    if (declared[i].first != p.name || declared[i].second != p.shape) {
      fail(ErrorCode::ConfigMismatch, path.string() + ": unexpected parameter " + declared[i].first);
    }
    p.value = load_values(dir / (p.name + ".dgmm"), p.shape);
    p.m = load_values(dir / (p.name + ".m.dgmm"), p.shape);
    p.v = load_values(dir / (p.name + ".v.dgmm"), p.shape);
  }
  reference.step = ck.network.step;
  reference.touch();
  ck.network = std::move(reference);
  return ck;
}

void write_mixture_params(const std::filesystem::path& path, const std::vector<double>& weights,
                          const std::vector<DiagGaussian>& components) {
  if (components.empty() || weights.size() != components.size()) {
    fail(ErrorCode::DimensionMismatch, "weights and components differ in count");
  }
  const int m = components.front().dim();
  std::vector<double> rows;
  for (std::size_t k = 0; k < components.size(); ++k) {
    rows.push_back(weights[k]);
    rows.insert(rows.end(), components[k].mean.begin(), components[k].mean.end());
    rows.insert(rows.end(), components[k].var.begin(), components[k].var.end());
  }
  write_tensor(path, TensorFile::from_doubles({static_cast<std::uint32_t>(components.size()),
                                               static_cast<std::uint32_t>(1 + 2 * m)},
                                              rows));
}

MixtureParams read_mixture_params(const std::filesystem::path& path) {
  const auto t = read_tensor(path);
  if (t.dtype != DType::Float64 || t.dims.size() != 2 || t.dims[1] < 3 || t.dims[1] % 2 == 0) {
    fail(ErrorCode::ShapeError, path.string() + ": expected a K x (1+2m) float64 tensor");
  }
  const auto values = t.to_doubles();
  const std::size_t cols = t.dims[1];
  const std::size_t m = (cols - 1) / 2;
  MixtureParams params;
  for (std::size_t k = 0; k < t.dims[0]; ++k) {
    const double* row = values.data() + k * cols;
    params.weights.push_back(row[0]);
    params.components.push_back(
        DiagGaussian{std::vector<double>(row + 1, row + 1 + m), std::vector<double>(row + 1 + m, row + cols)});
  }
  return params;
}

void write_mean_matrix(const std::filesystem::path& path, const std::vector<double>& mu, int classes,
                       int channels) {
  if (mu.size() != static_cast<std::size_t>(classes) * channels) {
    fail(ErrorCode::ShapeError, "mean matrix size does not match K x m");
  }
  write_tensor(path, TensorFile::from_doubles(
                         {static_cast<std::uint32_t>(classes), static_cast<std::uint32_t>(channels)}, mu));
}

std::vector<double> read_mean_matrix(const std::filesystem::path& path, int classes, int channels) {
  const auto t = read_tensor(path);
  if (t.dtype != DType::Float64 ||
      t.dims != std::vector<std::uint32_t>{static_cast<std::uint32_t>(classes), static_cast<std::uint32_t>(channels)}) {
    fail(ErrorCode::ShapeError, path.string() + ": expected a " + std::to_string(classes) + " x " +
                                    std::to_string(channels) + " float64 mean matrix");
  }
  return t.to_doubles();
}

}  // namespace dgmm
