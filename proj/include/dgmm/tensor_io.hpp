#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace dgmm {

enum class DType : std::uint8_t {
  Float64 = 1,
  UInt8 = 2,
};

std::size_t dtype_size(DType dtype);

/// In-memory form of the "DGMM" container: a dense row-major array whose
/// payload is kept as little-endian bytes exactly as stored on disk.
struct TensorFile {
  static constexpr char kMagic[4] = {'D', 'G', 'M', 'M'};
  static constexpr std::uint32_t kVersion = 1;

  DType dtype = DType::Float64;
  std::vector<std::uint32_t> dims;
  std::vector<std::uint8_t> payload;

  std::size_t element_count() const;

  static TensorFile from_doubles(std::vector<std::uint32_t> dims, std::span<const double> values);
  static TensorFile from_bytes(std::vector<std::uint32_t> dims, std::span<const std::uint8_t> values);

  std::vector<double> to_doubles() const;
  std::vector<std::uint8_t> to_bytes() const;
};

std::vector<std::uint8_t> encode_tensor(const TensorFile& tensor);
TensorFile decode_tensor(std::span<const std::uint8_t> bytes);

void write_tensor(const std::filesystem::path& path, const TensorFile& tensor);
TensorFile read_tensor(const std::filesystem::path& path);

}  // namespace dgmm
