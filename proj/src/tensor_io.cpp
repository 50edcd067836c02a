#include "dgmm/tensor_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "dgmm/error.hpp"

namespace dgmm {

namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int b = 0; b < 4; ++b) out.push_back(static_cast<std::uint8_t>(v >> (8 * b)));
}

std::uint32_t get_u32(std::span<const std::uint8_t> bytes, std::size_t at) {
  std::uint32_t v = 0;
  for (int b = 0; b < 4; ++b) v |= static_cast<std::uint32_t>(bytes[at + b]) << (8 * b);
  return v;
}

constexpr std::size_t kFixedHeader = 4 + 4 + 1 + 4;

}  // namespace

std::size_t dtype_size(DType dtype) {
  switch (dtype) {
    case DType::Float64: return 8;
    case DType::UInt8: return 1;
  }
  fail(ErrorCode::UnsupportedDtype, "dtype code " + std::to_string(static_cast<int>(dtype)));
}

std::size_t TensorFile::element_count() const {
  std::size_t n = 1;
  for (auto d : dims) n *= d;
  return n;
}

TensorFile TensorFile::from_doubles(std::vector<std::uint32_t> dims, std::span<const double> values) {
  TensorFile t;
  t.dtype = DType::Float64;
  t.dims = std::move(dims);
  if (values.size() != t.element_count()) {
    fail(ErrorCode::ShapeError, "tensor dims hold " + std::to_string(t.element_count()) + " values, got " +
                                    std::to_string(values.size()));
  }
  t.payload.reserve(values.size() * 8);
  for (double v : values) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    for (int b = 0; b < 8; ++b) t.payload.push_back(static_cast<std::uint8_t>(bits >> (8 * b)));
  }
  return t;
}

TensorFile TensorFile::from_bytes(std::vector<std::uint32_t> dims, std::span<const std::uint8_t> values) {
  TensorFile t;
  t.dtype = DType::UInt8;
  t.dims = std::move(dims);
  if (values.size() != t.element_count()) {
    fail(ErrorCode::ShapeError, "tensor dims hold " + std::to_string(t.element_count()) + " values, got " +
                                    std::to_string(values.size()));
  }
  t.payload.assign(values.begin(), values.end());
  return t;
}

std::vector<double> TensorFile::to_doubles() const {
  if (dtype != DType::Float64) {
    fail(ErrorCode::UnsupportedDtype, "expected a float64 tensor");
  }
  std::vector<double> out(payload.size() / 8);
  for (std::size_t i = 0; i < out.size(); ++i) {
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(payload[i * 8 + b]) << (8 * b);
    out[i] = std::bit_cast<double>(bits);
  }
  return out;
}

std::vector<std::uint8_t> TensorFile::to_bytes() const {
  if (dtype != DType::UInt8) {
    fail(ErrorCode::UnsupportedDtype, "expected a uint8 tensor");
  }
  return payload;
}

std::vector<std::uint8_t> encode_tensor(const TensorFile& tensor) {
  const std::size_t expected = tensor.element_count() * dtype_size(tensor.dtype);
  if (tensor.payload.size() != expected) {
    fail(ErrorCode::TruncatedPayload, "payload has " + std::to_string(tensor.payload.size()) +
                                          " bytes, expected " + std::to_string(expected));
  }
  std::vector<std::uint8_t> out(std::begin(TensorFile::kMagic), std::end(TensorFile::kMagic));
  put_u32(out, TensorFile::kVersion);
  out.push_back(static_cast<std::uint8_t>(tensor.dtype));
  put_u32(out, static_cast<std::uint32_t>(tensor.dims.size()));
  for (auto d : tensor.dims) put_u32(out, d);
  out.insert(out.end(), tensor.payload.begin(), tensor.payload.end());
  return out;
}

TensorFile decode_tensor(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), TensorFile::kMagic, 4) != 0) {
    fail(ErrorCode::BadMagic, "missing DGMM magic");
  }
  if (bytes.size() < kFixedHeader) {
    fail(ErrorCode::TruncatedPayload, "header truncated at " + std::to_string(bytes.size()) + " bytes");
  }
  const auto version = get_u32(bytes, 4);
  if (version != TensorFile::kVersion) {
    fail(ErrorCode::BadVersion, "version " + std::to_string(version) + ", expected " +
                                    std::to_string(TensorFile::kVersion));
  }
  TensorFile t;
  const auto code = bytes[8];
  if (code != static_cast<std::uint8_t>(DType::Float64) && code != static_cast<std::uint8_t>(DType::UInt8)) {
    fail(ErrorCode::UnsupportedDtype, "dtype code " + std::to_string(code));
  }
  t.dtype = static_cast<DType>(code);
  const auto ndim = get_u32(bytes, 9);
  if (bytes.size() < kFixedHeader + 4ull * ndim) {
    fail(ErrorCode::TruncatedPayload, "dims truncated");
  }
  for (std::uint32_t i = 0; i < ndim; ++i) t.dims.push_back(get_u32(bytes, kFixedHeader + 4ull * i));
  const std::size_t start = kFixedHeader + 4ull * ndim;
  const std::size_t expected = t.element_count() * dtype_size(t.dtype);
  const std::size_t actual = bytes.size() - start;
  if (actual != expected) {
    fail(ErrorCode::TruncatedPayload, "payload has " + std::to_string(actual) + " bytes, expected " +
                                          std::to_string(expected));
  }
  t.payload.assign(bytes.begin() + static_cast<std::ptrdiff_t>(start), bytes.end());
  return t;
}

void write_tensor(const std::filesystem::path& path, const TensorFile& tensor) {
  const auto bytes = encode_tensor(tensor);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    fail(ErrorCode::IoError, "cannot open " + path.string() + " for writing");
  }
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) {
    fail(ErrorCode::IoError, "write failed for " + path.string());
  }
}

TensorFile read_tensor(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    fail(ErrorCode::IoError, "cannot open " + path.string());
  }
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return decode_tensor(bytes);
  } catch (const Error& e) {
    fail(e.code(), path.string() + ": " + e.what());
  }
}

}  // namespace dgmm
