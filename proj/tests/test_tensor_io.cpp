#include <cmath>
#include <filesystem>
#include <limits>

#include "doctest.h"
#include "dgmm/error.hpp"
#include "dgmm/tensor_io.hpp"

using namespace dgmm;

namespace {

ErrorCode decode_code(std::vector<std::uint8_t> bytes) {
  try {
    decode_tensor(bytes);
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("decode accepted bad bytes");
  return ErrorCode::InvalidArgument;
}

}  // namespace

TEST_CASE("layout of an encoded tensor") {
  const auto t = TensorFile::from_bytes({2, 3}, std::vector<std::uint8_t>{1, 2, 3, 4, 5, 6});
  const auto bytes = encode_tensor(t);
  const std::vector<std::uint8_t> expected{'D', 'G', 'M', 'M', 1, 0, 0, 0, 2, 2, 0, 0, 0,
                                           2,   0,   0,   0,   3, 0, 0, 0, 1, 2, 3, 4, 5, 6};
  CHECK(bytes == expected);
  const auto f = encode_tensor(TensorFile::from_doubles({1}, std::vector<double>{1.0}));
  // 1.0 is 0x3FF0000000000000, little-endian.
  CHECK(f.size() == 13 + 4 + 8);
  CHECK(f[23] == 0xF0);
  CHECK(f[24] == 0x3F);
}

TEST_CASE("round trips preserve values bit for bit") {
  const std::vector<double> values{0.0, -0.0, 1e-300, -2.5, std::numeric_limits<double>::max(),
                                   std::numeric_limits<double>::denorm_min()};
  const auto t = TensorFile::from_doubles({3, 2}, values);
  const auto back = decode_tensor(encode_tensor(t));
  CHECK(back.dims == t.dims);
  CHECK(back.payload == t.payload);
  const auto again = back.to_doubles();
  CHECK(std::signbit(again[1]));
  CHECK(again == values);

  const std::vector<std::uint8_t> bytes{0, 255, 7};
  CHECK(decode_tensor(encode_tensor(TensorFile::from_bytes({3}, bytes))).to_bytes() == bytes);

  const auto path = std::filesystem::temp_directory_path() / "dgmm_tensor_io_test.dgmm";
  write_tensor(path, t);
  CHECK(read_tensor(path).to_doubles() == values);
  std::filesystem::remove(path);
}

TEST_CASE("decode failures") {
  const auto good = encode_tensor(TensorFile::from_doubles({4, 4}, std::vector<double>(16, 1.0)));
  auto bad = good;
  bad[0] = 'X';
  CHECK(decode_code(bad) == ErrorCode::BadMagic);
  bad = good;
  bad[4] = 2;
  CHECK(decode_code(bad) == ErrorCode::BadVersion);
  bad = good;
  bad[8] = 9;
  CHECK(decode_code(bad) == ErrorCode::UnsupportedDtype);
  // 100 payload bytes where 128 are expected.
  bad.assign(good.begin(), good.end() - 28);
  CHECK(decode_code(bad) == ErrorCode::TruncatedPayload);
  bad = good;
  bad.push_back(0);
  CHECK(decode_code(bad) == ErrorCode::TruncatedPayload);
  bad.assign(good.begin(), good.begin() + 10);
  CHECK(decode_code(bad) == ErrorCode::TruncatedPayload);
  CHECK(decode_code({}) == ErrorCode::BadMagic);
}

TEST_CASE("dtype accessors and missing files") {
  const auto t = TensorFile::from_bytes({1}, std::vector<std::uint8_t>{1});
  CHECK_THROWS_AS(t.to_doubles(), Error);
  CHECK_THROWS_AS(TensorFile::from_doubles({2}, std::vector<double>{1.0}), Error);
  try {
    read_tensor("/nonexistent/dir/x.dgmm");
    FAIL("expected IoError");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::IoError);
  }
}
