#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include "kecmrn/errors.hpp"

namespace kecmrn {

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view content);

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

// Appends fixed-width little-endian scalars.
class ByteWriter {
 public:
  template <typename U>
  void put(U value) {
    static_assert(std::is_arithmetic_v<U>);
    unsigned char raw[sizeof(U)];
    std::memcpy(raw, &value, sizeof(U));
    if constexpr (std::endian::native == std::endian::big) {
      for (std::size_t i = 0; i < sizeof(U) / 2; ++i) std::swap(raw[i], raw[sizeof(U) - 1 - i]);
    }
    buffer_.append(reinterpret_cast<const char*>(raw), sizeof(U));
  }
  void put_bytes(std::string_view bytes) { buffer_.append(bytes); }
  // u16 or u32 length prefix followed by the bytes.
  void put_string16(std::string_view s);
  void put_string32(std::string_view s);

  const std::string& bytes() const noexcept { return buffer_; }

 private:
  std::string buffer_;
};

// Bounds-checked reader; running past the end throws FormatError("truncated ...").
class ByteReader {
 public:
  ByteReader(std::string_view bytes, std::string context) : bytes_(bytes), context_(std::move(context)) {}

  template <typename U>
  U get() {
    static_assert(std::is_arithmetic_v<U>);
    need(sizeof(U));
    unsigned char raw[sizeof(U)];
    std::memcpy(raw, bytes_.data() + pos_, sizeof(U));
    if constexpr (std::endian::native == std::endian::big) {
      for (std::size_t i = 0; i < sizeof(U) / 2; ++i) std::swap(raw[i], raw[sizeof(U) - 1 - i]);
    }
    pos_ += sizeof(U);
    U value;
    std::memcpy(&value, raw, sizeof(U));
    return value;
  }
  std::string_view get_bytes(std::size_t n) {
    need(n);
    auto out = bytes_.substr(pos_, n);
    pos_ += n;
    return out;
  }
  std::string get_string16() { return std::string(get_bytes(get<std::uint16_t>())); }
  std::string get_string32() { return std::string(get_bytes(get<std::uint32_t>())); }

  std::size_t remaining() const noexcept { return bytes_.size() - pos_; }
  std::size_t position() const noexcept { return pos_; }
  void expect_end() const;

 private:
  void need(std::size_t n) const;

  std::string_view bytes_;
  std::string context_;
  std::size_t pos_ = 0;
};

}  // namespace kecmrn
