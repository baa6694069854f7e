#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <vector>

#include "flynn/error.hpp"

namespace flynn {

using Bytes = std::vector<std::uint8_t>;

// Little-endian primitive and LEB128 varint encoding shared by the model
// file, the sparse count wire format, and transport payloads.
class ByteWriter {
 public:
  const Bytes& bytes() const { return data_; }
  Bytes take() { return std::move(data_); }
  std::size_t size() const { return data_.size(); }

  void u8(std::uint8_t v) { data_.push_back(v); }

  void u16(std::uint16_t v) {
    for (int i = 0; i < 2; ++i) data_.push_back((v >> (8 * i)) & 0xFF);
  }

  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) data_.push_back((v >> (8 * i)) & 0xFF);
  }

  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) data_.push_back((v >> (8 * i)) & 0xFF);
  }

  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

  void varint(std::uint64_t v) {
    while (v >= 0x80) {
      data_.push_back(static_cast<std::uint8_t>(v) | 0x80);
      v >>= 7;
    }
    data_.push_back(static_cast<std::uint8_t>(v));
  }

  void str(const std::string& s) {
    varint(s.size());
    data_.insert(data_.end(), s.begin(), s.end());
  }

  void raw(std::span<const std::uint8_t> bytes) {
    data_.insert(data_.end(), bytes.begin(), bytes.end());
  }

 private:
  Bytes data_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> data) : data_(data) {}

  std::size_t remaining() const { return data_.size() - pos_; }
  std::size_t position() const { return pos_; }

  std::uint8_t u8() {
    need(1);
    return data_[pos_++];
  }

  std::uint16_t u16() {
    need(2);
    std::uint16_t v = 0;
    for (int i = 0; i < 2; ++i) v |= std::uint16_t(data_[pos_++]) << (8 * i);
    return v;
  }

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t(data_[pos_++]) << (8 * i);
    return v;
  }

  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t(data_[pos_++]) << (8 * i);
    return v;
  }

  double f64() { return std::bit_cast<double>(u64()); }

  std::uint64_t varint() {
    std::uint64_t v = 0;
    int shift = 0;
    while (true) {
      need(1);
      const std::uint8_t byte = data_[pos_++];
      if (shift >= 64)
        throw DataError("wire: varint overflows 64 bits");
      v |= std::uint64_t(byte & 0x7F) << shift;
      if ((byte & 0x80) == 0) return v;
      shift += 7;
    }
  }

  std::string str() {
    const auto len = varint();
    need(len);
    std::string s(reinterpret_cast<const char*>(data_.data() + pos_), len);
    pos_ += len;
    return s;
  }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > data_.size())
      throw DataError("wire: truncated stream (need " + std::to_string(n) +
                      " bytes at offset " + std::to_string(pos_) + ")");
  }

  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
};

// CRC-32 (polynomial 0xEDB88320), table-driven.
inline std::uint32_t crc32(std::span<const std::uint8_t> data) {
  static const auto table = [] {
    std::array<std::uint32_t, 256> t{};
    for (std::uint32_t i = 0; i < 256; ++i) {
      std::uint32_t c = i;
      for (int k = 0; k < 8; ++k)
        c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
      t[i] = c;
    }
    return t;
  }();
  std::uint32_t crc = 0xFFFFFFFFu;
  for (std::uint8_t byte : data)
    crc = table[(crc ^ byte) & 0xFF] ^ (crc >> 8);
  return crc ^ 0xFFFFFFFFu;
}

}  // namespace flynn
