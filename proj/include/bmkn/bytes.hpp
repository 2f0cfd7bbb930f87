#pragma once

#include <array>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <vector>

#include "bmkn/entropy.hpp"
#include "bmkn/errors.hpp"

namespace bmkn {

/// Little-endian byte serialization.
class ByteWriter {
 public:
  void u8(uint8_t v) { buf_.push_back(v); }
  void u16(uint16_t v) { raw(&v, 2); }
  void u32(uint32_t v) { raw(&v, 4); }
  void i32(int32_t v) { raw(&v, 4); }
  void f32(float v) { raw(&v, 4); }
  void bytes(std::span<const uint8_t> b) {
    buf_.insert(buf_.end(), b.begin(), b.end());
  }
  void model(const CauchyModel& m) {
    for (int32_t w : m.to_wire()) i32(w);
  }
  void payload(const BitPayload& p) {
    u32(uint32_t(p.nbits));
    bytes(p.bytes);
  }

  size_t size() const { return buf_.size(); }
  const std::vector<uint8_t>& data() const { return buf_; }
  std::vector<uint8_t> take() { return std::move(buf_); }

 private:
  void raw(const void* p, size_t n) {
    const auto* b = static_cast<const uint8_t*>(p);
    buf_.insert(buf_.end(), b, b + n);
  }
  std::vector<uint8_t> buf_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const uint8_t> data) : data_(data) {}

  uint8_t u8() { return raw<uint8_t>(); }
  uint16_t u16() { return raw<uint16_t>(); }
  uint32_t u32() { return raw<uint32_t>(); }
  int32_t i32() { return raw<int32_t>(); }
  float f32() { return raw<float>(); }
  CauchyModel model() {
    std::array<int32_t, 4> w;
    for (int32_t& v : w) v = i32();
    return CauchyModel::from_wire(w);
  }
  BitPayload payload() {
    BitPayload p;
    p.nbits = u32();
    const size_t nbytes = size_t((p.nbits + 7) / 8);
    std::span<const uint8_t> b = bytes(nbytes);
    p.bytes.assign(b.begin(), b.end());
    return p;
  }
  std::span<const uint8_t> bytes(size_t n) {
    if (pos_ + n > data_.size()) throw TruncatedStream("byte stream exhausted");
    std::span<const uint8_t> s = data_.subspan(pos_, n);
    pos_ += n;
    return s;
  }

  size_t remaining() const { return data_.size() - pos_; }
  size_t position() const { return pos_; }

 private:
  template <typename T>
  T raw() {
    if (pos_ + sizeof(T) > data_.size()) {
      throw TruncatedStream("byte stream exhausted");
    }
    T v;
    std::memcpy(&v, data_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }

  std::span<const uint8_t> data_;
  size_t pos_ = 0;
};

}  // namespace bmkn
