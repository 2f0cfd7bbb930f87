#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "bmkn/errors.hpp"

namespace bmkn {

/// Uniform scalar quantizer. floor(v/q + 0.5) rounds half up, which keeps
/// quantization translation-invariant on the step grid: closed-loop delta
/// reconstruction then lands exactly on round(v/q)*q.
inline int64_t quantize(double v, double qstep) {
  return static_cast<int64_t>(std::floor(v / qstep + 0.5));
}
inline double dequantize(int64_t s, double qstep) {
  return static_cast<double>(s) * qstep;
}

/// 2^-20 fixed point used for all real-valued header fields, so that encoder
/// and decoder agree bit-exactly on model parameters.
int32_t to_fx20(double v);
inline double from_fx20(int32_t v) { return v / 1048576.0; }

// ---------------------------------------------------------------------------
// Bit I/O (MSB-first)

class BitWriter {
 public:
  void put_bit(bool b);
  void put_bits(uint64_t value, int nbits);  // big-endian within the field
  uint64_t bit_count() const { return nbits_; }
  /// Padded to a whole number of bytes with zero bits.
  const std::vector<uint8_t>& bytes() const { return bytes_; }

 private:
  std::vector<uint8_t> bytes_;
  uint64_t nbits_ = 0;
};

class BitReader {
 public:
  BitReader(std::span<const uint8_t> bytes, uint64_t nbits)
      : bytes_(bytes), nbits_(nbits) {}

  bool get_bit();
  uint64_t get_bits(int nbits);
  uint64_t remaining() const { return nbits_ - pos_; }

 private:
  std::span<const uint8_t> bytes_;
  uint64_t nbits_ = 0;
  uint64_t pos_ = 0;
};

// ---------------------------------------------------------------------------
// Parametric symbol model

/// Cauchy distribution over quantized symbols. Only these parameters are
/// transmitted; both sides rebuild the identical Huffman table from them.
struct CauchyModel {
  double x0 = 0.0;     // location
  double gamma = 1.0;  // scale, > 0
  double qstep = 1.0;  // quantization step, > 0
  int32_t smin = 0;    // inclusive alphabet bounds, smin <= 0 <= smax
  int32_t smax = 0;

  int alphabet_size() const { return smax - smin + 1; }

  /// Wire form: x0, gamma, qstep as 2^-20 fixed point plus packed bounds.
  std::array<int32_t, 4> to_wire() const;
  static CauchyModel from_wire(const std::array<int32_t, 4>& w);
};

/// Median / half-IQR estimator snapped to the wire grid. Throws EmptyStream.
CauchyModel fit_model(std::span<const double> values, double qstep);

// ---------------------------------------------------------------------------
// Canonical Huffman over the model's alphabet plus one escape symbol

class HuffmanTable {
 public:
  struct Code {
    uint64_t bits = 0;
    uint8_t len = 0;
  };

  /// Deterministic construction: integer frequencies from the Cauchy CDF,
  /// heap ties broken by node id, canonical code assignment by (len, symbol).
  explicit HuffmanTable(const CauchyModel& model);

  const CauchyModel& model() const { return model_; }
  int symbol_count() const { return int(codes_.size()); }  // incl. escape
  const Code& code_for_index(int index) const { return codes_[index]; }

  /// Symbol-level closed-loop primitives. Out-of-alphabet symbols go through
  /// the escape code followed by the raw 32-bit two's-complement symbol.
  void encode_symbol(BitWriter& bw, int64_t s) const;
  int64_t decode_symbol(BitReader& br) const;

  /// Frequencies the table was built from (testing / size estimation).
  const std::vector<uint64_t>& frequencies() const { return freqs_; }

 private:
  int decode_index(BitReader& br) const;

  CauchyModel model_;
  std::vector<uint64_t> freqs_;
  std::vector<Code> codes_;
  // canonical decode tables, indexed by code length
  std::vector<uint32_t> count_by_len_;
  std::vector<uint64_t> first_code_by_len_;
  std::vector<uint32_t> offset_by_len_;
  std::vector<int> symbols_in_order_;
  int escape_index_ = 0;
};

/// Convenience wrapper: build the table from `model`.
HuffmanTable build_table(const CauchyModel& model);

struct BitPayload {
  std::vector<uint8_t> bytes;
  uint64_t nbits = 0;
};

/// Quantizes every value with model.qstep and Huffman-codes the symbols.
BitPayload encode_stream(std::span<const double> values,
                         const CauchyModel& model);

/// Exact inverse on the quantized symbols; returns s * qstep per value.
std::vector<double> decode_stream(const BitPayload& payload,
                                  const CauchyModel& model, size_t count);

}  // namespace bmkn
