#include "bmkn/entropy.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <queue>

namespace bmkn {

int32_t to_fx20(double v) {
  const double scaled = v * 1048576.0;
  if (!(std::abs(scaled) < 2147483647.0)) {
    throw ConfigError("value out of fixed-point range: " + std::to_string(v));
  }
  return static_cast<int32_t>(std::llround(scaled));
}

// ---------------------------------------------------------------------------

void BitWriter::put_bit(bool b) {
  const size_t byte = nbits_ >> 3;
  if (byte >= bytes_.size()) bytes_.push_back(0);
  if (b) bytes_[byte] |= uint8_t(0x80u >> (nbits_ & 7));
  ++nbits_;
}

void BitWriter::put_bits(uint64_t value, int nbits) {
  for (int i = nbits - 1; i >= 0; --i) put_bit((value >> i) & 1);
}

bool BitReader::get_bit() {
  if (pos_ >= nbits_) throw TruncatedStream("bit stream exhausted");
  const bool b = (bytes_[pos_ >> 3] >> (7 - (pos_ & 7))) & 1;
  ++pos_;
  return b;
}

uint64_t BitReader::get_bits(int nbits) {
  uint64_t v = 0;
  for (int i = 0; i < nbits; ++i) v = (v << 1) | uint64_t(get_bit());
  return v;
}

// ---------------------------------------------------------------------------

std::array<int32_t, 4> CauchyModel::to_wire() const {
  if (smin > 0 || smax < 0 || smin < -32768 || smax > 32767) {
    throw ConfigError("model bounds out of range");
  }
  const uint32_t packed =
      (uint32_t(uint16_t(int16_t(smin))) << 16) | uint16_t(int16_t(smax));
  return {to_fx20(x0), to_fx20(gamma), to_fx20(qstep), int32_t(packed)};
}

CauchyModel CauchyModel::from_wire(const std::array<int32_t, 4>& w) {
  CauchyModel m;
  m.x0 = from_fx20(w[0]);
  m.gamma = from_fx20(w[1]);
  m.qstep = from_fx20(w[2]);
  const uint32_t packed = uint32_t(w[3]);
  m.smin = int16_t(uint16_t(packed >> 16));
  m.smax = int16_t(uint16_t(packed & 0xffffu));
  if (!(m.gamma > 0.0) || !(m.qstep > 0.0) || m.smin > 0 || m.smax < 0) {
    throw CorruptBlock("bad entropy model header");
  }
  return m;
}

namespace {

// Linear-interpolation quantile on a sorted copy.
double quantile(std::vector<double>& sorted, double p) {
  const size_t n = sorted.size();
  if (n == 1) return sorted[0];
  const double h = p * double(n - 1);
  const size_t lo = size_t(std::floor(h));
  const size_t hi = std::min(lo + 1, n - 1);
  const double frac = h - double(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

}  // namespace

CauchyModel fit_model(std::span<const double> values, double qstep) {
  if (values.empty()) throw EmptyStream("fit_model on empty stream");
  if (!(qstep > 0.0)) throw ConfigError("qstep must be positive");

  CauchyModel m;
  m.qstep = from_fx20(std::max<int32_t>(1, to_fx20(qstep)));

  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const double median = quantile(sorted, 0.5);
  const double iqr = quantile(sorted, 0.75) - quantile(sorted, 0.25);
  m.x0 = from_fx20(to_fx20(median));
  const double gamma = std::max(0.5 * iqr, m.qstep / 4.0);
  m.gamma = from_fx20(std::max<int32_t>(1, to_fx20(gamma)));

  const int64_t qmin = quantize(sorted.front(), m.qstep);
  const int64_t qmax = quantize(sorted.back(), m.qstep);
  m.smin = int32_t(std::clamp<int64_t>(std::min<int64_t>(qmin, 0), -32768, 0));
  m.smax = int32_t(std::clamp<int64_t>(std::max<int64_t>(qmax, 0), 0, 32767));
  return m;
}

// ---------------------------------------------------------------------------

namespace {

double cauchy_cdf(double x, double x0, double gamma) {
  return 0.5 + std::atan((x - x0) / gamma) / std::numbers::pi;
}

constexpr double kEscapeFloor = 1.0 / 16384.0;  // 2^-14
constexpr double kFreqScale = 4294967296.0;     // 2^32
constexpr int kMaxCodeLen = 57;

}  // namespace

HuffmanTable::HuffmanTable(const CauchyModel& model) : model_(model) {
  const int n = model.alphabet_size();
  if (n < 1 || n > 65536) throw ConfigError("alphabet size out of range");

  // Integer frequencies from the model CDF; the escape symbol carries the
  // tail mass with a 2^-14 floor. max(1, .) keeps every code constructible.
  freqs_.resize(size_t(n) + 1);
  for (int i = 0; i < n; ++i) {
    const int64_t s = model.smin + i;
    const double w =
        cauchy_cdf((double(s) + 0.5) * model.qstep, model.x0, model.gamma) -
        cauchy_cdf((double(s) - 0.5) * model.qstep, model.x0, model.gamma);
    freqs_[i] = std::max<uint64_t>(1, uint64_t(std::llround(w * kFreqScale)));
  }
  const double covered =
      cauchy_cdf((double(model.smax) + 0.5) * model.qstep, model.x0, model.gamma) -
      cauchy_cdf((double(model.smin) - 0.5) * model.qstep, model.x0, model.gamma);
  const double esc = std::max(1.0 - covered, kEscapeFloor);
  freqs_[n] = std::max<uint64_t>(1, uint64_t(std::llround(esc * kFreqScale)));
  escape_index_ = n;

  // Huffman code lengths. Ties broken by node id (leaves first, in symbol
  // order) so the tree is identical on every run.
  const int total = n + 1;
  struct Node {
    uint64_t freq;
    int id;
    int left = -1, right = -1;
  };
  std::vector<Node> nodes;
  nodes.reserve(size_t(2 * total));
  for (int i = 0; i < total; ++i) nodes.push_back({freqs_[i], i});

  auto cmp = [&nodes](int a, int b) {
    if (nodes[a].freq != nodes[b].freq) return nodes[a].freq > nodes[b].freq;
    return nodes[a].id > nodes[b].id;
  };
  std::priority_queue<int, std::vector<int>, decltype(cmp)> heap(cmp);
  for (int i = 0; i < total; ++i) heap.push(i);

  codes_.assign(size_t(total), {});
  if (total == 1) {
    codes_[0] = {0, 1};
  } else {
    while (heap.size() > 1) {
      const int a = heap.top(); heap.pop();
      const int b = heap.top(); heap.pop();
      Node parent{nodes[a].freq + nodes[b].freq, int(nodes.size()), a, b};
      nodes.push_back(parent);
      heap.push(parent.id);
    }
    // Depth-first length assignment.
    struct Item { int node; uint8_t depth; };
    std::vector<Item> stack{{heap.top(), 0}};
    while (!stack.empty()) {
      const Item it = stack.back();
      stack.pop_back();
      const Node& nd = nodes[it.node];
      if (nd.left < 0) {
        if (it.depth > kMaxCodeLen) throw CodecError("huffman code too long");
        codes_[it.node].len = std::max<uint8_t>(1, it.depth);
      } else {
        stack.push_back({nd.left, uint8_t(it.depth + 1)});
        stack.push_back({nd.right, uint8_t(it.depth + 1)});
      }
    }
  }

  // Canonical assignment ordered by (length, symbol index).
  std::vector<int> order(static_cast<size_t>(total));
  for (int i = 0; i < total; ++i) order[size_t(i)] = i;
  std::stable_sort(order.begin(), order.end(), [this](int a, int b) {
    return codes_[a].len < codes_[b].len;
  });

  int max_len = 0;
  for (int i = 0; i < total; ++i) max_len = std::max<int>(max_len, codes_[i].len);
  count_by_len_.assign(size_t(max_len) + 2, 0);
  first_code_by_len_.assign(size_t(max_len) + 2, 0);
  offset_by_len_.assign(size_t(max_len) + 2, 0);
  for (int i = 0; i < total; ++i) count_by_len_[codes_[i].len]++;

  uint64_t code = 0;
  uint32_t offset = 0;
  for (int len = 1; len <= max_len; ++len) {
    code <<= 1;
    first_code_by_len_[len] = code;
    offset_by_len_[len] = offset;
    code += count_by_len_[len];
    offset += count_by_len_[len];
  }
  symbols_in_order_ = order;
  std::vector<uint32_t> next(size_t(max_len) + 2, 0);
  for (int k = 0; k < total; ++k) {
    const int sym = order[k];
    const int len = codes_[sym].len;
    codes_[sym].bits = first_code_by_len_[len] + next[len];
    next[len]++;
  }
}

void HuffmanTable::encode_symbol(BitWriter& bw, int64_t s) const {
  if (s >= model_.smin && s <= model_.smax) {
    const Code& c = codes_[size_t(s - model_.smin)];
    bw.put_bits(c.bits, c.len);
  } else {
    if (s < INT32_MIN || s > INT32_MAX) {
      throw ConfigError("symbol exceeds escape range; qstep too small");
    }
    const Code& c = codes_[size_t(escape_index_)];
    bw.put_bits(c.bits, c.len);
    bw.put_bits(uint32_t(int32_t(s)), 32);
  }
}

int HuffmanTable::decode_index(BitReader& br) const {
  uint64_t code = 0;
  for (size_t len = 1; len < count_by_len_.size(); ++len) {
    code = (code << 1) | uint64_t(br.get_bit());
    const uint32_t cnt = count_by_len_[len];
    if (cnt != 0 && code - first_code_by_len_[len] < cnt) {
      return symbols_in_order_[offset_by_len_[len] +
                               uint32_t(code - first_code_by_len_[len])];
    }
  }
  throw TruncatedStream("invalid huffman code");
}

int64_t HuffmanTable::decode_symbol(BitReader& br) const {
  const int index = decode_index(br);
  if (index != escape_index_) return int64_t(model_.smin) + index;
  const int64_t s = int64_t(int32_t(uint32_t(br.get_bits(32))));
  if (s >= model_.smin && s <= model_.smax) {
    throw BadEscape("escape carries in-alphabet symbol");
  }
  return s;
}

HuffmanTable build_table(const CauchyModel& model) {
  return HuffmanTable(model);
}

BitPayload encode_stream(std::span<const double> values,
                         const CauchyModel& model) {
  const HuffmanTable table(model);
  BitWriter bw;
  for (double v : values) table.encode_symbol(bw, quantize(v, model.qstep));
  return {bw.bytes(), bw.bit_count()};
}

std::vector<double> decode_stream(const BitPayload& payload,
                                  const CauchyModel& model, size_t count) {
  const HuffmanTable table(model);
  BitReader br(payload.bytes, payload.nbits);
  std::vector<double> out;
  out.reserve(count);
  for (size_t i = 0; i < count; ++i) {
    out.push_back(dequantize(table.decode_symbol(br), model.qstep));
  }
  return out;
}

}  // namespace bmkn
