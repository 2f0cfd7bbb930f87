#pragma once

#include <cstdint>
#include <vector>

#include "bmkn/deform.hpp"
#include "bmkn/entropy.hpp"
#include "bmkn/predcode.hpp"

namespace bmkn {

enum class TMode : uint8_t { Direct = 0, Spatial = 1, SpatioTemporal = 2 };

/// Per-frame context for coding a fitted transform set.
struct MotionContext {
  double qstep_t = 1e-3;
  double qstep_p = 1e-3;
  TMode mode = TMode::Spatial;
  /// Model that coded the previous P-frame's translations (spatio-temporal
  /// prediction only).
  const CauchyModel* prev_t_model = nullptr;
  const std::vector<Vec3>* prev_decoded_t = nullptr;
};

/// A P-frame's motion payload. `t_section` / `p_section` are the serialized
/// byte ranges as they appear in the frame block; `decoded` holds the
/// quantized transforms both sides agree on.
struct CodedMotion {
  std::vector<uint8_t> t_section;
  std::vector<uint8_t> p_section;
  NodeTransforms decoded;
  std::vector<Vec3> decoded_t;
  CauchyModel t_model;  // feeds the next frame's spatio-temporal prediction
  size_t payload_bytes() const { return t_section.size() + p_section.size(); }
};

/// Quantizes and serializes the fitted transforms under `mask`. Translations
/// go through the selected prediction mode; the concatenated R'/S'/H' vector
/// is coded with one freshly fitted model.
CodedMotion code_motion(const NodeTransforms& fitted, const KeyNodeSet& nodes,
                        const InfluenceGraph& graph, const CombinationMask& mask,
                        const MotionContext& ctx);

struct DecodedMotion {
  NodeTransforms transforms;
  std::vector<Vec3> decoded_t;
  CauchyModel t_model;
};

class ByteReader;

/// Mirror of code_motion; consumes the T and P sections from the reader.
DecodedMotion decode_motion(ByteReader& reader, const KeyNodeSet& nodes,
                            const InfluenceGraph& graph,
                            const CombinationMask& mask,
                            const MotionContext& ctx);

/// Expected R'/S'/H' value count for the node set under `mask`.
size_t p_vector_length(const KeyNodeSet& nodes, const CombinationMask& mask);

}  // namespace bmkn
