#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bmkn/generator.hpp"
#include "bmkn/mesh.hpp"
#include "bmkn/motion_coder.hpp"
#include "bmkn/rdopt.hpp"

namespace bmkn {

inline constexpr char kMagic[4] = {'B', 'M', 'K', 'N'};
inline constexpr uint16_t kVersion = 1;

struct GofConfig {
  int gof_size = 8;
  int key_pframe_index = 1;  // P-frame used for node extraction, 1-based
  double qstep_t = 1e-3;
  double qstep_p = 1e-3;
  SegmentationConfig seg;
  RDConfig rd;
  SolverConfig solver;
  GeneratorConfig generator;
  int q = 4;  // controlling nodes per vertex
  bool seg_corr = true;
  bool translation_predcode = true;
  /// When set, skips RD selection and forces this mask on every GoF.
  std::optional<CombinationMask> force_mask;

  void validate() const;
};

struct FrameLog {
  int frame = 0;
  bool is_iframe = false;
  std::string mask;
  TMode mode = TMode::Spatial;
  size_t t_bytes = 0;      // serialized T section
  size_t p_bytes = 0;      // serialized P section
  size_t block_bytes = 0;  // whole frame block incl. length prefix
  double rmse = 0.0;       // decoded frame vs ground truth
};

struct GofLog {
  int gof = 0;
  int first_frame = 0;
  int frame_count = 0;
  std::string mask;
  int node_count = 0;
  size_t iframe_bytes = 0;
  size_t node_bytes = 0;
  std::vector<RDPoint> rd_points;
  std::vector<FrameLog> frames;
};

struct EncodeResult {
  std::vector<uint8_t> bytes;
  std::vector<GofLog> gofs;
  /// The encoder's internal reconstruction (exactly what decode produces).
  Sequence reconstructed;

  double mean_pframe_rmse() const;
  size_t total_motion_bytes() const;  // sum of t+p section bytes
};

/// Deterministic closed-loop encoder: every prediction uses the decoder's
/// state, so decode(encode(seq)) reproduces `reconstructed` bit-exactly.
EncodeResult encode_sequence(const Sequence& seq, const GofConfig& cfg);

Sequence decode_sequence(const std::vector<uint8_t>& bytes);

// --- node block helpers (exposed for tests) --------------------------------

/// Canonical transmission order: label ordinal, then y descending, then
/// original index.
KeyNodeSet canonicalize_nodes(const KeyNodeSet& nodes);

struct CodedNodes {
  CauchyModel model;
  BitPayload bits;
  std::vector<Vec3> decoded;  // quantized positions, canonical order
};

/// First node coded absolutely, the rest as closed-loop deltas through one
/// fitted model.
CodedNodes encode_node_positions(const std::vector<Vec3>& positions,
                                 double qstep);
std::vector<Vec3> decode_node_positions(const BitPayload& bits,
                                        const CauchyModel& model, size_t count);

}  // namespace bmkn
