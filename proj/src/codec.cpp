#include "bmkn/codec.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "bmkn/bytes.hpp"

namespace bmkn {

void GofConfig::validate() const {
  if (gof_size < 2) throw ConfigError("gof_size must be >= 2");
  if (key_pframe_index < 1 || key_pframe_index >= gof_size) {
    throw ConfigError("key_pframe_index must be in [1, gof_size)");
  }
  if (!(qstep_t > 0) || !(qstep_p > 0)) {
    throw ConfigError("quantization steps must be positive");
  }
  if (q < 1 || q > 255) throw ConfigError("Q out of range");
  if (seg.mode != SegMode::Off && seg.affine_parts.empty()) {
    throw ConfigError("bi-modal mode requires a nonempty affine part set");
  }
  rd.validate();
  solver.validate();
}

double EncodeResult::mean_pframe_rmse() const {
  double sum = 0.0;
  size_t n = 0;
  for (const GofLog& g : gofs) {
    for (const FrameLog& f : g.frames) {
      if (f.is_iframe) continue;
      sum += f.rmse;
      ++n;
    }
  }
  return n == 0 ? 0.0 : sum / double(n);
}

size_t EncodeResult::total_motion_bytes() const {
  size_t sum = 0;
  for (const GofLog& g : gofs) {
    for (const FrameLog& f : g.frames) sum += f.t_bytes + f.p_bytes;
  }
  return sum;
}

// ---------------------------------------------------------------------------

KeyNodeSet canonicalize_nodes(const KeyNodeSet& nodes) {
  nodes.check_aligned();
  std::vector<int> order(nodes.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    const int la = int(nodes.labels[size_t(a)]);
    const int lb = int(nodes.labels[size_t(b)]);
    if (la != lb) return la < lb;
    const double ya = nodes.positions[size_t(a)].y();
    const double yb = nodes.positions[size_t(b)].y();
    if (ya != yb) return ya > yb;
    return a < b;
  });
  KeyNodeSet out;
  for (int i : order) {
    out.positions.push_back(nodes.positions[size_t(i)]);
    out.labels.push_back(nodes.labels[size_t(i)]);
    out.types.push_back(nodes.types[size_t(i)]);
  }
  return out;
}

CodedNodes encode_node_positions(const std::vector<Vec3>& positions,
                                 double qstep) {
  CodedNodes out;
  if (positions.empty()) throw EmptyNodeSet("no node positions to encode");

  std::vector<double> pseudo;
  for (size_t i = 1; i < positions.size(); ++i) {
    const Vec3 d = positions[i] - positions[i - 1];
    pseudo.push_back(d.x());
    pseudo.push_back(d.y());
    pseudo.push_back(d.z());
  }
  if (pseudo.empty()) {
    const Vec3& p = positions.front();
    pseudo = {p.x(), p.y(), p.z()};
  }
  out.model = fit_model(pseudo, qstep);

  const HuffmanTable table(out.model);
  BitWriter bw;
  out.decoded.assign(positions.size(), Vec3::Zero());
  Vec3 prev = Vec3::Zero();
  for (size_t i = 0; i < positions.size(); ++i) {
    Vec3 rec;
    for (int c = 0; c < 3; ++c) {
      const int64_t s = quantize(positions[i][c] - prev[c], out.model.qstep);
      table.encode_symbol(bw, s);
      rec[c] = prev[c] + dequantize(s, out.model.qstep);
    }
    out.decoded[i] = rec;
    prev = rec;
  }
  out.bits = {bw.bytes(), bw.bit_count()};
  return out;
}

std::vector<Vec3> decode_node_positions(const BitPayload& bits,
                                        const CauchyModel& model,
                                        size_t count) {
  const HuffmanTable table(model);
  BitReader br(bits.bytes, bits.nbits);
  std::vector<Vec3> out(count, Vec3::Zero());
  Vec3 prev = Vec3::Zero();
  for (size_t i = 0; i < count; ++i) {
    for (int c = 0; c < 3; ++c) {
      out[i][c] = prev[c] + dequantize(table.decode_symbol(br), model.qstep);
    }
    prev = out[i];
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

uint16_t affine_parts_bits(const SegmentationConfig& seg) {
  uint16_t bits = 0;
  for (BodyPart p : seg.affine_parts) bits |= uint16_t(1u << int(p));
  return bits;
}

std::set<BodyPart> affine_parts_from_bits(uint16_t bits) {
  std::set<BodyPart> parts;
  for (int p = 0; p < kBodyPartCount; ++p) {
    if (bits & (1u << p)) parts.insert(BodyPart(p));
  }
  return parts;
}

// The volatile store blocks GCC from eliding the narrowing cast pair when it
// vectorizes this loop; the rounded values must match the serialized f32s.
double narrow_f32(double d) {
  volatile float f = float(d);
  return double(f);
}

Mesh f32_round(const Mesh& mesh) {
  Mesh out = mesh;
  for (Vec3& v : out.vertices) {
    v = Vec3(narrow_f32(v.x()), narrow_f32(v.y()), narrow_f32(v.z()));
  }
  return out;
}

std::vector<uint8_t> serialize_iframe(const Mesh& mesh) {
  ByteWriter w;
  w.u32(uint32_t(mesh.vertex_count()));
  w.u32(uint32_t(mesh.faces.size()));
  w.u8(mesh.labels ? 1 : 0);
  for (const Vec3& v : mesh.vertices) {
    w.f32(float(v.x()));
    w.f32(float(v.y()));
    w.f32(float(v.z()));
  }
  for (const Face& f : mesh.faces) {
    w.u32(f[0]);
    w.u32(f[1]);
    w.u32(f[2]);
  }
  if (mesh.labels) {
    for (BodyPart p : *mesh.labels) w.u8(uint8_t(p));
  }
  return w.take();
}

Mesh deserialize_iframe(std::span<const uint8_t> payload) {
  ByteReader r(payload);
  const uint32_t nv = r.u32();
  const uint32_t nf = r.u32();
  const bool has_labels = r.u8() != 0;
  Mesh mesh;
  mesh.vertices.reserve(nv);
  for (uint32_t i = 0; i < nv; ++i) {
    const float x = r.f32(), y = r.f32(), z = r.f32();
    mesh.vertices.emplace_back(double(x), double(y), double(z));
  }
  mesh.faces.reserve(nf);
  for (uint32_t i = 0; i < nf; ++i) {
    Face f{r.u32(), r.u32(), r.u32()};
    mesh.faces.push_back(f);
  }
  if (has_labels) {
    std::vector<BodyPart> labels;
    labels.reserve(nv);
    for (uint32_t i = 0; i < nv; ++i) {
      const uint8_t v = r.u8();
      if (v >= kBodyPartCount) throw CorruptBlock("bad label ordinal");
      labels.push_back(BodyPart(v));
    }
    mesh.labels = std::move(labels);
  }
  mesh.validate();
  return mesh;
}

struct NodeBlock {
  KeyNodeSet nodes;  // decoded canonical nodes
  CombinationMask mask;
};

std::vector<uint8_t> serialize_node_block(const KeyNodeSet& decoded,
                                          const CombinationMask& mask,
                                          const CauchyModel& model,
                                          const BitPayload& bits) {
  ByteWriter w;
  if (decoded.size() > 65535) throw ConfigError("too many nodes");
  w.u16(uint16_t(decoded.size()));
  w.u8(mask.code_value());
  w.u8(0);
  for (BodyPart p : decoded.labels) w.u8(uint8_t(p));
  w.model(model);
  w.payload(bits);
  return w.take();
}

NodeBlock deserialize_node_block(std::span<const uint8_t> payload,
                                 const SegmentationConfig& seg) {
  ByteReader r(payload);
  const uint16_t count = r.u16();
  NodeBlock block;
  block.mask = CombinationMask::from_code_value(r.u8());
  r.u8();  // reserved
  block.nodes.labels.reserve(count);
  for (uint16_t i = 0; i < count; ++i) {
    const uint8_t v = r.u8();
    if (v >= kBodyPartCount) throw CorruptBlock("bad node label");
    block.nodes.labels.push_back(BodyPart(v));
  }
  const CauchyModel model = r.model();
  const BitPayload bits = r.payload();
  block.nodes.positions = decode_node_positions(bits, model, count);
  block.nodes.types.reserve(count);
  for (uint16_t i = 0; i < count; ++i) {
    const bool affine = seg.mode != SegMode::Off &&
                        seg.affine_parts.count(block.nodes.labels[i]) > 0;
    block.nodes.types.push_back(affine ? NodeType::Affine : NodeType::Rigid);
  }
  return block;
}

struct GofFrameRange {
  int first = 0;
  int count = 0;  // frames in this GoF including the I-frame
};

std::vector<GofFrameRange> partition_gofs(int frame_count, int gof_size) {
  std::vector<GofFrameRange> gofs;
  for (int f = 0; f < frame_count; f += gof_size) {
    gofs.push_back({f, std::min(gof_size, frame_count - f)});
  }
  return gofs;
}

}  // namespace

EncodeResult encode_sequence(const Sequence& seq, const GofConfig& cfg) {
  cfg.validate();
  if (seq.frames.empty()) throw ConfigError("empty sequence");
  for (size_t f = 0; f < seq.frames.size(); ++f) {
    seq.frames[f].validate();
    if (cfg.seg.mode != SegMode::Off && !seq.frames[f].labels) {
      throw ConfigError("segmentation mode requires labeled frames (frame " +
                        std::to_string(f) + ")");
    }
  }

  EncodeResult result;
  ByteWriter out;
  out.bytes(std::span<const uint8_t>(
      reinterpret_cast<const uint8_t*>(kMagic), 4));
  out.u16(kVersion);
  out.u32(uint32_t(seq.frames.size()));
  out.u32(uint32_t(cfg.gof_size));
  uint16_t flags = 0;
  if (cfg.translation_predcode) flags |= 1;
  if (cfg.seg_corr) flags |= 2;
  flags |= uint16_t(int(cfg.seg.mode) << 2);
  out.u16(flags);
  out.u16(affine_parts_bits(cfg.seg));
  out.u8(uint8_t(cfg.q));
  out.u8(0);

  SolverConfig solver = cfg.solver;
  solver.seg_corr_enabled = cfg.seg_corr;

  const auto gofs = partition_gofs(int(seq.frames.size()), cfg.gof_size);
  for (size_t g = 0; g < gofs.size(); ++g) {
    const GofFrameRange range = gofs[g];
    GofLog glog;
    glog.gof = int(g);
    glog.first_frame = range.first;
    glog.frame_count = range.count;

    ByteWriter gw;

    // I-frame, stored raw at f32 precision; the rounded mesh is the shared
    // closed-loop reference.
    const Mesh& gt_iframe = seq.frames[size_t(range.first)];
    const std::vector<uint8_t> iframe_payload = serialize_iframe(gt_iframe);
    gw.u32(uint32_t(iframe_payload.size()));
    gw.bytes(iframe_payload);
    Mesh decoded_prev = f32_round(gt_iframe);
    result.reconstructed.frames.push_back(decoded_prev);
    glog.iframe_bytes = iframe_payload.size() + 4;
    {
      FrameLog flog;
      flog.frame = range.first;
      flog.is_iframe = true;
      flog.block_bytes = iframe_payload.size() + 4;
      flog.rmse = rmse_distortion(decoded_prev, gt_iframe);
      glog.frames.push_back(flog);
    }

    const int pframes = range.count - 1;
    if (pframes > 0) {
      // Node generation on the key P-frame pair.
      const int key = range.first + std::min(cfg.key_pframe_index, pframes);
      GeneratorConfig gen = cfg.generator;
      gen.q = cfg.q;
      gen.seg = cfg.seg;
      gen.solver = solver;
      KeyNodeSet nodes =
          canonicalize_nodes(generate(decoded_prev, seq.frames[size_t(key)], gen));
      const CodedNodes coded_nodes =
          encode_node_positions(nodes.positions, cfg.qstep_t);
      nodes.positions = coded_nodes.decoded;  // closed loop on node geometry
      glog.node_count = int(nodes.size());

      InfluenceMap infl = build_influence_map(decoded_prev, nodes, cfg.seg, cfg.q);
      InfluenceGraph graph = build_influence_graph(infl, int(nodes.size()));

      // Mask for the GoF: forced, or RD-selected on the key P-frame.
      CombinationMask gof_mask = CombinationMask::rigid();
      if (cfg.force_mask) {
        gof_mask = *cfg.force_mask;
      } else {
        RDContext rdctx;
        rdctx.source = &decoded_prev;
        rdctx.target = &seq.frames[size_t(key)];
        rdctx.nodes = &nodes;
        rdctx.infl = &infl;
        rdctx.graph = &graph;
        rdctx.solver = solver;
        rdctx.seg = cfg.seg;
        rdctx.motion.qstep_t = cfg.qstep_t;
        rdctx.motion.qstep_p = cfg.qstep_p;
        rdctx.motion.mode =
            cfg.translation_predcode ? TMode::Spatial : TMode::Direct;
        MaskSelection sel = select_mask(rdctx, cfg.rd.lambda);
        gof_mask = sel.mask;
        glog.rd_points = std::move(sel.points);
      }
      glog.mask = gof_mask.name();

      const std::vector<uint8_t> node_payload = serialize_node_block(
          nodes, gof_mask, coded_nodes.model, coded_nodes.bits);
      gw.u32(uint32_t(node_payload.size()));
      gw.bytes(node_payload);
      glog.node_bytes = node_payload.size() + 4;

      CauchyModel prev_t_model;
      std::vector<Vec3> prev_decoded_t;
      bool have_prev_t = false;

      for (int k = 1; k <= pframes; ++k) {
        const int frame = range.first + k;
        const Mesh& target = seq.frames[size_t(frame)];
        if (k > 1) {
          infl = build_influence_map(decoded_prev, nodes, cfg.seg, cfg.q);
          graph = build_influence_graph(infl, int(nodes.size()));
        }

        MotionContext mctx;
        mctx.qstep_t = cfg.qstep_t;
        mctx.qstep_p = cfg.qstep_p;
        if (!cfg.translation_predcode) {
          mctx.mode = TMode::Direct;
        } else if (k == 1 || !have_prev_t) {
          mctx.mode = TMode::Spatial;
        } else {
          mctx.mode = TMode::SpatioTemporal;
          mctx.prev_t_model = &prev_t_model;
          mctx.prev_decoded_t = &prev_decoded_t;
        }

        CombinationMask frame_mask = gof_mask;
        if (!cfg.force_mask && cfg.rd.strategy == RDStrategy::PerFrame &&
            k > 1) {
          RDContext rdctx;
          rdctx.source = &decoded_prev;
          rdctx.target = &target;
          rdctx.nodes = &nodes;
          rdctx.infl = &infl;
          rdctx.graph = &graph;
          rdctx.solver = solver;
          rdctx.seg = cfg.seg;
          rdctx.motion = mctx;
          MaskSelection sel = select_mask(rdctx, cfg.rd.lambda);
          frame_mask = sel.mask;
        }

        const FitResult fit =
            fit_transforms(decoded_prev, target, nodes, frame_mask, solver,
                           cfg.seg, infl, graph);
        const CodedMotion coded =
            code_motion(fit.transforms, nodes, graph, frame_mask, mctx);

        ByteWriter fw;
        fw.u8(frame_mask.code_value());
        fw.bytes(coded.t_section);
        fw.bytes(coded.p_section);
        const std::vector<uint8_t> frame_payload = fw.take();
        gw.u32(uint32_t(frame_payload.size()));
        gw.bytes(frame_payload);

        const Mesh decoded_mesh =
            deform_mesh(decoded_prev, nodes, coded.decoded, infl);

        FrameLog flog;
        flog.frame = frame;
        flog.mask = frame_mask.name();
        flog.mode = mctx.mode;
        flog.t_bytes = coded.t_section.size();
        flog.p_bytes = coded.p_section.size();
        flog.block_bytes = frame_payload.size() + 4;
        flog.rmse = rmse_distortion(decoded_mesh, target);
        glog.frames.push_back(flog);

        // Advect nodes with their decoded translations.
        for (size_t j = 0; j < nodes.size(); ++j) {
          nodes.positions[j] += coded.decoded_t[j];
        }
        prev_t_model = coded.t_model;
        prev_decoded_t = coded.decoded_t;
        have_prev_t = true;
        decoded_prev = decoded_mesh;
        result.reconstructed.frames.push_back(decoded_mesh);
      }
    }

    const std::vector<uint8_t> gof_bytes = gw.take();
    out.u32(uint32_t(gof_bytes.size()));
    out.bytes(gof_bytes);
    result.gofs.push_back(std::move(glog));
  }

  result.bytes = out.take();
  result.reconstructed.frame_rate = seq.frame_rate;
  return result;
}

Sequence decode_sequence(const std::vector<uint8_t>& bytes) {
  ByteReader r(bytes);
  {
    const auto magic = r.bytes(4);
    if (std::memcmp(magic.data(), kMagic, 4) != 0) {
      throw BadMagic("not a key-node mesh bitstream");
    }
  }
  const uint16_t version = r.u16();
  if (version != kVersion) {
    throw VersionUnsupported("bitstream version " + std::to_string(version));
  }
  const uint32_t frame_count = r.u32();
  const uint32_t gof_size = r.u32();
  if (gof_size < 2) throw CorruptBlock("bad gof size");
  const uint16_t flags = r.u16();
  SegmentationConfig seg;
  seg.mode = SegMode((flags >> 2) & 3);
  seg.affine_parts = affine_parts_from_bits(r.u16());
  const int q = r.u8();
  r.u8();  // reserved
  if (q < 1) throw CorruptBlock("bad Q");

  Sequence seq;
  const auto gofs = partition_gofs(int(frame_count), int(gof_size));
  for (size_t g = 0; g < gofs.size(); ++g) {
    const GofFrameRange range = gofs[g];
    std::span<const uint8_t> gof_span;
    try {
      const uint32_t gof_len = r.u32();
      gof_span = r.bytes(gof_len);
    } catch (const TruncatedStream&) {
      throw TruncatedStream("truncated bitstream in GoF " + std::to_string(g));
    }
    ByteReader gr(gof_span);

    try {
      const uint32_t ilen = gr.u32();
      Mesh decoded_prev = deserialize_iframe(gr.bytes(ilen));
      seq.frames.push_back(decoded_prev);

      const int pframes = range.count - 1;
      if (pframes <= 0) continue;

      const uint32_t nlen = gr.u32();
      NodeBlock block = deserialize_node_block(gr.bytes(nlen), seg);
      KeyNodeSet nodes = std::move(block.nodes);

      CauchyModel prev_t_model;
      std::vector<Vec3> prev_decoded_t;
      bool have_prev_t = false;

      for (int k = 1; k <= pframes; ++k) {
        const uint32_t flen = gr.u32();
        ByteReader fr(gr.bytes(flen));
        const CombinationMask frame_mask =
            CombinationMask::from_code_value(fr.u8());

        const InfluenceMap infl =
            build_influence_map(decoded_prev, nodes, seg, q);
        const InfluenceGraph graph =
            build_influence_graph(infl, int(nodes.size()));

        MotionContext mctx;
        mctx.prev_t_model = have_prev_t ? &prev_t_model : nullptr;
        mctx.prev_decoded_t = have_prev_t ? &prev_decoded_t : nullptr;

        const DecodedMotion motion =
            decode_motion(fr, nodes, graph, frame_mask, mctx);

        Mesh decoded_mesh =
            deform_mesh(decoded_prev, nodes, motion.transforms, infl);
        seq.frames.push_back(decoded_mesh);

        for (size_t j = 0; j < nodes.size(); ++j) {
          nodes.positions[j] += motion.decoded_t[j];
        }
        prev_t_model = motion.t_model;
        prev_decoded_t = motion.decoded_t;
        have_prev_t = true;
        decoded_prev = std::move(decoded_mesh);
      }
    } catch (const TruncatedStream&) {
      throw TruncatedStream("truncated payload in GoF " + std::to_string(g));
    }
  }
  return seq;
}

}  // namespace bmkn
